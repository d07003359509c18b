// SPDX-License-Identifier: Apache-2.0
#include "dsan/error.hpp"
#include "dsan/losses.hpp"
#include "dsan/ops.hpp"
#include "dsan/reference.hpp"
#include "dsan/strip_attention.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dsan;
using dsan::testing::bitwise_equal;
using dsan::testing::finite_difference_error;
using dsan::testing::max_rel_err;
using dsan::testing::random_tensor;

namespace {

using TensorD = Tensor<double>;

constexpr Direction kBoth[] = {Direction::horizontal, Direction::vertical};

TensorD impulse(std::size_t h, std::size_t w, std::size_t h0, std::size_t w0)
{
    TensorD x({1, 1, h, w}, 0.0);
    x.mutable_data()[h0 * w + w0] = 1.0;
    return x;
}

} // namespace

TEST(StripGroups, ValidationRejectsBadPartitions)
{
    EXPECT_THROW(validate_strip_groups({{4, 3}, {3, 5}}, 8), ConfigError);
    EXPECT_THROW(validate_strip_groups({{8, 4}}, 8), ConfigError);
    EXPECT_THROW(validate_strip_groups({}, 8), ConfigError);
    EXPECT_NO_THROW(validate_strip_groups({{5, 3}, {3, 1}}, 8));
    EXPECT_THROW(uniform_strip_groups(10, 4, 3), ConfigError);
    DsamConfig cfg;
    cfg.dilation = 0;
    EXPECT_THROW(cfg.validate(8), ConfigError);
    cfg.dilation = 2;
    cfg.strip_lengths = {3, 4};
    EXPECT_THROW(cfg.validate(8), ConfigError);
}

TEST(StripWeights, ZeroInputGivesSigmoidOfBias)
{
    const std::size_t c = 4;
    const StripGroups groups = uniform_strip_groups(c, 2, 3);
    Rng rng(1);
    StripBranch<double>br{random_tensor({6, c, 1, 1}, rng), random_tensor({6}, rng, -3, 3)};
    auto w = compute_strip_weights(TensorD({2, c, 5, 5}, 0.0), br, groups, Direction::vertical);
    ASSERT_EQ(w.values.shape(), (Shape{2, 6}));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t i = 0; i < 6; ++i)
            EXPECT_DOUBLE_EQ(w.values.data()[n * 6 + i], 1.0 / (1.0 + std::exp(-br.bias.data()[i])));
}

TEST(StripWeights, ZeroParametersGiveOneHalf)
{
    auto params = make_dsam_params<double>(8, DsamConfig{});
    Rng rng(2);
    auto w = compute_strip_weights(random_tensor({1, 8, 6, 6}, rng), params.horizontal,
                                   DsamConfig{}.groups(8), Direction::horizontal);
    for (double v : w.values.data())
        EXPECT_EQ(v, 0.5);
}

TEST(StripWeights, MatchesMatrixVectorOracle)
{
    Rng rng(3);
    const std::size_t c = 8;
    const StripGroups groups = multiscale_strip_groups(c, std::vector<std::size_t>{3, 5, 7, 9});
    StripBranch<double> br{random_tensor({24, c, 1, 1}, rng), random_tensor({24}, rng)};
    auto x = random_tensor({3, c, 7, 5}, rng, -4, 4);
    auto w = compute_strip_weights(x, br, groups, Direction::horizontal);
    const std::vector<double> wv(br.weight.data().begin(), br.weight.data().end());
    const std::vector<double> bv(br.bias.data().begin(), br.bias.data().end());
    EXPECT_LT(max_rel_err(w.values.data(), reference::strip_weights(x, wv, bv, 24)), 1e-12);
    for (double v : w.values.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(StripWeights, RejectsWrongProjectionShape)
{
    StripBranch<double> br{TensorD({5, 4, 1, 1}), TensorD({5})};
    EXPECT_THROW(compute_strip_weights(TensorD({1, 4, 3, 3}), br, uniform_strip_groups(4, 1, 3),
                                       Direction::horizontal),
                 ShapeError);
}

TEST(Dsa, SingleTapScalesEachGroup)
{
    Rng rng(4);
    auto x = random_tensor({2, 4, 5, 6}, rng);
    auto a = random_tensor({2, 2, 1}, rng);
    for (auto dir : kBoth) {
        auto y = dsa(x, a, 1, 3, dir);
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t c = 0; c < 4; ++c)
                for (std::size_t h = 0; h < 5; ++h)
                    for (std::size_t w = 0; w < 6; ++w)
                        EXPECT_EQ(y.at(n, c, h, w), a.data()[n * 2 + c / 2] * x.at(n, c, h, w));
    }
}

TEST(Dsa, CentreOneHotIsIdentity)
{
    Rng rng(5);
    auto x = random_tensor({1, 3, 7, 9}, rng);
    TensorD a({1, 1, 5}, std::vector<double>{0, 0, 1, 0, 0});
    for (auto dir : kBoth)
        EXPECT_TRUE(bitwise_equal(dsa(x, a, 5, 2, dir).data(), x.data()));
}

TEST(Dsa, DeltaResponseReadsOffTaps)
{
    const std::size_t h0 = 5, w0 = 6;
    auto x = impulse(11, 13, h0, w0);
    TensorD a({1, 1, 3}, std::vector<double>{0.2, 0.3, 0.5});
    auto y = dsa(x, a, 3, 2, Direction::horizontal);
    for (std::size_t h = 0; h < 11; ++h)
        for (std::size_t w = 0; w < 13; ++w) {
            double expect = 0.0;
            if (h == h0 && w == w0 - 2)
                expect = 0.5;
            if (h == h0 && w == w0)
                expect = 0.3;
            if (h == h0 && w == w0 + 2)
                expect = 0.2;
            EXPECT_EQ(y.at(0, 0, h, w), expect) << h << "," << w;
        }
}

TEST(Dsa, BordersReadZero)
{
    TensorD x({1, 1, 1, 4}, 1.0);
    TensorD a({1, 1, 3}, 1.0);
    auto y = dsa(x, a, 3, 3, Direction::horizontal);
    // Only the centre tap and one of the +-3 taps can land inside a width-4 row.
    EXPECT_EQ(y.at(0, 0, 0, 0), 2.0);
    EXPECT_EQ(y.at(0, 0, 0, 1), 1.0);
    EXPECT_EQ(y.at(0, 0, 0, 2), 1.0);
    EXPECT_EQ(y.at(0, 0, 0, 3), 2.0);
}

TEST(Dsa, MatchesOracleOnRandomCases)
{
    Rng rng(6);
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::size_t k : {1, 3, 5, 7})
        for (std::size_t d : {1, 2, 3, 4})
            for (auto dir : kBoth)
                for (std::size_t g : {1, 4}) {
                    auto x = random_tensor({2, 8, 6 + rng.below(6), 5 + rng.below(7)}, rng);
                    auto a = random_tensor({2, g, k}, rng, 0, 1);
                    worst = std::max(worst, max_rel_err(dsa(x, a, k, d, dir),
                                                        dsa_oracle(x, a, k, d, dir)));
                    ++cases;
                }
    EXPECT_GE(cases, 50u);
    EXPECT_LT(worst, 1e-12);
}

TEST(Dsa, MixedGroupLengthsMatchOracle)
{
    Rng rng(7);
    const StripGroups groups{{2, 3}, {3, 9}, {1, 1}, {2, 5}};
    auto x = random_tensor({2, 8, 12, 10}, rng);
    auto a = random_tensor({2, total_strip_length(groups)}, rng);
    for (auto dir : kBoth)
        for (std::size_t d : {1, 3})
            EXPECT_LT(max_rel_err(dsa(x, a, groups, d, dir), dsa_oracle(x, a, groups, d, dir)),
                      1e-12);
}

TEST(Dsa, RejectsInvalidArguments)
{
    TensorD x({1, 4, 5, 5});
    EXPECT_THROW(dsa(x, TensorD({1, 1, 4}), 4, 1, Direction::horizontal), ShapeError);
    EXPECT_THROW(dsa(x, TensorD({1, 1, 3}), 3, 0, Direction::horizontal), ShapeError);
    EXPECT_THROW(dsa(x, TensorD({1, 3, 3}), 3, 1, Direction::horizontal), ShapeError);
    EXPECT_THROW(dsa(x, TensorD({1, 9}), StripGroups{{3, 9}}, 1, Direction::vertical), ShapeError);
}

TEST(Dsa, LinearInInputAtFixedWeights)
{
    Rng rng(8);
    auto x = random_tensor({1, 4, 9, 9}, rng);
    auto z = random_tensor({1, 4, 9, 9}, rng);
    auto a = random_tensor({1, 2, 5}, rng);
    for (auto dir : kBoth) {
        auto lhs = dsa(add(scale(x, 1.5), scale(z, -0.25)), a, 5, 2, dir);
        auto rhs = add(scale(dsa(x, a, 5, 2, dir), 1.5), scale(dsa(z, a, 5, 2, dir), -0.25));
        EXPECT_LT(max_rel_err(lhs, rhs), 1e-12);
    }
}

TEST(Dsa, GradientsMatchFiniteDifferences)
{
    Rng rng(9);
    auto x = random_tensor({2, 4, 6, 7}, rng);
    auto a = random_tensor({2, 2, 3}, rng);
    for (auto dir : kBoth) {
        EXPECT_LT(finite_difference_error([&](const TensorD& v) { return dsa(v, a, 3, 2, dir); }, x),
                  1e-4);
        EXPECT_LT(finite_difference_error([&](const TensorD& v) { return dsa(x, v, 3, 2, dir); }, a),
                  1e-4);
    }
}

TEST(Dsa, SinglePrecisionTracksDouble)
{
    Rng rng(41);
    for (std::size_t k : {3u, 9u})
        for (std::size_t d : {1u, 3u})
            for (Direction dir : kBoth) {
                auto x = random_tensor({2, 8, 13, 11}, rng);
                auto a = random_tensor({2, 2, k}, rng, 0.0, 1.0);
                const auto gd = random_tensor({2, 8, 13, 11}, rng);
                auto to_float = [](const TensorD& t) {
                    Tensor<float> f(t.shape());
                    std::copy(t.data().begin(), t.data().end(), f.mutable_data().begin());
                    return f;
                };
                Tensor<float> xf = to_float(x), af = to_float(a);
                for (auto* t : {&x, &a})
                    t->set_requires_grad(true);
                xf.set_requires_grad(true);
                af.set_requires_grad(true);
                const auto yd = dsa(x, a, k, d, dir);
                const auto yf = dsa(xf, af, k, d, dir);
                sum(mul(yd, gd)).backward();
                sum(mul(yf, to_float(gd))).backward();
                auto close = [](std::span<const float> f, std::span<const double> g, double tol) {
                    double scale = 0.0, diff = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        scale = std::max(scale, std::abs(g[i]));
                        diff = std::max(diff, std::abs(static_cast<double>(f[i]) - g[i]));
                    }
                    return diff <= tol * std::max(scale, 1.0);
                };
                EXPECT_TRUE(close(yf.data(), yd.data(), 1e-5));
                EXPECT_TRUE(close(xf.grad(), x.grad(), 1e-5));
                EXPECT_TRUE(close(af.grad(), a.grad(), 1e-5));
            }
}

TEST(Sa, BitwiseEqualsUndilatedDsa)
{
    Rng rng(10);
    for (std::size_t k : {1, 3, 5, 7})
        for (auto dir : kBoth) {
            auto x = random_tensor({2, 4, 8, 8}, rng);
            auto a = random_tensor({2, 4, k}, rng);
            EXPECT_TRUE(bitwise_equal(sa(x, a, k, dir).data(), dsa(x, a, k, 1, dir).data()));
            EXPECT_LT(max_rel_err(sa(x, a, k, dir), dsa_oracle(x, a, k, 1, dir)), 1e-12);
        }
}

TEST(Sa, UniformAverageKeepsConstantRows)
{
    TensorD x({1, 1, 5, 8});
    auto d = x.mutable_data();
    for (std::size_t h = 0; h < 5; ++h)
        for (std::size_t w = 0; w < 8; ++w)
            d[h * 8 + w] = 0.1 * static_cast<double>(h + 1);
    TensorD a({1, 1, 3}, 1.0 / 3.0);
    auto y = sa(x, a, 3, Direction::horizontal);
    for (std::size_t h = 0; h < 5; ++h)
        for (std::size_t w = 1; w < 7; ++w)
            EXPECT_NEAR(y.at(0, 0, h, w), x.at(0, 0, h, w), 1e-15);
}

TEST(DsaOracle, TrivialCases)
{
    Rng rng(11);
    auto a = random_tensor({1, 1, 5}, rng);
    const auto zero = dsa_oracle(TensorD({1, 2, 4, 4}, 0.0), a, 5, 2, Direction::vertical);
    for (double v : zero.data())
        EXPECT_EQ(v, 0.0);
    auto x = random_tensor({1, 2, 4, 4}, rng);
    TensorD a1({1, 1, 1}, 0.75);
    auto y = dsa_oracle(x, a1, 1, 3, Direction::horizontal);
    for (std::size_t i = 0; i < x.numel(); ++i)
        EXPECT_EQ(y.data()[i], 0.75 * x.data()[i]);
}

TEST(Dsam, UndilatedEqualsSamReference)
{
    Rng rng(12);
    DsamConfig cfg;
    cfg.dilation = 1;
    const std::size_t c = 8;
    DsamParams<double> p{{random_tensor({24, c, 1, 1}, rng), random_tensor({24}, rng)},
                         {random_tensor({24, c, 1, 1}, rng), random_tensor({24}, rng)}};
    auto x = random_tensor({2, c, 9, 9}, rng);
    auto y = dsam(x, p, cfg);
    // SAM: horizontal then vertical SA with branch weights, built from parts.
    const auto groups = cfg.groups(c);
    auto wh = compute_strip_weights(x, p.horizontal, groups, Direction::horizontal);
    auto mid = dsa(x, wh.values, groups, 1, Direction::horizontal);
    auto wv = compute_strip_weights(mid, p.vertical, groups, Direction::vertical);
    auto ref = dsa(mid, wv.values, groups, 1, Direction::vertical);
    EXPECT_TRUE(bitwise_equal(y.data(), ref.data()));
}

TEST(Dsam, ImpulseResponseIsDilatedGrid)
{
    const std::size_t h0 = 7, w0 = 8;
    auto x = impulse(15, 17, h0, w0);
    const StripGroups groups{{1, 3}};
    TensorD a({1, 3}, 0.5);
    auto y = dsam_with_weights(x, a, a, groups, 2);
    std::size_t nonzero = 0;
    for (std::size_t h = 0; h < 15; ++h)
        for (std::size_t w = 0; w < 17; ++w) {
            const long dy = static_cast<long>(h) - static_cast<long>(h0);
            const long dx = static_cast<long>(w) - static_cast<long>(w0);
            const bool on_grid = std::abs(dy) <= 2 && std::abs(dx) <= 2 && dy % 2 == 0 && dx % 2 == 0;
            EXPECT_EQ(y.at(0, 0, h, w), on_grid ? 0.25 : 0.0) << h << "," << w;
            nonzero += y.at(0, 0, h, w) != 0.0;
        }
    EXPECT_EQ(nonzero, 9u);
}

TEST(Dsam, ParameterCountIndependentOfDilation)
{
    for (std::size_t c : {4, 16, 64}) {
        DsamConfig cfg;
        std::size_t base = 0;
        for (std::size_t d : {1, 2, 3, 4}) {
            cfg.dilation = d;
            const std::size_t n = dsam_param_count(c, cfg);
            if (d == 1)
                base = n;
            EXPECT_EQ(n, base);
            EXPECT_EQ(n, reference::dsam_param_count(c, 24));
        }
    }
}

TEST(Dsam, GradientsMatchFiniteDifferences)
{
    Rng rng(13);
    DsamConfig cfg;
    cfg.strip_lengths = {3, 5};
    cfg.dilation = 2;
    const std::size_t c = 4;
    DsamParams<double> p{{random_tensor({8, c, 1, 1}, rng), random_tensor({8}, rng)},
                         {random_tensor({8, c, 1, 1}, rng), random_tensor({8}, rng)}};
    auto x = random_tensor({2, c, 6, 7}, rng);
    auto target = random_tensor({2, c, 6, 7}, rng);
    auto through = [&](const TensorD& v) { return dsam(v, p, cfg); };
    EXPECT_LT(finite_difference_error(through, x), 1e-4);
    EXPECT_LT(finite_difference_error([&](const TensorD& w) {
                  return dsam(x, DsamParams<double>{{w, p.horizontal.bias}, p.vertical}, cfg);
              }, p.horizontal.weight),
              1e-4);
    EXPECT_LT(finite_difference_error([&](const TensorD& b) {
                  return dsam(x, DsamParams<double>{p.horizontal, {p.vertical.weight, b}}, cfg);
              }, p.vertical.bias),
              1e-4);

    // DSAM followed by the L1 loss, the composition the network trains through.
    x.set_requires_grad(true);
    x.zero_grad();
    EXPECT_LT(finite_difference_error(
                  [&](const TensorD& v) { return spatial_l1(dsam(v, p, cfg), target); }, x),
              1e-4);
}

TEST(Footprint, SmallCases)
{
    EXPECT_EQ(receptive_field_footprint(1, 5), (std::set<Offset>{{0, 0}}));
    std::set<Offset> moore;
    for (long a = -1; a <= 1; ++a)
        for (long b = -1; b <= 1; ++b)
            moore.emplace(a, b);
    EXPECT_EQ(receptive_field_footprint(3, 1), moore);
    const auto f = receptive_field_footprint(3, 3);
    EXPECT_EQ(f.size(), 9u);
    EXPECT_EQ(f.begin()->first, -3);
    EXPECT_EQ(f.rbegin()->second, 3);
    EXPECT_THROW(receptive_field_footprint(4, 1), ShapeError);
}

TEST(Footprint, MatchesNonzeroGradientSet)
{
    for (auto [k, d] : {std::pair<std::size_t, std::size_t>{3, 1}, {3, 2}, {3, 3}, {5, 2}, {7, 1}}) {
        const std::size_t size = 2 * d * k + 5, h0 = size / 2, w0 = size / 2 + 1;
        Rng rng(14);
        auto x = random_tensor({1, 1, size, size}, rng);
        x.set_requires_grad(true);
        const StripGroups groups{{1, k}};
        auto a = random_tensor({1, k}, rng, 0.1, 1.0);
        auto y = dsam_with_weights(x, a, a, groups, d);
        TensorD sel({1, 1, size, size}, 0.0);
        sel.mutable_data()[h0 * size + w0] = 1.0;
        sum(mul(y, sel)).backward();
        std::set<Offset> hit;
        for (std::size_t i = 0; i < x.numel(); ++i)
            if (x.grad()[i] != 0.0)
                hit.emplace(static_cast<long>(i / size) - static_cast<long>(h0),
                            static_cast<long>(i % size) - static_cast<long>(w0));
        EXPECT_EQ(hit, receptive_field_footprint(k, d)) << "K=" << k << " d=" << d;
    }
}
