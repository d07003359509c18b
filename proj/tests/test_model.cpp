// SPDX-License-Identifier: Apache-2.0
#include "dsan/checkpoint.hpp"
#include "dsan/error.hpp"
#include "dsan/losses.hpp"
#include "dsan/model.hpp"
#include "dsan/reference.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace dsan;
using dsan::testing::bitwise_equal;
using dsan::testing::random_tensor;

namespace fs = std::filesystem;

namespace {

using TensorD = Tensor<double>;

ModelConfig small_config(std::size_t c0 = 8, std::size_t n = 2, std::size_t d = 3)
{
    ModelConfig cfg;
    cfg.base_channels = c0;
    cfg.blocks_per_scale = n;
    cfg.dsam.dilation = d;
    cfg.seed = 42;
    return cfg;
}

fs::path temp_path(const std::string& name)
{
    return fs::temp_directory_path() / ("dsan_test_" + std::to_string(::getpid()) + "_" + name);
}

bool same_parameters(const DsanModel<double>& a, const DsanModel<double>& b)
{
    const auto pa = a.parameters(), pb = b.parameters();
    if (pa.size() != pb.size())
        return false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i].name != pb[i].name || !bitwise_equal(pa[i].tensor.data(), pb[i].tensor.data()))
            return false;
    return true;
}

} // namespace

TEST(ModelConfig, Validation)
{
    auto cfg = small_config();
    cfg.blocks_per_scale = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config(6); // 6 channels do not split into 4 groups
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.use_dsam = false;
    EXPECT_NO_THROW(cfg.validate());
    cfg = small_config();
    cfg.dsam.strip_lengths = {3, 5, 7, 8};
    EXPECT_THROW(DsanModel<double>{cfg}, ConfigError);
}

TEST(ModelConfig, MapRoundTrip)
{
    auto cfg = small_config(4, 3, 2);
    cfg.dsam.strip_lengths = {1, 3};
    cfg.seed = 123456789012345ULL;
    const auto back = ModelConfig::from_map(cfg.to_map());
    EXPECT_EQ(back.to_map(), cfg.to_map());
}

TEST(Model, OutputShapes)
{
    DsanModel<float> m(small_config());
    Tensor<float> x({1, 3, 64, 64}, 0.5f);
    const auto out = m.forward(x);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].shape(), (Shape{1, 3, 64, 64}));
    EXPECT_EQ(out[1].shape(), (Shape{1, 3, 32, 32}));
    EXPECT_EQ(out[2].shape(), (Shape{1, 3, 16, 16}));
}

TEST(Model, StagesHalveThenMirror)
{
    DsanModel<double> m(small_config(4, 1));
    std::vector<Shape> trace;
    m.forward(TensorD({2, 3, 16, 24}, 0.1), &trace);
    const std::vector<Shape> expect{{2, 4, 16, 24}, {2, 8, 8, 12}, {2, 16, 4, 6},
                                    {2, 16, 4, 6},  {2, 8, 8, 12}, {2, 4, 16, 24}};
    EXPECT_EQ(trace, expect);
}

TEST(Model, RejectsIndivisibleInput)
{
    DsanModel<double> m(small_config(4, 1));
    EXPECT_THROW(m.forward(TensorD({1, 3, 18, 16})), ShapeError);
    EXPECT_THROW(m.forward(TensorD({1, 1, 16, 16})), ShapeError);
}

TEST(Model, ZeroedHeadsReturnDownsampledInput)
{
    DsanModel<double> m(small_config(4, 1));
    for (auto& p : m.parameters())
        if (p.name.find(".head.") != std::string::npos)
            for (auto& v : p.tensor.mutable_data())
                v = 0.0;
    Rng rng(1);
    auto x = random_tensor({2, 3, 16, 16}, rng, 0, 1);
    const auto out = m.forward(x);
    const auto pyramid = multiscale_targets(x);
    for (std::size_t s = 0; s < 3; ++s)
        EXPECT_TRUE(bitwise_equal(out[s].data(), pyramid[s].data())) << "scale " << s;
}

TEST(Model, SeededBuildsAndForwardsAreBitwiseIdentical)
{
    DsanModel<double> a(small_config()), b(small_config());
    EXPECT_TRUE(same_parameters(a, b));
    auto other = small_config();
    other.seed = 43;
    EXPECT_FALSE(same_parameters(a, DsanModel<double>(other)));
    Rng rng(2);
    auto x = random_tensor({1, 3, 16, 16}, rng, 0, 1);
    EXPECT_TRUE(bitwise_equal(a.forward(x)[0].data(), b.forward(x)[0].data()));
}

TEST(Model, ParameterCountMatchesAnalyticCounter)
{
    for (std::size_t c0 : {4, 8, 16})
        for (std::size_t n : {1, 2, 4})
            for (bool use_dsam : {true, false}) {
                auto cfg = small_config(c0, n);
                cfg.use_dsam = use_dsam;
                EXPECT_EQ(DsanModel<float>(cfg).param_count(), reference::dsan_param_count(cfg))
                    << "C0=" << c0 << " N=" << n << " dsam=" << use_dsam;
            }
}

TEST(Model, ParameterCountIndependentOfDilation)
{
    const std::size_t base = DsanModel<float>(small_config(8, 2, 1)).param_count();
    for (std::size_t d : {2, 3, 4})
        EXPECT_EQ(DsanModel<float>(small_config(8, 2, d)).param_count(), base);
    auto plain = small_config(8, 2);
    plain.use_dsam = false;
    EXPECT_LT(DsanModel<float>(plain).param_count(), base);
}

TEST(Model, OnlyLastBlockOfEachScaleCarriesDsam)
{
    DsanModel<float> m(small_config(8, 3));
    for (std::size_t s = 0; s < kScales; ++s)
        EXPECT_EQ(m.dsam_blocks(s), 1u);
    for (const auto& p : m.parameters())
        if (p.name.find(".dsam.") != std::string::npos)
            EXPECT_NE(p.name.find(".block2."), std::string::npos) << p.name;
}

TEST(Model, EveryParameterReceivesGradient)
{
    DsanModel<double> m(small_config(4, 2));
    Rng rng(3);
    auto x = random_tensor({2, 3, 16, 16}, rng, 0, 1);
    auto gt = random_tensor({2, 3, 16, 16}, rng, 0, 1);
    total_loss(m.forward(x), multiscale_targets(gt)).value.backward();
    for (const auto& p : m.parameters()) {
        ASSERT_TRUE(p.tensor.has_grad()) << p.name;
        bool nonzero = false;
        for (double g : p.tensor.grad())
            nonzero = nonzero || g != 0.0;
        EXPECT_TRUE(nonzero) << p.name;
    }
}

TEST(Model, NonFiniteActivationFailsFast)
{
    DsanModel<double> m(small_config(4, 1));
    m.parameters()[0].tensor.mutable_data()[0] = std::numeric_limits<double>::infinity();
    Rng rng(4);
    EXPECT_THROW(m.forward(random_tensor({1, 3, 16, 16}, rng, 0, 1)), NumericalError);
}

TEST(Checkpoint, RoundTripIsBitwise)
{
    const auto path = temp_path("roundtrip.ckpt");
    DsanModel<double> m(small_config(4, 1, 2));
    save_model(path, m);
    const auto back = load_model<double>(path);
    EXPECT_TRUE(same_parameters(m, back));
    EXPECT_EQ(back.config().to_map(), m.config().to_map());
    fs::remove(path);
}

TEST(Checkpoint, OptimizerStateRoundTrip)
{
    const auto path = temp_path("adam.ckpt");
    DsanModel<float> m(small_config(4, 1));
    auto params = m.parameters();
    AdamOptions o;
    o.total_steps = 77;
    auto state = AdamState<float>::fresh(params, o);
    state.step = 5;
    state.m[3][1] = 0.25f;
    state.v[7][0] = 1e-9f;
    save_checkpoint(path, m, &state);
    const auto loaded = load_checkpoint<float>(path);
    ASSERT_TRUE(loaded.adam.has_value());
    EXPECT_EQ(loaded.adam->step, 5u);
    EXPECT_EQ(loaded.adam->options.total_steps, 77u);
    EXPECT_EQ(loaded.adam->m, state.m);
    EXPECT_EQ(loaded.adam->v, state.v);
    EXPECT_FALSE(load_checkpoint<float>(([&] {
                     save_model(path, m);
                     return path;
                 })())
                     .adam.has_value());
    fs::remove(path);
}

TEST(Checkpoint, CorruptionIsDetected)
{
    const auto path = temp_path("corrupt.ckpt");
    DsanModel<double> m(small_config(4, 1));
    save_model(path, m);
    std::vector<char> bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::vector<char>& b) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    write(flipped);
    EXPECT_THROW(load_model<double>(path), IoError);

    write(std::vector<char>(bytes.begin(), bytes.begin() + bytes.size() / 3));
    EXPECT_THROW(load_model<double>(path), IoError);

    auto version = bytes;
    version[4] = 9;
    write(version);
    try {
        load_model<double>(path);
        FAIL() << "version mismatch was accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }

    auto magic = bytes;
    magic[0] = 'X';
    write(magic);
    EXPECT_THROW(load_model<double>(path), IoError);
    EXPECT_THROW(load_model<double>(temp_path("missing.ckpt")), IoError);
    fs::remove(path);
}

TEST(Checkpoint, PrecisionConversionOnLoad)
{
    const auto path = temp_path("convert.ckpt");
    DsanModel<float> m(small_config(4, 1));
    save_model(path, m);
    const auto d = load_model<double>(path);
    const auto pf = m.parameters();
    const auto pd = d.parameters();
    for (std::size_t i = 0; i < pf.size(); ++i)
        for (std::size_t j = 0; j < pf[i].tensor.numel(); ++j)
            ASSERT_EQ(static_cast<double>(pf[i].tensor.data()[j]), pd[i].tensor.data()[j]);
    fs::remove(path);
}
