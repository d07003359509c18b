// SPDX-License-Identifier: Apache-2.0
#include "dsan/checks.hpp"

#include "dsan/data.hpp"
#include "dsan/fft.hpp"
#include "dsan/losses.hpp"
#include "dsan/metrics.hpp"
#include "dsan/model.hpp"
#include "dsan/ops.hpp"
#include "dsan/optimizer.hpp"
#include "dsan/random.hpp"
#include "dsan/reference.hpp"
#include "dsan/strip_attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>

namespace dsan::checks {

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor<double> t(std::move(shape));
    for (auto& v : t.mutable_data())
        v = rng.uniform(lo, hi);
    return t;
}

double max_rel_err(std::span<const double> a, std::span<const double> b)
{
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / std::max(scale, 1e-300);
}

double rel_err(double got, double want)
{
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

struct StripCase {
    Tensor<double> x;
    Tensor<double> a;
    std::size_t length;
    std::size_t dilation;
    Direction direction;
};

std::vector<StripCase> strip_cases()
{
    std::vector<StripCase> cases;
    Rng rng(20240601);
    for (std::size_t k : {1, 3, 5, 7})
        for (std::size_t d = 1; d <= 4; ++d)
            for (auto dir : {Direction::horizontal, Direction::vertical})
                for (std::size_t g : {1, 4}) {
                    const std::size_t n = 1 + rng.below(2);
                    const std::size_t c = g * (1 + rng.below(2));
                    const std::size_t h = 5 + rng.below(14);
                    const std::size_t w = 5 + rng.below(14);
                    cases.push_back({random_tensor({n, c, h, w}, rng),
                                     random_tensor({n, g, k}, rng, 0.0, 1.0), k, d, dir});
                }
    return cases;
}

} // namespace

Result dsa_matches_oracle()
{
    double worst = 0.0;
    const auto cases = strip_cases();
    for (const auto& c : cases) {
        const auto fast = dsa(c.x, c.a, c.length, c.dilation, c.direction);
        const auto slow = dsa_oracle(c.x, c.a, c.length, c.dilation, c.direction);
        worst = std::max(worst, max_rel_err(fast.data(), slow.data()));
    }
    return {"dsa_matches_oracle", worst < 1e-12,
            fmt("%.0f cases, max rel err %.3g (limit 1e-12)", static_cast<double>(cases.size()),
                worst)};
}

Result dilation_one_is_plain_strip_attention()
{
    std::size_t mismatches = 0;
    const auto cases = strip_cases();
    for (const auto& c : cases) {
        const auto dilated = dsa(c.x, c.a, c.length, 1, c.direction);
        const auto plain = sa(c.x, c.a, c.length, c.direction);
        const auto a = dilated.data(), b = plain.data();
        if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)))
            ++mismatches;
    }
    return {"dilation_one_is_plain_strip_attention", mismatches == 0,
            fmt("%.0f of %.0f cases differ bitwise", static_cast<double>(mismatches),
                static_cast<double>(cases.size()))};
}

Result parameter_count_invariance()
{
    bool ok = true;
    std::string detail;
    for (std::size_t channels : {16, 32, 64}) {
        std::set<std::size_t> counts;
        for (std::size_t d = 1; d <= 4; ++d) {
            DsamConfig cfg;
            cfg.dilation = d;
            const std::size_t n = dsam_param_count(channels, cfg);
            const auto p = make_dsam_params<double>(channels, cfg);
            const std::size_t actual = p.horizontal.weight.numel() + p.horizontal.bias.numel() +
                                       p.vertical.weight.numel() + p.vertical.bias.numel();
            const std::size_t want = reference::dsam_param_count(channels, 3 + 5 + 7 + 9);
            ok = ok && n == want && actual == want;
            counts.insert(n);
        }
        ok = ok && counts.size() == 1;
        detail += "DSAM(C=" + std::to_string(channels) + ")=" + std::to_string(*counts.begin()) + " ";
    }
    std::set<std::size_t> model_counts;
    ModelConfig cfg;
    for (std::size_t d = 1; d <= 4; ++d) {
        cfg.dsam.dilation = d;
        const std::size_t n = DsanModel<float>(cfg).param_count();
        ok = ok && n == reference::dsan_param_count(cfg);
        model_counts.insert(n);
    }
    ok = ok && model_counts.size() == 1;
    cfg.use_dsam = false;
    const std::size_t without = DsanModel<float>(cfg).param_count();
    ok = ok && without < *model_counts.begin();
    detail += "DSAN=" + std::to_string(*model_counts.begin()) + " for d=1..4 (" +
              std::to_string(without) + " without DSAM)";
    return {"parameter_count_invariance", ok, detail};
}

Result dsam_footprint()
{
    bool ok = true;
    std::string detail;
    for (auto [k, d] : {std::pair<std::size_t, std::size_t>{3, 1}, {3, 2}, {3, 3}, {5, 2}}) {
        const std::size_t size = 2 * d * k + 7, h0 = size / 2, w0 = size / 2;
        Rng rng(k * 10 + d);
        auto x = random_tensor({1, 1, size, size}, rng);
        x.set_requires_grad(true);
        const StripGroups groups{{1, k}};
        const Tensor<double> a({1, k}, 0.5);
        const auto y = dsam_with_weights(x, a, a, groups, d);
        Tensor<double> sel({1, 1, size, size}, 0.0);
        sel.mutable_data()[h0 * size + w0] = 1.0;
        sum(mul(y, sel)).backward();
        std::set<Offset> hit;
        for (std::size_t i = 0; i < x.numel(); ++i)
            if (x.grad()[i] != 0.0)
                hit.emplace(static_cast<long>(i / size) - static_cast<long>(h0),
                            static_cast<long>(i % size) - static_cast<long>(w0));
        const bool same = hit == receptive_field_footprint(k, d);
        ok = ok && same;
        detail += "(K=" + std::to_string(k) + ",d=" + std::to_string(d) + "):" +
                  std::to_string(hit.size()) + (same ? " ok " : " MISMATCH ");
    }
    return {"dsam_footprint", ok, detail};
}

Result model_gradient()
{
    ModelConfig cfg;
    cfg.base_channels = 4;
    cfg.blocks_per_scale = 1;
    cfg.seed = 5;
    DsanModel<double> model(cfg);
    Rng rng(77);
    const auto x = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    const auto targets = multiscale_targets(random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0));
    auto params = model.parameters();
    for (auto& p : params)
        p.tensor.zero_grad();
    total_loss(model.forward(x), targets).value.backward();

    auto loss = [&] { return total_loss(model.forward(x), targets).total; };
    // Entries below the floor are compared on an absolute scale.
    constexpr double h = 1e-5, floor = 1e-6;
    reference::GradCheck result;
    for (auto& p : params) {
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        std::vector<std::size_t> idx;
        const std::size_t n = p.tensor.numel();
        if (n <= 24) {
            for (std::size_t i = 0; i < n; ++i)
                idx.push_back(i);
        } else {
            Rng pick(n);
            for (int i = 0; i < 24; ++i)
                idx.push_back(static_cast<std::size_t>(pick.below(n)));
        }
        reference::check_gradient(loss, p.tensor, analytic, idx, h, floor, p.name, result);
    }
    return {"model_gradient", result.max_rel_err < 1e-4,
            fmt("%.0f entries over %.0f tensors, max rel err %.3g (limit 1e-4)",
                static_cast<double>(result.checked), static_cast<double>(params.size()),
                result.max_rel_err) +
                (result.worst.empty() ? "" : ", worst " + result.worst)};
}

Result fft_and_losses()
{
    Rng rng(31);
    double parseval = 0.0;
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {16, 4}, {32, 32}}) {
        const auto x = random_tensor({2, 3, h, w}, rng);
        const auto s = fft2d(x);
        double energy = 0.0, spectral = 0.0;
        for (double v : x.data())
            energy += v * v;
        for (std::size_t i = 0; i < s.real.size(); ++i)
            spectral += s.real[i] * s.real[i] + s.imag[i] * s.imag[i];
        parseval = std::max(parseval, rel_err(spectral / static_cast<double>(h * w), energy));
    }
    double dft = 0.0, loss_err = 0.0;
    for (int i = 0; i < 5; ++i) {
        const auto p = random_tensor({2, 3, 8, 8}, rng);
        const auto t = random_tensor({2, 3, 8, 8}, rng);
        const auto fast = fft2d(p);
        const auto slow = reference::dft2d(p);
        dft = std::max({dft, max_rel_err(fast.real, slow.real), max_rel_err(fast.imag, slow.imag)});
        loss_err = std::max(loss_err,
                            rel_err(frequency_l1(p, t).item(), reference::frequency_l1(p, t)));
    }
    const auto img = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    const auto targets = multiscale_targets(img);
    const double zero = total_loss(targets, targets).total;
    const bool ok = parseval < 1e-10 && dft < 1e-10 && loss_err < 1e-10 && zero == 0.0;
    return {"fft_and_losses", ok,
            fmt("Parseval %.3g, FFT vs DFT %.3g, frequency_l1 vs oracle %.3g, identical-pair "
                "loss %.3g",
                parseval, dft, loss_err, zero)};
}

Result optimizer_and_schedule()
{
    const AdamOptions o;
    const double first = cosine_lr(0, o.total_steps, o.lr0, o.lr_min);
    const double last = cosine_lr(o.total_steps, o.total_steps, o.lr0, o.lr_min);
    const std::vector<double> p0{0.3, -1.2, 2.5, 0.0, 1e-3};
    const double target = 0.7;
    AdamOptions opts;
    opts.total_steps = 10;
    const auto want = reference::adam_quadratic_trajectory(p0, target, 10, opts);
    Tensor<double> p({p0.size()}, p0);
    p.set_requires_grad(true);
    std::vector<NamedParameter<double>> params{{"p", p}};
    auto state = AdamState<double>::fresh(params, opts);
    const Tensor<double> tgt({p0.size()}, target);
    double worst = 0.0;
    for (std::size_t step = 0; step < 10; ++step) {
        p.zero_grad();
        const auto diff = sub(p, tgt);
        sum(mul(diff, diff)).backward();
        adam_step(std::span<NamedParameter<double>>(params), state);
        worst = std::max(worst, max_rel_err(p.data(), want[step]));
    }
    const bool ok = first == 1e-4 && last == 1e-6 && worst < 1e-10;
    return {"optimizer_and_schedule", ok,
            fmt("lr(0)=%.17g lr(T)=%.17g, trajectory rel err %.3g", first, last, worst)};
}

Result metrics()
{
    Rng rng(41);
    ImageBuffer a(24, 20);
    for (auto& v : a.values)
        v = rng.uniform(0.0, 0.9);
    ImageBuffer shifted = a;
    for (auto& v : shifted.values)
        v += 0.1;
    const double twenty = psnr(a, shifted);
    const double self = ssim(a, a);
    double p_err = 0.0, s_err = 0.0;
    for (int i = 0; i < 5; ++i) {
        ImageBuffer b = a;
        for (auto& v : b.values)
            v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
        p_err = std::max(p_err, rel_err(psnr(a, b), reference::psnr(a.values, b.values)));
        s_err = std::max(s_err, rel_err(ssim(a, b), reference::ssim(a, b)));
    }
    const bool ok = std::abs(twenty - 20.0) < 1e-12 && self == 1.0 && p_err < 1e-10 && s_err < 1e-10;
    return {"metrics", ok,
            fmt("psnr(a, a+0.1)=%.15g dB, ssim(a,a)=%.17g, psnr oracle %.3g, ssim oracle %.3g",
                twenty, self, p_err, s_err)};
}

Result tensor_ops()
{
    Rng rng(51);
    double conv = 0.0, tconv = 0.0;
    for (auto [k, stride, pad] : {std::tuple<std::size_t, std::size_t, std::size_t>{3, 1, 1},
                                  {3, 2, 1}, {1, 1, 0}, {5, 1, 2}}) {
        const auto x = random_tensor({2, 3, 11, 9}, rng);
        const auto w = random_tensor({4, 3, k, k}, rng);
        const auto b = random_tensor({4}, rng);
        conv = std::max(conv, max_rel_err(conv2d(x, w, b, stride, pad).data(),
                                          reference::conv2d(x, w, b, stride, pad).data()));
    }
    {
        const auto x = random_tensor({2, 4, 5, 6}, rng);
        const auto w = random_tensor({4, 3, 2, 2}, rng);
        const auto b = random_tensor({3}, rng);
        tconv = max_rel_err(transposed_conv2d(x, w, b, 2).data(),
                            reference::transposed_conv2d_zero_stuffing(x, w, b, 2).data());
    }
    // Gradient of a small conv -> relu -> gap chain through the tape.
    auto x = random_tensor({1, 2, 6, 6}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    w.set_requires_grad(true);
    const auto b = random_tensor({3}, rng);
    auto f = [&] { return sum(gap(relu(conv2d(x, w, b, 1, 1)))); };
    f().backward();
    const std::vector<double> analytic(w.grad().begin(), w.grad().end());
    std::vector<std::size_t> idx(w.numel());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    reference::GradCheck g;
    reference::check_gradient([&] { return f().item(); }, w, analytic, idx, 1e-6, 1e-6, "w", g);
    const bool ok = conv < 1e-12 && tconv < 1e-12 && g.max_rel_err < 1e-6;
    return {"tensor_ops", ok,
            fmt("conv2d vs direct %.3g, transposed vs zero stuffing %.3g, conv gradient %.3g",
                conv, tconv, g.max_rel_err)};
}

Result data_pipeline()
{
    const auto clean = generate_clean_scene(32, 32, 3);
    const auto back = decode_ppm(encode_ppm(clean, 16));
    double quant = 0.0;
    for (std::size_t i = 0; i < clean.values.size(); ++i)
        quant = std::max(quant, std::abs(back.values[i] - clean.values[i]));
    const bool identity_haze = synth_haze(clean, 1.0, {0.8, 0.8, 0.8}).values == clean.values;
    const bool identity_blur = synth_blur(clean, 1, 0.0).values == clean.values;
    const bool identity_snow = synth_snow(clean, 0.0, 2.0, 1).values == clean.values;
    const bool flip = hflip(hflip(clean)).values == clean.values;
    const bool ok = quant <= 0.5 / 65535.0 + 1e-15 && identity_haze && identity_blur &&
                    identity_snow && flip;
    auto flag = [](bool b) { return std::string(b ? "ok" : "FAIL"); };
    return {"data_pipeline", ok,
            fmt("16-bit round trip error %.3g", quant) + ", haze t=1 " + flag(identity_haze) +
                ", blur length 1 " + flag(identity_blur) + ", snow density 0 " +
                flag(identity_snow) + ", flip twice " + flag(flip)};
}

Result dilation_is_free(const BenchOptions& options)
{
    const auto rows = run_bench(options);
    bool ok = true;
    std::string detail;
    for (std::size_t k : options.lengths) {
        const double spread = dilation_spread(rows, k);
        ok = ok && spread < 0.25;
        detail += fmt("K=%.0f spread %.1f%% ", static_cast<double>(k), 100.0 * spread);
    }
    return {"dilation_is_free", ok, detail + "(limit 25%)"};
}

std::vector<Suite> selftest_suites()
{
    return {
        {"tensor_core", {tensor_ops}},
        {"strip_attention",
         {dsa_matches_oracle, dilation_one_is_plain_strip_attention, dsam_footprint}},
        {"dsan_model", {parameter_count_invariance, model_gradient}},
        {"losses", {fft_and_losses}},
        {"optimizer", {optimizer_and_schedule}},
        {"data_pipeline", {data_pipeline}},
        {"metrics", {metrics}},
    };
}

} // namespace dsan::checks
