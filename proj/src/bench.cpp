// SPDX-License-Identifier: Apache-2.0
#include "dsan/bench.hpp"

#include "dsan/error.hpp"
#include "dsan/ops.hpp"
#include "dsan/random.hpp"
#include "dsan/strip_attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace dsan {

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng)
{
    Tensor<double> t(std::move(shape));
    for (auto& v : t.mutable_data())
        v = rng.uniform(-1.0, 1.0);
    return t;
}

// Fastest single call among repeats spanning at least `min_seconds`; the
// minimum filters out interrupts and scheduler noise.
template <typename F>
double seconds_per_call(F&& f, double min_seconds)
{
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    double best = std::numeric_limits<double>::infinity();
    do {
        const auto t0 = clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(clock::now() - t0).count());
    } while (std::chrono::duration<double>(clock::now() - start).count() < min_seconds);
    return best;
}

const BenchRow* find_row(const std::vector<BenchRow>& rows, const char* op, std::size_t k,
                         std::size_t d)
{
    for (const auto& r : rows)
        if (r.op == op && r.length == k && r.dilation == d)
            return &r;
    return nullptr;
}

} // namespace

std::vector<BenchRow> run_bench(const BenchOptions& o)
{
    if (o.channels == 0 || o.height == 0 || o.width == 0 || o.trials == 0)
        throw ConfigError("bench sizes and trial count must be positive");
    NoGradGuard no_grad;
    Rng rng(o.seed);
    const auto x = random_tensor({1, o.channels, o.height, o.width}, rng);
    const double pixels = static_cast<double>(o.height * o.width);
    std::vector<BenchRow> rows;

    for (std::size_t k : o.lengths) {
        const auto a = random_tensor({1, 1, k}, rng);
        auto fast = [&](const Tensor<double>& in, Direction dir, std::size_t d) {
            return dsa(in, a, k, d, dir);
        };
        auto slow = [&](const Tensor<double>& in, Direction dir, std::size_t d) {
            return dsa_oracle(in, a, k, d, dir);
        };
        // Dilations are timed round-robin so drift in machine speed hits all of them alike.
        std::vector<double> best(o.dilations.size(), std::numeric_limits<double>::infinity());
        std::vector<double> best_oracle = best;
        for (std::size_t t = 0; t < o.trials; ++t)
            for (std::size_t i = 0; i < o.dilations.size(); ++i) {
                const std::size_t d = o.dilations[i];
                auto run_fast = [&] {
                    (void)fast(fast(x, Direction::horizontal, d), Direction::vertical, d);
                };
                best[i] = std::min(best[i], seconds_per_call(run_fast, o.min_seconds));
                if (o.include_oracle && t == 0) {
                    auto run_slow = [&] {
                        (void)slow(slow(x, Direction::horizontal, d), Direction::vertical, d);
                    };
                    best_oracle[i] = seconds_per_call(run_slow, o.min_seconds);
                }
            }
        for (std::size_t i = 0; i < o.dilations.size(); ++i) {
            rows.push_back({"dsa", k, o.dilations[i], o.height, o.width, best[i] * 1e9 / pixels});
            if (o.include_oracle)
                rows.push_back({"dsa_oracle", k, o.dilations[i], o.height, o.width,
                                best_oracle[i] * 1e9 / pixels});
        }
        if (o.include_conv) {
            const auto w = random_tensor({o.channels, o.channels, k, k}, rng);
            const auto b = random_tensor({o.channels}, rng);
            auto run_conv = [&] { (void)conv2d(x, w, b, 1, (k - 1) / 2); };
            double best_conv = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < std::min<std::size_t>(o.trials, 2); ++t)
                best_conv = std::min(best_conv, seconds_per_call(run_conv, o.min_seconds));
            rows.push_back({"conv2d", k, 1, o.height, o.width, best_conv * 1e9 / pixels});
        }
    }
    return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows)
{
    const auto old = os.precision(6);
    os << "op,K,d,HxW,ns_per_pixel\n";
    for (const auto& r : rows)
        os << r.op << ',' << r.length << ',' << r.dilation << ',' << r.height << 'x' << r.width
           << ',' << r.ns_per_pixel << '\n';
    os.precision(old);
}

double dilation_spread(const std::vector<BenchRow>& rows, std::size_t length)
{
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rows)
        if (r.op == "dsa" && r.length == length) {
            lo = std::min(lo, r.ns_per_pixel);
            hi = std::max(hi, r.ns_per_pixel);
        }
    if (!(hi > 0.0))
        throw ConfigError("no dsa rows for K = " + std::to_string(length));
    return (hi - lo) / lo;
}

double length_ratio(const std::vector<BenchRow>& rows, std::size_t lo, std::size_t hi,
                    std::size_t dilation)
{
    const auto* a = find_row(rows, "dsa", lo, dilation);
    const auto* b = find_row(rows, "dsa", hi, dilation);
    if (!a || !b)
        throw ConfigError("missing dsa rows for the requested strip lengths");
    return b->ns_per_pixel / a->ns_per_pixel;
}

} // namespace dsan
