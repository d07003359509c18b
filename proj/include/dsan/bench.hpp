// SPDX-License-Identifier: Apache-2.0
//
// Wall-clock cost of strip aggregation against its oracle and a dense
// K x K convolution, reported per output pixel.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dsan {

struct BenchOptions {
    std::vector<std::size_t> lengths{3, 5, 7, 9};
    std::vector<std::size_t> dilations{1, 2, 3, 4};
    std::size_t channels = 16;
    std::size_t height = 128;
    std::size_t width = 128;
    // Each timing is the fastest call over `trials` rounds of at least `min_seconds` each.
    std::size_t trials = 5;
    double min_seconds = 0.02;
    bool include_oracle = true;
    bool include_conv = true;
    std::uint64_t seed = 0;
};

struct BenchRow {
    std::string op; // dsa, dsa_oracle or conv2d
    std::size_t length = 0;
    std::size_t dilation = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    double ns_per_pixel = 0.0;
};

// dsa and dsa_oracle time one horizontal plus one vertical pass over a
// 1 x C x H x W input; conv2d is a C -> C K x K convolution (dilation 1).
std::vector<BenchRow> run_bench(const BenchOptions& options);

// "op,K,d,HxW,ns_per_pixel"
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

// (max - min) / min of the dsa cost over dilations at strip length `length`.
double dilation_spread(const std::vector<BenchRow>& rows, std::size_t length);
// dsa cost at `hi` divided by the cost at `lo`, both at dilation `dilation`.
double length_ratio(const std::vector<BenchRow>& rows, std::size_t lo, std::size_t hi,
                    std::size_t dilation);

} // namespace dsan
