// SPDX-License-Identifier: Apache-2.0
//
// Dilated strip attention.
//
// A strip pass replaces every pixel by a weighted sum of K pixels taken
// along its row (horizontal) or column (vertical), spaced `dilation` pixels
// apart and centred on the pixel itself:
//
//     out[n,c,h,w] = sum_k A[n,g(c),k] * x[n,c,h,w + (k - K/2) * dilation]
//
// The K coefficients are shared by every pixel of a (sample, channel group)
// and come from a sigmoid over a 1x1 projection of the globally pooled
// input. Each channel group may use its own strip length. Dilation changes
// which pixels are read, never how many, so cost and parameter count are
// independent of it. Out-of-range taps read zero.
#pragma once

#include "dsan/tensor.hpp"

#include <cstddef>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace dsan {

enum class Direction { horizontal, vertical };

const char* direction_name(Direction d);

struct StripGroup {
    std::size_t channels = 0;
    std::size_t length = 1; // K, odd
};

using StripGroups = std::vector<StripGroup>;

// Sum of K over groups: the width of one sample's weight vector.
std::size_t total_strip_length(const StripGroups& groups);

// Throws ConfigError unless group channels sum to `channels` and every K is odd.
void validate_strip_groups(const StripGroups& groups, std::size_t channels);

// `groups` equal channel groups of identical strip length.
StripGroups uniform_strip_groups(std::size_t channels, std::size_t groups, std::size_t length);

// One equal channel group per entry of `lengths`.
StripGroups multiscale_strip_groups(std::size_t channels, std::span<const std::size_t> lengths);

struct DsamConfig {
    std::vector<std::size_t> strip_lengths{3, 5, 7, 9};
    std::size_t dilation = 3;

    // Resolves the groups for a feature map with `channels` channels.
    StripGroups groups(std::size_t channels) const;
    void validate(std::size_t channels) const;
};

// Learnable 1x1 projection C -> sum(K) of the weight branch.
template <typename T>
struct StripBranch {
    Tensor<T> weight; // sumK x C x 1 x 1
    Tensor<T> bias;   // sumK
};

template <typename T>
struct DsamParams {
    StripBranch<T> horizontal;
    StripBranch<T> vertical;
};

template <typename T>
struct StripWeights {
    Tensor<T> values; // N x sumK, group-major
    Direction direction = Direction::horizontal;
    StripGroups groups;
};

// Parameters of one DSAM on a C-channel map: two branches of C*sumK + sumK.
std::size_t dsam_param_count(std::size_t channels, const DsamConfig& cfg);

template <typename T>
DsamParams<T> make_dsam_params(std::size_t channels, const DsamConfig& cfg);

// sigmoid(W * GAP(x) + b), reshaped to N x sumK.
template <typename T>
StripWeights<T> compute_strip_weights(const Tensor<T>& x, const StripBranch<T>& branch,
                                      const StripGroups& groups, Direction direction);

// General DSA: `weights` holds N * sumK coefficients laid out group-major.
template <typename T>
Tensor<T> dsa(const Tensor<T>& x, const Tensor<T>& weights, const StripGroups& groups,
              std::size_t dilation, Direction direction);

// Uniform-length DSA: `a` is N x G x K over G equal channel groups.
template <typename T>
Tensor<T> dsa(const Tensor<T>& x, const Tensor<T>& a, std::size_t length, std::size_t dilation,
              Direction direction);

// Undilated strip attention over K contiguous pixels, computed by its own
// per-pixel kernel (gradients share the dsa adjoint).
template <typename T>
Tensor<T> sa(const Tensor<T>& x, const Tensor<T>& a, std::size_t length, Direction direction);

// Horizontal pass then vertical pass with injected coefficients.
template <typename T>
Tensor<T> dsam_with_weights(const Tensor<T>& x, const Tensor<T>& horizontal_weights,
                            const Tensor<T>& vertical_weights, const StripGroups& groups,
                            std::size_t dilation);

// Full module: the vertical branch pools the horizontal pass output.
template <typename T>
Tensor<T> dsam(const Tensor<T>& x, const DsamParams<T>& params, const DsamConfig& cfg);

// Direct loop evaluation over (n, c, h, w, k); reference for dsa.
template <typename T>
Tensor<T> dsa_oracle(const Tensor<T>& x, const Tensor<T>& weights, const StripGroups& groups,
                     std::size_t dilation, Direction direction);

template <typename T>
Tensor<T> dsa_oracle(const Tensor<T>& x, const Tensor<T>& a, std::size_t length,
                     std::size_t dilation, Direction direction);

using Offset = std::pair<long, long>; // (dy, dx)

// {(a*d, b*d) : a, b in [-K/2, K/2]}; the K*K taps of a DSAM output pixel.
std::set<Offset> receptive_field_footprint(std::size_t length, std::size_t dilation);

} // namespace dsan
