// SPDX-License-Identifier: Apache-2.0
//
// Dual-domain L1 objective: per output scale,
//     L = mean|pred - target| + lambda * mean(|Re D| + |Im D|),  D = FFT(pred) - FFT(target)
// summed over the multi-scale outputs.
#pragma once

#include "dsan/tensor.hpp"

#include <vector>

namespace dsan {

inline constexpr double kDefaultFrequencyWeight = 0.1;

template <typename T>
Tensor<T> spatial_l1(const Tensor<T>& pred, const Tensor<T>& target);

// Both operands are zero-padded to the same power-of-two plane; the mean runs
// over the 2*N*C*H'*W' real and imaginary components of the padded spectrum.
template <typename T>
Tensor<T> frequency_l1(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
struct LossReport {
    std::vector<double> spatial;
    std::vector<double> frequency;
    double lambda = kDefaultFrequencyWeight;
    double total = 0.0;
    Tensor<T> value; // differentiable scalar equal to `total`
};

template <typename T>
LossReport<T> total_loss(const std::vector<Tensor<T>>& outputs,
                         const std::vector<Tensor<T>>& targets,
                         double lambda = kDefaultFrequencyWeight);

// Ground truth at full, 1/2, 1/4 ... resolution by repeated 2x2 box averaging.
template <typename T>
std::vector<Tensor<T>> multiscale_targets(const Tensor<T>& ground_truth, std::size_t scales = 3);

} // namespace dsan
