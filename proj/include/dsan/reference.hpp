// SPDX-License-Identifier: Apache-2.0
//
// Slow, obviously-correct implementations used as test oracles. None of
// these share code with the production kernels.
#pragma once

#include "dsan/data.hpp"
#include "dsan/model.hpp"
#include "dsan/optimizer.hpp"
#include "dsan/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dsan::reference {

// Direct sum over (n, co, y, x, ci, ky, kx) with zero padding.
Tensor<double> conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                      std::size_t stride, std::size_t padding);

// Inserts stride-1 zeros between input pixels, pads by k-1-p and runs a
// stride-1 conv with the flipped, channel-swapped kernel.
Tensor<double> transposed_conv2d_zero_stuffing(const Tensor<double>& x, const Tensor<double>& w,
                                               const Tensor<double>& b, std::size_t stride);

Tensor<double> gap(const Tensor<double>& x);

// sigmoid(W * channel_means(x) + b) per sample, W: R x C.
std::vector<double> strip_weights(const Tensor<double>& x, const std::vector<double>& w,
                                  const std::vector<double>& b, std::size_t rows);

// O(H^2 W^2) DFT of every plane.
ComplexSpectrum<double> dft2d(const Tensor<double>& x);

double spatial_l1(const Tensor<double>& pred, const Tensor<double>& target);
// Zero-pads both to a power-of-two plane, then averages |dRe| + |dIm| over
// 2 * (padded element count) components.
double frequency_l1(const Tensor<double>& pred, const Tensor<double>& target);

double mse(const std::vector<double>& a, const std::vector<double>& b);
double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak = 1.0);
// Explicit 11x11 window, recomputed from scratch at every valid position.
double ssim(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

double cosine_lr(std::size_t t, std::size_t total, double lr0, double lr_min);

// Adam on f(p) = sum (p_i - target)^2 starting from p0, one scalar at a time.
// Returns the parameter values after every step.
std::vector<std::vector<double>> adam_quadratic_trajectory(std::vector<double> p0, double target,
                                                           std::size_t steps,
                                                           const AdamOptions& options);

// Layer-by-layer parameter count written out by hand.
std::size_t dsam_param_count(std::size_t channels, std::size_t strip_length_sum);
std::size_t dsan_param_count(const ModelConfig& cfg);

struct GradCheck {
    double max_rel_err = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

// Central differences of `loss` (evaluated without recording) with respect
// to the chosen entries of leaf `param`, compared against `analytic`.
// Error is |a - n| / max(|a|, |n|, floor).
void check_gradient(const std::function<double()>& loss, Tensor<double>& param,
                    const std::vector<double>& analytic, const std::vector<std::size_t>& indices,
                    double h, double floor, const std::string& label, GradCheck& result);

} // namespace dsan::reference
