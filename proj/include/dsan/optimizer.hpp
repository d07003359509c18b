// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dsan/tensor.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dsan {

template <typename T>
struct NamedParameter {
    std::string name;
    Tensor<T> tensor;
};

// lr_min + (lr0 - lr_min) * (1 + cos(pi * t / T)) / 2, written so that the
// endpoints are exactly lr0 and lr_min.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0, double lr_min);

struct AdamOptions {
    double lr0 = 1e-4;
    double lr_min = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t total_steps = 2000;
};

template <typename T>
struct AdamState {
    AdamOptions options;
    std::size_t step = 0; // completed updates
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    // Zero moments shaped like `params`.
    static AdamState fresh(std::span<const NamedParameter<T>> params, AdamOptions options);
};

// One bias-corrected Adam update at the learning rate cosine_lr(state.step).
// Nothing is modified if a gradient is missing or non-finite. Returns the
// learning rate used.
template <typename T>
double adam_step(std::span<NamedParameter<T>> params, AdamState<T>& state);

} // namespace dsan
