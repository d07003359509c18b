// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dsan/tensor.hpp"

#include <cstddef>
#include <string_view>

namespace dsan {

struct Conv2dGeometry {
    std::size_t out_h = 0;
    std::size_t out_w = 0;
};

// Output size uses floor division, so a stride-2 3x3/pad-1 conv maps H to
// ceil(H/2) as in the common framework convention.
Conv2dGeometry conv2d_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                               std::size_t stride, std::size_t padding);

// x: N x Cin x H x W, weight: Cout x Cin x kh x kw, bias: Cout (may be undefined).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

// weight: Cin x Cout x k x k. Padding is (k - stride) / 2 so the spatial size
// scales by exactly `stride`.
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                            std::size_t stride = 2);

// N x C x H x W -> N x C x 1 x 1
template <typename T>
Tensor<T> gap(const Tensor<T>& x);

// 2x2 box average, H and W must be even.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t top, std::size_t left, std::size_t height,
               std::size_t width);

// Zero padding on the spatial borders.
template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
              std::size_t right);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Throws NumericalError naming `where` if any value is NaN or infinite.
template <typename T>
void check_finite(const Tensor<T>& x, std::string_view where);

} // namespace dsan
