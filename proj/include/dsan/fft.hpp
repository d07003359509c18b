// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dsan/tensor.hpp"

#include <cstddef>
#include <span>

namespace dsan {

bool is_pow2(std::size_t n);
std::size_t next_pow2(std::size_t n);

// In-place radix-2 transform of `planes` consecutive h x w complex planes.
// Both directions are unnormalised; inverse flips the exponent sign only.
template <typename T>
void fft2d_inplace(std::span<T> real, std::span<T> imag, std::size_t planes, std::size_t h,
                   std::size_t w, bool inverse);

// Zero-pads the bottom/right borders up to the next power of two
// (differentiable; a no-op copy when already a power of two).
template <typename T>
Tensor<T> pad_to_pow2(const Tensor<T>& x);

// Unnormalised forward DFT per (n, c) plane. Throws ShapeError for a
// non-power-of-two plane unless `pad` is set.
template <typename T>
ComplexSpectrum<T> fft2d(const Tensor<T>& x, bool pad = false);

// Normalised inverse (1/HW); returns the real part.
template <typename T>
Tensor<T> ifft2d(const ComplexSpectrum<T>& spectrum);

} // namespace dsan
