// SPDX-License-Identifier: Apache-2.0
#include "dsan/fft.hpp"

#include "dsan/error.hpp"
#include "dsan/ops.hpp"

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace dsan {
namespace {

template <typename T>
struct Twiddles {
    std::vector<T> cos_table;
    std::vector<T> sin_table;

    explicit Twiddles(std::size_t n) : cos_table(n / 2), sin_table(n / 2)
    {
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                                 static_cast<double>(n);
            cos_table[k] = static_cast<T>(std::cos(angle));
            sin_table[k] = static_cast<T>(std::sin(angle));
        }
    }
};

// Strided in-place 1-D transform of length n (power of two).
template <typename T>
void fft1d(T* re, T* im, std::size_t n, std::size_t stride, const Twiddles<T>& tw, bool inverse)
{
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1)
            j ^= bit;
        j |= bit;
        if (i < j) {
            std::swap(re[i * stride], re[j * stride]);
            std::swap(im[i * stride], im[j * stride]);
        }
    }
    const T sign = inverse ? T(1) : T(-1);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const T wr = tw.cos_table[k * step];
                const T wi = sign * tw.sin_table[k * step];
                const std::size_t a = (start + k) * stride;
                const std::size_t b = (start + k + half) * stride;
                const T tr = re[b] * wr - im[b] * wi;
                const T ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
    }
}

} // namespace

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

template <typename T>
void fft2d_inplace(std::span<T> real, std::span<T> imag, std::size_t planes, std::size_t h,
                   std::size_t w, bool inverse)
{
    if (!is_pow2(h) || !is_pow2(w))
        throw ShapeError("fft2d: plane " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not a power of two");
    if (real.size() != planes * h * w || imag.size() != real.size())
        throw ShapeError("fft2d: buffer length does not match planes*h*w");
    const Twiddles<T> tw_w(w);
    const Twiddles<T> tw_h(h);
    for (std::size_t p = 0; p < planes; ++p) {
        T* re = real.data() + p * h * w;
        T* im = imag.data() + p * h * w;
        for (std::size_t r = 0; r < h; ++r)
            fft1d(re + r * w, im + r * w, w, 1, tw_w, inverse);
        for (std::size_t c = 0; c < w; ++c)
            fft1d(re + c, im + c, h, w, tw_h, inverse);
    }
}

template <typename T>
Tensor<T> pad_to_pow2(const Tensor<T>& x)
{
    const auto& s = x.shape();
    if (s.size() != 4)
        throw ShapeError("pad_to_pow2 expects an N x C x H x W tensor");
    return pad(x, 0, next_pow2(s[2]) - s[2], 0, next_pow2(s[3]) - s[3]);
}

template <typename T>
ComplexSpectrum<T> fft2d(const Tensor<T>& x, bool pad_input)
{
    if (x.rank() != 4)
        throw ShapeError("fft2d expects an N x C x H x W tensor");
    Tensor<T> src = x;
    if (pad_input) {
        NoGradGuard guard;
        src = pad_to_pow2(x);
    }
    const auto& s = src.shape();
    ComplexSpectrum<T> out{s, std::vector<T>(src.data().begin(), src.data().end()),
                           std::vector<T>(src.numel(), T(0))};
    fft2d_inplace<T>(out.real, out.imag, s[0] * s[1], s[2], s[3], false);
    return out;
}

template <typename T>
Tensor<T> ifft2d(const ComplexSpectrum<T>& spectrum)
{
    const auto& s = spectrum.shape;
    if (s.size() != 4 || spectrum.real.size() != shape_numel(s) ||
        spectrum.imag.size() != spectrum.real.size())
        throw ShapeError("ifft2d: malformed spectrum");
    auto re = spectrum.real;
    auto im = spectrum.imag;
    fft2d_inplace<T>(re, im, s[0] * s[1], s[2], s[3], true);
    const T inv = T(1) / static_cast<T>(s[2] * s[3]);
    for (auto& v : re)
        v *= inv;
    return Tensor<T>(s, std::move(re));
}

template void fft2d_inplace<float>(std::span<float>, std::span<float>, std::size_t, std::size_t,
                                   std::size_t, bool);
template void fft2d_inplace<double>(std::span<double>, std::span<double>, std::size_t,
                                    std::size_t, std::size_t, bool);
template Tensor<float> pad_to_pow2(const Tensor<float>&);
template Tensor<double> pad_to_pow2(const Tensor<double>&);
template ComplexSpectrum<float> fft2d(const Tensor<float>&, bool);
template ComplexSpectrum<double> fft2d(const Tensor<double>&, bool);
template Tensor<float> ifft2d(const ComplexSpectrum<float>&);
template Tensor<double> ifft2d(const ComplexSpectrum<double>&);

} // namespace dsan
