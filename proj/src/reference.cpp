// SPDX-License-Identifier: Apache-2.0
#include "dsan/reference.hpp"

#include "dsan/error.hpp"
#include "dsan/fft.hpp"

#include <cmath>
#include <cstdio>
#include <complex>
#include <numbers>

namespace dsan::reference {

Tensor<double> conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                      std::size_t stride, std::size_t padding)
{
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    if (w.dim(1) != C)
        throw ShapeError("reference conv2d: channel mismatch");
    const long OH = (static_cast<long>(H + 2 * padding) - static_cast<long>(KH)) / stride + 1;
    const long OW = (static_cast<long>(W + 2 * padding) - static_cast<long>(KW)) / stride + 1;
    Tensor<double> out({N, O, static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)});
    auto od = out.mutable_data();
    std::size_t idx = 0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (long y = 0; y < OH; ++y)
                for (long xo = 0; xo < OW; ++xo) {
                    double acc = b.defined() ? b.data()[o] : 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t i = 0; i < KH; ++i)
                            for (std::size_t j = 0; j < KW; ++j) {
                                const long iy = y * static_cast<long>(stride) + static_cast<long>(i) -
                                                static_cast<long>(padding);
                                const long ix = xo * static_cast<long>(stride) +
                                                static_cast<long>(j) - static_cast<long>(padding);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) ||
                                    ix >= static_cast<long>(W))
                                    continue;
                                acc += x.at(n, c, iy, ix) * w.at(o, c, i, j);
                            }
                    od[idx++] = acc;
                }
    return out;
}

Tensor<double> transposed_conv2d_zero_stuffing(const Tensor<double>& x, const Tensor<double>& w,
                                               const Tensor<double>& b, std::size_t stride)
{
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto O = w.dim(1), K = w.dim(2);
    const std::size_t p = (K - stride) / 2;
    const std::size_t border = K - 1 - p;
    const std::size_t SH = (H - 1) * stride + 1 + 2 * border;
    const std::size_t SW = (W - 1) * stride + 1 + 2 * border;
    Tensor<double> stuffed({N, C, SH, SW});
    auto sd = stuffed.mutable_data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xx = 0; xx < W; ++xx)
                    sd[((n * C + c) * SH + border + y * stride) * SW + border + xx * stride] =
                        x.at(n, c, y, xx);
    Tensor<double> flipped({O, C, K, K});
    auto fd = flipped.mutable_data();
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j)
                    fd[((o * C + c) * K + i) * K + j] = w.at(c, o, K - 1 - i, K - 1 - j);
    return conv2d(stuffed, flipped, b, 1, 0);
}

Tensor<double> gap(const Tensor<double>& x)
{
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<double> out({N, C, 1, 1});
    auto od = out.mutable_data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xx = 0; xx < W; ++xx)
                    s += x.at(n, c, y, xx);
            od[n * C + c] = s / static_cast<double>(H * W);
        }
    return out;
}

std::vector<double> strip_weights(const Tensor<double>& x, const std::vector<double>& w,
                                  const std::vector<double>& b, std::size_t rows)
{
    const auto N = x.dim(0), C = x.dim(1);
    const auto means = gap(x);
    std::vector<double> out(N * rows);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t r = 0; r < rows; ++r) {
            double z = b[r];
            for (std::size_t c = 0; c < C; ++c)
                z += w[r * C + c] * means.data()[n * C + c];
            out[n * rows + r] = 1.0 / (1.0 + std::exp(-z));
        }
    return out;
}

ComplexSpectrum<double> dft2d(const Tensor<double>& x)
{
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    ComplexSpectrum<double> s{x.shape(), std::vector<double>(x.numel()),
                              std::vector<double>(x.numel())};
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t p = 0; p < N * C; ++p)
        for (std::size_t u = 0; u < H; ++u)
            for (std::size_t v = 0; v < W; ++v) {
                std::complex<double> acc = 0.0;
                for (std::size_t h = 0; h < H; ++h)
                    for (std::size_t w = 0; w < W; ++w) {
                        const double angle = -two_pi * (static_cast<double>(u * h) / H +
                                                        static_cast<double>(v * w) / W);
                        acc += x.data()[p * H * W + h * W + w] * std::polar(1.0, angle);
                    }
                s.real[p * H * W + u * W + v] = acc.real();
                s.imag[p * H * W + u * W + v] = acc.imag();
            }
    return s;
}

double spatial_l1(const Tensor<double>& pred, const Tensor<double>& target)
{
    double s = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i)
        s += std::abs(pred.data()[i] - target.data()[i]);
    return s / static_cast<double>(pred.numel());
}

namespace {

Tensor<double> zero_pad_pow2(const Tensor<double>& x)
{
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    std::size_t PH = 1, PW = 1;
    while (PH < H)
        PH *= 2;
    while (PW < W)
        PW *= 2;
    Tensor<double> out({N, C, PH, PW});
    auto od = out.mutable_data();
    for (std::size_t p = 0; p < N * C; ++p)
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w)
                od[(p * PH + h) * PW + w] = x.data()[(p * H + h) * W + w];
    return out;
}

} // namespace

double frequency_l1(const Tensor<double>& pred, const Tensor<double>& target)
{
    const auto a = dft2d(zero_pad_pow2(pred));
    const auto b = dft2d(zero_pad_pow2(target));
    double s = 0.0;
    for (std::size_t i = 0; i < a.real.size(); ++i)
        s += std::abs(a.real[i] - b.real[i]) + std::abs(a.imag[i] - b.imag[i]);
    return s / (2.0 * static_cast<double>(a.real.size()));
}

double mse(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak)
{
    const double m = mse(a, b);
    if (m == 0.0)
        return 100.0;
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, double peak)
{
    const std::size_t W = a.width, H = a.height, K = 11;
    auto y_of = [](const ImageBuffer& img, std::size_t y, std::size_t x) {
        return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    };
    double win[11][11];
    double total = 0.0;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) {
            const double di = static_cast<double>(i) - 5.0, dj = static_cast<double>(j) - 5.0;
            win[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
            total += win[i][j];
        }
    for (auto& row : win)
        for (double& v : row)
            v /= total;
    const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + K <= H; ++y0)
        for (std::size_t x0 = 0; x0 + K <= W; ++x0) {
            double ma = 0, mb = 0;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    ma += win[i][j] * y_of(a, y0 + i, x0 + j);
                    mb += win[i][j] * y_of(b, y0 + i, x0 + j);
                }
            double va = 0, vb = 0, cov = 0;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    const double da = y_of(a, y0 + i, x0 + j) - ma;
                    const double db = y_of(b, y0 + i, x0 + j) - mb;
                    va += win[i][j] * da * da;
                    vb += win[i][j] * db * db;
                    cov += win[i][j] * da * db;
                }
            acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return acc / static_cast<double>(count);
}

double cosine_lr(std::size_t t, std::size_t total, double lr0, double lr_min)
{
    return lr_min + 0.5 * (lr0 - lr_min) *
                        (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                                        static_cast<double>(total)));
}

std::vector<std::vector<double>> adam_quadratic_trajectory(std::vector<double> p0, double target,
                                                           std::size_t steps,
                                                           const AdamOptions& o)
{
    std::vector<std::vector<double>> out;
    std::vector<double> m(p0.size(), 0.0), v(p0.size(), 0.0);
    for (std::size_t t = 1; t <= steps; ++t) {
        const double lr = cosine_lr(t - 1, o.total_steps, o.lr0, o.lr_min);
        for (std::size_t i = 0; i < p0.size(); ++i) {
            const double g = 2.0 * (p0[i] - target);
            m[i] = o.beta1 * m[i] + (1 - o.beta1) * g;
            v[i] = o.beta2 * v[i] + (1 - o.beta2) * g * g;
            const double mhat = m[i] / (1 - std::pow(o.beta1, static_cast<double>(t)));
            const double vhat = v[i] / (1 - std::pow(o.beta2, static_cast<double>(t)));
            p0[i] -= lr * mhat / (std::sqrt(vhat) + o.eps);
        }
        out.push_back(p0);
    }
    return out;
}

std::size_t dsam_param_count(std::size_t channels, std::size_t strip_length_sum)
{
    // Two branches, each a C -> sumK 1x1 conv with bias.
    return 2 * (channels * strip_length_sum + strip_length_sum);
}

std::size_t dsan_param_count(const ModelConfig& cfg)
{
    const std::size_t c = cfg.base_channels;
    const std::size_t n = cfg.blocks_per_scale;
    std::size_t sum_k = 0;
    for (auto k : cfg.dsam.strip_lengths)
        sum_k += k;
    auto conv = [](std::size_t cin, std::size_t cout, std::size_t k) {
        return cin * cout * k * k + cout;
    };
    const std::size_t widths[6] = {c, 2 * c, 4 * c, 4 * c, 2 * c, c};

    std::size_t total = conv(3, c, 3); // shallow
    for (std::size_t w : widths) {
        total += n * 2 * conv(w, w, 3);
        if (cfg.use_dsam)
            total += dsam_param_count(w, sum_k);
    }
    total += conv(c, 2 * c, 3) + conv(2 * c, 4 * c, 3);         // strided downsampling
    total += conv(3, 2 * c, 3) + conv(3, 4 * c, 3);             // image embeddings
    total += conv(4 * c, 2 * c, 1) + conv(8 * c, 4 * c, 1);     // input fusion
    total += (4 * c * 2 * c * 4 + 2 * c) + (2 * c * c * 4 + c); // 2x2 transposed convs
    total += conv(4 * c, 2 * c, 1) + conv(2 * c, c, 1);         // skip fusion
    total += conv(4 * c, 3, 3) + conv(2 * c, 3, 3) + conv(c, 3, 3); // heads
    return total;
}

void check_gradient(const std::function<double()>& loss, Tensor<double>& param,
                    const std::vector<double>& analytic, const std::vector<std::size_t>& indices,
                    double h, double floor, const std::string& label, GradCheck& result)
{
    NoGradGuard guard;
    auto data = param.mutable_data();
    for (std::size_t i : indices) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up = loss();
        data[i] = saved - h;
        const double down = loss();
        data[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        const double err =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        ++result.checked;
        if (err > result.max_rel_err) {
            result.max_rel_err = err;
            char buf[96];
            std::snprintf(buf, sizeof buf, "] analytic=%.3e numeric=%.3e", a, numeric);
            result.worst = label + "[" + std::to_string(i) + buf;
        }
    }
}

} // namespace dsan::reference
