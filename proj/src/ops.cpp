// SPDX-License-Identifier: Apache-2.0
#include "dsan/ops.hpp"

#include "dsan/error.hpp"
#include "gemm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsan {
namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op)
{
    if (s.size() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
}

void require_same(const Shape& a, const Shape& b, const char* op)
{
    if (a != b)
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

struct ColGeometry {
    std::size_t channels, h, w, kh, kw, stride, padding, out_h, out_w;
    std::size_t rows() const { return channels * kh * kw; }
    std::size_t cols() const { return out_h * out_w; }
    bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
};

// image: channels x h x w  ->  col: (channels*kh*kw) x (out_h*out_w)
// Output columns [lo, hi) whose input column ow * stride + kj - pad is in range.
inline std::pair<std::size_t, std::size_t> valid_columns(std::size_t out_w, std::size_t w,
                                                         std::size_t stride, std::size_t kj,
                                                         std::size_t pad)
{
    const std::size_t lo = kj >= pad ? 0 : (pad - kj + stride - 1) / stride;
    // ow * stride + kj - pad <= w - 1
    const std::size_t lim = w - 1 + pad;
    const std::size_t hi = kj > lim ? 0 : std::min(out_w, (lim - kj) / stride + 1);
    return {std::min(lo, hi), hi};
}

template <typename T>
void im2col(const T* image, const ColGeometry& g, T* col)
{
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto H = static_cast<std::ptrdiff_t>(g.h);
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* plane = image + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.cols();
                const auto [lo, hi] = valid_columns(g.out_w, g.w, g.stride, kj, g.padding);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - pad;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    T* dst = row + oh * g.out_w;
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
                    if (ih < 0 || ih >= H) {
                        std::fill(dst, dst + g.out_w, T(0));
                        continue;
                    }
                    std::fill(dst, dst + lo, T(0));
                    std::fill(dst + hi, dst + g.out_w, T(0));
                    const T* src = plane + ih * static_cast<std::ptrdiff_t>(g.w) + shift;
                    if (g.stride == 1) {
                        std::copy(src + lo, src + hi, dst + lo);
                    } else {
                        for (std::size_t ow = lo; ow < hi; ++ow)
                            dst[ow] = src[ow * g.stride];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates col entries back into image.
template <typename T>
void col2im(const T* col, const ColGeometry& g, T* image)
{
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto H = static_cast<std::ptrdiff_t>(g.h);
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* plane = image + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.cols();
                const auto [lo, hi] = valid_columns(g.out_w, g.w, g.stride, kj, g.padding);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - pad;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
                    if (ih < 0 || ih >= H)
                        continue;
                    const T* src = row + oh * g.out_w;
                    T* dst = plane + ih * static_cast<std::ptrdiff_t>(g.w) + shift;
                    if (g.stride == 1) {
                        for (std::size_t ow = lo; ow < hi; ++ow)
                            dst[ow] += src[ow];
                    } else {
                        for (std::size_t ow = lo; ow < hi; ++ow)
                            dst[ow * g.stride] += src[ow];
                    }
                }
            }
        }
    }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t channels, std::size_t plane)
{
    for (std::size_t c = 0; c < channels; ++c) {
        const T b = bias[c];
        T* p = out + c * plane;
        for (std::size_t i = 0; i < plane; ++i)
            p[i] += b;
    }
}

template <typename T>
void accumulate_bias_grad(const T* grad_out, std::size_t channels, std::size_t plane, T* db)
{
    for (std::size_t c = 0; c < channels; ++c) {
        const T* p = grad_out + c * plane;
        T s = T(0);
        for (std::size_t i = 0; i < plane; ++i)
            s += p[i];
        db[c] += s;
    }
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::size_t channels, const char* op)
{
    if (bias.defined() && bias.numel() != channels)
        throw ShapeError(std::string(op) + ": bias has " + std::to_string(bias.numel()) +
                         " entries, expected " + std::to_string(channels));
}

} // namespace

Conv2dGeometry conv2d_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                               std::size_t stride, std::size_t padding)
{
    if (stride < 1)
        throw ShapeError("conv2d: stride must be >= 1");
    if (h + 2 * padding < kh || w + 2 * padding < kw)
        throw ShapeError("conv2d: kernel larger than padded input");
    return {(h + 2 * padding - kh) / stride + 1, (w + 2 * padding - kw) / stride + 1};
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding)
{
    require_rank(x.shape(), 4, "conv2d input");
    require_rank(weight.shape(), 4, "conv2d weight");
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (xs[1] != ws[1])
        throw ShapeError("conv2d: input has " + std::to_string(xs[1]) +
                         " channels but weight expects " + std::to_string(ws[1]));
    check_bias(bias, ws[0], "conv2d");
    const auto geo = conv2d_geometry(xs[2], xs[3], ws[2], ws[3], stride, padding);
    const ColGeometry g{xs[1], xs[2], xs[3], ws[2], ws[3], stride, padding, geo.out_h, geo.out_w};
    const std::size_t batch = xs[0];
    const std::size_t cout = ws[0];
    const std::size_t in_plane = xs[1] * xs[2] * xs[3];
    const std::size_t out_plane = cout * g.cols();

    std::vector<T> out(batch * out_plane);
    std::vector<T> col(g.is_pointwise() ? 0 : g.rows() * g.cols());
    const T* xd = x.data().data();
    const T* wd = weight.data().data();
    for (std::size_t n = 0; n < batch; ++n) {
        const T* src = xd + n * in_plane;
        if (!g.is_pointwise()) {
            im2col(src, g, col.data());
            src = col.data();
        }
        detail::gemm<T>(false, false, cout, g.cols(), g.rows(), T(1), wd, g.rows(), src, g.cols(),
                        T(0), out.data() + n * out_plane, g.cols());
        if (bias.defined())
            add_bias(out.data() + n * out_plane, bias.data().data(), cout, g.cols());
    }

    auto* xi = x.impl().get();
    auto* wi = weight.impl().get();
    auto* bi = bias.defined() ? bias.impl().get() : nullptr;
    return make_result<T>(
        {batch, cout, g.out_h, g.out_w}, std::move(out), "conv2d", {x, weight, bias},
        [=](const TensorImpl<T>& o) {
            const T* gy = o.grad.data();
            std::vector<T> colbuf(g.rows() * g.cols());
            T* dw = wi->requires_grad ? wi->grad_buffer().data() : nullptr;
            T* dx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
            T* db = (bi && bi->requires_grad) ? bi->grad_buffer().data() : nullptr;
            for (std::size_t n = 0; n < batch; ++n) {
                const T* gyn = gy + n * out_plane;
                if (db)
                    accumulate_bias_grad(gyn, cout, g.cols(), db);
                if (dw) {
                    const T* src = xi->data.data() + n * in_plane;
                    if (!g.is_pointwise()) {
                        im2col(src, g, colbuf.data());
                        src = colbuf.data();
                    }
                    detail::gemm<T>(false, true, cout, g.rows(), g.cols(), T(1), gyn, g.cols(), src,
                                    g.cols(), T(1), dw, g.rows());
                }
                if (dx) {
                    T* dxn = dx + n * in_plane;
                    if (g.is_pointwise()) {
                        detail::gemm<T>(true, false, g.rows(), g.cols(), cout, T(1),
                                        wi->data.data(), g.rows(), gyn, g.cols(), T(1), dxn,
                                        g.cols());
                    } else {
                        detail::gemm<T>(true, false, g.rows(), g.cols(), cout, T(1),
                                        wi->data.data(), g.rows(), gyn, g.cols(), T(0),
                                        colbuf.data(), g.cols());
                        col2im(colbuf.data(), g, dxn);
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                            std::size_t stride)
{
    require_rank(x.shape(), 4, "transposed_conv2d input");
    require_rank(weight.shape(), 4, "transposed_conv2d weight");
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (xs[1] != ws[0])
        throw ShapeError("transposed_conv2d: input has " + std::to_string(xs[1]) +
                         " channels but weight expects " + std::to_string(ws[0]));
    const std::size_t k = ws[2];
    if (ws[3] != k || k < stride || (k - stride) % 2 != 0 || stride < 1)
        throw ShapeError("transposed_conv2d: kernel " + shape_str(ws) +
                         " incompatible with stride " + std::to_string(stride));
    const std::size_t cout = ws[1];
    check_bias(bias, cout, "transposed_conv2d");
    const std::size_t padding = (k - stride) / 2;
    const std::size_t oh = xs[2] * stride;
    const std::size_t ow = xs[3] * stride;
    // Geometry of the forward conv that maps the output back onto x.
    const ColGeometry g{cout, oh, ow, k, k, stride, padding, xs[2], xs[3]};
    const std::size_t batch = xs[0];
    const std::size_t cin = xs[1];
    const std::size_t in_plane = cin * g.cols();
    const std::size_t out_plane = cout * oh * ow;

    std::vector<T> out(batch * out_plane, T(0));
    std::vector<T> col(g.rows() * g.cols());
    const T* xd = x.data().data();
    const T* wd = weight.data().data();
    for (std::size_t n = 0; n < batch; ++n) {
        detail::gemm<T>(true, false, g.rows(), g.cols(), cin, T(1), wd, g.rows(), xd + n * in_plane,
                        g.cols(), T(0), col.data(), g.cols());
        col2im(col.data(), g, out.data() + n * out_plane);
        if (bias.defined())
            add_bias(out.data() + n * out_plane, bias.data().data(), cout, oh * ow);
    }

    auto* xi = x.impl().get();
    auto* wi = weight.impl().get();
    auto* bi = bias.defined() ? bias.impl().get() : nullptr;
    return make_result<T>(
        {batch, cout, oh, ow}, std::move(out), "transposed_conv2d", {x, weight, bias},
        [=](const TensorImpl<T>& o) {
            const T* gy = o.grad.data();
            std::vector<T> colbuf(g.rows() * g.cols());
            T* dw = wi->requires_grad ? wi->grad_buffer().data() : nullptr;
            T* dx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
            T* db = (bi && bi->requires_grad) ? bi->grad_buffer().data() : nullptr;
            for (std::size_t n = 0; n < batch; ++n) {
                const T* gyn = gy + n * out_plane;
                if (db)
                    accumulate_bias_grad(gyn, cout, oh * ow, db);
                if (!dw && !dx)
                    continue;
                im2col(gyn, g, colbuf.data());
                if (dw)
                    detail::gemm<T>(false, true, cin, g.rows(), g.cols(), T(1),
                                    xi->data.data() + n * in_plane, g.cols(), colbuf.data(),
                                    g.cols(), T(1), dw, g.rows());
                if (dx)
                    detail::gemm<T>(false, false, cin, g.cols(), g.rows(), T(1), wi->data.data(),
                                    g.rows(), colbuf.data(), g.cols(), T(1), dx + n * in_plane,
                                    g.cols());
            }
        });
}

template <typename T>
Tensor<T> gap(const Tensor<T>& x)
{
    require_rank(x.shape(), 4, "gap");
    const auto& s = x.shape();
    const std::size_t planes = s[0] * s[1];
    const std::size_t hw = s[2] * s[3];
    if (hw == 0)
        throw ShapeError("gap: empty spatial extent");
    std::vector<T> out(planes);
    const T* xd = x.data().data();
    for (std::size_t p = 0; p < planes; ++p) {
        T acc = T(0);
        for (std::size_t i = 0; i < hw; ++i)
            acc += xd[p * hw + i];
        out[p] = acc / static_cast<T>(hw);
    }
    auto* xi = x.impl().get();
    return make_result<T>({s[0], s[1], 1, 1}, std::move(out), "gap", {x},
                          [=](const TensorImpl<T>& o) {
                              auto dx = xi->grad_buffer();
                              const T inv = T(1) / static_cast<T>(hw);
                              for (std::size_t p = 0; p < planes; ++p) {
                                  const T g = o.grad[p] * inv;
                                  for (std::size_t i = 0; i < hw; ++i)
                                      dx[p * hw + i] += g;
                              }
                          });
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x)
{
    require_rank(x.shape(), 4, "avg_pool2");
    const auto& s = x.shape();
    if (s[2] % 2 || s[3] % 2)
        throw ShapeError("avg_pool2: spatial dims must be even, got " + shape_str(s));
    const std::size_t planes = s[0] * s[1];
    const std::size_t h = s[2] / 2, w = s[3] / 2;
    std::vector<T> out(planes * h * w);
    const T* xd = x.data().data();
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = xd + p * s[2] * s[3];
        T* dst = out.data() + p * h * w;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const T* a = src + 2 * i * s[3] + 2 * j;
                dst[i * w + j] = T(0.25) * ((a[0] + a[1]) + (a[s[3]] + a[s[3] + 1]));
            }
    }
    auto* xi = x.impl().get();
    const std::size_t in_w = s[3], in_plane = s[2] * s[3];
    return make_result<T>({s[0], s[1], h, w}, std::move(out), "avg_pool2", {x},
                          [=](const TensorImpl<T>& o) {
                              auto dx = xi->grad_buffer();
                              for (std::size_t p = 0; p < planes; ++p)
                                  for (std::size_t i = 0; i < h; ++i)
                                      for (std::size_t j = 0; j < w; ++j) {
                                          const T g = T(0.25) * o.grad[(p * h + i) * w + j];
                                          T* a = dx.data() + p * in_plane + 2 * i * in_w + 2 * j;
                                          a[0] += g;
                                          a[1] += g;
                                          a[in_w] += g;
                                          a[in_w + 1] += g;
                                      }
                          });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x)
{
    std::vector<T> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = T(1) / (T(1) + std::exp(-xd[i]));
    auto* xi = x.impl().get();
    return make_result<T>(x.shape(), std::move(out), "sigmoid", {x}, [=](const TensorImpl<T>& o) {
        auto dx = xi->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += o.grad[i] * o.data[i] * (T(1) - o.data[i]);
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
    std::vector<T> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = xd[i] > T(0) ? xd[i] : T(0);
    auto* xi = x.impl().get();
    return make_result<T>(x.shape(), std::move(out), "relu", {x}, [=](const TensorImpl<T>& o) {
        auto dx = xi->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += o.data[i] > T(0) ? o.grad[i] : T(0);
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same(a.shape(), b.shape(), "add");
    std::vector<T> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = ad[i] + bd[i];
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    return make_result<T>(a.shape(), std::move(out), "add", {a, b}, [=](const TensorImpl<T>& o) {
        for (auto* in : {ai, bi}) {
            if (!in->requires_grad)
                continue;
            auto d = in->grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] += o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same(a.shape(), b.shape(), "sub");
    std::vector<T> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = ad[i] - bd[i];
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    return make_result<T>(a.shape(), std::move(out), "sub", {a, b}, [=](const TensorImpl<T>& o) {
        if (ai->requires_grad) {
            auto d = ai->grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] += o.grad[i];
        }
        if (bi->requires_grad) {
            auto d = bi->grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] -= o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same(a.shape(), b.shape(), "mul");
    std::vector<T> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = ad[i] * bd[i];
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    return make_result<T>(a.shape(), std::move(out), "mul", {a, b}, [=](const TensorImpl<T>& o) {
        if (ai->requires_grad) {
            auto d = ai->grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] += o.grad[i] * bi->data[i];
        }
        if (bi->requires_grad) {
            auto d = bi->grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] += o.grad[i] * ai->data[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor)
{
    std::vector<T> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = xd[i] * factor;
    auto* xi = x.impl().get();
    return make_result<T>(x.shape(), std::move(out), "scale", {x}, [=](const TensorImpl<T>& o) {
        auto dx = xi->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += o.grad[i] * factor;
    });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b)
{
    require_rank(a.shape(), 4, "concat_channels");
    require_rank(b.shape(), 4, "concat_channels");
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
        throw ShapeError("concat_channels: incompatible " + shape_str(as) + " and " +
                         shape_str(bs));
    const std::size_t batch = as[0];
    const std::size_t pa = as[1] * as[2] * as[3];
    const std::size_t pb = bs[1] * bs[2] * bs[3];
    std::vector<T> out(batch * (pa + pb));
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(ad.data() + n * pa, pa, out.data() + n * (pa + pb));
        std::copy_n(bd.data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
    }
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    return make_result<T>(
        {batch, as[1] + bs[1], as[2], as[3]}, std::move(out), "concat_channels", {a, b},
        [=](const TensorImpl<T>& o) {
            for (std::size_t n = 0; n < batch; ++n) {
                const T* g = o.grad.data() + n * (pa + pb);
                if (ai->requires_grad) {
                    T* d = ai->grad_buffer().data() + n * pa;
                    for (std::size_t i = 0; i < pa; ++i)
                        d[i] += g[i];
                }
                if (bi->requires_grad) {
                    T* d = bi->grad_buffer().data() + n * pb;
                    for (std::size_t i = 0; i < pb; ++i)
                        d[i] += g[pa + i];
                }
            }
        });
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t top, std::size_t left, std::size_t height,
               std::size_t width)
{
    require_rank(x.shape(), 4, "crop");
    const auto& s = x.shape();
    if (top + height > s[2] || left + width > s[3])
        throw ShapeError("crop: window exceeds input " + shape_str(s));
    const std::size_t planes = s[0] * s[1];
    std::vector<T> out(planes * height * width);
    auto xd = x.data();
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < height; ++i)
            std::copy_n(xd.data() + (p * s[2] + top + i) * s[3] + left, width,
                        out.data() + (p * height + i) * width);
    auto* xi = x.impl().get();
    const std::size_t ih = s[2], iw = s[3];
    return make_result<T>({s[0], s[1], height, width}, std::move(out), "crop", {x},
                          [=](const TensorImpl<T>& o) {
                              auto dx = xi->grad_buffer();
                              for (std::size_t p = 0; p < planes; ++p)
                                  for (std::size_t i = 0; i < height; ++i)
                                      for (std::size_t j = 0; j < width; ++j)
                                          dx[(p * ih + top + i) * iw + left + j] +=
                                              o.grad[(p * height + i) * width + j];
                          });
}

template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
              std::size_t right)
{
    require_rank(x.shape(), 4, "pad");
    const auto& s = x.shape();
    const std::size_t planes = s[0] * s[1];
    const std::size_t oh = s[2] + top + bottom, ow = s[3] + left + right;
    std::vector<T> out(planes * oh * ow, T(0));
    auto xd = x.data();
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < s[2]; ++i)
            std::copy_n(xd.data() + (p * s[2] + i) * s[3], s[3],
                        out.data() + (p * oh + top + i) * ow + left);
    auto* xi = x.impl().get();
    const std::size_t ih = s[2], iw = s[3];
    return make_result<T>({s[0], s[1], oh, ow}, std::move(out), "pad", {x},
                          [=](const TensorImpl<T>& o) {
                              auto dx = xi->grad_buffer();
                              for (std::size_t p = 0; p < planes; ++p)
                                  for (std::size_t i = 0; i < ih; ++i)
                                      for (std::size_t j = 0; j < iw; ++j)
                                          dx[(p * ih + i) * iw + j] +=
                                              o.grad[(p * oh + top + i) * ow + left + j];
                          });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape)
{
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    std::vector<T> out(x.data().begin(), x.data().end());
    auto* xi = x.impl().get();
    return make_result<T>(std::move(shape), std::move(out), "reshape", {x},
                          [=](const TensorImpl<T>& o) {
                              auto dx = xi->grad_buffer();
                              for (std::size_t i = 0; i < dx.size(); ++i)
                                  dx[i] += o.grad[i];
                          });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x)
{
    T acc = T(0);
    for (T v : x.data())
        acc += v;
    auto* xi = x.impl().get();
    return make_result<T>({1}, {acc}, "sum", {x}, [=](const TensorImpl<T>& o) {
        auto dx = xi->grad_buffer();
        for (auto& d : dx)
            d += o.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x)
{
    if (x.numel() == 0)
        throw ShapeError("mean of an empty tensor");
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
void check_finite(const Tensor<T>& x, std::string_view where)
{
    for (T v : x.data())
        if (!std::isfinite(v))
            throw NumericalError("non-finite value detected in " + std::string(where));
}

#define DSAN_INSTANTIATE_OPS(T)                                                                  \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, \
                              std::size_t);                                                      \
    template Tensor<T> transposed_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                         std::size_t);                                           \
    template Tensor<T> gap(const Tensor<T>&);                                                    \
    template Tensor<T> avg_pool2(const Tensor<T>&);                                              \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                \
    template Tensor<T> relu(const Tensor<T>&);                                                   \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> scale(const Tensor<T>&, T);                                               \
    template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> crop(const Tensor<T>&, std::size_t, std::size_t, std::size_t,             \
                            std::size_t);                                                        \
    template Tensor<T> pad(const Tensor<T>&, std::size_t, std::size_t, std::size_t,              \
                           std::size_t);                                                         \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
    template Tensor<T> sum(const Tensor<T>&);                                                    \
    template Tensor<T> mean(const Tensor<T>&);                                                   \
    template void check_finite(const Tensor<T>&, std::string_view);

DSAN_INSTANTIATE_OPS(float)
DSAN_INSTANTIATE_OPS(double)

} // namespace dsan
