// SPDX-License-Identifier: Apache-2.0
#include "dsan/losses.hpp"

#include "dsan/error.hpp"
#include "dsan/fft.hpp"
#include "dsan/ops.hpp"

#include <cmath>
#include <string>

namespace dsan {
namespace {

template <typename T>
T sign(T v)
{
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

} // namespace

template <typename T>
Tensor<T> spatial_l1(const Tensor<T>& pred, const Tensor<T>& target)
{
    if (pred.shape() != target.shape())
        throw ShapeError("spatial_l1: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    auto p = pred.data();
    auto t = target.data();
    const std::size_t count = p.size();
    if (count == 0)
        throw ShapeError("spatial_l1: empty tensors");
    T acc = T(0);
    for (std::size_t i = 0; i < count; ++i)
        acc += std::abs(p[i] - t[i]);
    const T inv = T(1) / static_cast<T>(count);
    auto* pi = pred.impl().get();
    auto* ti = target.impl().get();
    return make_result<T>({1}, {acc * inv}, "spatial_l1", {pred, target},
                          [=](const TensorImpl<T>& o) {
                              const T g = o.grad[0] * inv;
                              for (auto* in : {pi, ti}) {
                                  if (!in->requires_grad)
                                      continue;
                                  const T s = in == pi ? g : -g;
                                  auto d = in->grad_buffer();
                                  for (std::size_t i = 0; i < count; ++i)
                                      d[i] += s * sign(pi->data[i] - ti->data[i]);
                              }
                          });
}

template <typename T>
Tensor<T> frequency_l1(const Tensor<T>& pred, const Tensor<T>& target)
{
    if (pred.shape() != target.shape())
        throw ShapeError("frequency_l1: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    if (pred.rank() != 4)
        throw ShapeError("frequency_l1 expects N x C x H x W tensors");
    const auto& s = pred.shape();
    const std::size_t planes = s[0] * s[1];
    const std::size_t h = s[2], w = s[3];
    const std::size_t ph = next_pow2(h), pw = next_pow2(w);
    const std::size_t padded = planes * ph * pw;

    // The transform is linear, so FFT(pred) - FFT(target) = FFT(pred - target).
    std::vector<T> re(padded, T(0)), im(padded, T(0));
    auto p = pred.data();
    auto t = target.data();
    for (std::size_t q = 0; q < planes; ++q)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t src = (q * h + i) * w + j;
                re[(q * ph + i) * pw + j] = p[src] - t[src];
            }
    fft2d_inplace<T>(re, im, planes, ph, pw, false);

    const T inv = T(1) / static_cast<T>(2 * padded);
    T acc = T(0);
    for (std::size_t i = 0; i < padded; ++i)
        acc += std::abs(re[i]) + std::abs(im[i]);

    auto* pi = pred.impl().get();
    auto* ti = target.impl().get();
    return make_result<T>(
        {1}, {acc * inv}, "frequency_l1", {pred, target},
        [=, re = std::move(re), im = std::move(im)](const TensorImpl<T>& o) {
            // d/dx of sum |Re D| + |Im D| is Re(IDFT_unnormalised(sign Re D + i sign Im D)).
            std::vector<T> gr(padded), gi(padded);
            for (std::size_t i = 0; i < padded; ++i) {
                gr[i] = sign(re[i]);
                gi[i] = sign(im[i]);
            }
            fft2d_inplace<T>(gr, gi, planes, ph, pw, true);
            const T g = o.grad[0] * inv;
            for (auto* in : {pi, ti}) {
                if (!in->requires_grad)
                    continue;
                const T sgn = in == pi ? g : -g;
                auto d = in->grad_buffer();
                for (std::size_t q = 0; q < planes; ++q)
                    for (std::size_t i = 0; i < h; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            d[(q * h + i) * w + j] += sgn * gr[(q * ph + i) * pw + j];
            }
        });
}

template <typename T>
LossReport<T> total_loss(const std::vector<Tensor<T>>& outputs,
                         const std::vector<Tensor<T>>& targets, double lambda)
{
    if (outputs.size() != targets.size() || outputs.empty())
        throw ShapeError("total_loss: " + std::to_string(outputs.size()) + " outputs vs " +
                         std::to_string(targets.size()) + " targets");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("total_loss: lambda must be finite and >= 0");
    LossReport<T> report;
    report.lambda = lambda;
    Tensor<T> total;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        auto ls = spatial_l1(outputs[i], targets[i]);
        auto lf = frequency_l1(outputs[i], targets[i]);
        report.spatial.push_back(static_cast<double>(ls.item()));
        report.frequency.push_back(static_cast<double>(lf.item()));
        auto term = add(ls, scale(lf, static_cast<T>(lambda)));
        total = total.defined() ? add(total, term) : term;
    }
    report.total = static_cast<double>(total.item());
    report.value = std::move(total);
    return report;
}

template <typename T>
std::vector<Tensor<T>> multiscale_targets(const Tensor<T>& ground_truth, std::size_t scales)
{
    std::vector<Tensor<T>> out{ground_truth};
    NoGradGuard guard;
    for (std::size_t s = 1; s < scales; ++s)
        out.push_back(avg_pool2(out.back()));
    return out;
}

template Tensor<float> spatial_l1(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> spatial_l1(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> frequency_l1(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> frequency_l1(const Tensor<double>&, const Tensor<double>&);
template LossReport<float> total_loss(const std::vector<Tensor<float>>&,
                                      const std::vector<Tensor<float>>&, double);
template LossReport<double> total_loss(const std::vector<Tensor<double>>&,
                                       const std::vector<Tensor<double>>&, double);
template std::vector<Tensor<float>> multiscale_targets(const Tensor<float>&, std::size_t);
template std::vector<Tensor<double>> multiscale_targets(const Tensor<double>&, std::size_t);

} // namespace dsan
