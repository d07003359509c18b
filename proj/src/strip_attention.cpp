// SPDX-License-Identifier: Apache-2.0
#include "dsan/strip_attention.hpp"

#include "dsan/error.hpp"
#include "dsan/ops.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace dsan {

const char* direction_name(Direction d)
{
    return d == Direction::horizontal ? "horizontal" : "vertical";
}

std::size_t total_strip_length(const StripGroups& groups)
{
    std::size_t total = 0;
    for (const auto& g : groups)
        total += g.length;
    return total;
}

void validate_strip_groups(const StripGroups& groups, std::size_t channels)
{
    if (groups.empty())
        throw ConfigError("strip attention needs at least one channel group");
    std::size_t sum = 0;
    for (const auto& g : groups) {
        if (g.length == 0 || g.length % 2 == 0)
            throw ConfigError("strip length must be odd and >= 1, got " +
                              std::to_string(g.length));
        if (g.channels == 0)
            throw ConfigError("strip group with zero channels");
        sum += g.channels;
    }
    if (sum != channels)
        throw ConfigError("strip groups cover " + std::to_string(sum) + " channels, input has " +
                          std::to_string(channels));
}

StripGroups uniform_strip_groups(std::size_t channels, std::size_t groups, std::size_t length)
{
    if (groups == 0 || channels % groups != 0)
        throw ConfigError(std::to_string(channels) + " channels cannot be split into " +
                          std::to_string(groups) + " equal groups");
    StripGroups out(groups, StripGroup{channels / groups, length});
    validate_strip_groups(out, channels);
    return out;
}

StripGroups multiscale_strip_groups(std::size_t channels, std::span<const std::size_t> lengths)
{
    if (lengths.empty() || channels % lengths.size() != 0)
        throw ConfigError(std::to_string(channels) + " channels cannot be split into " +
                          std::to_string(lengths.size()) + " equal groups");
    StripGroups out;
    for (auto k : lengths)
        out.push_back({channels / lengths.size(), k});
    validate_strip_groups(out, channels);
    return out;
}

StripGroups DsamConfig::groups(std::size_t channels) const
{
    return multiscale_strip_groups(channels, strip_lengths);
}

void DsamConfig::validate(std::size_t channels) const
{
    if (dilation < 1)
        throw ConfigError("dilation must be >= 1");
    groups(channels);
}

std::size_t dsam_param_count(std::size_t channels, const DsamConfig& cfg)
{
    const std::size_t sum_k = total_strip_length(cfg.groups(channels));
    return 2 * (channels * sum_k + sum_k);
}

template <typename T>
DsamParams<T> make_dsam_params(std::size_t channels, const DsamConfig& cfg)
{
    const std::size_t sum_k = total_strip_length(cfg.groups(channels));
    auto branch = [&] {
        return StripBranch<T>{Tensor<T>::zeros({sum_k, channels, 1, 1}),
                              Tensor<T>::zeros({sum_k})};
    };
    return {branch(), branch()};
}

template <typename T>
StripWeights<T> compute_strip_weights(const Tensor<T>& x, const StripBranch<T>& branch,
                                      const StripGroups& groups, Direction direction)
{
    if (x.rank() != 4)
        throw ShapeError("compute_strip_weights expects an N x C x H x W input");
    const std::size_t channels = x.dim(1);
    validate_strip_groups(groups, channels);
    const std::size_t sum_k = total_strip_length(groups);
    if (branch.weight.shape() != Shape{sum_k, channels, 1, 1})
        throw ShapeError("strip branch projection is " + shape_str(branch.weight.shape()) +
                         ", expected " + shape_str({sum_k, channels, 1, 1}));
    if (branch.bias.defined() && branch.bias.numel() != sum_k)
        throw ShapeError("strip branch bias must have " + std::to_string(sum_k) + " entries");
    auto logits = conv2d(gap(x), branch.weight, branch.bias);
    auto values = reshape(sigmoid(logits), {x.dim(0), sum_k});
    return {std::move(values), direction, groups};
}

namespace {

struct StripLayout {
    std::size_t batch, channels, h, w, sum_k;
    std::vector<std::size_t> group_of_channel;
    std::vector<std::size_t> weight_offset; // per group
};

template <typename T>
StripLayout strip_layout(const Tensor<T>& x, const Tensor<T>& weights, const StripGroups& groups,
                         std::size_t dilation)
{
    if (x.rank() != 4)
        throw ShapeError("dsa expects an N x C x H x W input, got " + shape_str(x.shape()));
    if (dilation < 1)
        throw ShapeError("dsa: dilation must be >= 1");
    StripLayout l{x.dim(0), x.dim(1), x.dim(2), x.dim(3), total_strip_length(groups), {}, {}};
    try {
        validate_strip_groups(groups, l.channels);
    } catch (const ConfigError& e) {
        throw ShapeError(std::string("dsa: ") + e.what());
    }
    if (weights.numel() != l.batch * l.sum_k || weights.dim(0) != l.batch)
        throw ShapeError("dsa: weights " + shape_str(weights.shape()) + " do not provide " +
                         std::to_string(l.sum_k) + " coefficients per sample");
    std::size_t offset = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        l.weight_offset.push_back(offset);
        offset += groups[g].length;
        for (std::size_t c = 0; c < groups[g].channels; ++c)
            l.group_of_channel.push_back(g);
    }
    return l;
}

inline std::ptrdiff_t tap_shift(std::size_t k, std::size_t length, std::size_t dilation)
{
    return (static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(length / 2)) *
           static_cast<std::ptrdiff_t>(dilation);
}

// Index range [lo, hi) of positions p with 0 <= p + shift < extent.
inline std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t shift, std::size_t extent)
{
    const auto n = static_cast<std::ptrdiff_t>(extent);
    const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, n);
    const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(n - shift, 0, n);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

// out += a * shift(in) over one h x w plane; the adjoint variants below
// reuse the same index ranges.
template <typename T>
void strip_plane_forward(const T* in, const T* a, std::size_t length, std::size_t dilation,
                         Direction dir, std::size_t h, std::size_t w, T* out)
{
    if (dir == Direction::horizontal) {
        for (std::size_t r = 0; r < h; ++r) {
            const T* src = in + r * w;
            T* dst = out + r * w;
            for (std::size_t k = 0; k < length; ++k) {
                const auto s = tap_shift(k, length, dilation);
                const auto [lo, hi] = valid_range(s, w);
                const T ak = a[k];
                for (std::size_t p = lo; p < hi; ++p)
                    dst[p] += ak * src[static_cast<std::ptrdiff_t>(p) + s];
            }
        }
    } else {
        for (std::size_t k = 0; k < length; ++k) {
            const auto s = tap_shift(k, length, dilation);
            const auto [lo, hi] = valid_range(s, h);
            const T ak = a[k];
            for (std::size_t r = lo; r < hi; ++r) {
                const T* src = in + (static_cast<std::ptrdiff_t>(r) + s) * static_cast<std::ptrdiff_t>(w);
                T* dst = out + r * w;
                for (std::size_t p = 0; p < w; ++p)
                    dst[p] += ak * src[p];
            }
        }
    }
}

// Accumulates dx += adjoint(dy) and da[k] += <dy, shift_k(x)>.
template <typename T>
void strip_plane_backward(const T* x, const T* a, const T* dy, std::size_t length,
                          std::size_t dilation, Direction dir, std::size_t h, std::size_t w,
                          T* dx, T* da)
{
    for (std::size_t k = 0; k < length; ++k) {
        const auto s = tap_shift(k, length, dilation);
        const T ak = a[k];
        T acc = T(0);
        if (dir == Direction::horizontal) {
            const auto [lo, hi] = valid_range(s, w);
            for (std::size_t r = 0; r < h; ++r) {
                const T* g = dy + r * w;
                const T* src = x + r * w;
                T* d = dx ? dx + r * w : nullptr;
                for (std::size_t p = lo; p < hi; ++p) {
                    const auto q = static_cast<std::ptrdiff_t>(p) + s;
                    acc += g[p] * src[q];
                    if (d)
                        d[q] += ak * g[p];
                }
            }
        } else {
            const auto [lo, hi] = valid_range(s, h);
            for (std::size_t r = lo; r < hi; ++r) {
                const auto q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + s);
                const T* g = dy + r * w;
                const T* src = x + q * w;
                T* d = dx ? dx + q * w : nullptr;
                for (std::size_t p = 0; p < w; ++p) {
                    acc += g[p] * src[p];
                    if (d)
                        d[p] += ak * g[p];
                }
            }
        }
        if (da)
            da[k] += acc;
    }
}

} // namespace

template <typename T>
Tensor<T> dsa(const Tensor<T>& x, const Tensor<T>& weights, const StripGroups& groups,
              std::size_t dilation, Direction direction)
{
    const StripLayout l = strip_layout(x, weights, groups, dilation);
    const std::size_t plane = l.h * l.w;
    std::vector<T> out(x.numel(), T(0));
    const T* xd = x.data().data();
    const T* ad = weights.data().data();
    for (std::size_t n = 0; n < l.batch; ++n)
        for (std::size_t c = 0; c < l.channels; ++c) {
            const std::size_t g = l.group_of_channel[c];
            const std::size_t idx = (n * l.channels + c) * plane;
            strip_plane_forward(xd + idx, ad + n * l.sum_k + l.weight_offset[g],
                                groups[g].length, dilation, direction, l.h, l.w,
                                out.data() + idx);
        }

    auto* xi = x.impl().get();
    auto* wi = weights.impl().get();
    return make_result<T>(
        x.shape(), std::move(out), "dsa", {x, weights},
        [=](const TensorImpl<T>& o) {
            T* dx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
            T* da = wi->requires_grad ? wi->grad_buffer().data() : nullptr;
            for (std::size_t n = 0; n < l.batch; ++n)
                for (std::size_t c = 0; c < l.channels; ++c) {
                    const std::size_t g = l.group_of_channel[c];
                    const std::size_t idx = (n * l.channels + c) * plane;
                    const std::size_t aoff = n * l.sum_k + l.weight_offset[g];
                    strip_plane_backward(xi->data.data() + idx, wi->data.data() + aoff,
                                         o.grad.data() + idx, groups[g].length, dilation,
                                         direction, l.h, l.w, dx ? dx + idx : nullptr,
                                         da ? da + aoff : nullptr);
                }
        });
}

namespace {

template <typename T>
StripGroups groups_from_uniform_weights(const Tensor<T>& x, const Tensor<T>& a,
                                        std::size_t length)
{
    if (length % 2 == 0)
        throw ShapeError("dsa: strip length must be odd, got " + std::to_string(length));
    if (a.rank() != 3 || a.dim(2) != length)
        throw ShapeError("dsa: weights must be N x G x K with K = " + std::to_string(length) +
                         ", got " + shape_str(a.shape()));
    if (x.rank() != 4)
        throw ShapeError("dsa expects an N x C x H x W input");
    const std::size_t g = a.dim(1);
    if (g == 0 || x.dim(1) % g != 0)
        throw ShapeError("dsa: " + std::to_string(x.dim(1)) + " channels cannot form " +
                         std::to_string(g) + " equal groups");
    return StripGroups(g, StripGroup{x.dim(1) / g, length});
}

} // namespace

template <typename T>
Tensor<T> dsa(const Tensor<T>& x, const Tensor<T>& a, std::size_t length, std::size_t dilation,
              Direction direction)
{
    return dsa(x, a, groups_from_uniform_weights(x, a, length), dilation, direction);
}

template <typename T>
Tensor<T> sa(const Tensor<T>& x, const Tensor<T>& a, std::size_t length, Direction direction)
{
    const StripGroups groups = groups_from_uniform_weights(x, a, length);
    const StripLayout l = strip_layout(x, a, groups, 1);
    const std::size_t plane = l.h * l.w;
    const auto half = static_cast<std::ptrdiff_t>(length / 2);
    const bool horizontal = direction == Direction::horizontal;
    const auto extent = static_cast<std::ptrdiff_t>(horizontal ? l.w : l.h);
    std::vector<T> out(x.numel());
    const T* xd = x.data().data();
    const T* ad = a.data().data();
    for (std::size_t n = 0; n < l.batch; ++n)
        for (std::size_t c = 0; c < l.channels; ++c) {
            const std::size_t idx = (n * l.channels + c) * plane;
            const T* coef = ad + n * l.sum_k + l.weight_offset[l.group_of_channel[c]];
            for (std::size_t r = 0; r < l.h; ++r)
                for (std::size_t q = 0; q < l.w; ++q) {
                    const auto pos = static_cast<std::ptrdiff_t>(horizontal ? q : r);
                    T acc = T(0);
                    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(length); ++k) {
                        const std::ptrdiff_t src = pos + k - half;
                        if (src < 0 || src >= extent)
                            continue;
                        const std::size_t at = horizontal ? r * l.w + static_cast<std::size_t>(src)
                                                          : static_cast<std::size_t>(src) * l.w + q;
                        acc += coef[k] * xd[idx + at];
                    }
                    out[idx + r * l.w + q] = acc;
                }
        }

    auto* xi = x.impl().get();
    auto* wi = a.impl().get();
    return make_result<T>(
        x.shape(), std::move(out), "sa", {x, a},
        [=](const TensorImpl<T>& o) {
            T* dx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
            T* da = wi->requires_grad ? wi->grad_buffer().data() : nullptr;
            for (std::size_t n = 0; n < l.batch; ++n)
                for (std::size_t c = 0; c < l.channels; ++c) {
                    const std::size_t idx = (n * l.channels + c) * plane;
                    const std::size_t aoff = n * l.sum_k + l.weight_offset[l.group_of_channel[c]];
                    strip_plane_backward(xi->data.data() + idx, wi->data.data() + aoff,
                                         o.grad.data() + idx, length, 1, direction, l.h, l.w,
                                         dx ? dx + idx : nullptr, da ? da + aoff : nullptr);
                }
        });
}

template <typename T>
Tensor<T> dsam_with_weights(const Tensor<T>& x, const Tensor<T>& horizontal_weights,
                            const Tensor<T>& vertical_weights, const StripGroups& groups,
                            std::size_t dilation)
{
    auto y = dsa(x, horizontal_weights, groups, dilation, Direction::horizontal);
    return dsa(y, vertical_weights, groups, dilation, Direction::vertical);
}

template <typename T>
Tensor<T> dsam(const Tensor<T>& x, const DsamParams<T>& params, const DsamConfig& cfg)
{
    if (x.rank() != 4)
        throw ShapeError("dsam expects an N x C x H x W input");
    cfg.validate(x.dim(1));
    const StripGroups groups = cfg.groups(x.dim(1));
    auto wh = compute_strip_weights(x, params.horizontal, groups, Direction::horizontal);
    auto y = dsa(x, wh.values, groups, cfg.dilation, Direction::horizontal);
    auto wv = compute_strip_weights(y, params.vertical, groups, Direction::vertical);
    return dsa(y, wv.values, groups, cfg.dilation, Direction::vertical);
}

template <typename T>
Tensor<T> dsa_oracle(const Tensor<T>& x, const Tensor<T>& a, std::size_t length,
                     std::size_t dilation, Direction direction)
{
    return dsa_oracle(x, a, groups_from_uniform_weights(x, a, length), dilation, direction);
}

std::set<Offset> receptive_field_footprint(std::size_t length, std::size_t dilation)
{
    if (length % 2 == 0)
        throw ShapeError("receptive_field_footprint: strip length must be odd");
    const long r = static_cast<long>(length / 2);
    const long d = static_cast<long>(dilation);
    std::set<Offset> out;
    for (long a = -r; a <= r; ++a)
        for (long b = -r; b <= r; ++b)
            out.emplace(a * d, b * d);
    return out;
}

#define DSAN_INSTANTIATE_STRIP(T)                                                                \
    template DsamParams<T> make_dsam_params<T>(std::size_t, const DsamConfig&);                  \
    template StripWeights<T> compute_strip_weights(const Tensor<T>&, const StripBranch<T>&,      \
                                                   const StripGroups&, Direction);               \
    template Tensor<T> dsa(const Tensor<T>&, const Tensor<T>&, const StripGroups&, std::size_t,  \
                           Direction);                                                           \
    template Tensor<T> dsa(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t,         \
                           Direction);                                                           \
    template Tensor<T> sa(const Tensor<T>&, const Tensor<T>&, std::size_t, Direction);           \
    template Tensor<T> dsam_with_weights(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                         const StripGroups&, std::size_t);                       \
    template Tensor<T> dsam(const Tensor<T>&, const DsamParams<T>&, const DsamConfig&);          \
    template Tensor<T> dsa_oracle(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t,  \
                                  Direction);

DSAN_INSTANTIATE_STRIP(float)
DSAN_INSTANTIATE_STRIP(double)

} // namespace dsan
