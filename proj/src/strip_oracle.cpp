// SPDX-License-Identifier: Apache-2.0
//
// Reference evaluation of the dilated strip sum, one output value at a time.
// Deliberately shares no indexing code with the production kernel.
#include "dsan/error.hpp"
#include "dsan/strip_attention.hpp"

namespace dsan {

template <typename T>
Tensor<T> dsa_oracle(const Tensor<T>& x, const Tensor<T>& weights, const StripGroups& groups,
                     std::size_t dilation, Direction direction)
{
    if (x.rank() != 4)
        throw ShapeError("dsa_oracle expects an N x C x H x W input");
    const long N = static_cast<long>(x.dim(0));
    const long C = static_cast<long>(x.dim(1));
    const long H = static_cast<long>(x.dim(2));
    const long W = static_cast<long>(x.dim(3));
    const long sum_k = static_cast<long>(total_strip_length(groups));
    if (static_cast<long>(weights.numel()) != N * sum_k)
        throw ShapeError("dsa_oracle: weight count mismatch");
    const long d = static_cast<long>(dilation);
    auto xv = x.data();
    auto av = weights.data();
    std::vector<T> out(x.numel(), T(0));

    for (long n = 0; n < N; ++n) {
        long group_start_channel = 0;
        long group_weight_offset = 0;
        for (const auto& grp : groups) {
            const long K = static_cast<long>(grp.length);
            for (long c = group_start_channel; c < group_start_channel + static_cast<long>(grp.channels); ++c) {
                if (c >= C)
                    throw ShapeError("dsa_oracle: groups exceed channel count");
                for (long h = 0; h < H; ++h) {
                    for (long w = 0; w < W; ++w) {
                        T value = T(0);
                        for (long k = 0; k < K; ++k) {
                            const long offset = (k - K / 2) * d;
                            long hh = h, ww = w;
                            if (direction == Direction::horizontal)
                                ww = w + offset;
                            else
                                hh = h + offset;
                            if (hh < 0 || hh >= H || ww < 0 || ww >= W)
                                continue;
                            const T a = av[n * sum_k + group_weight_offset + k];
                            value += a * xv[((n * C + c) * H + hh) * W + ww];
                        }
                        out[((n * C + c) * H + h) * W + w] = value;
                    }
                }
            }
            group_start_channel += static_cast<long>(grp.channels);
            group_weight_offset += K;
        }
        if (group_start_channel != C)
            throw ShapeError("dsa_oracle: groups do not cover all channels");
    }
    return Tensor<T>(x.shape(), std::move(out));
}

template Tensor<float> dsa_oracle(const Tensor<float>&, const Tensor<float>&, const StripGroups&,
                                  std::size_t, Direction);
template Tensor<double> dsa_oracle(const Tensor<double>&, const Tensor<double>&,
                                   const StripGroups&, std::size_t, Direction);

} // namespace dsan
