// SPDX-License-Identifier: Apache-2.0
//
// Six-scale encoder-decoder restoration network.
//
//   scale 1  (C0,  H)    shallow 3x3 conv, N residual blocks
//   scale 2  (2C0, H/2)  stride-2 conv, fused with an embedding of the 1/2 image
//   scale 3  (4C0, H/4)  stride-2 conv, fused with an embedding of the 1/4 image
//   scale 4  (4C0, H/4)  N blocks, head -> restored 1/4 image
//   scale 5  (2C0, H/2)  transposed conv, skip fusion with scale 2, head -> 1/2 image
//   scale 6  (C0,  H)    transposed conv, skip fusion with scale 1, head -> full image
//
// The last residual block of every scale carries a DSAM (unless disabled).
// Every head predicts a residual that is added to the input image at its
// resolution.
#pragma once

#include "dsan/optimizer.hpp"
#include "dsan/strip_attention.hpp"
#include "dsan/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dsan {

inline constexpr std::size_t kScales = 6;

struct ModelConfig {
    std::size_t base_channels = 16;   // C0
    std::size_t blocks_per_scale = 2; // N
    std::size_t input_channels = 3;
    bool use_dsam = true;
    DsamConfig dsam;
    std::uint64_t seed = 0;

    void validate() const;
    // Feature width of scale s in [0, 6).
    std::size_t scale_channels(std::size_t s) const;

    std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& kv);
};

template <typename T>
struct ConvLayer {
    Tensor<T> weight;
    Tensor<T> bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct UpsampleLayer {
    Tensor<T> weight; // Cin x Cout x 2 x 2
    Tensor<T> bias;

    Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct ResidualBlock {
    ConvLayer<T> conv1;
    ConvLayer<T> conv2;
    std::optional<DsamParams<T>> dsam;

    // x + conv2(dsam?(relu(conv1(x))))
    Tensor<T> forward(const Tensor<T>& x, const DsamConfig& cfg) const;
};

template <typename T>
class DsanModel {
public:
    // Builds the topology and draws every weight uniformly in +-1/sqrt(fan_in)
    // from an RNG seeded by cfg.seed; biases start at zero.
    explicit DsanModel(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    // Returns {full, 1/2, 1/4} restored images. H and W must be multiples of 4.
    // `trace`, when given, receives the feature shape after each of the six scales.
    std::vector<Tensor<T>> forward(const Tensor<T>& image,
                                   std::vector<Shape>* trace = nullptr) const;

    // Shared handles in a fixed order; writes through them update the model.
    std::vector<NamedParameter<T>> parameters() const;
    std::size_t param_count() const;

    // Number of residual blocks of scale s that carry a DSAM.
    std::size_t dsam_blocks(std::size_t scale) const;

private:
    Tensor<T> blocks(std::size_t s, const Tensor<T>& x) const;

    ModelConfig cfg_;
    ConvLayer<T> shallow_;
    std::array<std::vector<ResidualBlock<T>>, kScales> scale_blocks_;
    std::array<ConvLayer<T>, 2> down_;
    std::array<ConvLayer<T>, 2> image_embed_;
    std::array<ConvLayer<T>, 2> input_fuse_;
    std::array<UpsampleLayer<T>, 2> up_;
    std::array<ConvLayer<T>, 2> skip_fuse_;
    std::array<ConvLayer<T>, 3> heads_; // scales 4, 5, 6
};

template <typename T>
DsanModel<T> build_dsan(const ModelConfig& cfg)
{
    return DsanModel<T>(cfg);
}

// Image pyramid used for multi-input embedding and residual outputs.
template <typename T>
std::vector<Tensor<T>> image_pyramid(const Tensor<T>& image, std::size_t levels = 3);

extern template class DsanModel<float>;
extern template class DsanModel<double>;

} // namespace dsan
