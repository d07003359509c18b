// SPDX-License-Identifier: Apache-2.0
#include "dsan/model.hpp"

#include "dsan/error.hpp"
#include "dsan/ops.hpp"
#include "dsan/random.hpp"

#include <cmath>
#include <sstream>

namespace dsan {

void ModelConfig::validate() const
{
    if (base_channels < 1)
        throw ConfigError("base_channels must be >= 1");
    if (blocks_per_scale < 1)
        throw ConfigError("blocks_per_scale (N) must be >= 1");
    if (input_channels != 3)
        throw ConfigError("only 3-channel input images are supported");
    if (use_dsam)
        for (std::size_t s = 0; s < kScales; ++s)
            dsam.validate(scale_channels(s));
}

std::size_t ModelConfig::scale_channels(std::size_t s) const
{
    static constexpr std::array<std::size_t, kScales> mult{1, 2, 4, 4, 2, 1};
    return base_channels * mult.at(s);
}

namespace {

std::string join_lengths(const std::vector<std::size_t>& v)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i)
        os << (i ? "," : "") << v[i];
    return os.str();
}

std::size_t parse_size(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const auto v = std::stoull(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for '" + key + "': " + value);
    }
}

} // namespace

std::map<std::string, std::string> ModelConfig::to_map() const
{
    return {{"base_channels", std::to_string(base_channels)},
            {"blocks_per_scale", std::to_string(blocks_per_scale)},
            {"input_channels", std::to_string(input_channels)},
            {"use_dsam", use_dsam ? "1" : "0"},
            {"strip_lengths", join_lengths(dsam.strip_lengths)},
            {"dilation", std::to_string(dsam.dilation)},
            {"seed", std::to_string(seed)}};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv)
{
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw ConfigError(std::string("model config is missing '") + key + "'");
        return it->second;
    };
    ModelConfig cfg;
    cfg.base_channels = parse_size("base_channels", get("base_channels"));
    cfg.blocks_per_scale = parse_size("blocks_per_scale", get("blocks_per_scale"));
    cfg.input_channels = parse_size("input_channels", get("input_channels"));
    cfg.use_dsam = get("use_dsam") == "1";
    cfg.dsam.dilation = parse_size("dilation", get("dilation"));
    cfg.seed = parse_size("seed", get("seed"));
    cfg.dsam.strip_lengths.clear();
    std::stringstream ss(get("strip_lengths"));
    for (std::string item; std::getline(ss, item, ',');)
        cfg.dsam.strip_lengths.push_back(parse_size("strip_lengths", item));
    cfg.validate();
    return cfg;
}

template <typename T>
Tensor<T> ConvLayer<T>::operator()(const Tensor<T>& x) const
{
    return conv2d(x, weight, bias, stride, padding);
}

template <typename T>
Tensor<T> UpsampleLayer<T>::operator()(const Tensor<T>& x) const
{
    return transposed_conv2d(x, weight, bias, 2);
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, const DsamConfig& cfg) const
{
    auto h = relu(conv1(x));
    if (dsam)
        h = ::dsan::dsam(h, *dsam, cfg);
    return add(x, conv2(h));
}

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, std::size_t fan_in, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor<T> t(std::move(shape));
    for (auto& v : t.mutable_data())
        v = static_cast<T>(rng.uniform(-bound, bound));
    t.set_requires_grad(true);
    return t;
}

template <typename T>
Tensor<T> zero_bias(std::size_t n)
{
    Tensor<T> t = Tensor<T>::zeros({n});
    t.set_requires_grad(true);
    return t;
}

template <typename T>
ConvLayer<T> make_conv(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
                       Rng& rng)
{
    return {uniform_tensor<T>({cout, cin, k, k}, cin * k * k, rng), zero_bias<T>(cout), stride,
            k / 2};
}

template <typename T>
UpsampleLayer<T> make_up(std::size_t cin, std::size_t cout, Rng& rng)
{
    return {uniform_tensor<T>({cin, cout, 2, 2}, cout * 4, rng), zero_bias<T>(cout)};
}

template <typename T>
DsamParams<T> make_dsam(std::size_t channels, const DsamConfig& cfg, Rng& rng)
{
    const std::size_t sum_k = total_strip_length(cfg.groups(channels));
    auto branch = [&] {
        return StripBranch<T>{uniform_tensor<T>({sum_k, channels, 1, 1}, channels, rng),
                              zero_bias<T>(sum_k)};
    };
    auto h = branch();
    auto v = branch();
    return {std::move(h), std::move(v)};
}

} // namespace

template <typename T>
DsanModel<T>::DsanModel(ModelConfig cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
    Rng rng(cfg_.seed);
    const std::size_t c0 = cfg_.base_channels;
    const std::size_t cin = cfg_.input_channels;

    shallow_ = make_conv<T>(cin, c0, 3, 1, rng);
    for (std::size_t s = 0; s < kScales; ++s) {
        const std::size_t c = cfg_.scale_channels(s);
        for (std::size_t b = 0; b < cfg_.blocks_per_scale; ++b) {
            ResidualBlock<T> block{make_conv<T>(c, c, 3, 1, rng), make_conv<T>(c, c, 3, 1, rng),
                                   std::nullopt};
            if (cfg_.use_dsam && b + 1 == cfg_.blocks_per_scale)
                block.dsam = make_dsam<T>(c, cfg_.dsam, rng);
            scale_blocks_[s].push_back(std::move(block));
        }
        if (s == 0 || s == 1) {
            down_[s] = make_conv<T>(c, 2 * c, 3, 2, rng);
            image_embed_[s] = make_conv<T>(cin, 2 * c, 3, 1, rng);
            input_fuse_[s] = make_conv<T>(4 * c, 2 * c, 1, 1, rng);
        }
        if (s == 3 || s == 4) {
            const std::size_t out = cfg_.scale_channels(s + 1);
            up_[s - 3] = make_up<T>(c, out, rng);
            skip_fuse_[s - 3] = make_conv<T>(2 * out, out, 1, 1, rng);
        }
        if (s >= 3)
            heads_[s - 3] = make_conv<T>(c, cin, 3, 1, rng);
    }
}

template <typename T>
Tensor<T> DsanModel<T>::blocks(std::size_t s, const Tensor<T>& x) const
{
    Tensor<T> h = x;
    for (const auto& block : scale_blocks_[s])
        h = block.forward(h, cfg_.dsam);
    check_finite(h, "scale " + std::to_string(s + 1));
    return h;
}

template <typename T>
std::vector<Tensor<T>> image_pyramid(const Tensor<T>& image, std::size_t levels)
{
    std::vector<Tensor<T>> out{image};
    for (std::size_t l = 1; l < levels; ++l)
        out.push_back(avg_pool2(out.back()));
    return out;
}

template <typename T>
std::vector<Tensor<T>> DsanModel<T>::forward(const Tensor<T>& image,
                                             std::vector<Shape>* trace) const
{
    if (image.rank() != 4 || image.dim(1) != cfg_.input_channels)
        throw ShapeError("forward expects an N x 3 x H x W image, got " +
                         shape_str(image.shape()));
    if (image.dim(2) % 4 != 0 || image.dim(3) % 4 != 0)
        throw ShapeError("forward: H and W must be multiples of 4, got " +
                         shape_str(image.shape()));
    const auto pyr = image_pyramid(image, 3);

    const auto e1 = blocks(0, shallow_(pyr[0]));
    auto x = input_fuse_[0](concat_channels(down_[0](e1), image_embed_[0](pyr[1])));
    const auto e2 = blocks(1, x);
    x = input_fuse_[1](concat_channels(down_[1](e2), image_embed_[1](pyr[2])));
    const auto e3 = blocks(2, x);

    const auto d4 = blocks(3, e3);
    auto out_quarter = add(heads_[0](d4), pyr[2]);
    x = skip_fuse_[0](concat_channels(up_[0](d4), e2));
    const auto d5 = blocks(4, x);
    auto out_half = add(heads_[1](d5), pyr[1]);
    x = skip_fuse_[1](concat_channels(up_[1](d5), e1));
    const auto d6 = blocks(5, x);
    auto out_full = add(heads_[2](d6), pyr[0]);

    if (trace)
        *trace = {e1.shape(), e2.shape(), e3.shape(), d4.shape(), d5.shape(), d6.shape()};
    std::vector<Tensor<T>> outs{out_full, out_half, out_quarter};
    for (const auto& o : outs)
        check_finite(o, "network output");
    return outs;
}

template <typename T>
std::vector<NamedParameter<T>> DsanModel<T>::parameters() const
{
    std::vector<NamedParameter<T>> out;
    auto conv = [&](const std::string& name, const ConvLayer<T>& l) {
        out.push_back({name + ".weight", l.weight});
        out.push_back({name + ".bias", l.bias});
    };
    conv("shallow", shallow_);
    for (std::size_t s = 0; s < kScales; ++s) {
        const std::string scale = "scale" + std::to_string(s + 1);
        if (s == 1 || s == 2) {
            conv(scale + ".down", down_[s - 1]);
            conv(scale + ".image_embed", image_embed_[s - 1]);
            conv(scale + ".input_fuse", input_fuse_[s - 1]);
        }
        if (s == 4 || s == 5) {
            out.push_back({scale + ".up.weight", up_[s - 4].weight});
            out.push_back({scale + ".up.bias", up_[s - 4].bias});
            conv(scale + ".skip_fuse", skip_fuse_[s - 4]);
        }
        for (std::size_t b = 0; b < scale_blocks_[s].size(); ++b) {
            const auto& block = scale_blocks_[s][b];
            const std::string prefix = scale + ".block" + std::to_string(b);
            conv(prefix + ".conv1", block.conv1);
            conv(prefix + ".conv2", block.conv2);
            if (block.dsam) {
                out.push_back({prefix + ".dsam.horizontal.weight", block.dsam->horizontal.weight});
                out.push_back({prefix + ".dsam.horizontal.bias", block.dsam->horizontal.bias});
                out.push_back({prefix + ".dsam.vertical.weight", block.dsam->vertical.weight});
                out.push_back({prefix + ".dsam.vertical.bias", block.dsam->vertical.bias});
            }
        }
        if (s >= 3)
            conv(scale + ".head", heads_[s - 3]);
    }
    return out;
}

template <typename T>
std::size_t DsanModel<T>::param_count() const
{
    std::size_t n = 0;
    for (const auto& p : parameters())
        n += p.tensor.numel();
    return n;
}

template <typename T>
std::size_t DsanModel<T>::dsam_blocks(std::size_t scale) const
{
    std::size_t n = 0;
    for (const auto& b : scale_blocks_.at(scale))
        n += b.dsam.has_value();
    return n;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template struct UpsampleLayer<float>;
template struct UpsampleLayer<double>;
template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template class DsanModel<float>;
template class DsanModel<double>;
template std::vector<Tensor<float>> image_pyramid(const Tensor<float>&, std::size_t);
template std::vector<Tensor<double>> image_pyramid(const Tensor<double>&, std::size_t);

} // namespace dsan
