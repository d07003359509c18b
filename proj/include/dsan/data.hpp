// SPDX-License-Identifier: Apache-2.0
//
// Images, synthetic degradations and patch sampling.
//
// Dataset layout on disk:
//   root/clean/<name>.ppm
//   root/degraded/<hash>/<name>.ppm   (generated on demand, cached)
// where hash is the lowercase hex CRC32 of DegradationSpec::canonical().
#pragma once

#include "dsan/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dsan {

enum class Provenance { clean, degraded };

// Planar RGB, values[c * height * width + y * width + x] in [0, 1].
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;
    Provenance provenance = Provenance::clean;

    static constexpr std::size_t channels = 3;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h, double fill = 0.0,
                Provenance p = Provenance::clean)
        : width(w), height(h), values(channels * w * h, fill), provenance(p)
    {
    }

    double& at(std::size_t c, std::size_t y, std::size_t x)
    {
        return values[(c * height + y) * width + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const
    {
        return values[(c * height + y) * width + x];
    }
    std::size_t plane() const { return width * height; }
};

// Clamps every value into [0, 1]; NaN raises NumericalError.
void clamp_unit(ImageBuffer& img);

// Binary PPM (P6). maxval 255 or 65535 on load; `bits` selects 8 or 16 on save.
// 8-bit quantisation is round-half-up of v * 255.
ImageBuffer decode_ppm(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_ppm(const ImageBuffer& img, int bits = 16);
ImageBuffer load_image(const std::filesystem::path& path);
void save_image(const ImageBuffer& img, const std::filesystem::path& path, int bits = 16);

// Smooth gradients, rectangles, discs and stripes; deterministic in `seed`.
ImageBuffer generate_clean_scene(std::size_t width, std::size_t height, std::uint64_t seed);

enum class DegradationKind { haze, blur, snow };

const char* kind_name(DegradationKind k);
DegradationKind parse_kind(const std::string& s);

struct DegradationSpec {
    DegradationKind kind = DegradationKind::haze;
    // haze: per-image transmission map drawn within [t_min, t_max]
    double t_min = 0.3;
    double t_max = 0.7;
    std::array<double, 3> airlight{0.85, 0.85, 0.85};
    // blur
    std::size_t blur_length = 7;
    double blur_angle_deg = 0.0;
    // snow
    double snow_density = 0.3;
    double flake_size = 2.0;
    std::uint64_t seed = 0;

    // Throws ConfigError when a parameter leaves its valid range.
    void validate() const;
    // Stable text form; equal specs give equal text.
    std::string canonical() const;
    // Lowercase 8-digit hex CRC32 of canonical().
    std::string hash() const;
};

// I = J * t + A * (1 - t); t in (0, 1].
ImageBuffer synth_haze(const ImageBuffer& clean, double t, const std::array<double, 3>& airlight);
ImageBuffer synth_haze(const ImageBuffer& clean, const std::vector<double>& t_map,
                       const std::array<double, 3>& airlight);

// Smooth transmission map (height x width) with values in [t_min, t_max].
std::vector<double> smooth_transmission(std::size_t width, std::size_t height, double t_min,
                                        double t_max, std::uint64_t seed);

// Normalised line kernel of `length` taps along `angle_deg`, borders clamped.
ImageBuffer synth_blur(const ImageBuffer& clean, std::size_t length, double angle_deg);

// White ellipses alpha-composited onto the image; density in [0, 1].
ImageBuffer synth_snow(const ImageBuffer& clean, double density, double flake_size,
                       std::uint64_t seed);

// Applies `spec` with a per-image seed derived from spec.seed and `image_index`.
ImageBuffer degrade(const ImageBuffer& clean, const DegradationSpec& spec,
                    std::uint64_t image_index);

struct ImagePair {
    std::string name;
    ImageBuffer clean;
    ImageBuffer degraded;
};

// Writes `count` procedural scenes to root/clean (existing files are kept).
void generate_clean_set(const std::filesystem::path& root, std::size_t count, std::size_t size,
                        std::uint64_t seed);

// Loads every root/clean/*.ppm in sorted order with its degraded counterpart,
// generating and caching the latter when absent.
std::vector<ImagePair> load_dataset(const std::filesystem::path& root,
                                    const DegradationSpec& spec);

struct Split {
    std::vector<ImagePair> train;
    std::vector<ImagePair> val;
};

// First 80% (by sorted name, at least one image) for training, rest for validation.
Split split_dataset(std::vector<ImagePair> pairs);

ImageBuffer crop(const ImageBuffer& img, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width);
ImageBuffer hflip(const ImageBuffer& img);

struct PatchPair {
    ImageBuffer clean;
    ImageBuffer degraded;
    std::size_t source = 0; // index into the pair list
    std::size_t top = 0;
    std::size_t left = 0;
    bool flipped = false;
};

// `count` aligned crops; image index and offset drawn from an RNG seeded by `seed`.
std::vector<PatchPair> sample_patches(const std::vector<ImagePair>& pairs, std::size_t count,
                                      std::size_t patch, std::uint64_t seed);

// Flips each pair (both images together) with probability 1/2.
std::vector<PatchPair> hflip_augment(std::vector<PatchPair> batch, std::uint64_t seed);
// Flips every pair.
std::vector<PatchPair> hflip_all(std::vector<PatchPair> batch);

// N x 3 x H x W; all images must share a size.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<const ImageBuffer*>& images);
template <typename T>
Tensor<T> image_to_tensor(const ImageBuffer& img);
// Sample n of an N x 3 x H x W tensor, clamped into [0, 1].
template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, std::size_t n = 0);

} // namespace dsan
