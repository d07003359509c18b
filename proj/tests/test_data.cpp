// SPDX-License-Identifier: Apache-2.0
#include "dsan/data.hpp"
#include "dsan/error.hpp"
#include "dsan/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

namespace dsan {
namespace {

namespace fs = std::filesystem;

ImageBuffer random_image(std::size_t w, std::size_t h, std::uint64_t seed)
{
    Rng rng(seed);
    ImageBuffer img(w, h);
    for (auto& v : img.values)
        v = rng.uniform();
    return img;
}

fs::path fresh_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("dsan_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

TEST(Ppm, DecodesHandWrittenFile)
{
    // 2x1 image: red then (0, 128, 255) with a header comment.
    const std::string header = "P6\n# two pixels\n2 1\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    for (unsigned v : {255u, 0u, 0u, 0u, 128u, 255u})
        bytes.push_back(static_cast<unsigned char>(v));
    const auto img = decode_ppm(bytes);
    ASSERT_EQ(img.width, 2u);
    ASSERT_EQ(img.height, 1u);
    EXPECT_EQ(img.at(0, 0, 0), 1.0);
    EXPECT_EQ(img.at(1, 0, 0), 0.0);
    EXPECT_EQ(img.at(2, 0, 0), 0.0);
    EXPECT_EQ(img.at(0, 0, 1), 0.0);
    EXPECT_EQ(img.at(1, 0, 1), 128.0 / 255.0);
    EXPECT_EQ(img.at(2, 0, 1), 1.0);
}

TEST(Ppm, SixteenBitIsBigEndian)
{
    const std::string header = "P6 1 1 65535\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    for (unsigned v : {0x01u, 0x02u, 0xFFu, 0xFFu, 0x00u, 0x00u})
        bytes.push_back(static_cast<unsigned char>(v));
    const auto img = decode_ppm(bytes);
    EXPECT_EQ(img.at(0, 0, 0), 0x0102 / 65535.0);
    EXPECT_EQ(img.at(1, 0, 0), 1.0);
    EXPECT_EQ(img.at(2, 0, 0), 0.0);
}

TEST(Ppm, SixteenBitRoundTripIsWithinHalfStep)
{
    const auto img = random_image(7, 5, 1);
    const auto back = decode_ppm(encode_ppm(img, 16));
    ASSERT_EQ(back.values.size(), img.values.size());
    for (std::size_t i = 0; i < img.values.size(); ++i)
        EXPECT_LE(std::abs(back.values[i] - img.values[i]), 0.5 / 65535.0 + 1e-15);
    // A second pass is exact: decoded values are already on the grid.
    EXPECT_EQ(decode_ppm(encode_ppm(back, 16)).values, back.values);
}

TEST(Ppm, EightBitRoundsHalfUpAndKeepsEndpoints)
{
    ImageBuffer img(4, 1);
    const double vals[4] = {0.0, 1.0, 0.5 / 255.0, 1.49 / 255.0};
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t c = 0; c < 3; ++c)
            img.at(c, 0, x) = vals[x];
    const auto back = decode_ppm(encode_ppm(img, 8));
    EXPECT_EQ(back.at(0, 0, 0), 0.0);
    EXPECT_EQ(back.at(0, 0, 1), 1.0);
    EXPECT_EQ(back.at(0, 0, 2), 1.0 / 255.0);
    EXPECT_EQ(back.at(0, 0, 3), 1.0 / 255.0);
}

TEST(Ppm, RejectsMalformedInput)
{
    auto bytes_of = [](const std::string& s) { return std::vector<unsigned char>(s.begin(), s.end()); };
    EXPECT_THROW(decode_ppm(bytes_of("P3\n1 1\n255\n000")), IoError);
    EXPECT_THROW(decode_ppm(bytes_of("P6\n1 1\n255\n\x01\x02")), IoError);
    EXPECT_THROW(decode_ppm(bytes_of("P6\n0 1\n255\n")), IoError);
    EXPECT_THROW(decode_ppm(bytes_of("P6\n1 1\n1023\n\x01\x02\x03\x04\x05\x06")), IoError);
    EXPECT_THROW(decode_ppm(bytes_of("P6\nx 1\n255\n\x01\x02\x03")), IoError);
    EXPECT_THROW(encode_ppm(ImageBuffer(1, 1), 12), ConfigError);
}

TEST(Ppm, FileRoundTripAndMissingFile)
{
    const auto dir = fresh_dir("file");
    const auto img = random_image(6, 4, 2);
    save_image(img, dir / "a.ppm");
    EXPECT_EQ(load_image(dir / "a.ppm").values, decode_ppm(encode_ppm(img)).values);
    EXPECT_THROW(load_image(dir / "missing.ppm"), IoError);
    fs::remove_all(dir);
}

TEST(Haze, FullTransmissionIsIdentity)
{
    const auto img = random_image(8, 8, 3);
    EXPECT_EQ(synth_haze(img, 1.0, {0.9, 0.8, 0.7}).values, img.values);
}

TEST(Haze, TinyTransmissionGivesAirlight)
{
    const auto img = random_image(8, 8, 4);
    const std::array<double, 3> a{0.9, 0.8, 0.7};
    const auto out = synth_haze(img, 1e-6, a);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < img.plane(); ++i)
            EXPECT_NEAR(out.values[c * img.plane() + i], a[c], 1e-6);
}

TEST(Haze, MatchesPerPixelModel)
{
    const auto img = random_image(9, 7, 5);
    const auto t = smooth_transmission(9, 7, 0.3, 0.7, 11);
    const std::array<double, 3> a{0.85, 0.8, 0.75};
    const auto out = synth_haze(img, t, a);
    EXPECT_EQ(out.provenance, Provenance::degraded);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 7; ++y)
            for (std::size_t x = 0; x < 9; ++x) {
                const double tt = t[y * 9 + x];
                EXPECT_NEAR(out.at(c, y, x), img.at(c, y, x) * tt + a[c] * (1 - tt), 1e-15);
            }
}

TEST(Haze, TransmissionStaysInRange)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        for (double t : smooth_transmission(16, 12, 0.3, 0.7, seed)) {
            EXPECT_GE(t, 0.3);
            EXPECT_LE(t, 0.7);
        }
    EXPECT_THROW(synth_haze(ImageBuffer(2, 2), 0.0, {0.5, 0.5, 0.5}), ConfigError);
}

TEST(Haze, CommutesWithHorizontalFlip)
{
    const auto img = random_image(10, 6, 6);
    EXPECT_EQ(hflip(synth_haze(img, 0.4, {0.8, 0.8, 0.8})).values,
              synth_haze(hflip(img), 0.4, {0.8, 0.8, 0.8}).values);
}

TEST(Blur, LengthOneIsIdentity)
{
    const auto img = random_image(8, 8, 7);
    EXPECT_EQ(synth_blur(img, 1, 30.0).values, img.values);
}

TEST(Blur, ConstantImageIsUnchanged)
{
    ImageBuffer img(12, 10, 0.37);
    for (double angle : {0.0, 45.0, 90.0, 123.0})
        for (double v : synth_blur(img, 7, angle).values)
            EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Blur, HorizontalKernelAveragesRowNeighbours)
{
    const auto img = random_image(11, 5, 8);
    const auto out = synth_blur(img, 3, 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 1; x + 1 < 11; ++x) {
                const double want =
                    (img.at(c, y, x - 1) + img.at(c, y, x) + img.at(c, y, x + 1)) / 3.0;
                EXPECT_NEAR(out.at(c, y, x), want, 1e-15);
            }
}

TEST(Snow, ZeroDensityIsIdentity)
{
    const auto img = random_image(16, 16, 9);
    EXPECT_EQ(synth_snow(img, 0.0, 2.0, 1).values, img.values);
}

TEST(Snow, OnlyBrightensAndIsDeterministic)
{
    const auto img = random_image(32, 32, 10);
    const auto a = synth_snow(img, 0.5, 2.0, 3);
    EXPECT_EQ(a.values, synth_snow(img, 0.5, 2.0, 3).values);
    bool changed = false;
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        EXPECT_GE(a.values[i], img.values[i] - 1e-15);
        EXPECT_LE(a.values[i], 1.0);
        changed = changed || a.values[i] != img.values[i];
    }
    EXPECT_TRUE(changed);
    EXPECT_THROW(synth_snow(img, 1.5, 2.0, 3), ConfigError);
}

TEST(DegradationSpec, CanonicalFormAndHashAreStable)
{
    DegradationSpec a, b;
    EXPECT_EQ(a.canonical(), b.canonical());
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 8u);
    b.seed = 1;
    EXPECT_NE(a.hash(), b.hash());
    b = a;
    b.kind = DegradationKind::blur;
    EXPECT_NE(a.canonical(), b.canonical());
}

TEST(DegradationSpec, ValidationAndKindParsing)
{
    DegradationSpec s;
    s.t_min = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = {};
    s.t_min = 0.8;
    EXPECT_THROW(s.validate(), ConfigError);
    s = {};
    s.blur_length = 0;
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_EQ(parse_kind("haze"), DegradationKind::haze);
    EXPECT_EQ(parse_kind("dehaze"), DegradationKind::haze);
    EXPECT_EQ(parse_kind("deblur"), DegradationKind::blur);
    EXPECT_EQ(parse_kind("desnow"), DegradationKind::snow);
    EXPECT_THROW(parse_kind("rain"), ConfigError);
}

TEST(Degrade, SeedDeterminism)
{
    const auto img = generate_clean_scene(24, 24, 5);
    EXPECT_EQ(img.values, generate_clean_scene(24, 24, 5).values);
    EXPECT_NE(img.values, generate_clean_scene(24, 24, 6).values);
    DegradationSpec spec;
    spec.seed = 42;
    EXPECT_EQ(degrade(img, spec, 3).values, degrade(img, spec, 3).values);
    EXPECT_NE(degrade(img, spec, 3).values, degrade(img, spec, 4).values);
}

TEST(Dataset, GeneratesCachesAndSplits)
{
    const auto dir = fresh_dir("set");
    generate_clean_set(dir, 5, 16, 1);
    DegradationSpec spec;
    const auto first = load_dataset(dir, spec);
    ASSERT_EQ(first.size(), 5u);
    EXPECT_EQ(first[0].name, "scene_0000.ppm");
    EXPECT_TRUE(fs::exists(dir / "degraded" / spec.hash() / "scene_0004.ppm"));
    EXPECT_TRUE(fs::exists(dir / "degraded" / spec.hash() / "spec.txt"));
    const auto second = load_dataset(dir, spec);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(first[i].degraded.values, second[i].degraded.values);
        EXPECT_NE(first[i].degraded.values, first[i].clean.values);
    }
    const auto split = split_dataset(second);
    EXPECT_EQ(split.train.size(), 4u);
    ASSERT_EQ(split.val.size(), 1u);
    EXPECT_EQ(split.val[0].name, "scene_0004.ppm");
    fs::remove_all(dir);
    EXPECT_THROW(load_dataset(dir, spec), IoError);
}

TEST(Dataset, SplitKeepsAtLeastOneTrainingImage)
{
    std::vector<ImagePair> one(1);
    one[0].name = "a";
    const auto s = split_dataset(one);
    EXPECT_EQ(s.train.size(), 1u);
    EXPECT_TRUE(s.val.empty());
}

std::vector<ImagePair> synthetic_pairs(std::size_t count, std::size_t size)
{
    std::vector<ImagePair> pairs;
    for (std::size_t i = 0; i < count; ++i) {
        ImagePair p;
        p.name = "img" + std::to_string(i);
        p.clean = random_image(size, size, 100 + i);
        p.degraded = synth_haze(p.clean, 0.5, {0.85, 0.85, 0.85});
        pairs.push_back(std::move(p));
    }
    return pairs;
}

TEST(Patches, CropsAreAlignedAcrossThePair)
{
    const auto pairs = synthetic_pairs(3, 20);
    const auto patches = sample_patches(pairs, 12, 8, 77);
    ASSERT_EQ(patches.size(), 12u);
    for (const auto& p : patches) {
        const auto& src = pairs[p.source];
        EXPECT_EQ(p.clean.values, crop(src.clean, p.top, p.left, 8, 8).values);
        EXPECT_EQ(p.degraded.values, crop(src.degraded, p.top, p.left, 8, 8).values);
        EXPECT_LE(p.top + 8, 20u);
        EXPECT_LE(p.left + 8, 20u);
    }
    const auto again = sample_patches(pairs, 12, 8, 77);
    for (std::size_t i = 0; i < 12; ++i)
        EXPECT_EQ(again[i].clean.values, patches[i].clean.values);
}

TEST(Patches, RejectsBadPatchSizes)
{
    const auto pairs = synthetic_pairs(2, 16);
    EXPECT_THROW(sample_patches(pairs, 1, 20, 0), ConfigError);
    EXPECT_THROW(sample_patches(pairs, 1, 6, 0), ConfigError);
    EXPECT_THROW(sample_patches({}, 1, 8, 0), ConfigError);
}

TEST(Patches, FlipIsAnInvolutionAndKeepsPairsAligned)
{
    const auto img = random_image(9, 4, 12);
    EXPECT_EQ(hflip(hflip(img)).values, img.values);
    EXPECT_EQ(hflip(img).at(1, 2, 0), img.at(1, 2, 8));

    const auto pairs = synthetic_pairs(2, 16);
    const auto batch = sample_patches(pairs, 16, 8, 5);
    const auto aug = hflip_augment(batch, 9);
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& want = aug[i].flipped ? hflip(batch[i].clean) : batch[i].clean;
        EXPECT_EQ(aug[i].clean.values, want.values);
        const auto& want_d = aug[i].flipped ? hflip(batch[i].degraded) : batch[i].degraded;
        EXPECT_EQ(aug[i].degraded.values, want_d.values);
        flipped += aug[i].flipped;
    }
    EXPECT_GT(flipped, 0u);
    EXPECT_LT(flipped, batch.size());
    const auto twice = hflip_all(hflip_all(batch));
    for (std::size_t i = 0; i < batch.size(); ++i)
        EXPECT_EQ(twice[i].clean.values, batch[i].clean.values);
}

TEST(Tensors, ImageTensorRoundTrip)
{
    const auto a = random_image(8, 4, 13);
    const auto b = random_image(8, 4, 14);
    const auto t = images_to_tensor<double>({&a, &b});
    EXPECT_EQ(t.shape(), (Shape{2, 3, 4, 8}));
    EXPECT_EQ(t.at(1, 2, 3, 7), b.at(2, 3, 7));
    EXPECT_EQ(tensor_to_image(t, 1).values, b.values);
    EXPECT_EQ(tensor_to_image(image_to_tensor<double>(a)).values, a.values);

    Tensor<double> out_of_range({1, 3, 1, 1}, std::vector<double>{-0.5, 0.5, 1.5});
    EXPECT_EQ(tensor_to_image(out_of_range).values, (std::vector<double>{0.0, 0.5, 1.0}));
    const auto c = random_image(4, 4, 15);
    EXPECT_THROW(images_to_tensor<double>({&a, &c}), ShapeError);
}

} // namespace
} // namespace dsan
