// SPDX-License-Identifier: Apache-2.0
#include "dsan/data.hpp"

#include "dsan/error.hpp"
#include "dsan/random.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace dsan {

namespace fs = std::filesystem;

void clamp_unit(ImageBuffer& img)
{
    for (auto& v : img.values) {
        if (std::isnan(v))
            throw NumericalError("image contains NaN");
        v = std::clamp(v, 0.0, 1.0);
    }
}

namespace {

class HeaderParser {
public:
    explicit HeaderParser(const std::vector<unsigned char>& b) : b_(b) {}

    std::size_t number()
    {
        skip_space_and_comments();
        std::size_t v = 0;
        std::size_t digits = 0;
        while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
            v = v * 10 + (b_[pos_++] - '0');
            if (++digits > 9)
                throw IoError("PPM header field is too large");
        }
        if (digits == 0)
            throw IoError("malformed PPM header");
        return v;
    }
    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_start()
    {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_]))
            throw IoError("malformed PPM header");
        return pos_ + 1;
    }
    std::size_t pos_ = 2;

private:
    void skip_space_and_comments()
    {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }
    const std::vector<unsigned char>& b_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint32_t crc_of(const std::string& s)
{
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

void require_unit_interval(double v, const char* what)
{
    if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

} // namespace

ImageBuffer decode_ppm(const std::vector<unsigned char>& bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw IoError("not a binary PPM (P6) file");
    HeaderParser hp(bytes);
    const std::size_t w = hp.number();
    const std::size_t h = hp.number();
    const std::size_t maxval = hp.number();
    if (w == 0 || h == 0)
        throw IoError("PPM has zero size");
    if (maxval != 255 && maxval != 65535)
        throw IoError("unsupported PPM maxval " + std::to_string(maxval));
    const std::size_t start = hp.raster_start();
    const std::size_t bps = maxval == 255 ? 1 : 2;
    const std::size_t need = w * h * 3 * bps;
    if (bytes.size() - start < need)
        throw IoError("PPM payload is truncated");

    ImageBuffer img(w, h);
    const double scale = 1.0 / static_cast<double>(maxval);
    const unsigned char* p = bytes.data() + start;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                unsigned v = *p++;
                if (bps == 2)
                    v = (v << 8) | *p++;
                img.at(c, y, x) = v * scale;
            }
    return img;
}

std::vector<unsigned char> encode_ppm(const ImageBuffer& img, int bits)
{
    if (bits != 8 && bits != 16)
        throw ConfigError("PPM bit depth must be 8 or 16");
    const unsigned maxval = bits == 8 ? 255 : 65535;
    const std::string header = "P6\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n" + std::to_string(maxval) + "\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(out.size() + img.values.size() * (bits / 8));
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                const auto q = static_cast<unsigned>(std::floor(v * maxval + 0.5));
                if (bits == 16)
                    out.push_back(static_cast<unsigned char>(q >> 8));
                out.push_back(static_cast<unsigned char>(q & 0xFF));
            }
    return out;
}

ImageBuffer load_image(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in || std::filesystem::is_directory(path))
        throw IoError("cannot open image: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    try {
        return decode_ppm(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void save_image(const ImageBuffer& img, const fs::path& path, int bits)
{
    const auto bytes = encode_ppm(img, bits);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open image for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("failed writing image: " + path.string());
}

ImageBuffer generate_clean_scene(std::size_t width, std::size_t height, std::uint64_t seed)
{
    Rng rng(seed);
    ImageBuffer img(width, height);
    auto color = [&] { return std::array<double, 3>{rng.uniform(), rng.uniform(), rng.uniform()}; };
    const double w = static_cast<double>(width);
    const double h = static_cast<double>(height);

    const auto c0 = color();
    const auto c1 = color();
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double s = 0.5 + 0.5 * ((x / w - 0.5) * ux + (y / h - 0.5) * uy) * 1.4;
            for (std::size_t c = 0; c < 3; ++c)
                img.at(c, y, x) = c0[c] * (1.0 - s) + c1[c] * s;
        }

    auto paint = [&](auto&& inside, const std::array<double, 3>& col) {
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                if (inside(x + 0.5, y + 0.5))
                    for (std::size_t c = 0; c < 3; ++c)
                        img.at(c, y, x) = col[c];
    };
    for (int i = 0; i < 4; ++i) {
        const double x0 = rng.uniform(0.0, w), y0 = rng.uniform(0.0, h);
        const double rw = rng.uniform(0.1, 0.4) * w, rh = rng.uniform(0.1, 0.4) * h;
        paint([&](double x, double y) { return x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh; },
              color());
    }
    for (int i = 0; i < 3; ++i) {
        const double cx = rng.uniform(0.0, w), cy = rng.uniform(0.0, h);
        const double r = rng.uniform(0.05, 0.2) * std::min(w, h);
        paint([&](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r; },
              color());
    }
    // Striped disc: fine detail the restoration has to preserve.
    {
        const double cx = rng.uniform(0.2, 0.8) * w, cy = rng.uniform(0.2, 0.8) * h;
        const double r = rng.uniform(0.15, 0.3) * std::min(w, h);
        const double period = rng.uniform(3.0, 8.0);
        const double phi = rng.uniform(0.0, std::numbers::pi);
        const auto a = color();
        const auto b = color();
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                if (dx * dx + dy * dy >= r * r)
                    continue;
                const double s =
                    0.5 + 0.5 * std::sin(2.0 * std::numbers::pi *
                                         (dx * std::cos(phi) + dy * std::sin(phi)) / period);
                for (std::size_t c = 0; c < 3; ++c)
                    img.at(c, y, x) = a[c] * (1.0 - s) + b[c] * s;
            }
    }
    clamp_unit(img);
    return img;
}

const char* kind_name(DegradationKind k)
{
    switch (k) {
    case DegradationKind::haze:
        return "haze";
    case DegradationKind::blur:
        return "blur";
    case DegradationKind::snow:
        return "snow";
    }
    return "?";
}

DegradationKind parse_kind(const std::string& s)
{
    if (s == "haze" || s == "dehaze")
        return DegradationKind::haze;
    if (s == "blur" || s == "deblur")
        return DegradationKind::blur;
    if (s == "snow" || s == "desnow")
        return DegradationKind::snow;
    throw ConfigError("unknown degradation kind '" + s + "' (expected haze, blur or snow)");
}

void DegradationSpec::validate() const
{
    if (!(t_min > 0.0 && t_min <= t_max && t_max <= 1.0))
        throw ConfigError("transmission range must satisfy 0 < t_min <= t_max <= 1");
    for (double a : airlight)
        require_unit_interval(a, "airlight");
    if (blur_length < 1)
        throw ConfigError("blur length must be >= 1");
    if (!std::isfinite(blur_angle_deg))
        throw ConfigError("blur angle must be finite");
    require_unit_interval(snow_density, "snow density");
    if (!(flake_size > 0.0 && flake_size <= 64.0))
        throw ConfigError("flake size must lie in (0, 64]");
}

std::string DegradationSpec::canonical() const
{
    std::ostringstream os;
    os.precision(17);
    os << "kind=" << kind_name(kind) << "\n";
    switch (kind) {
    case DegradationKind::haze:
        os << "t_min=" << t_min << "\nt_max=" << t_max << "\nairlight=" << airlight[0] << ","
           << airlight[1] << "," << airlight[2] << "\n";
        break;
    case DegradationKind::blur:
        os << "length=" << blur_length << "\nangle_deg=" << blur_angle_deg << "\n";
        break;
    case DegradationKind::snow:
        os << "density=" << snow_density << "\nflake_size=" << flake_size << "\n";
        break;
    }
    os << "seed=" << seed << "\n";
    return os.str();
}

std::string DegradationSpec::hash() const
{
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc_of(canonical()));
    return buf;
}

ImageBuffer synth_haze(const ImageBuffer& clean, double t, const std::array<double, 3>& airlight)
{
    return synth_haze(clean, std::vector<double>(clean.plane(), t), airlight);
}

ImageBuffer synth_haze(const ImageBuffer& clean, const std::vector<double>& t_map,
                       const std::array<double, 3>& airlight)
{
    if (t_map.size() != clean.plane())
        throw ShapeError("transmission map size does not match the image");
    for (double t : t_map)
        if (!(t > 0.0 && t <= 1.0))
            throw ConfigError("transmission must lie in (0, 1]");
    ImageBuffer out = clean;
    out.provenance = Provenance::degraded;
    const std::size_t plane = clean.plane();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
            const double t = t_map[i];
            out.values[c * plane + i] = clean.values[c * plane + i] * t + airlight[c] * (1.0 - t);
        }
    clamp_unit(out);
    return out;
}

std::vector<double> smooth_transmission(std::size_t width, std::size_t height, double t_min,
                                        double t_max, std::uint64_t seed)
{
    Rng rng(seed);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double theta2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double freq = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> t(width * height);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double u = (x + 0.5) / width - 0.5;
            const double v = (y + 0.5) / height - 0.5;
            const double ramp = (u * std::cos(theta) + v * std::sin(theta)) * std::numbers::sqrt2;
            const double wave = std::sin(2.0 * std::numbers::pi * freq *
                                             (u * std::cos(theta2) + v * std::sin(theta2)) +
                                         phase);
            const double s = std::clamp(0.5 + 0.5 * (0.6 * ramp + 0.4 * wave), 0.0, 1.0);
            t[y * width + x] = t_min + (t_max - t_min) * s;
        }
    return t;
}

ImageBuffer synth_blur(const ImageBuffer& clean, std::size_t length, double angle_deg)
{
    if (length < 1)
        throw ConfigError("blur length must be >= 1");
    const double a = angle_deg * std::numbers::pi / 180.0;
    std::vector<std::pair<long, long>> taps;
    for (std::size_t i = 0; i < length; ++i) {
        const double r = static_cast<double>(i) - (static_cast<double>(length) - 1.0) / 2.0;
        taps.emplace_back(std::lround(r * std::sin(a)), std::lround(r * std::cos(a)));
    }
    const double wgt = 1.0 / static_cast<double>(length);
    ImageBuffer out(clean.width, clean.height, 0.0, Provenance::degraded);
    const long h = static_cast<long>(clean.height);
    const long w = static_cast<long>(clean.width);
    for (std::size_t c = 0; c < 3; ++c)
        for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x) {
                double acc = 0.0;
                for (auto [dy, dx] : taps) {
                    const long yy = std::clamp(y + dy, 0L, h - 1);
                    const long xx = std::clamp(x + dx, 0L, w - 1);
                    acc += clean.at(c, yy, xx);
                }
                out.at(c, y, x) = acc * wgt;
            }
    if (length == 1)
        out.values = clean.values;
    clamp_unit(out);
    return out;
}

ImageBuffer synth_snow(const ImageBuffer& clean, double density, double flake_size,
                       std::uint64_t seed)
{
    require_unit_interval(density, "snow density");
    if (!(flake_size > 0.0))
        throw ConfigError("flake size must be positive");
    ImageBuffer out = clean;
    out.provenance = Provenance::degraded;
    Rng rng(seed);
    const double area = static_cast<double>(clean.plane());
    const auto flakes = static_cast<std::size_t>(
        std::lround(density * area / (std::numbers::pi * flake_size * flake_size) * 0.5));
    for (std::size_t f = 0; f < flakes; ++f) {
        const double cx = rng.uniform(0.0, static_cast<double>(clean.width));
        const double cy = rng.uniform(0.0, static_cast<double>(clean.height));
        const double rx = flake_size * rng.uniform(0.6, 1.4);
        const double ry = rx * rng.uniform(0.6, 1.4);
        const double rot = rng.uniform(0.0, std::numbers::pi);
        const double opacity = rng.uniform(0.7, 1.0);
        const double cr = std::cos(rot), sr = std::sin(rot);
        const double reach = std::max(rx, ry) + 1.0;
        const long y0 = std::max(0L, static_cast<long>(std::floor(cy - reach)));
        const long y1 = std::min(static_cast<long>(clean.height) - 1, static_cast<long>(cy + reach));
        const long x0 = std::max(0L, static_cast<long>(std::floor(cx - reach)));
        const long x1 = std::min(static_cast<long>(clean.width) - 1, static_cast<long>(cx + reach));
        for (long y = y0; y <= y1; ++y)
            for (long x = x0; x <= x1; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                const double u = (dx * cr + dy * sr) / rx;
                const double v = (-dx * sr + dy * cr) / ry;
                const double r2 = u * u + v * v;
                if (r2 >= 1.0)
                    continue;
                const double alpha = opacity * std::sqrt(1.0 - r2);
                for (std::size_t c = 0; c < 3; ++c) {
                    double& p = out.at(c, y, x);
                    p = p * (1.0 - alpha) + alpha;
                }
            }
    }
    clamp_unit(out);
    return out;
}

ImageBuffer degrade(const ImageBuffer& clean, const DegradationSpec& spec, std::uint64_t image_index)
{
    spec.validate();
    const std::uint64_t seed = mix_seed(spec.seed, image_index);
    switch (spec.kind) {
    case DegradationKind::haze:
        return synth_haze(clean,
                          smooth_transmission(clean.width, clean.height, spec.t_min, spec.t_max, seed),
                          spec.airlight);
    case DegradationKind::blur:
        return synth_blur(clean, spec.blur_length, spec.blur_angle_deg);
    case DegradationKind::snow:
        return synth_snow(clean, spec.snow_density, spec.flake_size, seed);
    }
    throw ConfigError("unknown degradation kind");
}

void generate_clean_set(const fs::path& root, std::size_t count, std::size_t size,
                        std::uint64_t seed)
{
    std::error_code ec;
    fs::create_directories(root / "clean", ec);
    if (ec)
        throw IoError("cannot create " + (root / "clean").string() + ": " + ec.message());
    for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu.ppm", i);
        const auto path = root / "clean" / name;
        if (!fs::exists(path))
            save_image(generate_clean_scene(size, size, mix_seed(seed, i)), path);
    }
}

std::vector<ImagePair> load_dataset(const fs::path& root, const DegradationSpec& spec)
{
    spec.validate();
    const auto clean_dir = root / "clean";
    if (!fs::is_directory(clean_dir))
        throw IoError("dataset has no clean/ directory: " + root.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(clean_dir))
        if (e.is_regular_file() && e.path().extension() == ".ppm")
            files.push_back(e.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (files.empty())
        throw IoError("no .ppm images under " + clean_dir.string());

    const auto cache = root / "degraded" / spec.hash();
    std::error_code ec;
    fs::create_directories(cache, ec);
    if (ec)
        throw IoError("cannot create cache directory " + cache.string() + ": " + ec.message());
    const auto spec_file = cache / "spec.txt";
    if (!fs::exists(spec_file)) {
        std::ofstream(spec_file) << spec.canonical();
    }

    std::vector<ImagePair> out;
    for (const auto& f : files) {
        ImagePair p;
        p.name = f.filename().string();
        p.clean = load_image(f);
        const auto dpath = cache / f.filename();
        if (fs::exists(dpath)) {
            p.degraded = load_image(dpath);
            if (p.degraded.width != p.clean.width || p.degraded.height != p.clean.height)
                throw IoError("cached degraded image size mismatch: " + dpath.string());
        } else {
            // Re-read through the 16-bit encoding so fresh and cached runs see identical data.
            p.degraded = decode_ppm(encode_ppm(degrade(p.clean, spec, crc_of(p.name)), 16));
            save_image(p.degraded, dpath);
        }
        p.degraded.provenance = Provenance::degraded;
        out.push_back(std::move(p));
    }
    return out;
}

Split split_dataset(std::vector<ImagePair> pairs)
{
    std::sort(pairs.begin(), pairs.end(),
              [](const ImagePair& a, const ImagePair& b) { return a.name < b.name; });
    std::size_t n_train = std::max<std::size_t>(1, pairs.size() * 8 / 10);
    if (n_train > pairs.size())
        n_train = pairs.size();
    Split s;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (i < n_train ? s.train : s.val).push_back(std::move(pairs[i]));
    return s;
}

ImageBuffer crop(const ImageBuffer& img, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width)
{
    if (top + height > img.height || left + width > img.width)
        throw ShapeError("crop window exceeds the image");
    ImageBuffer out(width, height, 0.0, img.provenance);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                out.at(c, y, x) = img.at(c, top + y, left + x);
    return out;
}

ImageBuffer hflip(const ImageBuffer& img)
{
    ImageBuffer out(img.width, img.height, 0.0, img.provenance);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

std::vector<PatchPair> sample_patches(const std::vector<ImagePair>& pairs, std::size_t count,
                                      std::size_t patch, std::uint64_t seed)
{
    if (pairs.empty())
        throw ConfigError("cannot sample patches from an empty dataset");
    if (patch == 0 || patch % 4 != 0)
        throw ConfigError("patch size must be a positive multiple of 4");
    for (const auto& p : pairs)
        if (patch > std::min(p.clean.width, p.clean.height))
            throw ConfigError("patch size " + std::to_string(patch) + " exceeds image '" + p.name +
                              "'");
    Rng rng(seed);
    std::vector<PatchPair> out;
    for (std::size_t i = 0; i < count; ++i) {
        PatchPair pp;
        pp.source = static_cast<std::size_t>(rng.below(pairs.size()));
        const auto& src = pairs[pp.source];
        pp.top = static_cast<std::size_t>(rng.below(src.clean.height - patch + 1));
        pp.left = static_cast<std::size_t>(rng.below(src.clean.width - patch + 1));
        pp.clean = crop(src.clean, pp.top, pp.left, patch, patch);
        pp.degraded = crop(src.degraded, pp.top, pp.left, patch, patch);
        out.push_back(std::move(pp));
    }
    return out;
}

std::vector<PatchPair> hflip_augment(std::vector<PatchPair> batch, std::uint64_t seed)
{
    Rng rng(seed);
    for (auto& p : batch)
        if (rng.bernoulli(0.5)) {
            p.clean = hflip(p.clean);
            p.degraded = hflip(p.degraded);
            p.flipped = !p.flipped;
        }
    return batch;
}

std::vector<PatchPair> hflip_all(std::vector<PatchPair> batch)
{
    for (auto& p : batch) {
        p.clean = hflip(p.clean);
        p.degraded = hflip(p.degraded);
        p.flipped = !p.flipped;
    }
    return batch;
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<const ImageBuffer*>& images)
{
    if (images.empty())
        throw ShapeError("images_to_tensor needs at least one image");
    const std::size_t w = images[0]->width, h = images[0]->height;
    std::vector<T> data;
    data.reserve(images.size() * 3 * w * h);
    for (const auto* img : images) {
        if (img->width != w || img->height != h)
            throw ShapeError("images in a batch must share a size");
        for (double v : img->values)
            data.push_back(static_cast<T>(v));
    }
    return Tensor<T>({images.size(), 3, h, w}, std::move(data));
}

template <typename T>
Tensor<T> image_to_tensor(const ImageBuffer& img)
{
    return images_to_tensor<T>({&img});
}

template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, std::size_t n)
{
    if (t.rank() != 4 || t.dim(1) != 3 || n >= t.dim(0))
        throw ShapeError("tensor_to_image expects an N x 3 x H x W tensor, got " +
                         shape_str(t.shape()));
    ImageBuffer img(t.dim(3), t.dim(2));
    const std::size_t len = img.values.size();
    auto src = t.data().subspan(n * len, len);
    for (std::size_t i = 0; i < len; ++i)
        img.values[i] = static_cast<double>(src[i]);
    clamp_unit(img);
    return img;
}

template Tensor<float> images_to_tensor(const std::vector<const ImageBuffer*>&);
template Tensor<double> images_to_tensor(const std::vector<const ImageBuffer*>&);
template Tensor<float> image_to_tensor(const ImageBuffer&);
template Tensor<double> image_to_tensor(const ImageBuffer&);
template ImageBuffer tensor_to_image(const Tensor<float>&, std::size_t);
template ImageBuffer tensor_to_image(const Tensor<double>&, std::size_t);

} // namespace dsan
