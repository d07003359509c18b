// SPDX-License-Identifier: Apache-2.0
#include "dsan/metrics.hpp"

#include "dsan/error.hpp"

#include <cmath>
#include <ostream>

namespace dsan {

double psnr(std::span<const double> a, std::span<const double> b, double peak)
{
    if (a.size() != b.size() || a.empty())
        throw ShapeError("psnr operands must be non-empty and equally sized");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0)
        return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak)
{
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("psnr: image sizes differ");
    return psnr(std::span<const double>(a.values), std::span<const double>(b.values), peak);
}

std::vector<double> luma(const ImageBuffer& img)
{
    const std::size_t n = img.plane();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = 0.299 * img.values[i] + 0.587 * img.values[n + i] + 0.114 * img.values[2 * n + i];
    return y;
}

namespace {

std::vector<double> gaussian_taps()
{
    std::vector<double> g(kSsimWindow);
    double total = 0.0;
    const double mid = (kSsimWindow - 1) / 2.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const double x = static_cast<double>(i) - mid;
        g[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        total += g[i];
    }
    for (auto& v : g)
        v /= total;
    return g;
}

// Valid-mode separable filtering: (h - 10) x (w - 10) output.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::vector<double>& g)
{
    const std::size_t k = g.size();
    const std::size_t ow = w - k + 1, oh = h - k + 1;
    std::vector<double> tmp(h * ow);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                acc += g[i] * src[y * w + x + i];
            tmp[y * ow + x] = acc;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                acc += g[i] * tmp[(y + i) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

} // namespace

double ssim_plane(std::span<const double> a, std::span<const double> b, std::size_t width,
                  std::size_t height, double peak)
{
    if (a.size() != width * height || b.size() != width * height)
        throw ShapeError("ssim: plane sizes do not match");
    if (width < kSsimWindow || height < kSsimWindow)
        throw ShapeError("ssim: image is smaller than the 11x11 window");
    const auto g = gaussian_taps();
    const std::size_t n = width * height;
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, width, height, g);
    const auto my = filter_valid(y, width, height, g);
    const auto sxx = filter_valid(xx, width, height, g);
    const auto syy = filter_valid(yy, width, height, g);
    const auto sxy = filter_valid(xy, width, height, g);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cov = sxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, double peak)
{
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("ssim: image sizes differ");
    return ssim_plane(luma(a), luma(b), a.width, a.height, peak);
}

void MetricReport::add(std::string image, const ImageBuffer& restored, const ImageBuffer& reference)
{
    rows.push_back({std::move(image), psnr(restored, reference), ssim(restored, reference)});
}

double MetricReport::mean_psnr() const
{
    double s = 0.0;
    for (const auto& r : rows)
        s += r.psnr_db;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim() const
{
    double s = 0.0;
    for (const auto& r : rows)
        s += r.ssim;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

void MetricReport::write_csv(std::ostream& os) const
{
    const auto old = os.precision(10);
    os << "image,psnr_db,ssim\n";
    for (const auto& r : rows)
        os << r.image << "," << r.psnr_db << "," << r.ssim << "\n";
    os << "mean," << mean_psnr() << "," << mean_ssim() << "\n";
    os.precision(old);
}

} // namespace dsan
