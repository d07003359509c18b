// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dsan/data.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dsan {

// Returned for identical inputs instead of +inf.
inline constexpr double kPsnrCapDb = 100.0;

// 10 * log10(peak^2 / MSE), capped at kPsnrCapDb.
double psnr(std::span<const double> a, std::span<const double> b, double peak = 1.0);
double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

// Rec.601 luma plane (0.299 R + 0.587 G + 0.114 B).
std::vector<double> luma(const ImageBuffer& img);

// Single-scale SSIM on one plane: 11x11 Gaussian window (sigma 1.5),
// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2, mean over valid window positions.
double ssim_plane(std::span<const double> a, std::span<const double> b, std::size_t width,
                  std::size_t height, double peak = 1.0);
// SSIM of the luma planes.
double ssim(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct MetricRow {
    std::string image;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    void add(std::string image, const ImageBuffer& restored, const ImageBuffer& reference);
    double mean_psnr() const;
    double mean_ssim() const;
    // "image,psnr_db,ssim" header, one row per image, then a "mean" row.
    void write_csv(std::ostream& os) const;
};

} // namespace dsan
