#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nvsim/params.hpp"

namespace nvsim {

/// Square raster of lateral probe positions. Pixel (ix, iy) sits at
/// origin + pitch * (ix, iy).
struct ScanGrid {
    std::size_t nx = 20;
    std::size_t ny = 20;
    double pitch = 1e-9;
    LateralPoint origin{0.0, 0.0};

    /// n x n grid whose pixel (n/2, n/2) lies on `center`.
    static ScanGrid centered(std::size_t n, double pitch, LateralPoint center);

    [[nodiscard]] std::size_t size() const { return nx * ny; }
    [[nodiscard]] LateralPoint position(std::size_t ix, std::size_t iy) const
    {
        return {origin[0] + pitch * static_cast<double>(ix),
                origin[1] + pitch * static_cast<double>(iy)};
    }
};

struct ScanImage {
    std::size_t nx = 0;
    std::size_t ny = 0;
    double pitch = 0.0;
    double dwell = 0.0;
    double h_p = 0.0;
    std::uint64_t seed = 0;
    std::size_t samples = 0;        // readouts per pixel
    double p_off = 0.0;             // population with no channel nearby
    std::vector<double> estimate;   // sampled P, row-major (iy * nx + ix)
    std::vector<double> expected;   // exact P

    [[nodiscard]] double at(std::size_t ix, std::size_t iy) const { return estimate[iy * nx + ix]; }
    /// p_off - estimate.
    [[nodiscard]] std::vector<double> delta_p() const;
    /// Pixel index of the smallest estimate.
    [[nodiscard]] std::size_t argmin() const;
};

/// Open-channel population at a probe offset d laterally from every channel
/// in `channels`: each contributes sigma_ic(sqrt(h_p^2 + d^2)) in quadrature.
double pixel_population(const Config& config, LateralPoint probe,
                        const std::vector<LateralPoint>& channels);

/// floor(dwell * f_m) Bernoulli readouts per pixel, pixel k drawing from
/// stream (seed, k). Throws std::invalid_argument if dwell is below one cycle.
ScanImage scan(const Config& config, const ScanGrid& grid, double dwell, std::uint64_t seed,
               std::size_t threads);

double acquisition_time(const ScanGrid& grid, double dwell);

struct PointSpreadProfile {
    std::vector<double> offset;    // m
    std::vector<double> delta_p;

    /// Full width at half maximum of the radially symmetric profile.
    [[nodiscard]] double fwhm() const;
};

/// Delta P against lateral offset from a single channel at the configured tau.
PointSpreadProfile point_spread_profile(const Config& config, double h_p, double d_max,
                                        std::size_t points);

/// Matched-filter contrast-to-noise ratio against the exact channel template
/// p_off - expected. Noise is estimated from pixels where the template is below
/// 1% of its peak.
double image_cnr(const ScanImage& image);

/// P2 graymap with values mapped linearly from [min, max] to [0, 65535].
std::string to_pgm(const std::vector<double>& values, std::size_t nx, std::size_t ny);

} // namespace nvsim
