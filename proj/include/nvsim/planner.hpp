#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "nvsim/params.hpp"

namespace nvsim {

/// Returned by temporal_resolution when the contrast vanishes.
inline constexpr double kUnresolvable = std::numeric_limits<double>::infinity();

/// delta_t = (tau + tau_m) / Delta P(tau)^2.
double temporal_resolution(const Config& config, double tau, double h_p, double T2);

/// Running-average length that realizes a resolution delta_t.
std::size_t averaging_window(double delta_t, double tau, double tau_m);

struct ResolutionCurve {
    std::vector<double> tau;
    std::vector<double> delta_p;
    std::vector<double> delta_t;
    double tau_star = 0.0;
    double delta_t_star = kUnresolvable;
    std::size_t n_tau_star = 0;
    double h_p = 0.0;
    double T2 = 0.0;
};

/// Minimizes delta_t over tau in (0, T2): log-spaced grid, then golden-section
/// refinement around the best grid point.
ResolutionCurve optimize_tau(const Config& config, double h_p, double T2,
                             std::size_t grid_points = 200);

/// e-folding time of the combined water, lipid and electrolyte envelope.
double background_dephasing_time(const Config& config, double h_p);

/// Dense-ensemble NV-NV dephasing rate (sqrt(2 pi) / 3) (hbar mu0 / 4 pi) gamma^2 n,
/// with gamma in angular units.
double ensemble_rate(const PhysicalConstants& c, double n_nv);

/// Coupling scale mu0 hbar gamma^2 / (4 pi r^3) / (2 pi) in Hz at the mean NV
/// spacing n^(-1/3).
double ensemble_coupling_scale(const PhysicalConstants& c, double n_nv);

struct EnsembleSpec {
    double n_nv = 1e24;             // m^-3
    double pixel_area = 1e-12;      // m^2
    double channel_density = 2e15;  // m^-2
    double layer_depth = 3e-9;      // m, NVs sit between h_p and h_p + layer_depth
    std::size_t nv_samples = 4000;
};

struct PixelContrast {
    double tau = 0.0;
    double delta_phi = 0.0;
    double stderr_phi = 0.0;
    double gamma_nv = 0.0;
    double nv_count = 0.0;          // expected NVs in the pixel
    std::size_t channels = 0;
};

/// Summed Delta P over the NVs of one pixel. NVs are placed uniformly in the
/// layer, with random axis orientation; channels are Poisson-distributed over
/// the pixel with periodic lateral boundaries. Each NV sees the ion-channel
/// noise of all channels, weighted by its projection factor (1 + 3 cos^2) / 4,
/// on top of the background including the NV-NV rate.
PixelContrast pixel_contrast(const Config& config, const EnsembleSpec& spec, double h_p,
                             double tau, std::uint64_t seed, std::size_t threads);

struct EnsembleOptimum {
    std::vector<double> tau;
    std::vector<double> delta_phi;
    std::vector<double> stderr_phi;
    PixelContrast best;
};

/// Delta Phi over a log tau grid on [tau_lo, tau_hi], one geometry for all tau,
/// refined by golden-section search.
EnsembleOptimum optimize_ensemble_tau(const Config& config, const EnsembleSpec& spec, double h_p,
                                      double tau_lo, double tau_hi, std::size_t grid_points,
                                      std::uint64_t seed, std::size_t threads);

} // namespace nvsim
