#include "nvsim/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nvsim/dephasing.hpp"
#include "nvsim/measurement.hpp"
#include "nvsim/noise.hpp"
#include "nvsim/parallel.hpp"

namespace nvsim {

ScanGrid ScanGrid::centered(std::size_t n, double pitch, LateralPoint center)
{
    ScanGrid g;
    g.nx = n;
    g.ny = n;
    g.pitch = pitch;
    const double half = static_cast<double>(n / 2);
    g.origin = {center[0] - pitch * half, center[1] - pitch * half};
    return g;
}

std::vector<double> ScanImage::delta_p() const
{
    std::vector<double> out(estimate.size());
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        out[i] = p_off - estimate[i];
    }
    return out;
}

std::size_t ScanImage::argmin() const
{
    return static_cast<std::size_t>(std::min_element(estimate.begin(), estimate.end())
                                    - estimate.begin());
}

namespace {

double channel_sigma_sq(const Config& config, double h_p, LateralPoint probe,
                        const std::vector<LateralPoint>& channels)
{
    const auto& env = config.environment;
    double s2 = 0.0;
    for (const auto& ch : channels) {
        const double dx = probe[0] - ch[0];
        const double dy = probe[1] - ch[1];
        const double r = std::sqrt(h_p * h_p + dx * dx + dy * dy);
        const double s = sigma_ion_channel(config.constants, r, env.N_ion, env.N_H2O, env.mu_ion,
                                           env.mu_H2O);
        s2 += s * s;
    }
    return s2;
}

double open_population(const Config& config, const EnvelopeSet& envelopes, double sigma_sq)
{
    const double tau = config.probe.tau;
    DephasingModel ic = envelopes.ion_channel;
    ic.source.sigma_B = std::sqrt(sigma_sq);
    return population(envelopes.off(tau) * ic.envelope(tau));
}

} // namespace

double pixel_population(const Config& config, LateralPoint probe,
                        const std::vector<LateralPoint>& channels)
{
    const EnvelopeSet envelopes = build_envelopes(config);
    return open_population(config, envelopes,
                           channel_sigma_sq(config, config.probe.h_p, probe, channels));
}

ScanImage scan(const Config& config, const ScanGrid& grid, double dwell, std::uint64_t seed,
               std::size_t threads)
{
    const auto& probe = config.probe;
    const double f_m = cycle_rate(probe.tau, probe.tau_m, probe.tau_2pi);
    if (dwell * f_m < 1.0) {
        throw std::invalid_argument("dwell time is shorter than one measurement cycle");
    }
    const EnvelopeSet envelopes = build_envelopes(config);
    const auto& channels = config.environment.channel_positions;

    ScanImage image;
    image.nx = grid.nx;
    image.ny = grid.ny;
    image.pitch = grid.pitch;
    image.dwell = dwell;
    image.h_p = probe.h_p;
    image.seed = seed;
    image.samples = static_cast<std::size_t>(std::floor(dwell * f_m + 1e-9));
    image.p_off = envelopes.p_off(probe.tau);
    image.estimate.assign(grid.size(), 0.0);
    image.expected.assign(grid.size(), 0.0);

    parallel_for(grid.size(), threads, [&](std::size_t k) {
        const std::size_t ix = k % grid.nx;
        const std::size_t iy = k / grid.nx;
        const double p = open_population(
            config, envelopes, channel_sigma_sq(config, probe.h_p, grid.position(ix, iy), channels));
        Rng rng = make_stream(seed, k);
        std::binomial_distribution<std::size_t> draws(image.samples, p);
        image.expected[k] = p;
        image.estimate[k] = static_cast<double>(draws(rng)) / static_cast<double>(image.samples);
    });
    return image;
}

double acquisition_time(const ScanGrid& grid, double dwell)
{
    return static_cast<double>(grid.size()) * dwell;
}

double PointSpreadProfile::fwhm() const
{
    if (delta_p.empty() || delta_p.front() <= 0.0) {
        return 0.0;
    }
    const double half = 0.5 * delta_p.front();
    for (std::size_t i = 1; i < delta_p.size(); ++i) {
        if (delta_p[i] <= half) {
            const double f = (delta_p[i - 1] - half) / (delta_p[i - 1] - delta_p[i]);
            return 2.0 * (offset[i - 1] + f * (offset[i] - offset[i - 1]));
        }
    }
    return 2.0 * offset.back();
}

PointSpreadProfile point_spread_profile(const Config& config, double h_p, double d_max,
                                        std::size_t points)
{
    if (!(h_p > 0.0) || points < 2) {
        throw std::invalid_argument("profile needs h_p > 0 and at least two points");
    }
    ProbeConfig probe = config.probe;
    probe.h_p = h_p;
    Config local = config;
    local.probe = probe;
    const EnvelopeSet envelopes = build_envelopes(local);
    const double p_off = envelopes.p_off(probe.tau);
    const std::vector<LateralPoint> channel{{0.0, 0.0}};

    PointSpreadProfile out;
    for (std::size_t i = 0; i < points; ++i) {
        const double d = d_max * static_cast<double>(i) / static_cast<double>(points - 1);
        const double s2 = channel_sigma_sq(local, h_p, {d, 0.0}, channel);
        out.offset.push_back(d);
        out.delta_p.push_back(p_off - open_population(local, envelopes, s2));
    }
    return out;
}

double image_cnr(const ScanImage& image)
{
    const std::size_t n = image.estimate.size();
    std::vector<double> weight(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        weight[i] = image.p_off - image.expected[i];
        peak = std::max(peak, weight[i]);
    }
    if (peak <= 0.0) {
        return 0.0;
    }
    std::vector<double> background;
    for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] < 0.01 * peak) {
            background.push_back(image.estimate[i]);
        }
    }
    if (background.size() < 2) {
        return 0.0;
    }
    const double bg = static_cast<double>(background.size());
    const double mean = pairwise_sum(background) / bg;
    double var = 0.0;
    for (double v : background) {
        var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / (bg - 1.0));
    if (sd <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    double signal = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        signal += weight[i] * (mean - image.estimate[i]);
        norm += weight[i] * weight[i];
    }
    return signal / (sd * std::sqrt(norm));
}

std::string to_pgm(const std::vector<double>& values, std::size_t nx, std::size_t ny)
{
    if (values.size() != nx * ny) {
        throw std::invalid_argument("image size does not match its dimensions");
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double span = values.empty() ? 0.0 : *hi - *lo;
    std::ostringstream os;
    os << "P2\n" << nx << ' ' << ny << "\n65535\n";
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double v = values[iy * nx + ix];
            const long level = span > 0.0 ? std::lround((v - *lo) / span * 65535.0) : 0;
            os << level << (ix + 1 < nx ? ' ' : '\n');
        }
    }
    return os.str();
}

} // namespace nvsim
