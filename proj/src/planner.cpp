#include "nvsim/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "nvsim/dephasing.hpp"
#include "nvsim/noise.hpp"
#include "nvsim/optimize.hpp"
#include "nvsim/parallel.hpp"

namespace nvsim {

double temporal_resolution(const Config& config, double tau, double h_p, double T2)
{
    if (!(tau > 0.0) || !(tau < T2)) {
        throw std::invalid_argument("temporal_resolution needs 0 < tau < T2");
    }
    const double dp = contrast(config, tau, h_p, T2);
    if (!(dp > 0.0)) {
        return kUnresolvable;
    }
    return (tau + config.probe.tau_m) / (dp * dp);
}

std::size_t averaging_window(double delta_t, double tau, double tau_m)
{
    if (std::isinf(delta_t)) {
        return 0;
    }
    return static_cast<std::size_t>(std::ceil(delta_t / (tau + tau_m) - 1e-12));
}

ResolutionCurve optimize_tau(const Config& config, double h_p, double T2, std::size_t grid_points)
{
    ProbeConfig probe = config.probe;
    probe.h_p = h_p;
    probe.T2 = T2;
    const EnvelopeSet envelopes = build_envelopes(config.constants, config.environment, probe);
    const double tau_m = config.probe.tau_m;
    auto resolution = [&](double tau) {
        const double dp = envelopes.contrast(tau);
        return dp > 0.0 ? (tau + tau_m) / (dp * dp) : kUnresolvable;
    };

    ResolutionCurve curve;
    curve.h_p = h_p;
    curve.T2 = T2;
    const double lo = std::log(T2 * 1e-4);
    const double hi = std::log(T2 * (1.0 - 1e-6));
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double tau = std::exp(lo + (hi - lo) * static_cast<double>(i)
                                              / static_cast<double>(grid_points - 1));
        curve.tau.push_back(tau);
        curve.delta_p.push_back(envelopes.contrast(tau));
        curve.delta_t.push_back(resolution(tau));
    }
    // log of delta_t keeps the objective finite-valued near the divergence
    auto objective = [&](double log_tau) {
        const double dt = resolution(std::exp(log_tau));
        return std::isinf(dt) ? std::numeric_limits<double>::max() : std::log(dt);
    };
    const double best = minimize_on_grid_then_golden(objective, lo, hi, grid_points, 1e-9);
    curve.tau_star = std::exp(best);
    curve.delta_t_star = resolution(curve.tau_star);
    curve.n_tau_star = averaging_window(curve.delta_t_star, curve.tau_star, tau_m);
    return curve;
}

double background_dephasing_time(const Config& config, double h_p)
{
    ProbeConfig probe = config.probe;
    probe.h_p = h_p;
    const EnvelopeSet envelopes = build_envelopes(config.constants, config.environment, probe);
    auto exponent = [&](double t) { return -std::log(envelopes.background(t)); };
    double hi = 1e-6;
    while (exponent(hi) < 1.0) {
        hi *= 2.0;
        if (hi > 1e6) {
            return std::numeric_limits<double>::infinity();
        }
    }
    double lo = 0.0;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (exponent(mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double ensemble_rate(const PhysicalConstants& c, double n_nv)
{
    if (!(n_nv > 0.0)) {
        throw std::invalid_argument("NV density must be positive");
    }
    const double g = c.gamma_p_angular;
    return std::sqrt(2.0 * std::numbers::pi) / 3.0 * c.hbar * c.mu0_over_4pi * g * g * n_nv;
}

double ensemble_coupling_scale(const PhysicalConstants& c, double n_nv)
{
    const double g = c.gamma_p_angular;
    return c.mu0_over_4pi * c.hbar * g * g * n_nv / (2.0 * std::numbers::pi);
}

namespace {

struct EnsembleGeometry {
    std::vector<double> sigma_sq;   // projected ion-channel field variance per sampled NV
    std::size_t channels = 0;
    double nv_count = 0.0;
};

EnsembleGeometry sample_geometry(const Config& config, const EnsembleSpec& spec, double h_p,
                                 std::uint64_t seed, std::size_t threads)
{
    if (!(spec.pixel_area > 0.0) || !(spec.n_nv > 0.0) || spec.channel_density < 0.0
        || spec.nv_samples == 0) {
        throw std::invalid_argument("ensemble spec needs positive area, density and samples");
    }
    const auto& env = config.environment;
    // sigma_ic(h) = K / h^3
    const double K = sigma_ion_channel(config.constants, 1.0, env.N_ion, env.N_H2O, env.mu_ion,
                                       env.mu_H2O);
    const double side = std::sqrt(spec.pixel_area);

    EnsembleGeometry g;
    g.nv_count = spec.n_nv * spec.pixel_area * spec.layer_depth;
    Rng rng = make_stream(seed, 0);
    std::poisson_distribution<std::size_t> count(spec.channel_density * spec.pixel_area);
    g.channels = spec.channel_density > 0.0 ? count(rng) : 0;
    std::uniform_real_distribution<double> lateral(0.0, side);
    std::vector<LateralPoint> channels(g.channels);
    for (auto& ch : channels) {
        ch[0] = lateral(rng);
        ch[1] = lateral(rng);
    }

    g.sigma_sq.assign(spec.nv_samples, 0.0);
    parallel_for(spec.nv_samples, threads, [&](std::size_t i) {
        Rng local = make_stream(seed, i + 1);
        std::uniform_real_distribution<double> xy(0.0, side);
        std::uniform_real_distribution<double> depth(0.0, spec.layer_depth);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> phi(0.0, 2.0 * std::numbers::pi);
        const double x = xy(local);
        const double y = xy(local);
        const double z = h_p + depth(local);
        const double cz = u(local);
        const double sz = std::sqrt(1.0 - cz * cz);
        const double p = phi(local);
        const double ax = sz * std::cos(p);
        const double ay = sz * std::sin(p);
        double sum = 0.0;
        for (const auto& ch : channels) {
            double dx = ch[0] - x;
            double dy = ch[1] - y;
            dx -= side * std::round(dx / side);
            dy -= side * std::round(dy / side);
            const double r2 = dx * dx + dy * dy + z * z;
            const double c = (dx * ax + dy * ay + z * cz) / std::sqrt(r2);
            sum += K * K / (r2 * r2 * r2) * (1.0 + 3.0 * c * c) / 4.0;
        }
        g.sigma_sq[i] = sum;
    });
    return g;
}

PixelContrast evaluate(const Config& config, const EnsembleGeometry& g, const EnsembleSpec& spec,
                       const EnvelopeSet& envelopes, double tau)
{
    const auto& c = config.constants;
    const double f_e = fluctuation_rate(SourceKind::IonChannel, c, config.environment, 0.0);
    const double gamma_nv = ensemble_rate(c, spec.n_nv);
    const double background = envelopes.off(tau) * std::exp(-gamma_nv * tau);
    const double scale = config.environment.c_ic * echo_filter_bracket(f_e * tau)
                         * std::pow(kEchoPhasePerCycle * c.gamma_p / f_e, 2);
    std::vector<double> dp(g.sigma_sq.size());
    for (std::size_t i = 0; i < dp.size(); ++i) {
        dp[i] = 0.5 * background * -std::expm1(-scale * g.sigma_sq[i]);
    }
    const double n = static_cast<double>(dp.size());
    const double mean = pairwise_sum(dp) / n;
    std::vector<double> dev(dp.size());
    for (std::size_t i = 0; i < dp.size(); ++i) {
        dev[i] = (dp[i] - mean) * (dp[i] - mean);
    }
    const double var = n > 1.0 ? pairwise_sum(dev) / (n - 1.0) : 0.0;

    PixelContrast out;
    out.tau = tau;
    out.gamma_nv = gamma_nv;
    out.nv_count = g.nv_count;
    out.channels = g.channels;
    out.delta_phi = g.nv_count * mean;
    out.stderr_phi = g.nv_count * std::sqrt(var / n);
    return out;
}

EnvelopeSet ensemble_envelopes(const Config& config, double h_p)
{
    ProbeConfig probe = config.probe;
    probe.h_p = h_p;
    return build_envelopes(config.constants, config.environment, probe);
}

} // namespace

PixelContrast pixel_contrast(const Config& config, const EnsembleSpec& spec, double h_p,
                             double tau, std::uint64_t seed, std::size_t threads)
{
    const auto geometry = sample_geometry(config, spec, h_p, seed, threads);
    return evaluate(config, geometry, spec, ensemble_envelopes(config, h_p), tau);
}

EnsembleOptimum optimize_ensemble_tau(const Config& config, const EnsembleSpec& spec, double h_p,
                                      double tau_lo, double tau_hi, std::size_t grid_points,
                                      std::uint64_t seed, std::size_t threads)
{
    if (!(tau_lo > 0.0) || !(tau_hi > tau_lo) || grid_points < 3) {
        throw std::invalid_argument("ensemble tau range needs 0 < lo < hi and >= 3 points");
    }
    const auto geometry = sample_geometry(config, spec, h_p, seed, threads);
    const auto envelopes = ensemble_envelopes(config, h_p);
    EnsembleOptimum out;
    const double lo = std::log(tau_lo);
    const double hi = std::log(tau_hi);
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double tau = std::exp(lo + (hi - lo) * static_cast<double>(i)
                                              / static_cast<double>(grid_points - 1));
        const auto pc = evaluate(config, geometry, spec, envelopes, tau);
        out.tau.push_back(tau);
        out.delta_phi.push_back(pc.delta_phi);
        out.stderr_phi.push_back(pc.stderr_phi);
    }
    auto objective = [&](double log_tau) {
        return -evaluate(config, geometry, spec, envelopes, std::exp(log_tau)).delta_phi;
    };
    const double best = minimize_on_grid_then_golden(objective, lo, hi, grid_points, 1e-6);
    out.best = evaluate(config, geometry, spec, envelopes, std::exp(best));
    return out;
}

} // namespace nvsim
