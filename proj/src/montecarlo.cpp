#include "nvsim/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvsim/dephasing.hpp"
#include "nvsim/noise.hpp"

namespace nvsim {

namespace {

double wrap(double x, double lo, double length)
{
    double r = std::fmod(x - lo, length);
    if (r < 0.0) {
        r += length;
    }
    return lo + r;
}

DipoleBath populate(BathKind kind, Vec3 lo, Vec3 hi, double density, double moment,
                    double diffusion, std::size_t max_particles, Rng& rng)
{
    DipoleBath bath;
    bath.kind = kind;
    bath.lo = lo;
    bath.hi = hi;
    bath.diffusion = diffusion;
    const double volume = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
    bath.physical_count = density * volume;
    const auto physical = static_cast<std::size_t>(std::llround(bath.physical_count));
    const std::size_t n = std::min(physical, max_particles);
    const double scale = n > 0 ? std::sqrt(bath.physical_count / static_cast<double>(n)) : 0.0;

    std::uniform_real_distribution<double> ux(lo.x, hi.x);
    std::uniform_real_distribution<double> uy(lo.y, hi.y);
    std::uniform_real_distribution<double> uz(lo.z, hi.z);
    bath.positions.reserve(n);
    bath.moments.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        const double z = uz(rng);
        bath.positions.push_back({x, y, z});
        bath.moments.push_back((moment * scale) * random_direction(rng));
    }
    bath.displacement.assign(n, Vec3{});
    return bath;
}

} // namespace

Vec3 random_direction(Rng& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> phi(0.0, 2.0 * std::numbers::pi);
    const double cz = u(rng);
    const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    const double p = phi(rng);
    return {sz * std::cos(p), sz * std::sin(p), cz};
}

DipoleBath make_water_bath(const Config& config, double h_p, std::size_t max_particles, Rng& rng)
{
    const auto& c = config.constants;
    const double half = 4.0 * h_p;
    // ortho water: nuclear spin I = 1 carried by two protons
    const double moment = 2.0 * c.gH * c.muN * std::sqrt(2.0);
    return populate(BathKind::Water3D, {-half, -half, -h_p - 2.0 * half}, {half, half, -h_p},
                    config.environment.water_ortho_density(), moment, config.environment.D_H2O,
                    max_particles, rng);
}

DipoleBath make_lipid_bath(const Config& config, double h_p, std::size_t max_particles, Rng& rng)
{
    const auto& c = config.constants;
    const auto& env = config.environment;
    const double half = 4.0 * h_p;
    // single proton, I = 1/2
    const double moment = 2.0 * c.gH * c.muN * std::sqrt(0.75);
    return populate(BathKind::Lipid2D, {-half, -half, -h_p - env.membrane_thickness},
                    {half, half, -h_p}, env.lipid_nH, moment, env.D_L, max_particles, rng);
}

void step_bath(DipoleBath& bath, double dt, Rng& rng)
{
    if (bath.diffusion <= 0.0) {
        return;
    }
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * bath.diffusion * dt));
    const Vec3 length = bath.hi - bath.lo;
    const bool three_d = bath.dimensions() == 3;
    for (std::size_t i = 0; i < bath.size(); ++i) {
        Vec3 d{normal(rng), normal(rng), three_d ? normal(rng) : 0.0};
        Vec3& p = bath.positions[i];
        p.x = wrap(p.x + d.x, bath.lo.x, length.x);
        p.y = wrap(p.y + d.y, bath.lo.y, length.y);
        if (three_d) {
            p.z = wrap(p.z + d.z, bath.lo.z, length.z);
        }
        bath.displacement[i] = bath.displacement[i] + d;
    }
}

double dipole_bz(Vec3 moment, Vec3 separation, double mu0_over_4pi)
{
    const double r2 = dot(separation, separation);
    const double r = std::sqrt(r2);
    const double inv_r3 = 1.0 / (r2 * r);
    const double m_dot_rhat = dot(moment, separation) / r;
    return mu0_over_4pi * (3.0 * m_dot_rhat * separation.z / r - moment.z) * inv_r3;
}

double field_at_probe(const DipoleBath& bath, Vec3 probe, double mu0_over_4pi, double r_min)
{
    const double r_min2 = r_min * r_min;
    double b = 0.0;
    for (std::size_t i = 0; i < bath.size(); ++i) {
        const Vec3 sep = probe - bath.positions[i];
        if (dot(sep, sep) < r_min2) {
            continue;
        }
        b += dipole_bz(bath.moments[i], sep, mu0_over_4pi);
    }
    return b;
}

std::vector<ChannelArrival> channel_events(const EnvironmentConfig& env, double flux, double area,
                                           double t0, double duration, bool open, Rng& rng)
{
    std::vector<ChannelArrival> out;
    const double rate = flux * area;
    if (!open || rate <= 0.0 || duration <= 0.0) {
        return out;
    }
    std::exponential_distribution<double> gap(rate);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double carriers = env.N_ion + env.N_H2O;
    const double p_ion = carriers > 0.0 ? env.N_ion / carriers : 1.0;
    double t = t0;
    while (true) {
        t += gap(rng);
        if (t >= t0 + duration) {
            break;
        }
        const double mu = u(rng) < p_ion ? env.mu_ion : env.mu_H2O;
        out.push_back({t, mu * random_direction(rng)});
    }
    return out;
}

double channel_field(std::span<const ChannelArrival> arrivals, double t, Vec3 probe,
                     LateralPoint channel, double h_p, const EnvironmentConfig& env,
                     double mu0_over_4pi)
{
    const double transit = env.transit_time;
    auto first = std::lower_bound(arrivals.begin(), arrivals.end(), t - transit,
                                  [](const ChannelArrival& a, double v) { return a.time < v; });
    double b = 0.0;
    for (auto it = first; it != arrivals.end() && it->time <= t; ++it) {
        const double progress = (t - it->time) / transit;
        if (progress < 0.0 || progress >= 1.0) {
            continue;
        }
        const Vec3 pos{channel[0], channel[1], -h_p - progress * env.membrane_thickness};
        const Vec3 sep = probe - pos;
        if (dot(sep, sep) < kExclusionRadius * kExclusionRadius) {
            continue;
        }
        b += dipole_bz(it->moment, sep, mu0_over_4pi);
    }
    return b;
}

FieldTrace synthetic_ou_trace(double sigma_B, double f_e, double dt, std::size_t samples, Rng& rng)
{
    FieldTrace trace;
    trace.dt = dt;
    trace.label = "synthetic_ou";
    trace.samples.reserve(samples);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double rho = std::exp(-f_e * dt);
    const double kick = sigma_B * std::sqrt(-std::expm1(-2.0 * f_e * dt));
    double x = sigma_B * normal(rng);
    for (std::size_t k = 0; k < samples; ++k) {
        trace.samples.push_back(x);
        x = rho * x + kick * normal(rng);
    }
    return trace;
}

namespace {

std::size_t sample_count(double duration, double dt)
{
    return static_cast<std::size_t>(std::ceil(duration / dt - 1e-9)) + 1;
}

FieldTrace bath_trace(DipoleBath bath, const Config& config, double duration, double dt,
                      const char* label, Rng& rng)
{
    FieldTrace trace;
    trace.dt = dt;
    trace.label = label;
    const std::size_t n = sample_count(duration, dt);
    trace.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        trace.samples.push_back(field_at_probe(bath, {}, config.constants.mu0_over_4pi));
        if (k + 1 < n) {
            step_bath(bath, dt, rng);
        }
    }
    return trace;
}

} // namespace

FieldTrace water_trace(const Config& config, double h_p, double duration, double dt,
                       std::size_t max_particles, Rng& rng)
{
    return bath_trace(make_water_bath(config, h_p, max_particles, rng), config, duration, dt,
                      "water", rng);
}

FieldTrace lipid_trace(const Config& config, double h_p, double duration, double dt,
                       std::size_t max_particles, Rng& rng)
{
    return bath_trace(make_lipid_bath(config, h_p, max_particles, rng), config, duration, dt,
                      "lipid", rng);
}

FieldTrace channel_trace(const Config& config, double h_p, double duration, double dt, bool open,
                         Rng& rng)
{
    const auto& env = config.environment;
    const double area = env.channel_aperture * env.channel_aperture;
    // start early so carriers already in transit at t = 0 are present
    const auto arrivals = channel_events(env, env.ion_flux, area, -env.transit_time,
                                         duration + env.transit_time, open, rng);
    const LateralPoint channel = env.channel_positions.empty() ? LateralPoint{0.0, 0.0}
                                                               : env.channel_positions.front();
    FieldTrace trace;
    trace.dt = dt;
    trace.label = "channel";
    const std::size_t n = sample_count(duration, dt);
    trace.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        trace.samples.push_back(channel_field(arrivals, static_cast<double>(k) * dt, {}, channel,
                                              h_p, env, config.constants.mu0_over_4pi));
    }
    return trace;
}

TraceIntegrator::TraceIntegrator(const FieldTrace& trace) : trace_(trace)
{
    const auto& s = trace.samples;
    cumulative_.assign(s.size(), 0.0);
    for (std::size_t k = 1; k < s.size(); ++k) {
        cumulative_[k] = cumulative_[k - 1] + 0.5 * trace.dt * (s[k - 1] + s[k]);
    }
}

double TraceIntegrator::integral(double t) const
{
    const auto& s = trace_.samples;
    if (s.size() < 2 || t <= 0.0) {
        return 0.0;
    }
    const double pos = t / trace_.dt;
    auto k = static_cast<std::size_t>(pos);
    if (k >= s.size() - 1) {
        k = s.size() - 2;
    }
    const double u = std::min(pos - static_cast<double>(k), 1.0);
    return cumulative_[k] + trace_.dt * (u * s[k] + 0.5 * u * u * (s[k + 1] - s[k]));
}

double echo_phase(const TraceIntegrator& integrator, double duration, double tau, double gamma_p)
{
    if (tau > duration * (1.0 + 1e-12)) {
        throw TraceTooShort("trace of duration " + std::to_string(duration)
                            + " s is shorter than tau = " + std::to_string(tau) + " s");
    }
    const double first = integrator.integral(0.5 * tau);
    const double whole = integrator.integral(tau);
    return kEchoPhasePerCycle * gamma_p * (first - (whole - first));
}

double echo_phase(const FieldTrace& trace, double tau, double gamma_p)
{
    return echo_phase(TraceIntegrator(trace), trace.duration(), tau, gamma_p);
}

double trace_time_step(double f_e, double tau_max)
{
    return std::min(1.0 / (20.0 * f_e), tau_max / 200.0);
}

EnsembleEnvelope ensemble_envelope(const Config& config, const EnsembleSource& source,
                                   std::span<const double> tau_grid, std::size_t n_traj,
                                   std::uint64_t seed, std::size_t threads)
{
    if (n_traj < 2) {
        throw std::invalid_argument("ensemble_envelope needs at least 2 trajectories");
    }
    if (tau_grid.empty()) {
        throw std::invalid_argument("ensemble_envelope needs a non-empty tau grid");
    }
    const double tau_max = *std::max_element(tau_grid.begin(), tau_grid.end());
    const double gamma_p = config.constants.gamma_p;

    double dt = tau_max / 200.0;
    switch (source.kind) {
    case EnsembleSource::Kind::SyntheticOU:
        dt = trace_time_step(source.f_e, tau_max);
        break;
    case EnsembleSource::Kind::WaterBath:
        dt = trace_time_step(
            fluctuation_rate(SourceKind::Water, config.constants, config.environment, source.h_p),
            tau_max);
        break;
    case EnsembleSource::Kind::ZeroField:
        break;
    }
    const std::size_t n_samples = sample_count(tau_max, dt);
    const std::size_t n_tau = tau_grid.size();

    std::vector<double> cosines(n_traj * n_tau);
    std::vector<double> sines(n_traj * n_tau);
    std::vector<double> squares(n_traj * n_tau);

    parallel_for(n_traj, threads, [&](std::size_t j) {
        Rng rng = make_stream(seed, j);
        FieldTrace trace;
        switch (source.kind) {
        case EnsembleSource::Kind::ZeroField:
            trace.dt = dt;
            trace.samples.assign(n_samples, 0.0);
            break;
        case EnsembleSource::Kind::SyntheticOU:
            trace = synthetic_ou_trace(source.sigma_B, source.f_e, dt, n_samples, rng);
            break;
        case EnsembleSource::Kind::WaterBath:
            trace = water_trace(config, source.h_p, dt * static_cast<double>(n_samples - 1), dt,
                                source.particles, rng);
            break;
        }
        const TraceIntegrator integrator(trace);
        for (std::size_t i = 0; i < n_tau; ++i) {
            const double phi = echo_phase(integrator, trace.duration(), tau_grid[i], gamma_p);
            cosines[j * n_tau + i] = std::cos(phi);
            sines[j * n_tau + i] = std::sin(phi);
            squares[j * n_tau + i] = phi * phi;
        }
    });

    EnsembleEnvelope out;
    out.dt = dt;
    out.tau.assign(tau_grid.begin(), tau_grid.end());
    const double n = static_cast<double>(n_traj);
    std::vector<double> column(n_traj);
    auto column_mean = [&](const std::vector<double>& data, std::size_t i) {
        for (std::size_t j = 0; j < n_traj; ++j) {
            column[j] = data[j * n_tau + i];
        }
        return pairwise_sum(column) / n;
    };
    for (std::size_t i = 0; i < n_tau; ++i) {
        const double c_mean = column_mean(cosines, i);
        const double s_mean = column_mean(sines, i);
        const double magnitude = std::hypot(c_mean, s_mean);
        // spread of the projection onto the mean phasor direction
        const double ux = magnitude > 0.0 ? c_mean / magnitude : 1.0;
        const double uy = magnitude > 0.0 ? s_mean / magnitude : 0.0;
        for (std::size_t j = 0; j < n_traj; ++j) {
            const double proj = ux * cosines[j * n_tau + i] + uy * sines[j * n_tau + i] - magnitude;
            column[j] = proj * proj;
        }
        const double variance = pairwise_sum(column) / (n - 1.0);
        out.D.push_back(magnitude);
        out.stderr_D.push_back(std::sqrt(variance / n));
        out.mean_phase_sq.push_back(column_mean(squares, i));
    }
    return out;
}

double fit_rate_through_origin(std::span<const double> tau, std::span<const double> chi)
{
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        num += tau[i] * chi[i];
        den += tau[i] * tau[i];
    }
    return num / den;
}

} // namespace nvsim
