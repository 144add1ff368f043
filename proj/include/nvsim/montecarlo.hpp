#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvsim/parallel.hpp"
#include "nvsim/params.hpp"

namespace nvsim {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
};

/// Particles closer than this to the probe are skipped by the field kernel.
inline constexpr double kExclusionRadius = 0.15e-9;

/// A trace does not cover the requested interrogation window.
class TraceTooShort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BathKind { Water3D, Lipid2D };

/// Freely diffusing spins with fixed random moment orientations in a periodic
/// box below the probe (probe at the origin, box top face at z = -h_p).
///
/// When the physical particle count exceeds the simulation cap the bath is
/// coarse-grained: fewer particles, each moment scaled by
/// sqrt(physical_count / size()), which preserves the field variance.
struct DipoleBath {
    BathKind kind = BathKind::Water3D;
    std::vector<Vec3> positions;
    std::vector<Vec3> moments;
    std::vector<Vec3> displacement;   // unwrapped, for diffusion diagnostics
    Vec3 lo;
    Vec3 hi;
    double diffusion = 0.0;
    double physical_count = 0.0;

    [[nodiscard]] std::size_t size() const { return positions.size(); }
    [[nodiscard]] int dimensions() const { return kind == BathKind::Water3D ? 3 : 2; }
};

/// Uniform random unit vector.
Vec3 random_direction(Rng& rng);

/// Ortho-water bath: box of side 8 h_p per axis below the probe.
DipoleBath make_water_bath(const Config& config, double h_p, std::size_t max_particles, Rng& rng);

/// Lipid hydrogen bath: membrane slab of the configured thickness, laterally
/// 8 h_p per side, diffusing in-plane only.
DipoleBath make_lipid_bath(const Config& config, double h_p, std::size_t max_particles, Rng& rng);

/// Gaussian displacement of std sqrt(2 D dt) on each active axis, then
/// periodic wrap. Moments are unchanged.
void step_bath(DipoleBath& bath, double dt, Rng& rng);

/// z component of the field at `separation` (probe minus source) of a point dipole.
double dipole_bz(Vec3 moment, Vec3 separation, double mu0_over_4pi);

/// Sum of dipole fields of all bath particles at the probe.
double field_at_probe(const DipoleBath& bath, Vec3 probe, double mu0_over_4pi,
                      double r_min = kExclusionRadius);

/// One carrier (ion or bound water) entering the channel.
struct ChannelArrival {
    double time = 0.0;
    Vec3 moment;
};

/// Poisson arrivals at rate flux * area on [t0, t0 + duration). Carriers are
/// ions with probability N_ion / (N_ion + N_H2O), bound water otherwise, each
/// with a random frozen spin orientation. A closed channel has no arrivals.
std::vector<ChannelArrival> channel_events(const EnvironmentConfig& env, double flux, double area,
                                           double t0, double duration, bool open, Rng& rng);

/// Field at the probe from carriers in transit down the channel axis at
/// lateral position `channel`. A carrier enters at the membrane top (z = -h_p)
/// and leaves at the bottom after env.transit_time.
double channel_field(std::span<const ChannelArrival> arrivals, double t, Vec3 probe,
                     LateralPoint channel, double h_p, const EnvironmentConfig& env,
                     double mu0_over_4pi);

/// Uniformly sampled B_z(t) at the probe; sample k is at t = k dt.
struct FieldTrace {
    double dt = 0.0;
    std::vector<double> samples;
    std::string label;

    /// Time covered by the samples, (n - 1) dt.
    [[nodiscard]] double duration() const
    {
        return samples.empty() ? 0.0 : dt * static_cast<double>(samples.size() - 1);
    }
};

/// Exact AR(1) discretization of an Ornstein-Uhlenbeck field with RMS sigma_B
/// and correlation rate f_e, started from equilibrium.
FieldTrace synthetic_ou_trace(double sigma_B, double f_e, double dt, std::size_t samples, Rng& rng);

FieldTrace water_trace(const Config& config, double h_p, double duration, double dt,
                       std::size_t max_particles, Rng& rng);
FieldTrace lipid_trace(const Config& config, double h_p, double duration, double dt,
                       std::size_t max_particles, Rng& rng);
FieldTrace channel_trace(const Config& config, double h_p, double duration, double dt, bool open,
                         Rng& rng);

/// Integrates the linear interpolant of a trace.
class TraceIntegrator {
public:
    explicit TraceIntegrator(const FieldTrace& trace);
    /// Integral of B from 0 to t.
    [[nodiscard]] double integral(double t) const;

private:
    const FieldTrace& trace_;
    std::vector<double> cumulative_;
};

/// Hahn-echo phase phi = k gamma_p [ int_0^{tau/2} B dt - int_{tau/2}^{tau} B dt ]
/// with k = kEchoPhasePerCycle. Throws TraceTooShort if tau exceeds the trace.
double echo_phase(const FieldTrace& trace, double tau, double gamma_p);
double echo_phase(const TraceIntegrator& integrator, double duration, double tau, double gamma_p);

/// Environment sampled per trajectory by ensemble_envelope.
struct EnsembleSource {
    enum class Kind { ZeroField, SyntheticOU, WaterBath };
    Kind kind = Kind::ZeroField;
    double sigma_B = 0.0;           // SyntheticOU
    double f_e = 1.0;               // SyntheticOU
    double h_p = 4e-9;              // WaterBath
    std::size_t particles = 10000;  // WaterBath
};

struct EnsembleEnvelope {
    std::vector<double> tau;
    std::vector<double> D;              // |<exp(i phi)>|
    std::vector<double> stderr_D;
    std::vector<double> mean_phase_sq;  // <phi^2>
    double dt = 0.0;
};

/// Trajectory-averaged echo envelope. Trajectory j draws from stream (seed, j)
/// and results are reduced in trajectory order, so the output is identical
/// for any thread count.
EnsembleEnvelope ensemble_envelope(const Config& config, const EnsembleSource& source,
                                   std::span<const double> tau_grid, std::size_t n_traj,
                                   std::uint64_t seed, std::size_t threads);

/// Time step rule: min(1 / (20 f_e), tau_max / 200).
double trace_time_step(double f_e, double tau_max);

/// Least-squares slope through the origin of chi(tau).
double fit_rate_through_origin(std::span<const double> tau, std::span<const double> chi);

} // namespace nvsim
