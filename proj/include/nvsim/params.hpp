#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvsim {

/// Raised for malformed or physically invalid run configurations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Physical constants, SI throughout.
///
/// gamma_p is in cycles (Hz/T) and is what every Theta = f_e / (gamma_p sigma_B)
/// uses. gamma_p_angular (rad s^-1 T^-1) is only used by the dense-ensemble
/// NV-NV dephasing rate. Keep the two apart.
struct PhysicalConstants {
    double mu0_over_4pi = 1e-7;           // T m / A
    double hbar = 1.054571817e-34;        // J s
    double kB = 1.380649e-23;             // J / K
    double muN = 5.0507837461e-27;        // J / T
    double gH = 2.7928473446;             // proton moment in units of muN
    double gamma_p = 2.8e10;              // Hz / T
    double gamma_p_angular = 2.0 * std::numbers::pi * 2.8e10; // rad / (s T)
    double R3D = 3.5e-3;                  // Hz m / V
    double epsilon0 = 8.8541878128e-12;   // F / m
    double D_crystal_field = 2.88e9;      // Hz

    bool operator==(const PhysicalConstants&) const = default;
};

using LateralPoint = std::array<double, 2>;

struct EnvironmentConfig {
    // aqueous background
    double water_density = 3.3e28;        // m^-3
    double ortho_fraction = 0.75;
    double D_H2O = 3e-9;                  // m^2 / s

    // lipid membrane
    double lipid_nH = 3e28;               // m^-3
    double D_L = 2e-15;                   // m^2 / s
    double lipid_correlation_length = 10e-9; // m
    double membrane_thickness = 4e-9;     // m

    // ion channel
    double ion_flux = 5e23;               // ions s^-1 m^-2
    double channel_aperture = 2e-9;       // m, side of the square pore cross-section
    double ic_rate_scale = 0.015;
    double transit_time = 1e-6;           // s
    double N_ion = 3;
    double N_H2O = 150;
    double mu_ion = 2.2175 * 5.0507837461e-27;      // J / T (23Na)
    double mu_H2O = 2.7928473446 * 5.0507837461e-27; // J / T
    double c_ic = 2.0;
    std::vector<LateralPoint> channel_positions{{0.0, 0.0}};
    double switching_rate = 200.0;        // Hz, reciprocal mean waiting time
    double switching_shape = 1000.0;      // gamma shape of the waiting times; 1 = Markov

    // electrolyte
    double debye_length = 1.3e-9;         // m
    double D_E = 1.33e-9;                 // m^2 / s
    double rho_E = 1.0;                   // Ohm m
    double epsilon_r = 80.0;
    double temperature = 310.0;           // K
    double c_E = 0.8029399866998829;

    [[nodiscard]] double water_ortho_density() const { return ortho_fraction * water_density; }

    bool operator==(const EnvironmentConfig&) const = default;
};

struct ProbeConfig {
    double h_p = 0.0;                     // m, required
    double T2 = 3e-4;                     // s
    double tau = 1e-4;                    // s
    double tau_m = 900e-9;                // s
    double tau_2pi = 100e-9;              // s
    double intrinsic_envelope_exponent = 3.0;

    [[nodiscard]] double cycle_period() const { return tau + tau_m + tau_2pi; }

    bool operator==(const ProbeConfig&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t threads = 0;              // 0 = auto

    bool operator==(const RunConfig&) const = default;
};

struct Config {
    PhysicalConstants constants;
    EnvironmentConfig environment;
    ProbeConfig probe;
    RunConfig run;

    bool operator==(const Config&) const = default;
};

/// Parses a JSON config document. Unknown sections or keys are errors.
/// `overrides` are "section.key=value" strings applied before validation.
Config parse_config(const std::string& json_text, const std::vector<std::string>& overrides = {});

Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical JSON form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const Config& config);

/// Throws ConfigError naming the first field that breaks an invariant.
void check_invariants(const Config& config);

/// Physical-regime warnings (pure-dephasing assumption, envelope near zero).
std::vector<std::string> validate(const Config& config);

/// FNV-1a of the canonical serialization; stable across platforms.
std::uint64_t config_hash(const Config& config);

} // namespace nvsim
