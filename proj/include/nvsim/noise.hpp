#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nvsim/params.hpp"

namespace nvsim {

enum class SourceKind { IonChannel, Water, Lipid, Electrolyte };

enum class Regime { FastFluctuation, Crossover, SlowFluctuation };

std::string_view to_string(SourceKind kind);
std::string_view to_string(Regime regime);
SourceKind parse_source_kind(std::string_view name);

/// Regime thresholds on Theta.
inline constexpr double kFastLimitTheta = 10.0;
inline constexpr double kSlowLimitTheta = 0.1;

/// One fluctuating-field source reduced to amplitude, rate and their ratio.
struct NoiseSourceSpec {
    SourceKind kind = SourceKind::Water;
    double sigma_B = 0.0;   // T
    double f_e = 0.0;       // Hz
    double theta = 0.0;     // f_e / (gamma_p sigma_B), +inf if sigma_B == 0
    Regime regime = Regime::FastFluctuation;
};

/// RMS field of the ion/bound-water spins moving through one channel.
double sigma_ion_channel(const PhysicalConstants& c, double h_p, double N_ion, double N_H2O,
                         double mu_ion, double mu_H2O);

/// RMS field of ortho-water protons in the bulk solution.
double sigma_water(const PhysicalConstants& c, double h_p, double n_ortho);

/// RMS field of lipid hydrogen nuclei.
double sigma_lipid(const PhysicalConstants& c, double h_p, double n_H);

/// Correlation rate f_e of each source.
double fluctuation_rate(SourceKind kind, const PhysicalConstants& c, const EnvironmentConfig& env,
                        double h_p);

/// Returns +inf when sigma_B == 0 (the source cannot dephase).
double theta(double f_e, double sigma_B, double gamma_p);

Regime classify(double theta);

/// Debye-Hueckel charge variance in a sphere of radius R; clamped at 0.
double charge_variance(double R, double kappa, double D_E, double temperature, double kB);

struct ChargeFluctuation {
    double R = 0.0;         // m
    double Q2 = 0.0;        // Eq. units, see charge_variance
    double sigma_E = 0.0;   // V / m
    double f_e_E = 0.0;     // Hz
};

/// Electric-field fluctuation at the probe, region radius R = h_p.
ChargeFluctuation electrolyte_fluctuation(const PhysicalConstants& c, const EnvironmentConfig& env,
                                          double h_p);

/// Stark shift expressed as an equivalent magnetic field.
double stark_effective_sigma(double sigma_E, double R3D, double gamma_p);

NoiseSourceSpec characterize(SourceKind kind, const PhysicalConstants& c,
                             const EnvironmentConfig& env, double h_p);

/// Ion channel, water, lipid, electrolyte, in that order.
std::vector<NoiseSourceSpec> characterize_all(const PhysicalConstants& c,
                                              const EnvironmentConfig& env, double h_p);

} // namespace nvsim
