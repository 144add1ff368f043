#include "nvsim/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nvsim {

using std::numbers::pi;

std::string_view to_string(SourceKind kind)
{
    switch (kind) {
    case SourceKind::IonChannel: return "ion_channel";
    case SourceKind::Water: return "water";
    case SourceKind::Lipid: return "lipid";
    case SourceKind::Electrolyte: return "electrolyte";
    }
    return "unknown";
}

std::string_view to_string(Regime regime)
{
    switch (regime) {
    case Regime::FastFluctuation: return "FFL";
    case Regime::Crossover: return "crossover";
    case Regime::SlowFluctuation: return "SFL";
    }
    return "unknown";
}

SourceKind parse_source_kind(std::string_view name)
{
    if (name == "ion_channel" || name == "channel" || name == "ic") {
        return SourceKind::IonChannel;
    }
    if (name == "water") {
        return SourceKind::Water;
    }
    if (name == "lipid") {
        return SourceKind::Lipid;
    }
    if (name == "electrolyte") {
        return SourceKind::Electrolyte;
    }
    throw std::invalid_argument("unknown noise source kind '" + std::string(name) + "'");
}

double sigma_ion_channel(const PhysicalConstants& c, double h_p, double N_ion, double N_H2O,
                         double mu_ion, double mu_H2O)
{
    return c.mu0_over_4pi / (h_p * h_p * h_p)
        * std::sqrt(N_ion * mu_ion * mu_ion + N_H2O * mu_H2O * mu_H2O);
}

double sigma_water(const PhysicalConstants& c, double h_p, double n_ortho)
{
    const double mu0_over_2pi = 2.0 * c.mu0_over_4pi;
    return c.gH * c.muN * mu0_over_2pi * std::sqrt(n_ortho * pi / (h_p * h_p * h_p));
}

double sigma_lipid(const PhysicalConstants& c, double h_p, double n_H)
{
    const double mu0_over_8pi = 0.5 * c.mu0_over_4pi;
    return c.gH * c.muN * mu0_over_8pi * std::sqrt(n_H * 5.0 * pi / (4.0 * h_p * h_p * h_p));
}

double fluctuation_rate(SourceKind kind, const PhysicalConstants& c, const EnvironmentConfig& env,
                        double h_p)
{
    switch (kind) {
    case SourceKind::Water:
        return env.D_H2O / ((2.0 * h_p) * (2.0 * h_p));
    case SourceKind::Lipid: {
        const double ell = env.lipid_correlation_length;
        return env.D_L / ((2.0 * ell) * (2.0 * ell));
    }
    case SourceKind::IonChannel:
        return env.ion_flux * env.channel_aperture * env.channel_aperture * env.ic_rate_scale;
    case SourceKind::Electrolyte:
        return 1.0 / (env.epsilon_r * c.epsilon0 * env.rho_E);
    }
    throw std::invalid_argument("unknown noise source kind");
}

double theta(double f_e, double sigma_B, double gamma_p)
{
    if (sigma_B <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return f_e / (gamma_p * sigma_B);
}

Regime classify(double theta)
{
    if (theta >= kFastLimitTheta) {
        return Regime::FastFluctuation;
    }
    if (theta <= kSlowLimitTheta) {
        return Regime::SlowFluctuation;
    }
    return Regime::Crossover;
}

double charge_variance(double R, double kappa, double D_E, double temperature, double kB)
{
    if (R <= 0.0) {
        return 0.0;
    }
    const double x = kappa * R;
    // R cosh(x) - sinh(x)/kappa = (x cosh x - sinh x) / kappa; the product with
    // e^-x is evaluated in a form that neither overflows nor cancels.
    double bracket_times_exp;
    if (x < 1e-3) {
        // x cosh x - sinh x = x^3/3 + x^5/30 + ...
        bracket_times_exp = std::exp(-x) * (x * x * x / 3.0 + std::pow(x, 5) / 30.0) / kappa;
    } else {
        const double e2 = std::exp(-2.0 * x);
        bracket_times_exp = 0.5 * (x * (1.0 + e2) - (1.0 - e2)) / kappa;
    }
    const double q2 = D_E * kB * temperature * (1.0 + x) * bracket_times_exp;
    return q2 > 0.0 ? q2 : 0.0;
}

ChargeFluctuation electrolyte_fluctuation(const PhysicalConstants& c, const EnvironmentConfig& env,
                                          double h_p)
{
    ChargeFluctuation out;
    out.R = h_p;
    out.Q2 = charge_variance(h_p, 1.0 / env.debye_length, env.D_E, env.temperature, c.kB);
    out.sigma_E = env.c_E * std::sqrt(out.Q2)
        / (4.0 * pi * c.epsilon0 * env.epsilon_r * h_p * h_p);
    out.f_e_E = fluctuation_rate(SourceKind::Electrolyte, c, env, h_p);
    return out;
}

double stark_effective_sigma(double sigma_E, double R3D, double gamma_p)
{
    return R3D * sigma_E / gamma_p;
}

NoiseSourceSpec characterize(SourceKind kind, const PhysicalConstants& c,
                             const EnvironmentConfig& env, double h_p)
{
    NoiseSourceSpec s;
    s.kind = kind;
    switch (kind) {
    case SourceKind::IonChannel:
        s.sigma_B = sigma_ion_channel(c, h_p, env.N_ion, env.N_H2O, env.mu_ion, env.mu_H2O);
        break;
    case SourceKind::Water:
        s.sigma_B = sigma_water(c, h_p, env.water_ortho_density());
        break;
    case SourceKind::Lipid:
        s.sigma_B = sigma_lipid(c, h_p, env.lipid_nH);
        break;
    case SourceKind::Electrolyte:
        s.sigma_B = stark_effective_sigma(electrolyte_fluctuation(c, env, h_p).sigma_E, c.R3D,
                                          c.gamma_p);
        break;
    }
    s.f_e = fluctuation_rate(kind, c, env, h_p);
    s.theta = theta(s.f_e, s.sigma_B, c.gamma_p);
    s.regime = classify(s.theta);
    return s;
}

std::vector<NoiseSourceSpec> characterize_all(const PhysicalConstants& c,
                                              const EnvironmentConfig& env, double h_p)
{
    return {characterize(SourceKind::IonChannel, c, env, h_p),
            characterize(SourceKind::Water, c, env, h_p),
            characterize(SourceKind::Lipid, c, env, h_p),
            characterize(SourceKind::Electrolyte, c, env, h_p)};
}

} // namespace nvsim
