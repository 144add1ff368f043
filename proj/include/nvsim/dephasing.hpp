#pragma once

#include <stdexcept>

#include "nvsim/noise.hpp"
#include "nvsim/params.hpp"

namespace nvsim {

/// Radians of echo phase per unit of gamma_p * B * t (gamma_p in Hz/T).
///
/// Fixed so that the fast-fluctuation limit of the closed-form echo exponent
/// equals f_e / Theta^2. The Monte Carlo phase accumulation uses the same
/// constant, so analytic and sampled envelopes are directly comparable.
inline constexpr double kEchoPhasePerCycle = 1.0;

/// A limiting-form rate was requested outside that limit.
class RegimeError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class EnvelopeForm { Exponential, QuarticExponential, Intrinsic, CrossoverClosedForm };

struct DephasingModel {
    NoiseSourceSpec source;
    EnvelopeForm form = EnvelopeForm::Exponential;
    double rate = 0.0;          // Hz; 1/T2 for Intrinsic
    double exponent = 3.0;      // Intrinsic only
    double calibration = 1.0;   // CrossoverClosedForm only, scales the exponent
    double gamma_p = 0.0;       // CrossoverClosedForm only

    /// -ln D(t); non-negative and non-decreasing in t.
    [[nodiscard]] double decay_exponent(double t) const;
    [[nodiscard]] double envelope(double t) const;
};

/// Gamma = f_e / Theta^2, valid for Theta >= kFastLimitTheta.
double ffl_rate(double f_e, double theta);

/// Gradient-channel slow-limit rate, valid for Theta <= kSlowLimitTheta.
double sfl_lipid_rate(double f_e, double theta);

/// Hahn-echo exponent chi(t) for Gaussian Ornstein-Uhlenbeck field noise of
/// RMS sigma_B and correlation rate f_e:
///   chi = (k gamma_p sigma_B / f_e)^2 [f_e t - 3 + 4 e^{-f_e t/2} - e^{-f_e t}]
/// with k = kEchoPhasePerCycle.
double crossover_exponent(double sigma_B, double f_e, double t, double gamma_p);
double crossover_envelope(double sigma_B, double f_e, double t, double gamma_p);

/// The bracket g(x) = x - 3 + 4 e^{-x/2} - e^{-x}, series-evaluated near 0.
double echo_filter_bracket(double x);

/// Picks the envelope form from the source's regime: exponential in the fast
/// limit, quartic for lipid in the slow limit, OU closed form otherwise.
DephasingModel model_for(const NoiseSourceSpec& source, double gamma_p);

/// Ion-channel envelope: OU closed form scaled by c_ic, for a given RMS field.
DephasingModel ion_channel_model(const PhysicalConstants& c, const EnvironmentConfig& env,
                                 double sigma_B);

DephasingModel intrinsic_model(double T2, double exponent);

/// All envelopes at one probe position.
struct EnvelopeSet {
    DephasingModel water;
    DephasingModel lipid;
    DephasingModel electrolyte;
    DephasingModel intrinsic;
    DephasingModel ion_channel;

    /// D_H2O * D_L * D_E, no crystal term.
    [[nodiscard]] double background(double t) const;
    /// D_off = D_H2O * D_L * D_E * D_13C.
    [[nodiscard]] double off(double t) const;
    /// D_on = D_off * D_ic.
    [[nodiscard]] double on(double t) const;
    [[nodiscard]] double p_off(double t) const;
    [[nodiscard]] double p_on(double t) const;
    /// Delta P = P_off - P_on.
    [[nodiscard]] double contrast(double t) const;
};

EnvelopeSet build_envelopes(const PhysicalConstants& c, const EnvironmentConfig& env,
                            const ProbeConfig& probe);
EnvelopeSet build_envelopes(const Config& config);

/// Ground-state population P = (1 + D) / 2.
double population(double D);

/// Delta P(tau) with h_p and T2 replaced.
double contrast(const Config& config, double tau, double h_p, double T2);

struct ContrastOptimum {
    double tau = 0.0;
    double delta_p = 0.0;
};

/// Maximizes Delta P over tau in (0, T2) by golden-section search on log tau
/// seeded from a coarse grid.
ContrastOptimum maximize_contrast(const EnvelopeSet& envelopes, double T2);

/// Dense-grid reference for maximize_contrast.
ContrastOptimum maximize_contrast_grid(const EnvelopeSet& envelopes, double T2,
                                       std::size_t points);

/// First time the given decay reaches 1/e, by bisection on [0, t_max];
/// returns +inf if it never does.
double e_fold_time(const DephasingModel& model, double t_max);

} // namespace nvsim
