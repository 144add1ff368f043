#include "nvsim/dephasing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nvsim/optimize.hpp"

namespace nvsim {

namespace {

std::string regime_message(const char* what, double theta)
{
    std::ostringstream os;
    os << what << " requested at Theta = " << theta
       << "; use the crossover closed form (crossover_envelope) outside the limit";
    return os.str();
}

} // namespace

double DephasingModel::decay_exponent(double t) const
{
    if (t <= 0.0) {
        return 0.0;
    }
    switch (form) {
    case EnvelopeForm::Exponential:
        return rate * t;
    case EnvelopeForm::QuarticExponential: {
        const double x = rate * t;
        return x * x * x * x;
    }
    case EnvelopeForm::Intrinsic:
        return std::pow(rate * t, exponent);
    case EnvelopeForm::CrossoverClosedForm:
        return calibration * crossover_exponent(source.sigma_B, source.f_e, t, gamma_p);
    }
    return 0.0;
}

double DephasingModel::envelope(double t) const
{
    return std::exp(-decay_exponent(t));
}

double ffl_rate(double f_e, double theta)
{
    if (!(theta >= kFastLimitTheta)) {
        throw RegimeError(regime_message("fast-limit rate", theta));
    }
    if (std::isinf(theta)) {
        return 0.0;
    }
    return f_e / (theta * theta);
}

double sfl_lipid_rate(double f_e, double theta)
{
    if (!(theta <= kSlowLimitTheta) || theta <= 0.0) {
        throw RegimeError(regime_message("slow-limit rate", theta));
    }
    const double prefactor = 1.0 / (2.0 * std::sqrt(2.0 * std::sqrt(2.0)));
    return prefactor * f_e / std::sqrt(theta);
}

double echo_filter_bracket(double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    if (x < 1.0) {
        // sum_{k>=3} (-x)^k / k! * (4 / 2^k - 1); the k < 3 terms cancel exactly
        double power = x * x * x / 6.0; // x^k / k!
        double two_k = 8.0;
        double sign = -1.0;
        double sum = 0.0;
        for (int k = 3; k < 24; ++k) {
            sum += sign * power * (4.0 / two_k - 1.0);
            power *= x / (k + 1);
            two_k *= 2.0;
            sign = -sign;
        }
        return sum;
    }
    return x - 3.0 + 4.0 * std::exp(-0.5 * x) - std::exp(-x);
}

double crossover_exponent(double sigma_B, double f_e, double t, double gamma_p)
{
    if (t <= 0.0 || sigma_B <= 0.0) {
        return 0.0;
    }
    const double amplitude = kEchoPhasePerCycle * gamma_p * sigma_B / f_e;
    return amplitude * amplitude * echo_filter_bracket(f_e * t);
}

double crossover_envelope(double sigma_B, double f_e, double t, double gamma_p)
{
    return std::exp(-crossover_exponent(sigma_B, f_e, t, gamma_p));
}

DephasingModel model_for(const NoiseSourceSpec& source, double gamma_p)
{
    DephasingModel m;
    m.source = source;
    m.gamma_p = gamma_p;
    if (source.sigma_B <= 0.0) {
        m.form = EnvelopeForm::Exponential;
        m.rate = 0.0;
        return m;
    }
    switch (source.regime) {
    case Regime::FastFluctuation:
        m.form = EnvelopeForm::Exponential;
        m.rate = ffl_rate(source.f_e, source.theta);
        break;
    case Regime::SlowFluctuation:
        if (source.kind == SourceKind::Lipid) {
            m.form = EnvelopeForm::QuarticExponential;
            m.rate = sfl_lipid_rate(source.f_e, source.theta);
        } else {
            m.form = EnvelopeForm::CrossoverClosedForm;
        }
        break;
    case Regime::Crossover:
        m.form = EnvelopeForm::CrossoverClosedForm;
        break;
    }
    return m;
}

DephasingModel ion_channel_model(const PhysicalConstants& c, const EnvironmentConfig& env,
                                 double sigma_B)
{
    DephasingModel m;
    m.source.kind = SourceKind::IonChannel;
    m.source.sigma_B = sigma_B;
    m.source.f_e = fluctuation_rate(SourceKind::IonChannel, c, env, 0.0);
    m.source.theta = theta(m.source.f_e, sigma_B, c.gamma_p);
    m.source.regime = classify(m.source.theta);
    m.form = EnvelopeForm::CrossoverClosedForm;
    m.calibration = env.c_ic;
    m.gamma_p = c.gamma_p;
    return m;
}

DephasingModel intrinsic_model(double T2, double exponent)
{
    DephasingModel m;
    m.form = EnvelopeForm::Intrinsic;
    m.rate = 1.0 / T2;
    m.exponent = exponent;
    return m;
}

double EnvelopeSet::background(double t) const
{
    return std::exp(-(water.decay_exponent(t) + lipid.decay_exponent(t)
                      + electrolyte.decay_exponent(t)));
}

double EnvelopeSet::off(double t) const
{
    return std::exp(-(water.decay_exponent(t) + lipid.decay_exponent(t)
                      + electrolyte.decay_exponent(t) + intrinsic.decay_exponent(t)));
}

double EnvelopeSet::on(double t) const
{
    return off(t) * ion_channel.envelope(t);
}

double EnvelopeSet::p_off(double t) const { return population(off(t)); }

double EnvelopeSet::p_on(double t) const { return population(on(t)); }

double EnvelopeSet::contrast(double t) const
{
    // P_off - P_on = D_off (1 - D_ic) / 2, written to avoid cancellation
    return 0.5 * off(t) * -std::expm1(-ion_channel.decay_exponent(t));
}

EnvelopeSet build_envelopes(const PhysicalConstants& c, const EnvironmentConfig& env,
                            const ProbeConfig& probe)
{
    const double h = probe.h_p;
    EnvelopeSet set;
    set.water = model_for(characterize(SourceKind::Water, c, env, h), c.gamma_p);
    set.lipid = model_for(characterize(SourceKind::Lipid, c, env, h), c.gamma_p);
    const auto electrolyte = characterize(SourceKind::Electrolyte, c, env, h);
    set.electrolyte = model_for(electrolyte, c.gamma_p);
    set.intrinsic = intrinsic_model(probe.T2, probe.intrinsic_envelope_exponent);
    set.ion_channel = ion_channel_model(
        c, env, sigma_ion_channel(c, h, env.N_ion, env.N_H2O, env.mu_ion, env.mu_H2O));
    return set;
}

EnvelopeSet build_envelopes(const Config& config)
{
    return build_envelopes(config.constants, config.environment, config.probe);
}

double population(double D)
{
    return 0.5 * (1.0 + D);
}

double contrast(const Config& config, double tau, double h_p, double T2)
{
    ProbeConfig probe = config.probe;
    probe.h_p = h_p;
    probe.T2 = T2;
    return build_envelopes(config.constants, config.environment, probe).contrast(tau);
}

ContrastOptimum maximize_contrast(const EnvelopeSet& envelopes, double T2)
{
    auto objective = [&](double log_tau) { return -envelopes.contrast(std::exp(log_tau)); };
    const double lo = std::log(T2 * 1e-6);
    const double hi = std::log(T2 * (1.0 - 1e-9));
    const double best = minimize_on_grid_then_golden(objective, lo, hi, 200, 1e-10);
    return {std::exp(best), envelopes.contrast(std::exp(best))};
}

ContrastOptimum maximize_contrast_grid(const EnvelopeSet& envelopes, double T2,
                                       std::size_t points)
{
    ContrastOptimum best;
    for (std::size_t i = 1; i < points; ++i) {
        const double tau = T2 * static_cast<double>(i) / static_cast<double>(points);
        const double dp = envelopes.contrast(tau);
        if (dp > best.delta_p) {
            best = {tau, dp};
        }
    }
    return best;
}

double e_fold_time(const DephasingModel& model, double t_max)
{
    if (model.decay_exponent(t_max) < 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    double lo = 0.0;
    double hi = t_max;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * t_max; ++i) {
        const double mid = 0.5 * (lo + hi);
        (model.decay_exponent(mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace nvsim
