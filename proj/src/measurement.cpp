#include "nvsim/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <string>

#include <fftw3.h>

#include "nvsim/dephasing.hpp"

namespace nvsim {

namespace {

// FFTW planning is not thread-safe
std::mutex fftw_planner_mutex;

} // namespace

bool SwitchTimeline::state_at(double t) const
{
    const auto flips = std::upper_bound(times.begin(), times.end(), t) - times.begin();
    return (flips % 2 == 0) == initial_on;
}

SwitchTimeline make_telegraph(double rate, double shape, double duration, bool initial_on, Rng& rng)
{
    if (!(rate > 0.0) || !(shape > 0.0)) {
        throw std::invalid_argument("telegraph needs a positive rate and shape");
    }
    SwitchTimeline timeline;
    timeline.initial_on = initial_on;
    timeline.mean_waiting = 1.0 / rate;
    std::gamma_distribution<double> wait(shape, timeline.mean_waiting / shape);
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    double t = phase(rng) * wait(rng);
    while (t < duration) {
        timeline.times.push_back(t);
        double w = wait(rng);
        while (w <= 0.0) {
            w = wait(rng);
        }
        t += w;
    }
    return timeline;
}

double cycle_rate(double tau, double tau_m, double tau_2pi)
{
    if (!(tau > 0.0) || tau_m < 0.0 || tau_2pi < 0.0) {
        throw std::invalid_argument("cycle_rate needs tau > 0 and non-negative overheads");
    }
    return 1.0 / (tau + tau_m + tau_2pi);
}

std::vector<double> MeasurementRecord::as_double() const
{
    return {outcomes.begin(), outcomes.end()};
}

MeasurementRecord synthesize_record(const SwitchTimeline& timeline, double p_on, double p_off,
                                    double duration, double f_m, Rng& rng)
{
    if (p_on < 0.0 || p_on > 1.0 || p_off < 0.0 || p_off > 1.0) {
        throw std::invalid_argument("populations must lie in [0, 1]");
    }
    MeasurementRecord record;
    record.period = 1.0 / f_m;
    const auto n = static_cast<std::size_t>(std::floor(duration * f_m + 1e-9));
    record.outcomes.reserve(n);
    record.truth.reserve(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double mid = (static_cast<double>(k) + 0.5) * record.period;
        const bool on = timeline.state_at(mid);
        const double p = on ? p_on : p_off;
        record.truth.push_back(on ? 1 : 0);
        record.outcomes.push_back(u(rng) < p ? 1 : 0);
    }
    return record;
}

SmoothedSeries running_average(std::span<const double> series, std::size_t window, double period)
{
    if (window == 0) {
        throw std::invalid_argument("running average window must be >= 1");
    }
    if (window > series.size()) {
        throw std::invalid_argument("running average window " + std::to_string(window)
                                    + " exceeds record length " + std::to_string(series.size()));
    }
    const std::size_t n = series.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + series[i];
    }
    const std::size_t left = (window - 1) / 2;
    const std::size_t right = window / 2;
    SmoothedSeries out;
    out.window = window;
    out.period = period;
    out.lag = static_cast<double>(window) * period;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= left ? i - left : 0;
        const std::size_t hi = std::min(n - 1, i + right);
        out.values[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi + 1 - lo);
    }
    if (window == 1) {
        out.values.assign(series.begin(), series.end());
    }
    return out;
}

SmoothedSeries running_average(const MeasurementRecord& record, std::size_t window)
{
    const auto values = record.as_double();
    return running_average(values, window, record.period);
}

SwitchTimeline detect_switches(const SmoothedSeries& smoothed, double threshold)
{
    if (!(threshold > 0.5 && threshold < 1.0)) {
        throw std::invalid_argument("detection threshold must lie in (0.5, 1), got "
                                    + std::to_string(threshold));
    }
    SwitchTimeline out;
    const auto& v = smoothed.values;
    if (v.empty()) {
        return out;
    }
    const std::size_t n = v.size();
    const std::size_t right = smoothed.window / 2;
    out.initial_on = v.front() < threshold;
    bool on = out.initial_on;
    for (std::size_t i = 1; i < n; ++i) {
        const bool now = v[i] < threshold;
        if (now != on) {
            const std::size_t last = std::min(n - 1, i + right);
            out.times.push_back(static_cast<double>(last + 1) * smoothed.period);
            on = now;
        }
    }
    out.mean_waiting = mean_interval(out);
    return out;
}

std::vector<double> detection_latencies(const SwitchTimeline& truth,
                                        const SwitchTimeline& estimate, double max_latency)
{
    std::vector<double> out;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const double t = truth.times[k];
        const bool state = truth.state_after(k);
        auto it = std::lower_bound(estimate.times.begin(), estimate.times.end(), t);
        for (; it != estimate.times.end() && *it - t <= max_latency; ++it) {
            const auto j = static_cast<std::size_t>(it - estimate.times.begin());
            if (estimate.state_after(j) == state) {
                out.push_back(*it - t);
                break;
            }
        }
    }
    return out;
}

double mean_interval(const SwitchTimeline& timeline)
{
    if (timeline.size() < 2) {
        return 0.0;
    }
    return (timeline.times.back() - timeline.times.front())
           / static_cast<double>(timeline.size() - 1);
}

Spectrum power_spectrum(std::span<const double> series, double sample_rate, std::size_t segments)
{
    if (segments == 0) {
        throw std::invalid_argument("spectrum needs at least one segment");
    }
    const std::size_t length = series.size() / segments;
    if (length < 64) {
        throw std::invalid_argument("spectrum needs at least 64 samples per segment");
    }
    const std::size_t bins = length / 2 + 1;
    std::vector<double> input(length);
    std::vector<std::complex<double>> output(bins);
    std::unique_lock lock(fftw_planner_mutex);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(length), input.data(),
                                          reinterpret_cast<fftw_complex*>(output.data()),
                                          FFTW_ESTIMATE);
    lock.unlock();
    Spectrum out;
    out.power.assign(bins, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
        const auto piece = series.subspan(s * length, length);
        double mean = 0.0;
        for (double x : piece) {
            mean += x;
        }
        mean /= static_cast<double>(length);
        for (std::size_t i = 0; i < length; ++i) {
            input[i] = piece[i] - mean;
        }
        fftw_execute(plan);
        for (std::size_t k = 0; k < bins; ++k) {
            const bool doubled = k != 0 && !(length % 2 == 0 && k == bins - 1);
            out.power[k] += (doubled ? 2.0 : 1.0) * std::norm(output[k])
                            / (static_cast<double>(length) * sample_rate);
        }
    }
    lock.lock();
    fftw_destroy_plan(plan);
    lock.unlock();
    for (auto& p : out.power) {
        p /= static_cast<double>(segments);
    }
    out.frequency.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        out.frequency[k] = static_cast<double>(k) * sample_rate / static_cast<double>(length);
    }
    return out;
}

namespace {

double median_non_dc(const Spectrum& spectrum)
{
    std::vector<double> rest(spectrum.power.begin() + 1, spectrum.power.end());
    if (rest.empty()) {
        return 0.0;
    }
    const auto mid = rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 2);
    std::nth_element(rest.begin(), mid, rest.end());
    if (rest.size() % 2 == 1) {
        return *mid;
    }
    const double upper = *mid;
    const double lower = *std::max_element(rest.begin(), mid);
    return 0.5 * (upper + lower);
}

SpectralPeak finish(const Spectrum& spectrum, std::size_t k)
{
    SpectralPeak p;
    p.frequency = spectrum.frequency[k];
    p.power = spectrum.power[k];
    p.median = median_non_dc(spectrum);
    p.ratio = p.median > 0.0 ? p.power / p.median : 0.0;
    return p;
}

} // namespace

SpectralPeak dominant_peak(const Spectrum& spectrum, double f_lo, double f_hi)
{
    std::size_t best = 0;
    for (std::size_t k = 1; k < spectrum.power.size(); ++k) {
        const double f = spectrum.frequency[k];
        if (f < f_lo || f > f_hi) {
            continue;
        }
        if (best == 0 || spectrum.power[k] > spectrum.power[best]) {
            best = k;
        }
    }
    if (best == 0) {
        return {};
    }
    return finish(spectrum, best);
}

SpectralPeak bin_near(const Spectrum& spectrum, double f)
{
    std::size_t best = 1;
    for (std::size_t k = 1; k < spectrum.frequency.size(); ++k) {
        if (std::abs(spectrum.frequency[k] - f) < std::abs(spectrum.frequency[best] - f)) {
            best = k;
        }
    }
    return finish(spectrum, best);
}

MonitorResult monitor_channel(const Config& config, const MonitorOptions& options,
                              std::uint64_t seed)
{
    ProbeConfig probe = config.probe;
    probe.h_p = options.h_p;
    const EnvelopeSet envelopes = build_envelopes(config.constants, config.environment, probe);
    const auto& env = config.environment;

    MonitorResult out;
    out.p_on = envelopes.p_on(probe.tau);
    out.p_off = envelopes.p_off(probe.tau);
    out.f_m = cycle_rate(probe.tau, probe.tau_m, probe.tau_2pi);
    out.threshold = options.threshold > 0.0 ? options.threshold : 0.5 * (out.p_on + out.p_off);
    out.resolution = static_cast<double>(options.n_tau) / out.f_m;

    Rng gating = make_stream(seed, 0);
    const bool initial_on = std::bernoulli_distribution(0.5)(gating);
    out.truth = make_telegraph(env.switching_rate, env.switching_shape, options.duration,
                               initial_on, gating);
    Rng readout = make_stream(seed, 1);
    out.record = synthesize_record(out.truth, out.p_on, out.p_off, options.duration, out.f_m,
                                   readout);
    out.smoothed = running_average(out.record, options.n_tau);
    out.detected = detect_switches(out.smoothed, out.threshold);
    out.latencies = detection_latencies(out.truth, out.detected,
                                        2.0 * static_cast<double>(options.n_tau) / out.f_m);
    const auto raw = out.record.as_double();
    out.raw_spectrum = power_spectrum(raw, out.f_m);
    out.smoothed_spectrum = power_spectrum(out.smoothed.values, out.f_m);
    out.raw_peak = dominant_peak(out.raw_spectrum);
    out.smoothed_peak = dominant_peak(out.smoothed_spectrum);
    return out;
}

bool peak_resolved(const SpectralPeak& peak, double f, double tolerance, double min_ratio)
{
    return std::abs(peak.frequency - f) <= tolerance && peak.ratio >= min_ratio;
}

} // namespace nvsim
