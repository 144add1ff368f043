#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "nvsim/parallel.hpp"
#include "nvsim/params.hpp"

namespace nvsim {

/// Two-state channel gating history. The state flips at each event time.
struct SwitchTimeline {
    std::vector<double> times;   // strictly increasing, s
    bool initial_on = false;
    double mean_waiting = 0.0;   // s

    [[nodiscard]] bool state_at(double t) const;
    /// State entered at event k.
    [[nodiscard]] bool state_after(std::size_t k) const { return (k % 2 == 0) != initial_on; }
    [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Telegraph process on [0, duration) with gamma-distributed waiting times of
/// mean 1/rate. shape = 1 gives the Markov (exponential) process; large shapes
/// approach periodic switching.
SwitchTimeline make_telegraph(double rate, double shape, double duration, bool initial_on, Rng& rng);

/// f_m = 1 / (tau + tau_m + tau_2pi).
double cycle_rate(double tau, double tau_m, double tau_2pi);

struct MeasurementRecord {
    double period = 0.0;                 // s
    std::vector<std::uint8_t> outcomes;  // 1 = ground state detected
    std::vector<std::uint8_t> truth;     // 1 = channel open during the cycle

    [[nodiscard]] std::size_t size() const { return outcomes.size(); }
    [[nodiscard]] double duration() const { return period * static_cast<double>(outcomes.size()); }
    [[nodiscard]] std::vector<double> as_double() const;
};

/// One Bernoulli readout per cycle of length 1/f_m, with success probability
/// p_on or p_off according to the channel state at the cycle midpoint.
MeasurementRecord synthesize_record(const SwitchTimeline& timeline, double p_on, double p_off,
                                    double duration, double f_m, Rng& rng);

struct SmoothedSeries {
    std::vector<double> values;
    std::size_t window = 1;
    double period = 0.0;
    double lag = 0.0;   // window * period

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

/// Centered moving mean over `window` samples; windows are truncated at the
/// record edges. Throws std::invalid_argument if the window exceeds the record.
SmoothedSeries running_average(std::span<const double> series, std::size_t window, double period);
SmoothedSeries running_average(const MeasurementRecord& record, std::size_t window);

/// Threshold crossings of the smoothed population: the channel is taken as open
/// while the value is below the threshold. Each estimated event time is when
/// the full window that produced the crossing has been recorded.
/// Throws std::invalid_argument unless 0.5 < threshold < 1.
SwitchTimeline detect_switches(const SmoothedSeries& smoothed, double threshold);

/// For each true event, delay until the first later estimated event entering
/// the same state, if one arrives within max_latency; missed events are skipped.
std::vector<double> detection_latencies(const SwitchTimeline& truth,
                                        const SwitchTimeline& estimate, double max_latency);

/// Mean interval between consecutive events, 0 with fewer than two events.
double mean_interval(const SwitchTimeline& timeline);

struct Spectrum {
    std::vector<double> frequency;   // Hz
    std::vector<double> power;
};

/// One-sided magnitude-squared spectrum of the mean-removed series. With
/// segments > 1 the series is split into that many equal non-overlapping
/// pieces whose periodograms are averaged. Needs at least 64 samples per segment.
Spectrum power_spectrum(std::span<const double> series, double sample_rate,
                        std::size_t segments = 1);

struct SpectralPeak {
    double frequency = 0.0;
    double power = 0.0;
    double median = 0.0;   // median non-DC power
    double ratio = 0.0;    // power / median
};

/// Largest non-DC bin with frequency in [f_lo, f_hi].
SpectralPeak dominant_peak(const Spectrum& spectrum, double f_lo = 0.0,
                           double f_hi = std::numeric_limits<double>::infinity());

/// Power of the bin nearest to f.
SpectralPeak bin_near(const Spectrum& spectrum, double f);

struct MonitorOptions {
    double h_p = 4e-9;
    double duration = 0.5;          // s
    std::size_t n_tau = 20;
    double threshold = 0.0;         // 0 = midpoint of (P_on, P_off)
};

struct MonitorResult {
    double p_on = 0.0;
    double p_off = 0.0;
    double f_m = 0.0;
    double threshold = 0.0;
    double resolution = 0.0;        // n_tau cycle periods
    SwitchTimeline truth;
    MeasurementRecord record;
    SmoothedSeries smoothed;
    SwitchTimeline detected;
    std::vector<double> latencies;
    Spectrum raw_spectrum;
    Spectrum smoothed_spectrum;
    SpectralPeak raw_peak;
    SpectralPeak smoothed_peak;
};

/// Telegraph gating (stream (seed, 0)), readout record (stream (seed, 1)),
/// running average, switch detection and spectra of both series. The probe
/// interrogates with config.probe.tau.
MonitorResult monitor_channel(const Config& config, const MonitorOptions& options,
                              std::uint64_t seed);

/// Dominant non-DC peak lies within tolerance of f and is at least
/// min_ratio times the median floor.
bool peak_resolved(const SpectralPeak& peak, double f, double tolerance, double min_ratio);

} // namespace nvsim
