#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "nvsim/measurement.hpp"

using namespace nvsim;
using testing::rel_close;

namespace {

double sample_std(const std::vector<double>& v, std::size_t from, std::size_t to)
{
    double m = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        m += v[i];
    }
    m /= static_cast<double>(to - from);
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        s += (v[i] - m) * (v[i] - m);
    }
    return std::sqrt(s / static_cast<double>(to - from - 1));
}

SwitchTimeline never_switches(bool on)
{
    SwitchTimeline t;
    t.initial_on = on;
    return t;
}

} // namespace

TEST_SUITE("measurement")
{
    TEST_CASE("cycle rate")
    {
        CHECK(cycle_rate(100e-6, 0.9e-6, 0.1e-6) == doctest::Approx(9900.99).epsilon(1e-5));
        CHECK(cycle_rate(2e-5, 0.0, 0.0) == doctest::Approx(5e4).epsilon(1e-14));
        CHECK(rel_close(cycle_rate(200e-6, 1.8e-6, 0.2e-6), 0.5 * cycle_rate(100e-6, 0.9e-6, 0.1e-6), 1e-14));
        CHECK_THROWS_AS(cycle_rate(0.0, 1e-6, 1e-7), std::invalid_argument);
    }

    TEST_CASE("telegraph timeline")
    {
        Rng rng = make_stream(1, 0);
        for (double shape : {1.0, 1000.0}) {
            const auto tl = make_telegraph(200.0, shape, 20.0, false, rng);
            for (std::size_t i = 1; i < tl.size(); ++i) {
                CHECK(tl.times[i] > tl.times[i - 1]);
            }
            CHECK(tl.times.front() >= 0.0);
            CHECK(tl.times.back() < 20.0);
            std::vector<double> gaps;
            for (std::size_t i = 1; i < tl.size(); ++i) {
                gaps.push_back(tl.times[i] - tl.times[i - 1]);
            }
            const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size();
            CHECK(std::abs(mean / 5e-3 - 1.0) < 0.05);
            const double cv = sample_std(gaps, 0, gaps.size()) / mean;
            CHECK(std::abs(cv - 1.0 / std::sqrt(shape)) < 0.05 / std::sqrt(shape) + 0.002);
            CHECK(tl.state_at(0.0) == false);
            CHECK(tl.state_at(tl.times[0]) == true);
            CHECK(tl.state_after(1) == false);
        }
        CHECK_THROWS_AS(make_telegraph(0.0, 1.0, 1.0, false, rng), std::invalid_argument);
    }

    TEST_CASE("record synthesis")
    {
        Rng rng = make_stream(2, 0);
        const auto ones = synthesize_record(never_switches(false), 1.0, 1.0, 0.1, 1e4, rng);
        CHECK(ones.size() == 1000);
        CHECK(std::all_of(ones.outcomes.begin(), ones.outcomes.end(), [](auto v) { return v == 1; }));

        const auto off = synthesize_record(never_switches(false), 0.61, 0.93, 1.0, 1e4, rng);
        REQUIRE(off.size() == 10000);
        const auto x = off.as_double();
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
        CHECK(std::abs(mean - 0.93) < 3.0 * std::sqrt(0.93 * 0.07 / 1e4));
        CHECK(std::abs(off.duration() - 1.0) <= off.period);
        CHECK(std::all_of(off.truth.begin(), off.truth.end(), [](auto v) { return v == 0; }));

        CHECK_THROWS_AS(synthesize_record(never_switches(false), 1.2, 0.9, 1.0, 1e4, rng),
                        std::invalid_argument);
    }

    TEST_CASE("conditional means recover the population pair")
    {
        Rng gate = make_stream(3, 0);
        Rng read = make_stream(3, 1);
        const auto tl = make_telegraph(200.0, 1.0, 5.0, false, gate);
        const auto rec = synthesize_record(tl, 0.61, 0.93, 5.0, 9901.0, read);
        double s_on = 0.0;
        double s_off = 0.0;
        double n_on = 0.0;
        double n_off = 0.0;
        for (std::size_t k = 0; k < rec.size(); ++k) {
            const double mid = (k + 0.5) * rec.period;
            CHECK(static_cast<bool>(rec.truth[k]) == tl.state_at(mid));
            if (rec.truth[k]) {
                s_on += rec.outcomes[k];
                n_on += 1.0;
            } else {
                s_off += rec.outcomes[k];
                n_off += 1.0;
            }
        }
        CHECK(std::abs(s_on / n_on - 0.61) < 3.0 * std::sqrt(0.61 * 0.39 / n_on));
        CHECK(std::abs(s_off / n_off - 0.93) < 3.0 * std::sqrt(0.93 * 0.07 / n_off));
        CHECK(std::abs(rec.duration() - 5.0) <= rec.period);
    }

    TEST_CASE("running average")
    {
        const std::vector<double> v{1, 0, 1, 1, 0, 0, 1, 0};
        const auto id = running_average(v, 1, 1e-4);
        CHECK(id.values == v);
        const auto three = running_average(v, 3, 1e-4);
        CHECK(three.values[0] == doctest::Approx(0.5));
        CHECK(three.values[1] == doctest::Approx(2.0 / 3.0));
        CHECK(three.values[7] == doctest::Approx(0.5));
        CHECK_THROWS_AS(running_average(v, 9, 1e-4), std::invalid_argument);
        CHECK_THROWS_AS(running_average(v, 0, 1e-4), std::invalid_argument);

        const double period = 1.0 / cycle_rate(100e-6, 0.9e-6, 0.1e-6);
        CHECK(running_average(v, 3, period).lag == doctest::Approx(3 * period));
        std::vector<double> long_series(100, 0.5);
        CHECK(running_average(long_series, 11, period).lag == doctest::Approx(1.1e-3).epsilon(0.01));
    }

    TEST_CASE("smoothing noise scales as the inverse square root of the window")
    {
        Rng rng = make_stream(4, 1);
        const auto rec = synthesize_record(never_switches(false), 0.61, 0.93, 20.0, 1e4, rng);
        const double p = 0.93;
        const double single = std::sqrt(p * (1 - p));
        for (std::size_t n : {4u, 16u, 64u}) {
            const auto s = running_average(rec, n);
            const double sd = sample_std(s.values, n, s.size() - n);
            CHECK(std::abs(sd * std::sqrt(static_cast<double>(n)) / single - 1.0) < 0.2);
        }
    }

    TEST_CASE("switch detection on a noiseless alternating record")
    {
        const double period = 1e-4;
        std::vector<double> v;
        for (int block = 0; block < 40; ++block) {
            for (int k = 0; k < 50; ++k) {
                v.push_back(block % 2 == 0 ? 0.93 : 0.61);
            }
        }
        const auto s = running_average(v, 1, period);
        const auto est = detect_switches(s, 0.77);
        CHECK(est.size() == 39);
        CHECK(std::abs(est.mean_waiting - 5e-3) <= period);
        CHECK(est.initial_on == false);

        const std::vector<double> flat(500, 0.93);
        CHECK(detect_switches(running_average(flat, 5, period), 0.77).times.empty());
        CHECK_THROWS_AS(detect_switches(s, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(detect_switches(s, 1.0), std::invalid_argument);
    }

    TEST_CASE("monitor resolution and latency at 4 nm")
    {
        const Config cfg = testing::defaults(4e-9);
        MonitorOptions opts;
        const auto r = monitor_channel(cfg, opts, 7);
        CHECK(r.resolution == doctest::Approx(2e-3).epsilon(0.05));
        CHECK(r.threshold == doctest::Approx(0.5 * (r.p_on + r.p_off)));
        CHECK(r.p_on < r.threshold);
        CHECK(r.threshold < r.p_off);
        CHECK(r.record.size() == static_cast<std::size_t>(std::floor(0.5 * r.f_m + 1e-9)));
        REQUIRE(!r.latencies.empty());
        const double bound = 2.0 * static_cast<double>(opts.n_tau) / r.f_m;
        for (double l : r.latencies) {
            CHECK(l >= 0.0);
            CHECK(l <= bound);
        }
        CHECK(static_cast<double>(r.latencies.size()) >= 0.5 * static_cast<double>(r.truth.size()));
    }

    TEST_CASE("population uncertainty times sqrt(N) is constant")
    {
        const Config cfg = testing::defaults(4e-9);
        Rng rng = make_stream(5, 1);
        const auto rec = synthesize_record(never_switches(true), 0.61, 0.93, 10.0, 9901.0, rng);
        std::vector<double> products;
        for (std::size_t n : {5u, 11u, 20u, 50u, 100u}) {
            const auto s = running_average(rec, n);
            products.push_back(sample_std(s.values, n, s.size() - n) * std::sqrt(static_cast<double>(n)));
        }
        const double ref = products.front();
        for (double p : products) {
            CHECK(std::abs(p / ref - 1.0) < 0.2);
        }
    }

    TEST_CASE("spectrum of simple signals")
    {
        const std::vector<double> constant(256, 0.7);
        const auto flat = power_spectrum(constant, 1000.0);
        for (double p : flat.power) {
            CHECK(p < 1e-25);
        }
        CHECK(flat.frequency.size() == 129);
        CHECK(flat.frequency.back() == doctest::Approx(500.0));

        std::vector<double> sine(1000);
        for (std::size_t i = 0; i < sine.size(); ++i) {
            sine[i] = std::sin(2.0 * std::numbers::pi * 50.0 * static_cast<double>(i) / 1000.0);
        }
        const auto spec = power_spectrum(sine, 1000.0);
        const auto peak = dominant_peak(spec);
        CHECK(peak.frequency == doctest::Approx(50.0));
        // one-sided density integrates to the variance
        const double df = spec.frequency[1];
        const double area = std::accumulate(spec.power.begin(), spec.power.end(), 0.0) * df;
        CHECK(area == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(bin_near(spec, 50.4).frequency == doctest::Approx(50.0));

        CHECK_THROWS_AS(power_spectrum(std::vector<double>(63, 0.0), 1.0), std::invalid_argument);
        CHECK_THROWS_AS(power_spectrum(std::vector<double>(300, 0.0), 1.0, 5), std::invalid_argument);
        CHECK(power_spectrum(sine, 1000.0, 4).frequency.size() == 126);
    }

    TEST_CASE("switching is resolved in the record spectrum at 4 nm")
    {
        const Config cfg = testing::defaults(4e-9);
        MonitorOptions opts;
        opts.h_p = 4e-9;
        const auto r = monitor_channel(cfg, opts, 42);
        MESSAGE("4 nm raw peak " << r.raw_peak.frequency << " Hz ratio " << r.raw_peak.ratio);
        CHECK(peak_resolved(r.raw_peak, 100.0, 10.0, 3.0));
    }

    TEST_CASE("switching is buried in noise at 7 nm")
    {
        const Config cfg = testing::defaults(7e-9);
        MonitorOptions opts;
        opts.h_p = 7e-9;
        const auto r = monitor_channel(cfg, opts, 42);
        CHECK_FALSE(peak_resolved(r.raw_peak, 100.0, 10.0, 3.0));
        const auto averaged = power_spectrum(r.record.as_double(), r.f_m, 5);
        const auto at100 = bin_near(averaged, 100.0);
        MESSAGE("7 nm averaged 100 Hz bin ratio " << at100.ratio);
        CHECK(at100.ratio < 3.0);
    }

    TEST_CASE("monitor is deterministic per seed")
    {
        const Config cfg = testing::defaults(4e-9);
        MonitorOptions opts;
        opts.duration = 0.1;
        const auto a = monitor_channel(cfg, opts, 9);
        const auto b = monitor_channel(cfg, opts, 9);
        CHECK(a.record.outcomes == b.record.outcomes);
        CHECK(a.truth.times == b.truth.times);
        CHECK(a.raw_spectrum.power == b.raw_spectrum.power);
        const auto c = monitor_channel(cfg, opts, 10);
        CHECK(a.record.outcomes != c.record.outcomes);
    }

    TEST_CASE("peak resolution predicate")
    {
        SpectralPeak p{101.0, 9.0, 2.0, 4.5};
        CHECK(peak_resolved(p, 100.0, 10.0, 3.0));
        p.frequency = 111.0;
        CHECK_FALSE(peak_resolved(p, 100.0, 10.0, 3.0));
        p.frequency = 100.0;
        p.ratio = 2.9;
        CHECK_FALSE(peak_resolved(p, 100.0, 10.0, 3.0));
    }
}
