#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "helpers.hpp"
#include "nvsim/dephasing.hpp"
#include "nvsim/montecarlo.hpp"
#include "nvsim/noise.hpp"

using namespace nvsim;
using testing::rel_close;

namespace {

double mean_square_displacement(const DipoleBath& bath)
{
    double s = 0.0;
    for (const auto& d : bath.displacement) {
        s += dot(d, d);
    }
    return s / static_cast<double>(bath.size());
}

bool inside(const DipoleBath& bath)
{
    for (const auto& p : bath.positions) {
        if (p.x < bath.lo.x || p.x >= bath.hi.x || p.y < bath.lo.y || p.y >= bath.hi.y
            || p.z < bath.lo.z || p.z >= bath.hi.z) {
            return false;
        }
    }
    return true;
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

} // namespace

TEST_SUITE("montecarlo")
{
    TEST_CASE("zero diffusion leaves positions unchanged")
    {
        Rng rng = make_stream(3, 0);
        Config cfg = testing::defaults(4e-9);
        cfg.environment.D_H2O = 0.0;
        auto bath = make_water_bath(cfg, 4e-9, 500, rng);
        const auto before = bath.positions;
        for (int k = 0; k < 10; ++k) {
            step_bath(bath, 1e-9, rng);
        }
        for (std::size_t i = 0; i < bath.size(); ++i) {
            CHECK(bath.positions[i].x == before[i].x);
            CHECK(bath.positions[i].y == before[i].y);
            CHECK(bath.positions[i].z == before[i].z);
        }
    }

    TEST_CASE("mean square displacement follows 2 d D t")
    {
        const Config cfg = testing::defaults(4e-9);
        Rng rng = make_stream(4, 0);
        auto water = make_water_bath(cfg, 4e-9, 4000, rng);
        const double dt = 1e-10;
        for (int k = 0; k < 50; ++k) {
            step_bath(water, dt, rng);
        }
        const double t = 50 * dt;
        CHECK(std::abs(mean_square_displacement(water) / (6.0 * cfg.environment.D_H2O * t) - 1.0) < 0.05);
        CHECK(inside(water));

        auto lipid = make_lipid_bath(cfg, 4e-9, 4000, rng);
        const auto z_before = lipid.positions;
        for (int k = 0; k < 50; ++k) {
            step_bath(lipid, 1e-3, rng);
        }
        CHECK(std::abs(mean_square_displacement(lipid) / (4.0 * cfg.environment.D_L * 0.05) - 1.0) < 0.05);
        for (std::size_t i = 0; i < lipid.size(); ++i) {
            CHECK(lipid.positions[i].z == z_before[i].z);
        }
        CHECK(inside(lipid));
    }

    TEST_CASE("periodic wrap keeps the unwrapped displacement consistent")
    {
        Config cfg = testing::defaults(1e-9);
        Rng rng = make_stream(5, 0);
        auto bath = make_water_bath(cfg, 1e-9, 300, rng);
        const auto start = bath.positions;
        const Vec3 len = bath.hi - bath.lo;
        for (int k = 0; k < 200; ++k) {
            step_bath(bath, 1e-10, rng);
        }
        CHECK(inside(bath));
        for (std::size_t i = 0; i < bath.size(); ++i) {
            const Vec3 moved = start[i] + bath.displacement[i] - bath.positions[i];
            CHECK(std::abs(moved.x / len.x - std::round(moved.x / len.x)) < 1e-6);
            CHECK(std::abs(moved.y / len.y - std::round(moved.y / len.y)) < 1e-6);
            CHECK(std::abs(moved.z / len.z - std::round(moved.z / len.z)) < 1e-6);
        }
    }

    TEST_CASE("bath size and coarse-graining")
    {
        const Config cfg = testing::defaults(1e-9);
        Rng rng = make_stream(6, 0);
        const auto full = make_water_bath(cfg, 1e-9, 1000000, rng);
        const double expected = cfg.environment.water_ortho_density() * std::pow(8e-9, 3);
        CHECK(rel_close(full.physical_count, expected, 1e-12));
        CHECK(full.size() == static_cast<std::size_t>(std::llround(expected)));
        const auto coarse = make_water_bath(cfg, 1e-9, 1000, rng);
        CHECK(coarse.size() == 1000);
        const double m0 = std::sqrt(dot(full.moments[0], full.moments[0]));
        const double m1 = std::sqrt(dot(coarse.moments[0], coarse.moments[0]));
        CHECK(rel_close(m1 / m0, std::sqrt(expected / 1000.0), 1e-9));
        CHECK(full.lo.z == doctest::Approx(-9e-9));
        CHECK(full.hi.z == doctest::Approx(-1e-9));
    }

    TEST_CASE("point dipole field")
    {
        const double m = 1e-26;
        const double h = 3e-9;
        CHECK(rel_close(dipole_bz({0, 0, m}, {0, 0, h}, 1e-7), 2.0 * m * 1e-7 / (h * h * h), 1e-12));
        CHECK(rel_close(dipole_bz({0, 0, m}, {h, 0, 0}, 1e-7), -m * 1e-7 / (h * h * h), 1e-12));
        DipoleBath empty;
        CHECK(field_at_probe(empty, {}, 1e-7) == 0.0);
    }

    TEST_CASE("channel arrivals")
    {
        const EnvironmentConfig env;
        Rng rng = make_stream(7, 0);
        CHECK(channel_events(env, 5e23, 4e-18, 0.0, 1e-3, false, rng).empty());

        const double rate = 5e23 * 4e-18;
        const double window = 1e-5;
        const std::size_t runs = 3000;
        std::vector<double> counts;
        for (std::size_t r = 0; r < runs; ++r) {
            const auto ev = channel_events(env, 5e23, 4e-18, 0.0, window, true, rng);
            for (std::size_t i = 1; i < ev.size(); ++i) {
                CHECK(ev[i].time >= ev[i - 1].time);
            }
            counts.push_back(static_cast<double>(ev.size()));
        }
        const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / runs;
        double var = 0.0;
        for (double c : counts) {
            var += (c - mean) * (c - mean);
        }
        var /= runs - 1;
        const double expected = rate * window;
        CHECK(std::abs(mean - expected) < 3.0 * std::sqrt(expected / runs));
        CHECK(std::abs(var / mean - 1.0) < 0.1);
    }

    TEST_CASE("closed channel trace is silent")
    {
        const Config cfg = testing::defaults(4e-9);
        Rng rng = make_stream(8, 0);
        const auto tr = channel_trace(cfg, 4e-9, 1e-5, 1e-8, false, rng);
        for (double b : tr.samples) {
            CHECK(b == 0.0);
        }
        const auto open = channel_trace(cfg, 4e-9, 1e-5, 1e-8, true, rng);
        double peak = 0.0;
        for (double b : open.samples) {
            peak = std::max(peak, std::abs(b));
        }
        CHECK(peak > 0.0);
    }

    TEST_CASE("echo phase oracles")
    {
        const double g = 2.8e10;
        const double tau = 1e-6;
        FieldTrace constant{1e-9, std::vector<double>(1001, 3e-6), "c"};
        CHECK(std::abs(echo_phase(constant, tau, g)) < 1e-9 * g * 3e-6 * tau);

        FieldTrace drift{1e-9, {}, "d"};
        const double a = 5.0;  // T/s
        for (int k = 0; k <= 1000; ++k) {
            drift.samples.push_back(a * k * 1e-9);
        }
        CHECK(rel_close(echo_phase(drift, tau, g), -kEchoPhasePerCycle * g * a * tau * tau / 4.0, 1e-9));

        FieldTrace step{1e-9, std::vector<double>(1001, 0.0), "s"};
        const double b = 1e-6;
        for (int k = 501; k <= 1000; ++k) {
            step.samples[k] = b;
        }
        const double want = -kEchoPhasePerCycle * g * b * (tau / 2.0 - 0.5e-9);
        CHECK(rel_close(echo_phase(step, tau, g), want, 1e-9));

        CHECK_THROWS_AS(echo_phase(constant, 2e-6, g), TraceTooShort);
    }

    TEST_CASE("static offset does not change the echo phase")
    {
        Rng rng = make_stream(9, 0);
        const auto tr = synthetic_ou_trace(1e-6, 1e6, 1e-9, 4001, rng);
        auto shifted = tr;
        for (double& s : shifted.samples) {
            s += 2e-6;
        }
        for (double tau : {1e-6, 2.5e-6, 4e-6}) {
            const double scale = 2.8e10 * 2e-6 * tau;
            CHECK(std::abs(echo_phase(tr, tau, 2.8e10) - echo_phase(shifted, tau, 2.8e10)) < 1e-12 * scale);
        }
    }

    TEST_CASE("synthetic OU trace statistics")
    {
        Rng rng = make_stream(10, 0);
        const double sigma = 2e-6;
        const double f = 1e6;
        const auto tr = synthetic_ou_trace(sigma, f, 1e-8, 400000, rng);
        double m = 0.0;
        for (double s : tr.samples) {
            m += s;
        }
        m /= tr.samples.size();
        double v = 0.0;
        double c1 = 0.0;
        for (std::size_t i = 0; i < tr.samples.size(); ++i) {
            v += (tr.samples[i] - m) * (tr.samples[i] - m);
            if (i + 1 < tr.samples.size()) {
                c1 += (tr.samples[i] - m) * (tr.samples[i + 1] - m);
            }
        }
        CHECK(std::abs(std::sqrt(v / tr.samples.size()) / sigma - 1.0) < 0.05);
        CHECK(std::abs(c1 / v - std::exp(-f * 1e-8)) < 0.01);
    }

    TEST_CASE("zero field gives a flat envelope")
    {
        const Config cfg = testing::defaults(4e-9);
        const auto grid = linspace(1e-7, 1e-5, 11);
        const auto env = ensemble_envelope(cfg, {}, grid, 16, 1, 1);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(env.D[i] == 1.0);
            CHECK(env.stderr_D[i] == 0.0);
        }
        CHECK_THROWS_AS(ensemble_envelope(cfg, {}, grid, 1, 1, 1), std::invalid_argument);
    }

    TEST_CASE("ensemble envelope is thread-count independent")
    {
        const Config cfg = testing::defaults(4e-9);
        EnsembleSource src;
        src.kind = EnsembleSource::Kind::SyntheticOU;
        src.sigma_B = 3e-6;
        src.f_e = 1e5;
        const auto grid = linspace(2e-6, 4e-5, 9);
        const auto a = ensemble_envelope(cfg, src, grid, 64, 17, 1);
        const auto b = ensemble_envelope(cfg, src, grid, 64, 17, 4);
        CHECK(a.D == b.D);
        CHECK(a.stderr_D == b.stderr_D);
        CHECK(a.mean_phase_sq == b.mean_phase_sq);
    }

    TEST_CASE("sampled OU envelope matches the closed form")
    {
        const Config cfg = testing::defaults(4e-9);
        const double f = 1e5;
        for (double th : {0.3, 1.0, 10.0}) {
            EnsembleSource src;
            src.kind = EnsembleSource::Kind::SyntheticOU;
            src.f_e = f;
            src.sigma_B = f / (cfg.constants.gamma_p * th);
            const auto grid = linspace(2e-6, 1e-4, 12);
            const auto env = ensemble_envelope(cfg, src, grid, 2000, 23, 0);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double want = crossover_envelope(src.sigma_B, f, grid[i], cfg.constants.gamma_p);
                CHECK(std::abs(env.D[i] - want) < 4.0 * env.stderr_D[i] + 0.02);
            }
        }
    }

    TEST_CASE("equilibrium water bath RMS field")
    {
        const Config cfg = testing::defaults(4e-9);
        double sum_sq = 0.0;
        const int baths = 300;
        for (int j = 0; j < baths; ++j) {
            Rng rng = make_stream(12, j);
            const auto bath = make_water_bath(cfg, 4e-9, 2000, rng);
            const double b = field_at_probe(bath, {}, cfg.constants.mu0_over_4pi);
            sum_sq += b * b;
        }
        const double rms = std::sqrt(sum_sq / baths);
        const double analytic = sigma_water(cfg.constants, 4e-9, cfg.environment.water_ortho_density());
        CHECK(rms > analytic / 2.0);
        CHECK(rms < analytic * 2.0);
    }

    TEST_CASE("water bath rate agrees with the fast-limit estimate" * doctest::test_suite("montecarlo_water"))
    {
        const Config cfg = testing::defaults(4e-9);
        EnsembleSource src;
        src.kind = EnsembleSource::Kind::WaterBath;
        src.h_p = 4e-9;
        src.particles = 1000;
        const auto grid = linspace(0.4e-6, 2e-6, 5);
        const auto env = ensemble_envelope(cfg, src, grid, 60, 31, 0);
        std::vector<double> chi;
        for (double m2 : env.mean_phase_sq) {
            chi.push_back(0.5 * m2);
        }
        const double fitted = fit_rate_through_origin(grid, chi);
        const auto w = characterize(SourceKind::Water, cfg.constants, cfg.environment, 4e-9);
        const double analytic = ffl_rate(w.f_e, w.theta);
        MESSAGE("water rate: sampled " << fitted << " Hz, fast-limit " << analytic << " Hz");
        CHECK(fitted > analytic / 3.0);
        CHECK(fitted < analytic * 3.0);
    }

    TEST_CASE("rate fit through the origin")
    {
        const std::vector<double> t{1.0, 2.0, 3.0};
        const std::vector<double> y{2.0, 4.0, 6.0};
        CHECK(fit_rate_through_origin(t, y) == doctest::Approx(2.0));
        CHECK(trace_time_step(1e6, 1e-3) == doctest::Approx(5e-8));
        CHECK(trace_time_step(1e6, 1e-6) == doctest::Approx(5e-9));
    }
}
