#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <numbers>

#include "helpers.hpp"
#include "nvsim/dephasing.hpp"
#include "nvsim/planner.hpp"

using namespace nvsim;
using testing::rel_close;

TEST_SUITE("planner")
{
    TEST_CASE("resolution at the reference point")
    {
        const Config cfg = testing::defaults(3e-9);
        const double dt = temporal_resolution(cfg, 100e-6, 3e-9, 300e-6);
        CHECK(dt == doctest::Approx(1.1e-3).epsilon(0.5));
        const std::size_t n = averaging_window(dt, 100e-6, cfg.probe.tau_m);
        CHECK(n >= 6);
        CHECK(n <= 22);
        CHECK(n == static_cast<std::size_t>(std::ceil(dt / (100e-6 + cfg.probe.tau_m))));

        const double dp = contrast(cfg, 100e-6, 3e-9, 300e-6);
        CHECK(rel_close(dt, (100e-6 + cfg.probe.tau_m) / (dp * dp), 1e-12));
        CHECK_THROWS_AS(temporal_resolution(cfg, 300e-6, 3e-9, 300e-6), std::invalid_argument);
        CHECK_THROWS_AS(temporal_resolution(cfg, 0.0, 3e-9, 300e-6), std::invalid_argument);
    }

    TEST_CASE("inverse-square dependence on contrast")
    {
        // quadrupling the channel exponent in the small-signal regime doubles Delta P
        Config cfg = testing::defaults(3e-9);
        const double tau = 2e-6;
        const double a = temporal_resolution(cfg, tau, 3e-9, 300e-6);
        const double dp_a = contrast(cfg, tau, 3e-9, 300e-6);
        cfg.environment.c_ic *= 2.0;
        const double b = temporal_resolution(cfg, tau, 3e-9, 300e-6);
        const double dp_b = contrast(cfg, tau, 3e-9, 300e-6);
        CHECK(rel_close(a / b, (dp_b / dp_a) * (dp_b / dp_a), 1e-12));
        CHECK(dp_b / dp_a == doctest::Approx(2.0).epsilon(0.01));
        CHECK(a / b == doctest::Approx(4.0).epsilon(0.02));
    }

    TEST_CASE("resolution diverges as tau approaches T2")
    {
        Config cfg = testing::defaults(3e-9);
        double prev = 0.0;
        for (double f : {0.9, 0.99, 0.999, 0.9999}) {
            const double dt = temporal_resolution(cfg, f * 300e-6, 3e-9, 300e-6);
            CHECK(dt > prev);
            prev = dt;
        }
        // with a dominant background the late-tau resolution blows up
        cfg.environment.D_H2O = 3e-11;
        const double best = optimize_tau(cfg, 3e-9, 300e-6).delta_t_star;
        CHECK(temporal_resolution(cfg, 0.99 * 300e-6, 3e-9, 300e-6) > 1e4 * best);
    }

    TEST_CASE("optimum at the reference point")
    {
        const Config cfg = testing::defaults(3e-9);
        const auto curve = optimize_tau(cfg, 3e-9, 300e-6);
        CHECK(curve.tau_star > 50e-6);
        CHECK(curve.tau_star < 200e-6);
        CHECK(curve.delta_t_star > 0.55e-3);
        CHECK(curve.delta_t_star < 2.2e-3);
        CHECK(curve.n_tau_star >= 6);
        CHECK(curve.n_tau_star <= 22);
        for (std::size_t i = 0; i < curve.tau.size(); ++i) {
            CHECK(curve.delta_t[i] >= curve.delta_t_star * (1.0 - 1e-12));
            const double bound = (curve.tau[i] + cfg.probe.tau_m) / (curve.delta_p[i] * curve.delta_p[i]);
            CHECK(curve.delta_t[i] >= bound * (1.0 - 1e-12));
            CHECK(curve.tau[i] < 300e-6);
        }
    }

    TEST_CASE("optimum is grid independent")
    {
        const Config cfg = testing::defaults(3e-9);
        const auto coarse = optimize_tau(cfg, 3e-9, 300e-6, 200);
        const auto fine = optimize_tau(cfg, 3e-9, 300e-6, 1600);
        CHECK(std::abs(coarse.delta_t_star / fine.delta_t_star - 1.0) < 1e-3);
    }

    TEST_CASE("optimum improves with T2 and flattens")
    {
        const Config cfg = testing::defaults(3e-9);
        const double t_bg = background_dephasing_time(cfg, 3e-9);
        CHECK(t_bg > 0.0);
        double prev = kUnresolvable;
        for (double T2 = 10e-6; T2 <= 3e-3 * 1.0001; T2 *= 1.5) {
            const double d = optimize_tau(cfg, 3e-9, T2).delta_t_star;
            CHECK(d <= prev * (1.0 + 1e-6));
            prev = d;
        }
        const double T2 = 10.0 * t_bg;
        const double a = optimize_tau(cfg, 3e-9, T2).delta_t_star;
        const double b = optimize_tau(cfg, 3e-9, 2.0 * T2).delta_t_star;
        CHECK(std::abs(b / a - 1.0) < 0.05);
    }

    TEST_CASE("long-T2 optimum follows the channel dephasing time")
    {
        const Config cfg = testing::defaults(3e-9);
        const auto curve = optimize_tau(cfg, 3e-9, 1.0);
        const auto set = build_envelopes(cfg);
        const double t_ic = e_fold_time(set.ion_channel, 1.0);
        MESSAGE("tau* " << curve.tau_star << " s, channel e-fold " << t_ic << " s");
        CHECK(curve.tau_star > t_ic / 3.0);
        CHECK(curve.tau_star < t_ic * 3.0);
    }

    TEST_CASE("ensemble NV-NV rate")
    {
        const PhysicalConstants c;
        const double g = 2.0 * std::numbers::pi * 2.8e10;
        const double oracle = std::sqrt(2.0 * std::numbers::pi) / 3.0 * 1.054571817e-34 * 1e-7 * g * g * 1e24;
        CHECK(rel_close(ensemble_rate(c, 1e24), oracle, 1e-12));
        CHECK(ensemble_rate(c, 1e24) == doctest::Approx(2.7e5).epsilon(0.1));
        CHECK(rel_close(ensemble_rate(c, 2e24), 2.0 * ensemble_rate(c, 1e24), 1e-14));
        CHECK(ensemble_coupling_scale(c, 2.8e24) < 10e6);
        CHECK(ensemble_coupling_scale(c, 2.8e24) > 0.0);
    }

    TEST_CASE("pixel contrast")
    {
        const Config cfg = testing::defaults(3e-9);
        const EnsembleSpec spec;

        EnsembleSpec none = spec;
        none.channel_density = 0.0;
        const auto zero = pixel_contrast(cfg, none, 3e-9, 1e-6, 5, 0);
        CHECK(zero.delta_phi == 0.0);
        CHECK(zero.channels == 0);

        const auto a = pixel_contrast(cfg, spec, 3e-9, 1e-5, 5, 1);
        const auto a2 = pixel_contrast(cfg, spec, 3e-9, 1e-5, 5, 3);
        CHECK(a.delta_phi == a2.delta_phi);
        CHECK(a.stderr_phi == a2.stderr_phi);
        CHECK(a.delta_phi > 0.0);
        CHECK(a.stderr_phi < 0.1 * a.delta_phi);
        CHECK(a.nv_count == doctest::Approx(1e24 * 1e-12 * 3e-9));
        CHECK(rel_close(a.gamma_nv, ensemble_rate(cfg.constants, 1e24), 1e-12));

        EnsembleSpec big = spec;
        big.pixel_area = 4e-12;
        const auto b = pixel_contrast(cfg, big, 3e-9, 1e-5, 5, 0);
        const double ratio = b.delta_phi / a.delta_phi;
        const double err = 4.0 * std::hypot(b.stderr_phi / b.delta_phi, a.stderr_phi / a.delta_phi);
        MESSAGE("area ratio 4 gives contrast ratio " << ratio);
        CHECK(std::abs(ratio / 4.0 - 1.0) < std::max(0.15, err));
    }
}
