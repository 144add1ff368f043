#include "nvsim/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvsim/dephasing.hpp"
#include "nvsim/imaging.hpp"
#include "nvsim/io.hpp"
#include "nvsim/measurement.hpp"
#include "nvsim/montecarlo.hpp"
#include "nvsim/noise.hpp"
#include "nvsim/params.hpp"
#include "nvsim/planner.hpp"

namespace nvsim::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
    std::string config_path;
    std::vector<std::string> sets;
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    std::string out;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

struct RunContext {
    Config config;
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    std::vector<fs::path> outputs;
    fs::path manifest;
    std::ostream* out = nullptr;

    void emit(const fs::path& path, const std::string& text)
    {
        write_text(path, text);
        outputs.push_back(path);
    }
    void emit(const fs::path& path, const CsvTable& table) { emit(path, table.str()); }
};

std::string precise(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Config resolve_config(const Globals& g, double default_h, const CLI::Option* h_opt, double h)
{
    std::string text = "{}";
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in) {
            throw ConfigError("cannot read config file " + g.config_path);
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    bool has_h = false;
    const auto doc = json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("probe") && doc["probe"].is_object()) {
        has_h = doc["probe"].contains("h_p");
    }
    std::vector<std::string> overrides;
    if (!has_h) {
        overrides.push_back("probe.h_p=" + precise(default_h));
    }
    overrides.insert(overrides.end(), g.sets.begin(), g.sets.end());
    if (h_opt != nullptr && h_opt->count() > 0) {
        overrides.push_back("probe.h_p=" + precise(h));
    }
    return parse_config(text, overrides);
}

fs::path output_or(const Globals& g, const std::string& fallback)
{
    return g.out.empty() ? fs::path(fallback) : fs::path(g.out);
}

fs::path sibling(const fs::path& base, const std::string& suffix, const std::string& ext)
{
    auto p = base;
    p.replace_filename(base.stem().string() + suffix + ext);
    return p;
}

std::string nm_tag(double h)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "h%gnm", std::round(h * 1e10) / 10.0);
    return buf;
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

std::vector<double> logspace(double lo, double hi, std::size_t n)
{
    auto v = linspace(std::log(lo), std::log(hi), n);
    for (auto& x : v) {
        x = std::exp(x);
    }
    return v;
}

std::vector<double> parse_grid(const std::string& spec, const std::string& flag, bool log)
{
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;
    char c1 = 0;
    char c2 = 0;
    std::istringstream is(spec);
    if (!(is >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1 || !(lo > 0.0)
        || hi < lo) {
        throw CLI::ValidationError(flag, "expected lo:hi:n with 0 < lo <= hi, got " + spec);
    }
    return log ? logspace(lo, hi, n) : linspace(lo, hi, n);
}

// sources ------------------------------------------------------------------

struct SourcesArgs {
    double h_min = 1e-9;
    double h_max = 10e-9;
    std::size_t points = 10;
};

void run_sources(RunContext& ctx, const Globals& g, const SourcesArgs& a)
{
    const auto hs = linspace(a.h_min, a.h_max, a.points);
    std::vector<double> h_col;
    std::vector<std::string> source;
    std::vector<double> sigma;
    std::vector<double> f_e;
    std::vector<double> theta;
    std::vector<std::string> regime;
    for (double h : hs) {
        for (const auto& s : characterize_all(ctx.config.constants, ctx.config.environment, h)) {
            h_col.push_back(h);
            source.emplace_back(to_string(s.kind));
            sigma.push_back(s.sigma_B);
            f_e.push_back(s.f_e);
            theta.push_back(s.theta);
            regime.emplace_back(to_string(s.regime));
        }
    }
    CsvTable table;
    table.add("h_p", h_col);
    table.add_text("source", source);
    table.add("sigma_B", sigma);
    table.add("f_e", f_e);
    table.add("theta", theta);
    table.add_text("regime", regime);
    ctx.emit(output_or(g, "sources.csv"), table);

    const double h = ctx.config.probe.h_p;
    *ctx.out << "source        sigma_B[T]      f_e[Hz]         Theta           regime   (h_p = "
             << h << " m)\n";
    for (const auto& s : characterize_all(ctx.config.constants, ctx.config.environment, h)) {
        char line[160];
        std::snprintf(line, sizeof line, "%-13s %-15.6e %-15.6e %-15.6e %s\n",
                      std::string(to_string(s.kind)).c_str(), s.sigma_B, s.f_e, s.theta,
                      std::string(to_string(s.regime)).c_str());
        *ctx.out << line;
    }
}

// envelopes ----------------------------------------------------------------

struct EnvelopesArgs {
    double t_max = 0.0;
    std::size_t points = 200;
};

void run_envelopes(RunContext& ctx, const Globals& g, const EnvelopesArgs& a)
{
    const auto& probe = ctx.config.probe;
    const EnvelopeSet env = build_envelopes(ctx.config);
    const double t_max = a.t_max > 0.0 ? a.t_max : probe.T2;
    const auto ts = linspace(0.0, t_max, a.points);
    std::vector<std::vector<double>> c(10);
    for (double t : ts) {
        c[0].push_back(env.water.envelope(t));
        c[1].push_back(env.lipid.envelope(t));
        c[2].push_back(env.electrolyte.envelope(t));
        c[3].push_back(env.intrinsic.envelope(t));
        c[4].push_back(env.ion_channel.envelope(t));
        c[5].push_back(env.off(t));
        c[6].push_back(env.on(t));
        c[7].push_back(env.p_off(t));
        c[8].push_back(env.p_on(t));
        c[9].push_back(env.contrast(t));
    }
    CsvTable table;
    table.add("t", ts);
    const char* names[] = {"D_H2O", "D_L", "D_E", "D_13C", "D_ic",
                           "D_off", "D_on", "P_off", "P_on", "delta_P"};
    for (std::size_t i = 0; i < c.size(); ++i) {
        table.add(names[i], c[i]);
    }
    ctx.emit(output_or(g, "envelopes.csv"), table);
    *ctx.out << "tau = " << probe.tau << " s: P_off = " << env.p_off(probe.tau)
             << ", P_on = " << env.p_on(probe.tau) << ", delta_P = " << env.contrast(probe.tau)
             << "\n";
}

// trace ----------------------------------------------------------------------

struct TraceArgs {
    std::string source = "channel";
    double duration = 1e-5;
    double dt = 0.0;
    std::size_t particles = 10000;
    bool closed = false;
    double sigma = 0.0;
    double f_e = 0.0;
    double echo_tau = 0.0;
};

void run_trace(RunContext& ctx, const Globals& g, const TraceArgs& a)
{
    const auto& cfg = ctx.config;
    const double h = cfg.probe.h_p;
    Rng rng = make_stream(ctx.seed, 0);
    FieldTrace trace;
    auto step = [&](SourceKind kind) {
        return a.dt > 0.0 ? a.dt
                          : trace_time_step(fluctuation_rate(kind, cfg.constants, cfg.environment, h),
                                            a.duration);
    };
    if (a.source == "water") {
        trace = water_trace(cfg, h, a.duration, step(SourceKind::Water), a.particles, rng);
    } else if (a.source == "lipid") {
        trace = lipid_trace(cfg, h, a.duration, step(SourceKind::Lipid), a.particles, rng);
    } else if (a.source == "channel" || a.source == "ion_channel") {
        trace = channel_trace(cfg, h, a.duration, step(SourceKind::IonChannel), !a.closed, rng);
    } else {
        const auto ic = characterize(SourceKind::IonChannel, cfg.constants, cfg.environment, h);
        const double sigma = a.sigma > 0.0 ? a.sigma : ic.sigma_B;
        const double f_e = a.f_e > 0.0 ? a.f_e : ic.f_e;
        const double dt = a.dt > 0.0 ? a.dt : trace_time_step(f_e, a.duration);
        const auto n = static_cast<std::size_t>(std::ceil(a.duration / dt - 1e-9)) + 1;
        trace = synthetic_ou_trace(sigma, f_e, dt, n, rng);
    }
    std::vector<double> ts(trace.samples.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        ts[k] = static_cast<double>(k) * trace.dt;
    }
    CsvTable table;
    table.add("t", ts);
    table.add("B_z", trace.samples);
    ctx.emit(output_or(g, "trace.csv"), table);

    double mean = 0.0;
    double sq = 0.0;
    for (double b : trace.samples) {
        mean += b;
        sq += b * b;
    }
    const double n = static_cast<double>(trace.samples.size());
    *ctx.out << a.source << " trace: " << trace.samples.size() << " samples, dt = " << trace.dt
             << " s, rms = " << std::sqrt(std::max(0.0, sq / n - (mean / n) * (mean / n)))
             << " T\n";
    if (a.echo_tau > 0.0) {
        const double phi = echo_phase(trace, a.echo_tau, cfg.constants.gamma_p);
        *ctx.out << "echo phase at tau = " << a.echo_tau << " s: " << phi << " rad\n";
    }
}

// envelope-mc ----------------------------------------------------------------

struct EnvelopeMcArgs {
    std::string source = "ou";
    double theta = 1.0;
    double f_e = 3e4;
    std::size_t n_traj = 1000;
    std::size_t points = 20;
    double tau_max = 0.0;
    std::string tau_grid;
};

void run_envelope_mc(RunContext& ctx, const Globals& g, const EnvelopeMcArgs& a)
{
    const auto& c = ctx.config.constants;
    EnsembleSource src;
    DephasingModel analytic;
    analytic.form = EnvelopeForm::CrossoverClosedForm;
    analytic.gamma_p = c.gamma_p;
    double tau_max = a.tau_max;
    if (a.source == "ou") {
        src.kind = EnsembleSource::Kind::SyntheticOU;
        src.f_e = a.f_e;
        src.sigma_B = a.f_e / (c.gamma_p * a.theta);
        analytic.source.sigma_B = src.sigma_B;
        analytic.source.f_e = src.f_e;
        if (tau_max <= 0.0) {
            // decay to about D = 0.05
            tau_max = e_fold_time(analytic, 1e3) * 2.0;
            while (analytic.decay_exponent(tau_max) < 3.0) {
                tau_max *= 1.2;
            }
        }
    } else {
        src.kind = EnsembleSource::Kind::ZeroField;
        analytic.source.f_e = 1.0;
        if (tau_max <= 0.0) {
            tau_max = ctx.config.probe.T2;
        }
    }
    const auto taus = a.tau_grid.empty()
                          ? linspace(tau_max / static_cast<double>(a.points), tau_max, a.points)
                          : parse_grid(a.tau_grid, "--tau-grid", false);
    const auto mc = ensemble_envelope(ctx.config, src, taus, a.n_traj, ctx.seed, ctx.threads);
    std::vector<double> exact;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        exact.push_back(analytic.envelope(taus[i]));
        if (std::abs(mc.D[i] - exact.back()) <= 3.0 * mc.stderr_D[i] + 1e-12) {
            ++agree;
        }
    }
    CsvTable table;
    table.add("tau", taus);
    table.add("D", mc.D);
    table.add("stderr", mc.stderr_D);
    table.add("D_analytic", exact);
    ctx.emit(output_or(g, "envelope_mc.csv"), table);
    *ctx.out << agree << "/" << taus.size()
             << " points within 3 standard errors of the closed form\n";
}

// monitor ----------------------------------------------------------------------

struct MonitorArgs {
    double duration = 0.5;
    std::size_t n_tau = 20;
    double threshold = 0.0;
    std::string spectrum;
    std::string spectrum_of = "smoothed";
};

CsvTable record_table(const MonitorResult& r)
{
    const std::size_t n = r.record.size();
    std::vector<double> t(n);
    std::vector<double> outcome(n);
    std::vector<double> truth(n);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = (static_cast<double>(k) + 0.5) * r.record.period;
        outcome[k] = r.record.outcomes[k];
        truth[k] = r.record.truth[k];
    }
    CsvTable table;
    table.add("t", t);
    table.add("outcome", outcome);
    table.add("smoothed", r.smoothed.values);
    table.add("truth", truth);
    return table;
}

CsvTable spectrum_table(const Spectrum& s)
{
    CsvTable table;
    table.add("frequency", s.frequency);
    table.add("power", s.power);
    return table;
}

json monitor_summary(const MonitorResult& r)
{
    json j;
    j["P_on"] = r.p_on;
    j["P_off"] = r.p_off;
    j["f_m_Hz"] = r.f_m;
    j["threshold"] = r.threshold;
    j["resolution_s"] = r.resolution;
    j["true_switches"] = r.truth.size();
    j["detected_switches"] = r.detected.size();
    j["detected_mean_waiting_s"] = r.detected.mean_waiting;
    j["raw_peak_Hz"] = r.raw_peak.frequency;
    j["raw_peak_ratio"] = r.raw_peak.ratio;
    j["raw_peak_resolved"] = peak_resolved(r.raw_peak, 100.0, 10.0, 3.0);
    j["smoothed_peak_Hz"] = r.smoothed_peak.frequency;
    j["smoothed_peak_ratio"] = r.smoothed_peak.ratio;
    return j;
}

void run_monitor(RunContext& ctx, const Globals& g, const MonitorArgs& a)
{
    MonitorOptions opt;
    opt.h_p = ctx.config.probe.h_p;
    opt.duration = a.duration;
    opt.n_tau = a.n_tau;
    opt.threshold = a.threshold;
    const auto r = monitor_channel(ctx.config, opt, ctx.seed);
    const auto path = output_or(g, "record.csv");
    ctx.emit(path, record_table(r));
    if (!a.spectrum.empty()) {
        ctx.emit(a.spectrum,
                 spectrum_table(a.spectrum_of == "raw" ? r.raw_spectrum : r.smoothed_spectrum));
    }
    *ctx.out << monitor_summary(r).dump(2) << "\n";
}

// plan -------------------------------------------------------------------------

struct PlanArgs {
    std::string t2_grid = "1e-5:3e-3:40";
    std::string curve;
};

void run_plan(RunContext& ctx, const Globals& g, const PlanArgs& a)
{
    const double h = ctx.config.probe.h_p;
    const auto t2s = parse_grid(a.t2_grid, "--t2-grid", true);
    std::vector<double> tau_star;
    std::vector<double> dt_star;
    std::vector<double> n_tau;
    for (double t2 : t2s) {
        const auto curve = optimize_tau(ctx.config, h, t2);
        tau_star.push_back(curve.tau_star);
        dt_star.push_back(curve.delta_t_star);
        n_tau.push_back(static_cast<double>(curve.n_tau_star));
    }
    CsvTable table;
    table.add("T2", t2s);
    table.add("tau_star", tau_star);
    table.add("delta_t_star", dt_star);
    table.add("N_tau", n_tau);
    ctx.emit(output_or(g, "plan.csv"), table);

    const auto curve = optimize_tau(ctx.config, h, ctx.config.probe.T2);
    if (!a.curve.empty()) {
        CsvTable c;
        c.add("tau", curve.tau);
        c.add("delta_P", curve.delta_p);
        c.add("delta_t", curve.delta_t);
        ctx.emit(a.curve, c);
    }
    *ctx.out << "h_p = " << h << " m, T2 = " << curve.T2 << " s: tau* = " << curve.tau_star
             << " s, delta_t* = " << curve.delta_t_star << " s, N_tau = " << curve.n_tau_star
             << "\nbackground dephasing time = " << background_dephasing_time(ctx.config, h)
             << " s\n";
}

// ensemble -----------------------------------------------------------------------

struct EnsembleArgs {
    double n_nv = 1e24;
    double pixel = 1e-6;
    double channel_density = 2e15;
    std::size_t samples = EnsembleSpec{}.nv_samples;
    double tau_min = 1e-8;
    double tau_max = 1e-4;
    std::size_t points = 61;
};

void run_ensemble(RunContext& ctx, const Globals& g, const EnsembleArgs& a)
{
    EnsembleSpec spec;
    spec.n_nv = a.n_nv;
    spec.pixel_area = a.pixel * a.pixel;
    spec.channel_density = a.channel_density;
    spec.nv_samples = a.samples;
    const double h = ctx.config.probe.h_p;
    const auto opt = optimize_ensemble_tau(ctx.config, spec, h, a.tau_min, a.tau_max, a.points,
                                           ctx.seed, ctx.threads);
    CsvTable table;
    table.add("tau", opt.tau);
    table.add("delta_phi", opt.delta_phi);
    table.add("stderr", opt.stderr_phi);
    ctx.emit(output_or(g, "ensemble.csv"), table);
    const auto& b = opt.best;
    *ctx.out << "Gamma_nv = " << b.gamma_nv << " 1/s, NVs in pixel = " << b.nv_count
             << ", channels = " << b.channels << "\ntau* = " << b.tau
             << " s, delta_Phi = " << b.delta_phi << " +/- " << b.stderr_phi << "\n";
}

// scan -----------------------------------------------------------------------------

struct ScanArgs {
    double dwell = 0.1;
    std::size_t grid = 20;
    double pitch = 1e-9;
};

json emit_scan(RunContext& ctx, const Config& cfg, const fs::path& pgm, double dwell,
               std::size_t n, double pitch)
{
    const LateralPoint center = cfg.environment.channel_positions.empty()
                                    ? LateralPoint{0.0, 0.0}
                                    : cfg.environment.channel_positions.front();
    const auto grid = ScanGrid::centered(n, pitch, center);
    const auto image = scan(cfg, grid, dwell, ctx.seed, ctx.threads);
    ctx.emit(pgm, to_pgm(image.estimate, image.nx, image.ny));
    const auto dp = image.delta_p();
    ctx.emit(sibling(pgm, "_delta", ".pgm"), to_pgm(dp, image.nx, image.ny));
    CsvTable table;
    std::vector<double> ix;
    std::vector<double> iy;
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ix.push_back(static_cast<double>(k % grid.nx));
        iy.push_back(static_cast<double>(k / grid.nx));
        const auto p = grid.position(k % grid.nx, k / grid.nx);
        x.push_back(p[0]);
        y.push_back(p[1]);
    }
    table.add("ix", ix);
    table.add("iy", iy);
    table.add("x", x);
    table.add("y", y);
    table.add("P", image.estimate);
    table.add("P_expected", image.expected);
    table.add("delta_P", dp);
    ctx.emit(sibling(pgm, "", ".csv"), table);

    const std::size_t m = image.argmin();
    json j;
    j["dwell_s"] = dwell;
    j["samples_per_pixel"] = image.samples;
    j["acquisition_time_s"] = acquisition_time(grid, dwell);
    j["cnr"] = image_cnr(image);
    j["min_pixel"] = {m % grid.nx, m / grid.nx};
    j["channel_pixel"] = {n / 2, n / 2};
    return j;
}

void run_scan(RunContext& ctx, const Globals& g, const ScanArgs& a)
{
    const auto j = emit_scan(ctx, ctx.config, output_or(g, "scan.pgm"), a.dwell, a.grid, a.pitch);
    *ctx.out << j.dump(2) << "\n";
}

// reproduce ---------------------------------------------------------------------------

Config with_h(Config c, double h)
{
    c.probe.h_p = h;
    return c;
}

json reproduce_2b(RunContext& ctx, const fs::path& dir)
{
    const double h = 4e-9;
    const Config cfg = with_h(ctx.config, h);
    const auto& c = cfg.constants;
    const EnvelopeSet env = build_envelopes(cfg);
    const auto ts = logspace(1e-7, 1e-1, 241);
    CsvTable table;
    table.add("t", ts);
    auto column = [&](const DephasingModel& m) {
        std::vector<double> v;
        for (double t : ts) {
            v.push_back(m.envelope(t));
        }
        return v;
    };
    table.add("D_ion_channel", column(env.ion_channel));
    table.add("D_water", column(env.water));
    table.add("D_lipid", column(env.lipid));
    table.add("D_electrolyte", column(env.electrolyte));
    ctx.emit(dir / "envelopes.csv", table);

    json j;
    j["h_p_m"] = h;
    j["f_e_ion_channel_Hz"] = fluctuation_rate(SourceKind::IonChannel, c, cfg.environment, h);
    j["gamma_water_Hz"] = env.water.rate;
    j["gamma_lipid_Hz"] = env.lipid.rate;
    j["f_e_electrolyte_Hz"] = fluctuation_rate(SourceKind::Electrolyte, c, cfg.environment, h);
    j["gamma_electrolyte_Hz"] = env.electrolyte.rate;
    return j;
}

json reproduce_2c(RunContext& ctx, const fs::path& dir)
{
    const auto hs = linspace(1e-9, 10e-9, 37);
    const std::array kinds{SourceKind::IonChannel, SourceKind::Water, SourceKind::Lipid,
                           SourceKind::Electrolyte};
    CsvTable table;
    table.add("h_p", hs);
    json j;
    for (auto kind : kinds) {
        std::vector<double> th;
        for (double h : hs) {
            th.push_back(characterize(kind, ctx.config.constants, ctx.config.environment, h).theta);
        }
        const std::string name(to_string(kind));
        j["theta_" + name + "_min"] = *std::min_element(th.begin(), th.end());
        j["theta_" + name + "_max"] = *std::max_element(th.begin(), th.end());
        table.add("theta_" + name, std::move(th));
    }
    ctx.emit(dir / "theta.csv", table);
    return j;
}

json reproduce_3(RunContext& ctx, const fs::path& dir)
{
    Config cfg = with_h(ctx.config, 3e-9);
    cfg.probe.tau = 0.5 * cfg.probe.T2;
    json j;
    json scans = json::array();
    for (double dwell : {0.01, 0.1, 1.0}) {
        char name[32];
        std::snprintf(name, sizeof name, "scan_%gms.pgm", dwell * 1e3);
        scans.push_back(emit_scan(ctx, cfg, dir / name, dwell, 20, 1e-9));
    }
    j["scans"] = scans;
    CsvTable psf;
    bool first = true;
    for (double h : {3e-9, 4e-9, 5e-9, 6e-9, 7e-9, 8e-9}) {
        const auto p = point_spread_profile(cfg, h, 20e-9, 201);
        if (first) {
            psf.add("d", p.offset);
            first = false;
        }
        psf.add("delta_P_" + nm_tag(h), p.delta_p);
        j["fwhm_m"][nm_tag(h)] = p.fwhm();
    }
    ctx.emit(dir / "point_spread.csv", psf);
    return j;
}

json reproduce_4b(RunContext& ctx, const fs::path& dir)
{
    const auto t2s = logspace(1e-5, 3e-3, 40);
    CsvTable table;
    table.add("T2", t2s);
    json j;
    for (double h : {2e-9, 3e-9, 4e-9, 5e-9, 6e-9}) {
        std::vector<double> dt;
        std::vector<double> tau;
        for (double t2 : t2s) {
            const auto curve = optimize_tau(ctx.config, h, t2);
            dt.push_back(curve.delta_t_star);
            tau.push_back(curve.tau_star);
        }
        table.add("delta_t_star_" + nm_tag(h), dt);
        table.add("tau_star_" + nm_tag(h), tau);
        j["background_dephasing_time_s"][nm_tag(h)] = background_dephasing_time(ctx.config, h);
    }
    ctx.emit(dir / "resolution_vs_T2.csv", table);
    const auto best = optimize_tau(ctx.config, 3e-9, 300e-6);
    j["h3nm_T2_300us"] = {{"tau_star_s", best.tau_star},
                          {"delta_t_star_s", best.delta_t_star},
                          {"N_tau", best.n_tau_star}};
    return j;
}

json reproduce_4c(RunContext& ctx, const fs::path& dir)
{
    const double h = 3e-9;
    const auto taus = logspace(1e-7, 3e-3, 200);
    CsvTable table;
    table.add("tau", taus);
    json j;
    for (double t2 : {100e-6, 300e-6, 1e-3}) {
        std::vector<double> dt;
        for (double tau : taus) {
            dt.push_back(tau < t2 ? temporal_resolution(ctx.config, tau, h, t2) : kUnresolvable);
        }
        char name[48];
        std::snprintf(name, sizeof name, "delta_t_T2_%gus", t2 * 1e6);
        table.add(name, dt);
        const auto best = optimize_tau(ctx.config, h, t2);
        j[name] = {{"tau_star_s", best.tau_star}, {"delta_t_star_s", best.delta_t_star}};
    }
    ctx.emit(dir / "resolution_vs_tau.csv", table);
    return j;
}

json reproduce_5(RunContext& ctx, const fs::path& dir)
{
    json j;
    for (double h : {4e-9, 5e-9, 6e-9, 7e-9}) {
        MonitorOptions opt;
        opt.h_p = h;
        const auto r = monitor_channel(ctx.config, opt, ctx.seed);
        const auto tag = nm_tag(h);
        ctx.emit(dir / ("record_" + tag + ".csv"), record_table(r));
        ctx.emit(dir / ("spectrum_" + tag + ".csv"), spectrum_table(r.raw_spectrum));
        ctx.emit(dir / ("spectrum_smoothed_" + tag + ".csv"), spectrum_table(r.smoothed_spectrum));
        j[tag] = monitor_summary(r);
    }
    return j;
}

void run_reproduce(RunContext& ctx, const Globals& g, const std::string& figure)
{
    const fs::path dir = g.out.empty() ? fs::path("figure_" + figure) : fs::path(g.out);
    fs::create_directories(dir);
    static const std::map<std::string, std::function<json(RunContext&, const fs::path&)>> table{
        {"2b", reproduce_2b}, {"2c", reproduce_2c}, {"3", reproduce_3},
        {"4b", reproduce_4b}, {"4c", reproduce_4c}, {"5", reproduce_5}};
    json summary;
    summary["figure"] = figure;
    summary["seed"] = ctx.seed;
    summary["results"] = table.at(figure)(ctx, dir);
    ctx.emit(dir / "summary.json", summary.dump(2) + "\n");
    ctx.manifest = dir / ("figure_" + figure + ".manifest.json");
    *ctx.out << summary.dump(2) << "\n";
}

} // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Spin-echo NV probe simulator for ion-channel detection", "nv"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_version_flag("--version", NVSIM_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "JSON configuration file");
    app.add_option("--set", g.sets, "Override a config value, section.key=value")
        ->allow_extra_args(false);
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed (default: run.seed)");
    g.threads_opt = app.add_option("--threads", g.threads,
                                   "Worker threads (default: run.threads, NV_SIM_THREADS, all cores)");
    app.add_option("--out", g.out, "Output path");

    double h = 0.0;
    auto add_h = [&](CLI::App* sub) {
        return sub->add_option("--h", h, "Probe standoff h_p in m");
    };

    auto* sources = app.add_subcommand("sources", "Noise amplitudes, rates and Theta vs standoff");
    SourcesArgs sources_args;
    sources->add_option("--h-min", sources_args.h_min);
    sources->add_option("--h-max", sources_args.h_max);
    sources->add_option("--steps,--points", sources_args.points)->check(CLI::PositiveNumber);
    auto* sources_h = add_h(sources);

    auto* envelopes = app.add_subcommand("envelopes", "Dephasing envelopes and populations vs time");
    EnvelopesArgs envelopes_args;
    envelopes->add_option("--t-max", envelopes_args.t_max, "Default: T2");
    envelopes->add_option("--points", envelopes_args.points)->check(CLI::Range(2, 1000000));
    auto* envelopes_h = add_h(envelopes);

    auto* trace = app.add_subcommand("trace", "Sampled field trace at the probe");
    TraceArgs trace_args;
    trace->add_option("--source", trace_args.source)
        ->check(CLI::IsMember({"water", "lipid", "channel", "ion_channel", "ou"}));
    trace->add_option("--duration", trace_args.duration)->check(CLI::PositiveNumber);
    trace->add_option("--dt", trace_args.dt);
    trace->add_option("--particles", trace_args.particles);
    trace->add_flag("--closed", trace_args.closed, "Ion channel closed");
    trace->add_option("--sigma", trace_args.sigma, "ou: RMS field in T");
    trace->add_option("--f-e", trace_args.f_e, "ou: correlation rate in Hz");
    trace->add_option("--echo-tau", trace_args.echo_tau, "Report the echo phase at this tau");
    auto* trace_h = add_h(trace);

    auto* envelope_mc = app.add_subcommand("envelope-mc",
                                           "Monte Carlo echo envelope vs the closed form");
    EnvelopeMcArgs mc_args;
    envelope_mc->add_option("--source", mc_args.source)->check(CLI::IsMember({"ou", "zero"}));
    envelope_mc->add_option("--theta", mc_args.theta)->check(CLI::PositiveNumber);
    envelope_mc->add_option("--f-e", mc_args.f_e)->check(CLI::PositiveNumber);
    envelope_mc->add_option("--traj,--n-traj", mc_args.n_traj)->check(CLI::Range(2, 100000000));
    envelope_mc->add_option("--points", mc_args.points)->check(CLI::PositiveNumber);
    envelope_mc->add_option("--tau-max", mc_args.tau_max, "Default: where the closed form reaches D = 0.05");
    envelope_mc->add_option("--tau-grid", mc_args.tau_grid, "lo:hi:n, linear; overrides --points/--tau-max");
    auto* envelope_mc_h = add_h(envelope_mc);

    auto* monitor = app.add_subcommand("monitor", "Readout record, switch detection and spectrum");
    MonitorArgs monitor_args;
    monitor->add_option("--duration", monitor_args.duration)->check(CLI::PositiveNumber);
    monitor->add_option("--n-tau", monitor_args.n_tau)->check(CLI::PositiveNumber);
    monitor->add_option("--threshold", monitor_args.threshold, "Default: midpoint of P_on, P_off");
    monitor->add_option("--spectrum", monitor_args.spectrum, "Spectrum CSV path");
    monitor->add_option("--spectrum-of", monitor_args.spectrum_of)
        ->check(CLI::IsMember({"smoothed", "raw"}));
    auto* monitor_h = add_h(monitor);

    auto* plan = app.add_subcommand("plan", "Optimal interrogation time and resolution vs T2");
    PlanArgs plan_args;
    plan->add_option("--t2-grid", plan_args.t2_grid, "lo:hi:n, log-spaced");
    plan->add_option("--curve", plan_args.curve, "Write delta_t vs tau at the config T2");
    auto* plan_h = add_h(plan);

    auto* ensemble = app.add_subcommand("ensemble", "Dense NV ensemble pixel contrast");
    EnsembleArgs ens_args;
    ensemble->add_option("--n-nv", ens_args.n_nv, "NV density in m^-3")->check(CLI::PositiveNumber);
    ensemble->add_option("--pixel", ens_args.pixel, "Pixel side in m")->check(CLI::PositiveNumber);
    ensemble->add_option("--channel-density", ens_args.channel_density, "Channels per m^2");
    ensemble->add_option("--samples", ens_args.samples)->check(CLI::PositiveNumber);
    ensemble->add_option("--tau-min", ens_args.tau_min)->check(CLI::PositiveNumber);
    ensemble->add_option("--tau-max", ens_args.tau_max)->check(CLI::PositiveNumber);
    ensemble->add_option("--points", ens_args.points)->check(CLI::Range(3, 100000));
    auto* ensemble_h = add_h(ensemble);

    auto* scan_cmd = app.add_subcommand("scan", "Raster-scan image over the channel positions");
    ScanArgs scan_args;
    scan_cmd->add_option("--dwell", scan_args.dwell, "Pixel dwell time in s");
    scan_cmd->add_option("--grid", scan_args.grid, "Pixels per side")->check(CLI::PositiveNumber);
    scan_cmd->add_option("--pitch", scan_args.pitch, "Pixel pitch in m")->check(CLI::PositiveNumber);
    auto* scan_h = add_h(scan_cmd);

    auto* reproduce = app.add_subcommand("reproduce", "Regenerate a figure's data bundle");
    std::string figure;
    reproduce->add_option("--figure", figure)
        ->required()
        ->check(CLI::IsMember({"2b", "2c", "3", "4b", "4c", "5"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kExitUsage;
    }

    const auto start = std::chrono::steady_clock::now();
    RunContext ctx;
    ctx.out = &out;
    std::string name;
    try {
        auto load = [&](double default_h, const CLI::Option* h_opt) {
            ctx.config = resolve_config(g, default_h, h_opt, h);
            for (const auto& w : validate(ctx.config)) {
                err << "warning: " << w << "\n";
            }
            ctx.seed = g.seed_opt->count() > 0 ? g.seed : ctx.config.run.seed;
            ctx.threads = g.threads_opt->count() > 0 ? g.threads : ctx.config.run.threads;
        };
        if (sources->parsed()) {
            name = "sources";
            load(4e-9, sources_h);
            run_sources(ctx, g, sources_args);
        } else if (envelopes->parsed()) {
            name = "envelopes";
            load(3e-9, envelopes_h);
            run_envelopes(ctx, g, envelopes_args);
        } else if (trace->parsed()) {
            name = "trace";
            load(4e-9, trace_h);
            run_trace(ctx, g, trace_args);
        } else if (envelope_mc->parsed()) {
            name = "envelope-mc";
            load(4e-9, envelope_mc_h);
            run_envelope_mc(ctx, g, mc_args);
        } else if (monitor->parsed()) {
            name = "monitor";
            load(4e-9, monitor_h);
            run_monitor(ctx, g, monitor_args);
        } else if (plan->parsed()) {
            name = "plan";
            load(3e-9, plan_h);
            run_plan(ctx, g, plan_args);
        } else if (ensemble->parsed()) {
            name = "ensemble";
            load(3e-9, ensemble_h);
            run_ensemble(ctx, g, ens_args);
        } else if (scan_cmd->parsed()) {
            name = "scan";
            load(3e-9, scan_h);
            run_scan(ctx, g, scan_args);
        } else if (reproduce->parsed()) {
            name = "reproduce";
            load(4e-9, nullptr);
            run_reproduce(ctx, g, figure);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }

    RunManifest manifest;
    manifest.subcommand = name;
    manifest.config_hash = config_hash(ctx.config);
    manifest.seed = ctx.seed;
    for (const auto& p : ctx.outputs) {
        manifest.outputs.push_back(p.string());
    }
    manifest.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.version = NVSIM_VERSION;
    try {
        if (ctx.manifest.empty() && !ctx.outputs.empty()) {
            ctx.manifest = manifest_path(ctx.outputs.front());
        }
        if (!ctx.manifest.empty()) {
            write_text(ctx.manifest, manifest.json());
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace nvsim::cli
