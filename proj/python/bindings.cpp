#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdio>
#include <string>
#include <vector>

#include "nvsim/dephasing.hpp"
#include "nvsim/noise.hpp"
#include "nvsim/params.hpp"
#include "nvsim/planner.hpp"

namespace py = pybind11;
using namespace nvsim;

namespace {

std::string format_override(const char* key, double value)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%.17g", key, value);
    return buf;
}

Config make_config(const std::string& json_text, std::vector<std::string> overrides, double h_p)
{
    overrides.insert(overrides.begin(), format_override("probe.h_p", h_p));
    return parse_config(json_text.empty() ? "{}" : json_text, overrides);
}

py::dict source_dict(const NoiseSourceSpec& s)
{
    py::dict d;
    d["source"] = std::string(to_string(s.kind));
    d["sigma_B"] = s.sigma_B;
    d["f_e"] = s.f_e;
    d["theta"] = s.theta;
    d["regime"] = std::string(to_string(s.regime));
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Nanoscale NV magnetometry noise and detection models";
    m.attr("__version__") = NVSIM_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<RegimeError>(m, "RegimeError", PyExc_ValueError);

    m.def("default_config", [] { return serialize_config(Config{}); },
          "Default configuration as JSON text.");

    m.def("validate",
          [](const std::string& json_text, const std::vector<std::string>& overrides) {
              return validate(parse_config(json_text.empty() ? "{}" : json_text, overrides));
          },
          py::arg("config") = "{}", py::arg("overrides") = std::vector<std::string>{},
          "Parse a configuration and return its warnings; raises ConfigError if invalid.");

    m.def("theta", &theta, py::arg("f_e"), py::arg("sigma_B"), py::arg("gamma_p"));
    m.def("classify", [](double t) { return std::string(to_string(classify(t))); }, py::arg("theta"));
    m.def("ffl_rate", &ffl_rate, py::arg("f_e"), py::arg("theta"));
    m.def("echo_filter_bracket", &echo_filter_bracket, py::arg("x"));
    m.def("crossover_exponent", &crossover_exponent, py::arg("sigma_B"), py::arg("f_e"), py::arg("t"),
          py::arg("gamma_p"));
    m.def("population", &population, py::arg("D"));

    m.def("sources",
          [](double h_p, const std::string& json_text, const std::vector<std::string>& overrides) {
              const Config cfg = make_config(json_text, overrides, h_p);
              py::list out;
              for (const auto& s : characterize_all(cfg.constants, cfg.environment, h_p)) {
                  out.append(source_dict(s));
              }
              return out;
          },
          py::arg("h_p"), py::arg("config") = "{}", py::arg("overrides") = std::vector<std::string>{},
          "Amplitude, rate, Theta and regime of every noise source at standoff h_p.");

    m.def("envelopes",
          [](const std::vector<double>& times, double h_p, const std::string& json_text,
             const std::vector<std::string>& overrides) {
              const Config cfg = make_config(json_text, overrides, h_p);
              const auto set = build_envelopes(cfg);
              std::vector<double> d_off;
              std::vector<double> d_on;
              std::vector<double> p_off;
              std::vector<double> p_on;
              for (double t : times) {
                  d_off.push_back(set.off(t));
                  d_on.push_back(set.on(t));
                  p_off.push_back(set.p_off(t));
                  p_on.push_back(set.p_on(t));
              }
              py::dict d;
              d["t"] = times;
              d["D_off"] = d_off;
              d["D_on"] = d_on;
              d["P_off"] = p_off;
              d["P_on"] = p_on;
              return d;
          },
          py::arg("times"), py::arg("h_p"), py::arg("config") = "{}", py::arg("overrides") = std::vector<std::string>{});

    m.def("temporal_resolution",
          [](double tau, double h_p, double T2, const std::string& json_text) {
              return temporal_resolution(make_config(json_text, {}, h_p), tau, h_p, T2);
          },
          py::arg("tau"), py::arg("h_p"), py::arg("T2"), py::arg("config") = "{}");

    m.def("optimize_tau",
          [](double h_p, double T2, const std::string& json_text, std::size_t grid_points) {
              const auto c = optimize_tau(make_config(json_text, {}, h_p), h_p, T2, grid_points);
              py::dict d;
              d["tau_star"] = c.tau_star;
              d["delta_t_star"] = c.delta_t_star;
              d["n_tau_star"] = c.n_tau_star;
              d["tau"] = c.tau;
              d["delta_p"] = c.delta_p;
              d["delta_t"] = c.delta_t;
              return d;
          },
          py::arg("h_p"), py::arg("T2"), py::arg("config") = "{}", py::arg("grid_points") = 200);

    m.def("ensemble_rate",
          [](double n_nv) { return ensemble_rate(PhysicalConstants{}, n_nv); }, py::arg("n_nv"),
          "Dense-ensemble NV-NV dephasing rate in 1/s.");
}
