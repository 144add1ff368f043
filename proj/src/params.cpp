#include "nvsim/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "nvsim/dephasing.hpp"
#include "nvsim/noise.hpp"

namespace nvsim {

using nlohmann::json;

namespace {

template <class S>
struct DoubleField {
    const char* name;
    double S::*member;
};

constexpr DoubleField<PhysicalConstants> kConstantFields[] = {
    {"mu0_over_4pi", &PhysicalConstants::mu0_over_4pi},
    {"hbar", &PhysicalConstants::hbar},
    {"kB", &PhysicalConstants::kB},
    {"muN", &PhysicalConstants::muN},
    {"gH", &PhysicalConstants::gH},
    {"gamma_p", &PhysicalConstants::gamma_p},
    {"gamma_p_angular", &PhysicalConstants::gamma_p_angular},
    {"R3D", &PhysicalConstants::R3D},
    {"epsilon0", &PhysicalConstants::epsilon0},
    {"D_crystal_field", &PhysicalConstants::D_crystal_field},
};

constexpr DoubleField<EnvironmentConfig> kEnvironmentFields[] = {
    {"water_density", &EnvironmentConfig::water_density},
    {"ortho_fraction", &EnvironmentConfig::ortho_fraction},
    {"D_H2O", &EnvironmentConfig::D_H2O},
    {"lipid_nH", &EnvironmentConfig::lipid_nH},
    {"D_L", &EnvironmentConfig::D_L},
    {"lipid_correlation_length", &EnvironmentConfig::lipid_correlation_length},
    {"membrane_thickness", &EnvironmentConfig::membrane_thickness},
    {"ion_flux", &EnvironmentConfig::ion_flux},
    {"channel_aperture", &EnvironmentConfig::channel_aperture},
    {"ic_rate_scale", &EnvironmentConfig::ic_rate_scale},
    {"transit_time", &EnvironmentConfig::transit_time},
    {"N_ion", &EnvironmentConfig::N_ion},
    {"N_H2O", &EnvironmentConfig::N_H2O},
    {"mu_ion", &EnvironmentConfig::mu_ion},
    {"mu_H2O", &EnvironmentConfig::mu_H2O},
    {"c_ic", &EnvironmentConfig::c_ic},
    {"switching_rate", &EnvironmentConfig::switching_rate},
    {"switching_shape", &EnvironmentConfig::switching_shape},
    {"debye_length", &EnvironmentConfig::debye_length},
    {"D_E", &EnvironmentConfig::D_E},
    {"rho_E", &EnvironmentConfig::rho_E},
    {"epsilon_r", &EnvironmentConfig::epsilon_r},
    {"temperature", &EnvironmentConfig::temperature},
    {"c_E", &EnvironmentConfig::c_E},
};

constexpr DoubleField<ProbeConfig> kProbeFields[] = {
    {"h_p", &ProbeConfig::h_p},
    {"T2", &ProbeConfig::T2},
    {"tau", &ProbeConfig::tau},
    {"tau_m", &ProbeConfig::tau_m},
    {"tau_2pi", &ProbeConfig::tau_2pi},
    {"intrinsic_envelope_exponent", &ProbeConfig::intrinsic_envelope_exponent},
};

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

double require_number(const json& value, const std::string& path)
{
    if (!value.is_number()) {
        fail(path + ": expected a number, got " + std::string(value.type_name()));
    }
    return value.get<double>();
}

template <class S, std::size_t N>
bool read_double_field(const DoubleField<S> (&table)[N], S& target, const std::string& key,
                       const json& value, const std::string& section)
{
    for (const auto& f : table) {
        if (key == f.name) {
            target.*(f.member) = require_number(value, section + "." + key);
            return true;
        }
    }
    return false;
}

template <class S, std::size_t N>
void write_double_fields(const DoubleField<S> (&table)[N], const S& source, json& out)
{
    for (const auto& f : table) {
        out[f.name] = source.*(f.member);
    }
}

const json& require_object(const json& value, const std::string& path)
{
    if (!value.is_object()) {
        fail(path + ": expected an object, got " + std::string(value.type_name()));
    }
    return value;
}

std::vector<LateralPoint> read_positions(const json& value)
{
    const std::string path = "environment.channel_positions";
    if (!value.is_array()) {
        fail(path + ": expected an array of [x, y] pairs");
    }
    std::vector<LateralPoint> out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        const auto& p = value[i];
        const std::string item = path + "[" + std::to_string(i) + "]";
        if (!p.is_array() || p.size() != 2) {
            fail(item + ": expected [x, y]");
        }
        out.push_back({require_number(p[0], item), require_number(p[1], item)});
    }
    return out;
}

std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

void apply_override(json& doc, const std::string& spec)
{
    const auto eq = spec.find('=');
    const auto dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        fail("override '" + spec + "': expected section.key=value");
    }
    const std::string section = spec.substr(0, dot);
    const std::string key = spec.substr(dot + 1, eq - dot - 1);
    const std::string raw = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    if (!doc.contains(section)) {
        doc[section] = json::object();
    }
    if (!doc[section].is_object()) {
        fail(section + ": expected an object");
    }
    doc[section][key] = value;
}

Config from_json(const json& doc)
{
    require_object(doc, "config");
    Config config;
    bool have_h_p = false;
    for (const auto& [section, body] : doc.items()) {
        if (section == "constants") {
            for (const auto& [key, value] : require_object(body, section).items()) {
                if (!read_double_field(kConstantFields, config.constants, key, value, section)) {
                    fail("unknown key 'constants." + key + "'");
                }
            }
        } else if (section == "environment") {
            for (const auto& [key, value] : require_object(body, section).items()) {
                if (key == "channel_positions") {
                    config.environment.channel_positions = read_positions(value);
                } else if (!read_double_field(kEnvironmentFields, config.environment, key, value,
                                              section)) {
                    fail("unknown key 'environment." + key + "'");
                }
            }
        } else if (section == "probe") {
            for (const auto& [key, value] : require_object(body, section).items()) {
                if (!read_double_field(kProbeFields, config.probe, key, value, section)) {
                    fail("unknown key 'probe." + key + "'");
                }
                if (key == "h_p") {
                    have_h_p = true;
                }
            }
        } else if (section == "run") {
            for (const auto& [key, value] : require_object(body, section).items()) {
                if (key == "seed" || key == "threads") {
                    if (!value.is_number_unsigned()) {
                        fail("run." + key + ": expected a non-negative integer");
                    }
                    if (key == "seed") {
                        config.run.seed = value.get<std::uint64_t>();
                    } else {
                        config.run.threads = value.get<std::size_t>();
                    }
                } else {
                    fail("unknown key 'run." + key + "'");
                }
            }
        } else {
            fail("unknown section '" + section + "'");
        }
    }
    if (!have_h_p) {
        fail("h_p required (probe.h_p)");
    }
    check_invariants(config);
    return config;
}

void require_positive(double v, const char* name)
{
    if (!(v > 0.0) || !std::isfinite(v)) {
        fail(std::string(name) + " must be positive and finite");
    }
}

void require_non_negative(double v, const char* name)
{
    if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(std::string(name) + " must be non-negative and finite");
    }
}

} // namespace

void check_invariants(const Config& config)
{
    for (const auto& f : kConstantFields) {
        require_positive(config.constants.*(f.member), (std::string("constants.") + f.name).c_str());
    }

    const auto& env = config.environment;
    require_positive(env.water_density, "environment.water_density");
    require_positive(env.ortho_fraction, "environment.ortho_fraction");
    if (env.ortho_fraction > 1.0) {
        fail("environment.ortho_fraction must not exceed 1");
    }
    require_positive(env.D_H2O, "environment.D_H2O");
    require_positive(env.lipid_nH, "environment.lipid_nH");
    require_positive(env.D_L, "environment.D_L");
    require_positive(env.lipid_correlation_length, "environment.lipid_correlation_length");
    require_positive(env.membrane_thickness, "environment.membrane_thickness");
    require_positive(env.ion_flux, "environment.ion_flux");
    require_positive(env.channel_aperture, "environment.channel_aperture");
    require_positive(env.ic_rate_scale, "environment.ic_rate_scale");
    require_positive(env.transit_time, "environment.transit_time");
    require_non_negative(env.N_ion, "environment.N_ion");
    require_non_negative(env.N_H2O, "environment.N_H2O");
    require_non_negative(env.mu_ion, "environment.mu_ion");
    require_non_negative(env.mu_H2O, "environment.mu_H2O");
    require_non_negative(env.c_ic, "environment.c_ic");
    require_positive(env.switching_rate, "environment.switching_rate");
    require_positive(env.switching_shape, "environment.switching_shape");
    require_positive(env.debye_length, "environment.debye_length");
    require_positive(env.D_E, "environment.D_E");
    require_positive(env.rho_E, "environment.rho_E");
    require_positive(env.epsilon_r, "environment.epsilon_r");
    require_positive(env.temperature, "environment.temperature");
    require_non_negative(env.c_E, "environment.c_E");
    for (const auto& p : env.channel_positions) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
            fail("environment.channel_positions must be finite");
        }
    }

    const auto& probe = config.probe;
    require_positive(probe.h_p, "probe.h_p");
    require_positive(probe.T2, "probe.T2");
    require_positive(probe.tau, "probe.tau");
    if (probe.tau >= probe.T2) {
        fail("probe.tau must be < probe.T2 (tau >= T2)");
    }
    require_non_negative(probe.tau_m, "probe.tau_m");
    require_non_negative(probe.tau_2pi, "probe.tau_2pi");
    require_positive(probe.intrinsic_envelope_exponent, "probe.intrinsic_envelope_exponent");
}

Config parse_config(const std::string& json_text, const std::vector<std::string>& overrides)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_and_column(json_text, e.byte);
        std::ostringstream os;
        os << "config parse error at line " << line << ", column " << col << ": " << e.what();
        throw ConfigError(os.str());
    }
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    return from_json(doc);
}

Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), overrides);
}

std::string serialize_config(const Config& config)
{
    json doc;
    write_double_fields(kConstantFields, config.constants, doc["constants"]);
    write_double_fields(kEnvironmentFields, config.environment, doc["environment"]);
    json positions = json::array();
    for (const auto& p : config.environment.channel_positions) {
        positions.push_back({p[0], p[1]});
    }
    doc["environment"]["channel_positions"] = positions;
    write_double_fields(kProbeFields, config.probe, doc["probe"]);
    doc["run"]["seed"] = config.run.seed;
    doc["run"]["threads"] = config.run.threads;
    return doc.dump(2);
}

std::vector<std::string> validate(const Config& config)
{
    std::vector<std::string> warnings;
    const auto& c = config.constants;
    const double limit = 1e-4 * c.D_crystal_field;
    for (const auto& source : characterize_all(c, config.environment, config.probe.h_p)) {
        const double shift = source.sigma_B * c.gamma_p;
        if (shift > limit) {
            std::ostringstream os;
            os << "relaxation: " << to_string(source.kind) << " field shift " << shift
               << " Hz exceeds 1e-4 of the crystal-field splitting (" << limit
               << " Hz); the pure-dephasing model is not valid";
            warnings.push_back(os.str());
        }
    }
    const auto envelopes = build_envelopes(config);
    const double d_off = envelopes.off(config.probe.tau);
    if (config.probe.tau >= 0.9 * config.probe.T2 || d_off < 0.05) {
        std::ostringstream os;
        os << "envelope near zero: tau = " << config.probe.tau << " s is " << config.probe.tau / config.probe.T2
           << " T2 (D_off = " << d_off << "); contrast is exhausted";
        warnings.push_back(os.str());
    }
    return warnings;
}

std::uint64_t config_hash(const Config& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace nvsim
