#include "nvsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nvsim {

std::string format_number(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", value);
    return buf;
}

void CsvTable::add(std::string name, const std::vector<double>& values)
{
    std::vector<std::string> text;
    text.reserve(values.size());
    for (double v : values) {
        text.push_back(format_number(v));
    }
    add_text(std::move(name), std::move(text));
}

void CsvTable::add_text(std::string name, std::vector<std::string> values)
{
    if (!columns.empty() && values.size() != columns.front().size()) {
        throw std::invalid_argument("column '" + name + "' has a different length");
    }
    header.push_back(std::move(name));
    columns.push_back(std::move(values));
}

std::string CsvTable::str() const
{
    std::ostringstream os;
    for (std::size_t c = 0; c < header.size(); ++c) {
        os << header[c] << (c + 1 < header.size() ? "," : "\n");
    }
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            os << columns[c][r] << (c + 1 < columns.size() ? "," : "\n");
        }
    }
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table)
{
    write_text(path, table.str());
}

std::string RunManifest::json() const
{
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["config_hash"] = hash;
    j["seed"] = seed;
    j["outputs"] = outputs;
    j["wall_time_s"] = wall_time;
    j["version"] = version;
    return j.dump(2) + "\n";
}

std::filesystem::path manifest_path(const std::filesystem::path& output)
{
    auto p = output;
    p.replace_filename(output.stem().string() + ".manifest.json");
    return p;
}

} // namespace nvsim
