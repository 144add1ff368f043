#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nvsim {

/// Scientific notation, 9 significant digits.
std::string format_number(double value);

/// Column-major table with a header row. All columns must have equal length.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> columns;

    void add(std::string name, const std::vector<double>& values);
    void add_text(std::string name, std::vector<std::string> values);
    [[nodiscard]] std::string str() const;
};

void write_text(const std::filesystem::path& path, const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

struct RunManifest {
    std::string subcommand;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    double wall_time = 0.0;   // s
    std::string version;

    [[nodiscard]] std::string json() const;
};

/// "dir/name.csv" -> "dir/name.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& output);

} // namespace nvsim
