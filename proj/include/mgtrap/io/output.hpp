#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mgtrap/analysis/psd.hpp"
#include "mgtrap/dynamics/simulation.hpp"

namespace mgtrap::io {

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Files of one run, held in memory until the run has succeeded.
class ArtifactSet {
public:
    void add(std::string name, std::string content);
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
    std::vector<std::string> names() const;
    const std::string* find(const std::string& name) const;

    /// Creates `dir` and writes every file. Throws IoError.
    void write(const std::filesystem::path& dir) const;

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

/// First line is a comment carrying the config hash and seed, then a header row.
std::string csv_table(const std::string& config_hash, std::uint64_t seed, const std::vector<std::string>& header,
                      const std::vector<const std::vector<double>*>& columns);

std::string trajectory_csv(const dynamics::Trajectory& tr, const std::string& config_hash, std::uint64_t seed);
std::string psd_csv(const analysis::PsdEstimate& est, const std::string& config_hash, std::uint64_t seed);

std::string json_text(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mgtrap::io
