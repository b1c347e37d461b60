#include "mgtrap/io/output.hpp"

#include <charconv>
#include <fstream>

#include "mgtrap/errors.hpp"

namespace mgtrap::io {

std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void ArtifactSet::add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

std::vector<std::string> ArtifactSet::names() const {
    std::vector<std::string> n;
    for (const auto& f : files_) n.push_back(f.first);
    return n;
}

const std::string* ArtifactSet::find(const std::string& name) const {
    for (const auto& f : files_)
        if (f.first == name) return &f.second;
    return nullptr;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

void ArtifactSet::write(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& [name, content] : files_) write_text(dir / name, content);
}

std::string csv_table(const std::string& config_hash, std::uint64_t seed, const std::vector<std::string>& header,
                      const std::vector<const std::vector<double>*>& columns) {
    std::string s = "# config_hash=" + config_hash + " seed=" + std::to_string(seed) + "\n";
    for (std::size_t c = 0; c < header.size(); ++c) s += (c ? "," : "") + header[c];
    s += '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
    s.reserve(s.size() + rows * columns.size() * 16);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) s += ',';
            s += format_double((*columns[c])[r]);
        }
        s += '\n';
    }
    return s;
}

std::string trajectory_csv(const dynamics::Trajectory& tr, const std::string& config_hash, std::uint64_t seed) {
    return csv_table(config_hash, seed, {"t_s", "x_m", "y_m", "z_m", "vx_m_per_s", "vy_m_per_s", "vz_m_per_s"},
                     {&tr.t, &tr.position[0], &tr.position[1], &tr.position[2], &tr.velocity[0], &tr.velocity[1],
                      &tr.velocity[2]});
}

std::string psd_csv(const analysis::PsdEstimate& est, const std::string& config_hash, std::uint64_t seed) {
    return csv_table(config_hash, seed, {"f_Hz", "psd_m2_per_Hz"}, {&est.f, &est.psd});
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace mgtrap::io
