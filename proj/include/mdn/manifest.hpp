#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mdn/errors.hpp"

namespace mdn {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline std::string hex_u64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << v;
    return os.str();
}

/// Reproducibility record written next to every mutating command's output:
/// the literal command line, the resolved configuration, seeds, a dataset
/// hash and timestamps.
struct RunManifest {
    std::string command_line;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string dataset_hash;  // hex, empty when no dataset involved
    std::string started_at;
    std::string finished_at;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j;
    j["command_line"] = m.command_line;
    j["config"] = m.config;
    j["seed"] = m.seed;
    if (!m.dataset_hash.empty()) j["dataset_hash"] = m.dataset_hash;
    j["tool_version"] = kToolVersion;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    std::ofstream out(path);
    if (!out) throw IoError(msg("cannot write manifest '", path, "'"));
    out << j.dump(2) << "\n";
    if (!out) throw IoError(msg("failed while writing manifest '", path, "'"));
}

}  // namespace mdn
