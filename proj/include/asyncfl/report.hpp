#pragma once

// Machine-readable outputs: JSON reports, CSV tables and the run manifest.
// Every output carries the manifest hash so results can be traced back to
// the invocation that produced them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asyncfl/analysis.hpp"
#include "asyncfl/complexity.hpp"
#include "asyncfl/learn.hpp"
#include "asyncfl/model.hpp"
#include "asyncfl/optimize.hpp"
#include "asyncfl/simulate.hpp"

namespace asyncfl {

using Json = nlohmann::ordered_json;

/// 17 significant digits, '.' decimal point, independent of the locale.
std::string format_double(double x);

struct RunManifest {
    std::string command;
    std::string config_path;
    std::string config_digest;  // FNV-1a of the config file contents
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
    std::string version;
    Json arguments = Json::object();
    std::optional<std::int64_t> timestamp;
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Hash of every manifest field except the timestamp and the output
/// directory, so identical runs written to different places agree.
std::string manifest_hash(const RunManifest& manifest);
Json to_json(const RunManifest& manifest);

/// Seconds since the epoch from SOURCE_DATE_EPOCH, if set and valid.
std::optional<std::int64_t> reproducible_timestamp();

Json matrix_json(const Matrix& m);
Json to_json(const ComplexityReport& report);
Json to_json(const SimStats& stats);
Json to_json(const OptimizationResult& result);
Json to_json(const ParetoFrontier& frontier);
Json trajectory_summary(const Trajectory& trajectory);

/// Delays, Jacobian, throughput and complexity at the config's own p and m.
/// The config's central-server block selects the model.
Json analyze_report(const SystemConfig& config, const LearningConstants& consts, double eps, BoundVariant bound);

// CSV tables; the first line is "# manifest_hash=<hash>".
std::string trace_csv(const std::vector<TraceEvent>& trace, const std::string& hash);
std::string trajectory_csv(const Trajectory& trajectory, const std::string& hash);
std::string pareto_csv(const ParetoFrontier& frontier, const std::string& hash);
std::string optimization_trace_csv(const OptimizationResult& result, const std::string& hash);

void write_text(const std::filesystem::path& path, const std::string& content);

} // namespace asyncfl
