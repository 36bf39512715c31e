#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wifislam/error.hpp"
#include "wifislam/eval.hpp"
#include "wifislam/gating.hpp"
#include "wifislam/simworld.hpp"

namespace wifislam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// 2 for configuration and path problems, 3 for everything found in the data.
int exit_code_for(ErrorCode code);

struct RunConfig {
  std::string world;  // preset name or world config path (gen only)
  std::optional<std::uint64_t> seed;
  PolicyParams params;
  std::filesystem::path out;
};

/// Full PolicyParams as a JSON object; `inf` thresholds are written as "inf".
std::string policy_params_to_json(const PolicyParams& params);

/// Keys missing from `text` keep their value from `base`. Unknown keys and
/// wrong types throw kInvalidArgument.
PolicyParams policy_params_from_json(std::string_view text, PolicyParams base = {});

/// Cartesian product of a grid file such as
/// `{"min_matches": [10, 15], "gated": [true, false]}`. Axes: policy, gated,
/// min_matches, inlier_distance, wifi_threshold, real_time_threshold, seed.
/// Cells come out in a fixed axis order, the last axis varying fastest.
std::vector<PolicyParams> expand_grid(std::string_view grid_json,
                                      const PolicyParams& base);

struct SweepSummary {
  std::size_t computed = 0;
  std::size_t skipped = 0;
  std::size_t rows = 0;
};

/// Runs every cell whose report key is not already in `out/report.csv`, then
/// rewrites report.csv with the grid's rows first, in grid order.
SweepSummary sweep(const Dataset& dataset, const std::string& dataset_name,
                   const std::vector<PolicyParams>& cells,
                   const std::filesystem::path& out, int jobs);

/// trajectory.csv, loop_events.jsonl, memory_trace.csv, clusters.csv,
/// representatives.jsonl and report.csv.
ReportRow write_run(const std::filesystem::path& out, const std::string& dataset_name,
                    const Dataset& dataset, const RunRecord& run);

/// Pairs every vanilla row with the gated row that shares the rest of its key.
void write_report_deltas(std::ostream& out, const std::vector<ReportRow>& rows);

std::vector<ReportRow> read_report(const std::filesystem::path& path);
void write_report(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

/// Entry point of the `wifislam` executable.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wifislam::cli
