#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wifislam/clustering.hpp"
#include "wifislam/frontend.hpp"
#include "wifislam/gating.hpp"
#include "wifislam/posegraph.hpp"
#include "wifislam/signature.hpp"
#include "wifislam/simworld.hpp"

namespace wifislam {

using KeyframePair = std::pair<KeyframeId, KeyframeId>;

struct LoopScore {
  int true_positives = 0;   // ground-truth pairs covered by an accepted edge
  int false_positives = 0;  // accepted edges with no ground-truth pair nearby
  int false_negatives = 0;  // ground-truth pairs with no accepted edge nearby
  double fp_pct = 0.0;      // of all accepted edges
  double fn_pct = 0.0;      // of all ground-truth pairs
};

/// Two pairs are "nearby" when both endpoints (as unordered pairs) differ by
/// at most `match_radius` frames.
LoopScore score_loops(std::span<const KeyframePair> accepted_edges,
                      std::span<const KeyframePair> gt_pairs, int match_radius = 5);

/// Kabsch-aligned position RMSE over the keyframe ids present in both.
/// Throws kNoCorrespondence when no id is shared.
double trajectory_error(std::span<const TrajectoryRow> estimate,
                        std::span<const TrajectoryRow> ground_truth);

std::vector<TrajectoryRow> ground_truth_rows(const Dataset& dataset);

struct CostAndTime {
  double cost = 0.0;
  double seconds = 0.0;
};

struct ComputeLedger {
  CostAndTime loop_closure;
  CostAndTime clustering_overhead;
  CostAndTime management_overhead;

  double overhead_cost() const {
    return clustering_overhead.cost + management_overhead.cost;
  }
};

ComputeLedger ledger(const RunRecord& run);

struct CurvePoint {
  double distance_m = 0.0;
  double similarity = 0.0;
};

struct SimilarityCurve {
  std::vector<CurvePoint> points;
  double spearman_rho = 0.0;
};

/// Spearman rank correlation with average ranks for ties. Zero when either
/// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Every pair of dwells with ground-truth distance and signature similarity.
SimilarityCurve similarity_distance_curve(std::span<const Point2> dwell_positions,
                                          std::span<const Signature> signatures);
/// Same, with the signatures built from the dataset's scans.
SimilarityCurve similarity_distance_curve(const Dataset& dataset);

struct CdfCurve {
  std::vector<double> errors;     // ascending
  std::vector<double> fractions;  // (k+1)/n

  double fraction_within(double error_m) const;
};

CdfCurve make_cdf(std::vector<double> errors);

struct LocalizationFrame {
  KeyframeId id = 0;
  Point2 position = Point2::Zero();  // ground truth, used only for the error
  const Appearance* appearance = nullptr;
  Signature signature;
};

struct LocalizationMap {
  std::vector<LocalizationFrame> frames;
  ClusterStore store;
};

/// Sequential clustering of the mapping frames, each linked to the previous
/// mapping frame.
LocalizationMap build_localization_map(std::vector<LocalizationFrame> frames,
                                       double threshold);

struct LocalizationResult {
  CdfCurve cdf;
  std::vector<double> errors;  // per query, in query order
  std::vector<KeyframeId> chosen;
  std::size_t map_count = 0;
  std::size_t query_count = 0;
  std::size_t fallback_count = 0;  // queries with no similar cluster
};

/// Picks the map frame with the most shared words, among the similar
/// clusters' members when gated (falling back to the whole map when none is
/// similar). Ties go to the lowest id. Throws kEmptyMap.
LocalizationResult localize_queries(const LocalizationMap& map,
                                    std::span<const LocalizationFrame> queries,
                                    double threshold, bool gated = true);

/// Frame i is a mapping frame when floor((i+1)*f) > floor(i*f).
bool is_map_frame(std::size_t index, double map_fraction);

/// Interleaved split of the dataset, map building and query localisation.
LocalizationResult localize_dataset(const Dataset& dataset, double map_fraction,
                                    double threshold, bool gated = true);

struct ReportRow {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string policy;
  bool gated = false;
  int min_matches = 0;
  double inlier_distance = 0.0;
  double wifi_threshold = 0.0;
  double real_time_threshold = 0.0;
  double rmse_m = 0.0;
  LoopScore score;
  double loop_cost = 0.0;
  double overhead_cost = 0.0;
  std::size_t clusters = 0;
  double wall_ms = 0.0;

  /// Everything up to and including real_time_threshold, comma-joined.
  std::string key() const;
};

ReportRow make_report_row(const std::string& dataset_name, const Dataset& dataset,
                          const RunRecord& run, int match_radius = 5);

std::string report_header();
std::string format_report_row(const ReportRow& row);
ReportRow parse_report_row(const std::string& line);

void write_cdf_csv(std::ostream& out, const CdfCurve& cdf);
void write_similarity_curve_csv(std::ostream& out, const SimilarityCurve& curve);

}  // namespace wifislam
