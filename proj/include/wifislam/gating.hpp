#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wifislam/clustering.hpp"
#include "wifislam/frontend.hpp"
#include "wifislam/posegraph.hpp"
#include "wifislam/signature.hpp"
#include "wifislam/simworld.hpp"

namespace wifislam {

enum class Policy { kRgbd, kRtab, kOrb };

const char* to_string(Policy policy);
Policy parse_policy(std::string_view name);

struct RgbdParams {
  int n_predecessors = 3;
  int geodesic_depth = 2;
  int n_random_keyframes = 5;
};

struct RtabParams {
  // 30 s at 2 Hz: recent frames stay out of loop-closure candidacy.
  int stm_capacity = 60;
  double real_time_threshold = std::numeric_limits<double>::infinity();
  int wm_transfer_batch = 5;
};

struct PolicyParams {
  Policy policy = Policy::kOrb;
  bool gated = true;
  int min_matches = 20;
  double inlier_distance = 2.0;
  double wifi_threshold = 0.85;
  RgbdParams rgbd;
  RtabParams rtab;

  double loop_min_gap_s = 30.0;  // orb: candidates must be at least this old
  int optimize_every = 25;
  OptimizeOptions optimizer{10, 1e-4, 1e-6};

  // Deterministic cost units.
  double comparison_cost = 1.0;
  double iteration_cost = 1.0;
  double similarity_cost = 0.01;  // one signature-vs-representative check
  double management_cost = 0.01;  // one assignment / index / memory operation

  double keep_probability = 0.8;
  double match_sigma_xy = 0.05;
  double match_sigma_theta = 0.01;
  double odom_sigma_floor = 1e-3;

  std::uint64_t seed = 0;

  /// Throws kInvalidArgument on negative counts or non-positive thresholds.
  void validate() const;
  MatchParams match_params() const;
};

/// Undirected keyframe adjacency of the pose graph (odometry and loop edges).
class GraphAdjacency {
 public:
  void add_node(KeyframeId id);
  void add_edge(KeyframeId a, KeyframeId b);
  const std::vector<KeyframeId>& neighbors(KeyframeId id) const;
  bool contains(KeyframeId id) const { return adj_.contains(id); }

  /// Hop distance from the nearest of `sources`, only for reachable nodes and
  /// stopping after `max_depth` hops.
  std::map<KeyframeId, int> hops_from(std::span<const KeyframeId> sources,
                                      int max_depth = std::numeric_limits<int>::max()) const;

 private:
  std::map<KeyframeId, std::vector<KeyframeId>> adj_;
};

// ---------------------------------------------------------------- rgbd

/// (a) the last n_predecessors keyframes, (b) keyframes within geodesic_depth
/// hops of the newest one, then either (c) n_random_keyframes drawn from the
/// remaining prior keyframes (vanilla) or the members of the similar clusters
/// (gated). Sorted ascending, no duplicates.
std::vector<KeyframeId> rgbd_candidates(const GraphAdjacency& graph,
                                        std::span<const KeyframeId> prior,
                                        const ClusterStore& store,
                                        const SimilarClusters& similar,
                                        const PolicyParams& params,
                                        std::uint64_t step_seed);

// ---------------------------------------------------------------- rtab

struct MemoryState {
  std::deque<KeyframeId> stm;  // oldest at the front
  std::set<KeyframeId> wm;
  std::set<KeyframeId> ltm;
  std::set<KeyframeId> immune;

  /// Throws kMemoryCorruption when the pools overlap or immune is not in wm.
  void check() const;
  std::size_t size() const { return stm.size() + wm.size() + ltm.size(); }
};

struct RtabSelection {
  std::vector<KeyframeId> candidates;  // ascending
  std::vector<KeyframeId> retrieved;   // LTM -> WM this step
};

/// Pushes `current` into STM (overflow to WM), then in gated mode immunises
/// the WM members of the similar clusters and retrieves their LTM members.
/// Candidates are WM, or WM restricted to the similar clusters when gated.
RtabSelection rtab_select(MemoryState& state, KeyframeId current,
                          const ClusterStore& store,
                          const SimilarClusters& similar,
                          const RtabParams& params, bool gated);

/// When step_cost exceeds the threshold, moves non-immune WM nodes to LTM in
/// batches, farthest (in graph hops from `anchors`) first, until the
/// projected cost fits. Vanilla mode ignores immunity.
std::vector<KeyframeId> rtab_enforce(MemoryState& state, double step_cost,
                                     const RtabParams& params, bool gated,
                                     const GraphAdjacency& graph,
                                     std::span<const KeyframeId> anchors);

struct RtabStepResult {
  std::vector<KeyframeId> candidates;
  std::vector<KeyframeId> transfers;
  std::vector<KeyframeId> retrievals;
};

/// rtab_select followed by rtab_enforce with `current` as the only anchor.
RtabStepResult rtab_step(MemoryState& state, KeyframeId current,
                         const ClusterStore& store, const SimilarClusters& similar,
                         const RtabParams& params, bool gated, double step_cost,
                         const GraphAdjacency& graph);

// ---------------------------------------------------------------- orb

/// Vanilla queries the global index; gated unions the queries over the
/// indexes of the similar clusters. Sorted ascending.
std::vector<KeyframeId> orb_candidates(const Appearance& current,
                                       const InvertedIndex& global,
                                       const std::vector<InvertedIndex>& per_cluster,
                                       const SimilarClusters& similar, bool gated);

/// Cluster assignment for the ORB variant: neighbours are the accepted
/// matches plus the co-visible keyframes (and the tracking predecessor). The
/// keyframe is inserted into the index of the cluster it ends up in.
AssignmentOutcome orb_cluster_management(KeyframeId current, const Signature& sig,
                                         const Appearance& appearance,
                                         std::span<const KeyframeId> neighbors,
                                         const Covisibility& covis,
                                         ClusterStore& store,
                                         std::vector<InvertedIndex>& per_cluster,
                                         const SimilarClusters& similar);

// ---------------------------------------------------------------- pipeline

struct LoopEvent {
  int step = 0;
  KeyframeId from = 0;
  KeyframeId to = kNoKeyframe;  // best accepted loop partner
  bool accepted = false;
  int candidate_count = 0;
  double comparisons_cost = 0.0;
  int similar_clusters = 0;
  std::vector<KeyframeId> loop_partners;  // all accepted loop edges this step
};

struct MemoryTraceRow {
  int step = 0;
  std::size_t stm = 0, wm = 0, ltm = 0, immune = 0, transfers = 0, retrievals = 0;
};

struct CostTotals {
  double loop_closure = 0.0;
  double clustering = 0.0;
  double management = 0.0;
  double optimization = 0.0;
  std::int64_t comparisons = 0;
  std::int64_t optimizer_iterations = 0;
};

struct WallTimes {
  double loop_closure_s = 0.0;
  double clustering_s = 0.0;
  double management_s = 0.0;
  double optimization_s = 0.0;
  double total_s = 0.0;
};

struct RunRecord {
  PolicyParams params;
  PoseGraph graph;
  ClusterStore store;
  std::vector<LoopEvent> events;
  std::vector<MemoryTraceRow> memory_trace;  // rtab only
  std::vector<double> frame_times;           // keyframe id -> t
  CostTotals costs;
  WallTimes wall;

  /// Accepted loop edges as (older, newer) in event order.
  std::vector<std::pair<KeyframeId, KeyframeId>> loop_edges() const;
};

/// Read-only view handed to an observer after candidate selection.
struct StepView {
  int step = 0;
  KeyframeId current = 0;
  double t = 0.0;
  const Appearance* appearance = nullptr;
  const Signature* signature = nullptr;
  const SimilarClusters* similar = nullptr;
  const std::vector<KeyframeId>* candidates = nullptr;
  const InvertedIndex* global_index = nullptr;
  const std::vector<InvertedIndex>* cluster_indexes = nullptr;
  const ClusterStore* store = nullptr;
  const MemoryState* memory = nullptr;
  const std::vector<double>* frame_times = nullptr;
};

using StepObserver = std::function<void(const StepView&)>;

/// Frames that are old enough to be loop-closure candidates at time `t`.
std::vector<KeyframeId> drop_recent(std::span<const KeyframeId> ids,
                                    std::span<const double> frame_times, double t,
                                    double min_gap_s);

/// Runs one policy over the dataset. Throws kBadDataset on malformed input.
RunRecord run_pipeline(const Dataset& dataset, const PolicyParams& params,
                       const StepObserver& observer = {});

// Serialisation: loop_events.jsonl, trajectory CSV and
// `step,stm,wm,ltm,immune,transfers,retrievals`.
void write_loop_events_jsonl(std::ostream& out, std::span<const LoopEvent> events);
void write_memory_trace_csv(std::ostream& out, std::span<const MemoryTraceRow> rows);
std::vector<TrajectoryRow> trajectory_rows(const RunRecord& run);

}  // namespace wifislam
