#include "wifislam/gating.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <queue>
#include <random>
#include <unordered_set>

#include <json.hpp>

#include "wifislam/error.hpp"

namespace wifislam {

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::kRgbd: return "rgbd";
    case Policy::kRtab: return "rtab";
    case Policy::kOrb: return "orb";
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  if (name == "rgbd") return Policy::kRgbd;
  if (name == "rtab") return Policy::kRtab;
  if (name == "orb") return Policy::kOrb;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown policy '" + std::string(name) + "' (rgbd, rtab, orb)");
}

void PolicyParams::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (min_matches < 0) fail("min_matches must be >= 0");
  if (!(inlier_distance > 0)) fail("inlier_distance must be positive");
  if (!(wifi_threshold > 0 && wifi_threshold <= 1)) fail("wifi_threshold must lie in (0, 1]");
  if (rgbd.n_predecessors < 0 || rgbd.geodesic_depth < 0 || rgbd.n_random_keyframes < 0) {
    fail("rgbd counts must be >= 0");
  }
  if (rtab.stm_capacity < 0) fail("stm_capacity must be >= 0");
  if (rtab.wm_transfer_batch <= 0) fail("wm_transfer_batch must be positive");
  if (!(rtab.real_time_threshold > 0)) fail("real_time_threshold must be positive");
  if (!(loop_min_gap_s >= 0)) fail("loop_min_gap_s must be >= 0");
  if (optimize_every <= 0) fail("optimize_every must be positive");
  if (!(keep_probability >= 0 && keep_probability <= 1)) fail("keep_probability must lie in [0, 1]");
}

MatchParams PolicyParams::match_params() const {
  MatchParams m;
  m.min_matches = min_matches;
  m.inlier_distance = inlier_distance;
  m.keep_probability = keep_probability;
  m.sigma_xy = match_sigma_xy;
  m.sigma_theta = match_sigma_theta;
  m.seed = seed;
  return m;
}

// ---------------------------------------------------------------- adjacency

void GraphAdjacency::add_node(KeyframeId id) { adj_.try_emplace(id); }

void GraphAdjacency::add_edge(KeyframeId a, KeyframeId b) {
  auto& na = adj_[a];
  auto& nb = adj_[b];
  if (std::find(na.begin(), na.end(), b) == na.end()) na.push_back(b);
  if (std::find(nb.begin(), nb.end(), a) == nb.end()) nb.push_back(a);
}

const std::vector<KeyframeId>& GraphAdjacency::neighbors(KeyframeId id) const {
  static const std::vector<KeyframeId> kEmpty;
  const auto it = adj_.find(id);
  return it == adj_.end() ? kEmpty : it->second;
}

std::map<KeyframeId, int> GraphAdjacency::hops_from(
    std::span<const KeyframeId> sources, int max_depth) const {
  std::map<KeyframeId, int> dist;
  std::queue<KeyframeId> q;
  for (const KeyframeId s : sources) {
    if (adj_.contains(s) && dist.emplace(s, 0).second) q.push(s);
  }
  while (!q.empty()) {
    const KeyframeId u = q.front();
    q.pop();
    const int du = dist[u];
    if (du >= max_depth) continue;
    for (const KeyframeId v : neighbors(u)) {
      if (dist.emplace(v, du + 1).second) q.push(v);
    }
  }
  return dist;
}

// ---------------------------------------------------------------- rgbd

std::vector<KeyframeId> rgbd_candidates(const GraphAdjacency& graph,
                                        std::span<const KeyframeId> prior,
                                        const ClusterStore& store,
                                        const SimilarClusters& similar,
                                        const PolicyParams& params,
                                        std::uint64_t step_seed) {
  if (prior.empty()) return {};
  std::set<KeyframeId> picked;
  const auto n_pred = std::min<std::size_t>(
      prior.size(), static_cast<std::size_t>(params.rgbd.n_predecessors));
  for (std::size_t i = prior.size() - n_pred; i < prior.size(); ++i) {
    picked.insert(prior[i]);
  }
  const KeyframeId newest = prior.back();
  for (const auto& [id, hops] :
       graph.hops_from(std::span(&newest, 1), params.rgbd.geodesic_depth)) {
    picked.insert(id);
  }

  if (params.gated) {
    const std::set<KeyframeId> prior_set(prior.begin(), prior.end());
    for (const KeyframeId m : members_of(store, similar)) {
      if (prior_set.contains(m)) picked.insert(m);
    }
  } else if (params.rgbd.n_random_keyframes > 0) {
    std::vector<KeyframeId> rest;
    for (const KeyframeId k : prior) {
      if (!picked.contains(k)) rest.push_back(k);
    }
    std::vector<KeyframeId> drawn;
    std::mt19937_64 rng(step_seed);
    std::sample(rest.begin(), rest.end(), std::back_inserter(drawn),
                params.rgbd.n_random_keyframes, rng);
    picked.insert(drawn.begin(), drawn.end());
  }
  return {picked.begin(), picked.end()};
}

// ---------------------------------------------------------------- rtab

void MemoryState::check() const {
  std::set<KeyframeId> seen;
  auto claim = [&](KeyframeId k, const char* pool) {
    if (!seen.insert(k).second) {
      throw Error(ErrorCode::kMemoryCorruption,
                  "keyframe " + std::to_string(k) + " appears twice (" + pool + ")");
    }
  };
  for (const KeyframeId k : stm) claim(k, "stm");
  for (const KeyframeId k : wm) claim(k, "wm");
  for (const KeyframeId k : ltm) claim(k, "ltm");
  for (const KeyframeId k : immune) {
    if (!wm.contains(k)) {
      throw Error(ErrorCode::kMemoryCorruption,
                  "immune keyframe " + std::to_string(k) + " is not in WM");
    }
  }
}

RtabSelection rtab_select(MemoryState& state, KeyframeId current,
                          const ClusterStore& store,
                          const SimilarClusters& similar,
                          const RtabParams& params, bool gated) {
  RtabSelection out;
  state.stm.push_back(current);
  while (state.stm.size() > static_cast<std::size_t>(params.stm_capacity)) {
    state.wm.insert(state.stm.front());
    state.stm.pop_front();
  }
  state.immune.clear();
  if (gated) {
    // Immunity lasts exactly as long as the cluster stays similar.
    std::set<KeyframeId> members;
    for (const KeyframeId m : members_of(store, similar)) {
      if (state.ltm.erase(m) > 0) {
        state.wm.insert(m);
        out.retrieved.push_back(m);
      }
      if (state.wm.contains(m)) {
        state.immune.insert(m);
        members.insert(m);
      }
    }
    out.candidates.assign(members.begin(), members.end());
  } else {
    out.candidates.assign(state.wm.begin(), state.wm.end());
  }
  std::sort(out.retrieved.begin(), out.retrieved.end());
  state.check();
  return out;
}

std::vector<KeyframeId> rtab_enforce(MemoryState& state, double step_cost,
                                     const RtabParams& params, bool gated,
                                     const GraphAdjacency& graph,
                                     std::span<const KeyframeId> anchors) {
  std::vector<KeyframeId> moved;
  if (!(step_cost > params.real_time_threshold)) return moved;

  const auto hops = graph.hops_from(anchors);
  auto hop_of = [&](KeyframeId k) {
    const auto it = hops.find(k);
    return it == hops.end() ? std::numeric_limits<int>::max() : it->second;
  };
  std::vector<std::pair<int, KeyframeId>> movable;
  for (const KeyframeId k : state.wm) {
    if (gated && state.immune.contains(k)) continue;
    movable.emplace_back(hop_of(k), k);
  }
  // Farthest from the current node and its matches goes first.
  std::sort(movable.begin(), movable.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  const double excess = step_cost - params.real_time_threshold;
  std::size_t next = 0;
  while (static_cast<double>(moved.size()) < excess && next < movable.size()) {
    for (int b = 0; b < params.wm_transfer_batch && next < movable.size(); ++b, ++next) {
      const KeyframeId k = movable[next].second;
      state.wm.erase(k);
      state.immune.erase(k);
      state.ltm.insert(k);
      moved.push_back(k);
    }
  }
  state.check();
  return moved;
}

RtabStepResult rtab_step(MemoryState& state, KeyframeId current,
                         const ClusterStore& store, const SimilarClusters& similar,
                         const RtabParams& params, bool gated, double step_cost,
                         const GraphAdjacency& graph) {
  RtabStepResult out;
  auto sel = rtab_select(state, current, store, similar, params, gated);
  out.candidates = std::move(sel.candidates);
  out.retrievals = std::move(sel.retrieved);
  out.transfers =
      rtab_enforce(state, step_cost, params, gated, graph, std::span(&current, 1));
  return out;
}

// ---------------------------------------------------------------- orb

std::vector<KeyframeId> orb_candidates(const Appearance& current,
                                       const InvertedIndex& global,
                                       const std::vector<InvertedIndex>& per_cluster,
                                       const SimilarClusters& similar, bool gated) {
  std::vector<KeyframeId> out;
  if (!gated) {
    out = global.query(current);
  } else {
    for (const auto& s : similar) {
      if (s.id < 0 || static_cast<std::size_t>(s.id) >= per_cluster.size()) continue;
      const auto hits = per_cluster[static_cast<std::size_t>(s.id)].query(current);
      out.insert(out.end(), hits.begin(), hits.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

AssignmentOutcome orb_cluster_management(KeyframeId current, const Signature& sig,
                                         const Appearance& appearance,
                                         std::span<const KeyframeId> neighbors,
                                         const Covisibility& covis,
                                         ClusterStore& store,
                                         std::vector<InvertedIndex>& per_cluster,
                                         const SimilarClusters& similar) {
  std::vector<KeyframeId> linked(neighbors.begin(), neighbors.end());
  const auto& co = covis.neighbors(current);
  linked.insert(linked.end(), co.begin(), co.end());
  const auto outcome = assign(store, current, sig, linked, similar);
  if (outcome.created) {
    per_cluster.resize(static_cast<std::size_t>(outcome.cluster) + 1);
  }
  per_cluster[static_cast<std::size_t>(outcome.cluster)].insert(current, appearance);
  return outcome;
}

// ---------------------------------------------------------------- pipeline

std::vector<std::pair<KeyframeId, KeyframeId>> RunRecord::loop_edges() const {
  std::vector<std::pair<KeyframeId, KeyframeId>> out;
  for (const auto& e : events) {
    for (const KeyframeId p : e.loop_partners) {
      out.emplace_back(std::min(p, e.from), std::max(p, e.from));
    }
  }
  return out;
}

std::vector<KeyframeId> drop_recent(std::span<const KeyframeId> ids,
                                    std::span<const double> frame_times, double t,
                                    double min_gap_s) {
  std::vector<KeyframeId> out;
  for (const KeyframeId k : ids) {
    if (t - frame_times[static_cast<std::size_t>(k)] >= min_gap_s) out.push_back(k);
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::Matrix3d odometry_information(const Pose2& delta, const OdometryNoise& noise,
                                     double floor) {
  const double d = std::hypot(delta.x, delta.y);
  const double sxy = std::max(noise.sigma_xy * std::sqrt(d), floor);
  const double sth = std::max(noise.sigma_theta * std::sqrt(d), floor);
  return Eigen::Vector3d(1.0 / (sxy * sxy), 1.0 / (sxy * sxy), 1.0 / (sth * sth))
      .asDiagonal();
}

void validate_dataset(const Dataset& ds) {
  if (ds.frames.empty()) throw Error(ErrorCode::kBadDataset, "dataset has no frames");
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const auto& f = ds.frames[i];
    const std::string where = "frame index " + std::to_string(i);
    if (f.id != static_cast<KeyframeId>(i)) {
      throw Error(ErrorCode::kBadDataset, where + ": ids must be 0..n-1 in order");
    }
    if (i > 0 && f.t < ds.frames[i - 1].t) {
      throw Error(ErrorCode::kBadDataset, where + ": timestamps must not decrease");
    }
    if (f.appearance.words.empty()) {
      throw Error(ErrorCode::kBadDataset, where + ": keyframe has no visual words");
    }
  }
}

}  // namespace

RunRecord run_pipeline(const Dataset& dataset, const PolicyParams& params,
                       const StepObserver& observer) {
  params.validate();
  validate_dataset(dataset);
  const auto run_start = Clock::now();

  RunRecord run;
  run.params = params;
  const auto& frames = dataset.frames;
  for (const auto& f : frames) run.frame_times.push_back(f.t);

  std::vector<Signature> signatures;
  std::vector<std::size_t> sig_of_frame;
  if (params.gated) {
    try {
      signatures = signatures_from_log(dataset.scans, dataset.scan_dwell);
      sig_of_frame = associate_frames(run.frame_times, signatures);
    } catch (const Error& e) {
      throw Error(ErrorCode::kBadDataset, std::string("Wi-Fi scans: ") + e.what());
    }
  }

  const SceneFrames scene = dataset.scene();
  const MatchParams match = params.match_params();
  const Eigen::Matrix3d loop_info = match_information(match);
  const OdometryNoise& odo_noise = dataset.world.config.odometry;

  GraphAdjacency adjacency;
  InvertedIndex global_index;
  std::vector<InvertedIndex> cluster_indexes;
  Covisibility covis;
  MemoryState memory;
  std::vector<KeyframeId> prior;

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const KeyframeId id = f.id;
    const int step = static_cast<int>(i);
    LoopEvent ev;
    ev.step = step;
    ev.from = id;

    // Wi-Fi: similar clusters for this frame's signature.
    const Signature* sig = nullptr;
    SimilarClusters similar;
    if (params.gated) {
      const auto t0 = Clock::now();
      sig = &signatures[sig_of_frame[i]];
      similar = similar_clusters(run.store, *sig, params.wifi_threshold);
      run.costs.clustering +=
          params.similarity_cost * static_cast<double>(run.store.size());
      run.wall.clustering_s += seconds_since(t0);
    }
    ev.similar_clusters = static_cast<int>(similar.size());

    // Candidate selection.
    std::vector<KeyframeId> candidates;
    std::vector<KeyframeId> retrieved;
    {
      const auto t0 = Clock::now();
      switch (params.policy) {
        case Policy::kRgbd:
          candidates = rgbd_candidates(adjacency, prior, run.store, similar, params,
                                       mix_seed(params.seed, 0x7267626400ULL + i));
          break;
        case Policy::kRtab: {
          auto sel = rtab_select(memory, id, run.store, similar, params.rtab,
                                 params.gated);
          candidates = std::move(sel.candidates);
          retrieved = std::move(sel.retrieved);
          if (params.gated) {
            run.costs.management +=
                params.management_cost *
                static_cast<double>(retrieved.size() + memory.immune.size());
          }
          break;
        }
        case Policy::kOrb:
          candidates = drop_recent(
              orb_candidates(f.appearance, global_index, cluster_indexes, similar,
                             params.gated),
              run.frame_times, f.t, params.loop_min_gap_s);
          break;
      }
      run.wall.management_s += params.gated && params.policy == Policy::kRtab
                                   ? seconds_since(t0)
                                   : 0.0;
    }

    if (observer) {
      StepView view;
      view.step = step;
      view.current = id;
      view.t = f.t;
      view.appearance = &f.appearance;
      view.signature = sig;
      view.similar = &similar;
      view.candidates = &candidates;
      view.global_index = &global_index;
      view.cluster_indexes = &cluster_indexes;
      view.store = &run.store;
      view.memory = &memory;
      view.frame_times = &run.frame_times;
      observer(view);
    }

    // Tracking: new node from odometry.
    if (i == 0) {
      run.graph.add_node(id, f.gt);  // the gauge: first pose taken as known
    } else {
      const KeyframeId prev = frames[i - 1].id;
      run.graph.add_node(id, compose(run.graph.pose(prev), f.odom_delta));
      GraphEdge e;
      e.from = prev;
      e.to = id;
      e.relative = f.odom_delta;
      e.information =
          odometry_information(f.odom_delta, odo_noise, params.odom_sigma_floor);
      e.kind = EdgeKind::kOdometry;
      run.graph.add_edge(e);
    }
    adjacency.add_node(id);
    if (i > 0) adjacency.add_edge(frames[i - 1].id, id);

    // Visual matching against the candidates.
    std::vector<KeyframeId> accepted;
    int best_matches = -1;
    {
      const auto t0 = Clock::now();
      const FrameRef a{id, &f.appearance, f.gt};
      for (const KeyframeId c : candidates) {
        const auto& fc = frames[static_cast<std::size_t>(c)];
        const auto m = match_frames(a, FrameRef{c, &fc.appearance, fc.gt}, scene, match);
        if (!m.accepted) continue;
        accepted.push_back(c);
        const bool is_loop = params.policy != Policy::kRgbd ||
                             f.t - fc.t > params.loop_min_gap_s;
        if (!is_loop) continue;
        GraphEdge e;
        e.from = id;
        e.to = c;
        e.relative = *m.relative;
        e.information = loop_info;
        e.kind = EdgeKind::kLoop;
        run.graph.add_edge(e);
        adjacency.add_edge(id, c);
        ev.loop_partners.push_back(c);
        if (m.num_matches > best_matches) {
          best_matches = m.num_matches;
          ev.to = c;
        }
      }
      ev.candidate_count = static_cast<int>(candidates.size());
      ev.comparisons_cost = params.comparison_cost * ev.candidate_count;
      ev.accepted = !ev.loop_partners.empty();
      run.costs.comparisons += ev.candidate_count;
      run.costs.loop_closure += ev.comparisons_cost;
      run.wall.loop_closure_s += seconds_since(t0);
    }

    // Map bookkeeping and cluster management.
    {
      const auto t0 = Clock::now();
      covis_update(covis, id, accepted);
      global_index.insert(id, f.appearance);
      if (params.gated) {
        std::vector<KeyframeId> neighbors = accepted;
        if (i > 0) neighbors.push_back(frames[i - 1].id);
        if (params.policy == Policy::kOrb) {
          orb_cluster_management(id, *sig, f.appearance, neighbors, covis, run.store,
                                 cluster_indexes, similar);
          run.costs.management += 2.0 * params.management_cost;  // assign + index
        } else {
          assign(run.store, id, *sig, neighbors, similar);
          run.costs.management += params.management_cost;
        }
      }
      run.wall.management_s += params.gated ? seconds_since(t0) : 0.0;
    }
    prior.push_back(id);

    // Back end.
    int iterations = 0;
    const bool last = i + 1 == frames.size();
    if (i > 0 && (ev.accepted || last ||
                  (i + 1) % static_cast<std::size_t>(params.optimize_every) == 0)) {
      const auto t0 = Clock::now();
      OptimizeReport rep;
      run.graph = optimize(run.graph, params.optimizer, &rep);
      iterations = rep.iterations;
      run.costs.optimizer_iterations += iterations;
      run.costs.optimization += params.iteration_cost * iterations;
      run.wall.optimization_s += seconds_since(t0);
    }

    if (params.policy == Policy::kRtab) {
      const auto t0 = Clock::now();
      const double step_cost = ev.comparisons_cost + params.iteration_cost * iterations;
      std::vector<KeyframeId> anchors{id};
      anchors.insert(anchors.end(), ev.loop_partners.begin(), ev.loop_partners.end());
      const auto moved =
          rtab_enforce(memory, step_cost, params.rtab, params.gated, adjacency, anchors);
      MemoryTraceRow row;
      row.step = step;
      row.stm = memory.stm.size();
      row.wm = memory.wm.size();
      row.ltm = memory.ltm.size();
      row.immune = memory.immune.size();
      row.transfers = moved.size();
      row.retrievals = retrieved.size();
      run.memory_trace.push_back(row);
      run.wall.management_s += seconds_since(t0);
    }
    run.events.push_back(std::move(ev));
  }
  run.wall.total_s = seconds_since(run_start);
  return run;
}

void write_loop_events_jsonl(std::ostream& out, std::span<const LoopEvent> events) {
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["from"] = e.from;
    j["to"] = e.to;
    j["accepted"] = e.accepted;
    j["candidate_count"] = e.candidate_count;
    j["comparisons_cost"] = e.comparisons_cost;
    j["similar_clusters"] = e.similar_clusters;
    j["loop_partners"] = e.loop_partners;
    out << j.dump() << '\n';
  }
}

void write_memory_trace_csv(std::ostream& out, std::span<const MemoryTraceRow> rows) {
  out << "step,stm,wm,ltm,immune,transfers,retrievals\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.stm << ',' << r.wm << ',' << r.ltm << ',' << r.immune
        << ',' << r.transfers << ',' << r.retrievals << '\n';
  }
}

std::vector<TrajectoryRow> trajectory_rows(const RunRecord& run) {
  std::vector<TrajectoryRow> rows;
  for (const auto& [id, pose] : run.graph.nodes()) {
    const auto idx = static_cast<std::size_t>(id);
    rows.push_back({id, idx < run.frame_times.size() ? run.frame_times[idx] : 0.0, pose});
  }
  return rows;
}

}  // namespace wifislam
