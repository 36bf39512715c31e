#include "wifislam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "csv.hpp"
#include "wifislam/error.hpp"

namespace wifislam {

namespace {

KeyframePair ordered(const KeyframePair& p) {
  return {std::min(p.first, p.second), std::max(p.first, p.second)};
}

bool nearby(const KeyframePair& a, const KeyframePair& b, int radius) {
  return std::llabs(a.first - b.first) <= radius &&
         std::llabs(a.second - b.second) <= radius;
}

}  // namespace

LoopScore score_loops(std::span<const KeyframePair> accepted_edges,
                      std::span<const KeyframePair> gt_pairs, int match_radius) {
  if (match_radius < 0) {
    throw Error(ErrorCode::kInvalidArgument, "match_radius must be >= 0");
  }
  std::vector<KeyframePair> edges;
  for (const auto& e : accepted_edges) edges.push_back(ordered(e));
  std::vector<KeyframePair> gt;
  for (const auto& g : gt_pairs) gt.push_back(ordered(g));
  std::sort(gt.begin(), gt.end());
  gt.erase(std::unique(gt.begin(), gt.end()), gt.end());

  // gt is sorted by first id, so only a window of it can be near an edge.
  auto near_any = [&](const KeyframePair& e, const std::vector<KeyframePair>& sorted) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(),
                               KeyframePair{e.first - match_radius,
                                            std::numeric_limits<KeyframeId>::min()});
    for (; it != sorted.end() && it->first <= e.first + match_radius; ++it) {
      if (nearby(e, *it, match_radius)) return true;
    }
    return false;
  };

  LoopScore s;
  for (const auto& e : edges) {
    if (!near_any(e, gt)) ++s.false_positives;
  }
  std::vector<KeyframePair> sorted_edges = edges;
  std::sort(sorted_edges.begin(), sorted_edges.end());
  for (const auto& g : gt) {
    if (near_any(g, sorted_edges)) {
      ++s.true_positives;
    } else {
      ++s.false_negatives;
    }
  }
  if (!edges.empty()) {
    s.fp_pct = 100.0 * s.false_positives / static_cast<double>(edges.size());
  }
  if (!gt.empty()) s.fn_pct = 100.0 * s.false_negatives / static_cast<double>(gt.size());
  return s;
}

double trajectory_error(std::span<const TrajectoryRow> estimate,
                        std::span<const TrajectoryRow> ground_truth) {
  std::map<KeyframeId, Point2> truth;
  for (const auto& r : ground_truth) truth[r.id] = r.pose.translation();
  std::vector<Point2> est;
  std::vector<Point2> gt;
  for (const auto& r : estimate) {
    const auto it = truth.find(r.id);
    if (it == truth.end()) continue;
    est.push_back(r.pose.translation());
    gt.push_back(it->second);
  }
  if (est.empty()) {
    throw Error(ErrorCode::kNoCorrespondence,
                "estimate and ground truth share no keyframe ids");
  }
  if (est.size() == 1) return 0.0;
  const auto align = kabsch_align(est, gt);
  for (auto& p : est) p = align.apply(p);
  return rmse(est, gt);
}

std::vector<TrajectoryRow> ground_truth_rows(const Dataset& dataset) {
  std::vector<TrajectoryRow> rows;
  for (const auto& f : dataset.frames) rows.push_back({f.id, f.t, f.gt});
  return rows;
}

ComputeLedger ledger(const RunRecord& run) {
  ComputeLedger l;
  l.loop_closure = {run.costs.loop_closure, run.wall.loop_closure_s};
  l.clustering_overhead = {run.costs.clustering, run.wall.clustering_s};
  l.management_overhead = {run.costs.management, run.wall.management_s};
  return l;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch, "spearman needs equal lengths");
  }
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

SimilarityCurve similarity_distance_curve(std::span<const Point2> dwell_positions,
                                          std::span<const Signature> signatures) {
  if (dwell_positions.size() != signatures.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one position per signature expected");
  }
  if (signatures.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least two dwells");
  }
  SimilarityCurve c;
  std::vector<double> d, s;
  for (std::size_t i = 0; i < signatures.size(); ++i) {
    for (std::size_t j = i + 1; j < signatures.size(); ++j) {
      const double dist = (dwell_positions[i] - dwell_positions[j]).norm();
      const double sim = cosine_similarity(signatures[i], signatures[j]);
      c.points.push_back({dist, sim});
      d.push_back(dist);
      s.push_back(sim);
    }
  }
  c.spearman_rho = spearman(d, s);
  return c;
}

SimilarityCurve similarity_distance_curve(const Dataset& dataset) {
  const auto sigs = signatures_from_log(dataset.scans, dataset.scan_dwell);
  std::map<int, Point2> where;
  for (const auto& d : dataset.dwells) where[d.index] = d.position;
  std::vector<Point2> pos;
  for (const auto& s : sigs) {
    const auto it = where.find(s.pause_index());
    if (it == where.end()) {
      throw Error(ErrorCode::kBadDataset,
                  "dwell " + std::to_string(s.pause_index()) + " has no position");
    }
    pos.push_back(it->second);
  }
  return similarity_distance_curve(pos, sigs);
}

double CdfCurve::fraction_within(double error_m) const {
  const auto it = std::upper_bound(errors.begin(), errors.end(), error_m);
  const auto k = static_cast<std::size_t>(it - errors.begin());
  return k == 0 ? 0.0 : fractions[k - 1];
}

CdfCurve make_cdf(std::vector<double> errors) {
  CdfCurve c;
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  for (std::size_t k = 0; k < errors.size(); ++k) {
    c.fractions.push_back(static_cast<double>(k + 1) / n);
  }
  c.errors = std::move(errors);
  return c;
}

LocalizationMap build_localization_map(std::vector<LocalizationFrame> frames,
                                       double threshold) {
  LocalizationMap map;
  std::optional<KeyframeId> prev;
  for (const auto& f : frames) {
    const auto similar = similar_clusters(map.store, f.signature, threshold);
    std::vector<KeyframeId> links;
    if (prev) links.push_back(*prev);
    assign(map.store, f.id, f.signature, links, similar);
    prev = f.id;
  }
  map.frames = std::move(frames);
  return map;
}

LocalizationResult localize_queries(const LocalizationMap& map,
                                    std::span<const LocalizationFrame> queries,
                                    double threshold, bool gated) {
  if (map.frames.empty()) throw Error(ErrorCode::kEmptyMap, "no mapping frames");
  std::map<KeyframeId, const LocalizationFrame*> by_id;
  std::vector<KeyframeId> all_ids;
  for (const auto& f : map.frames) {
    by_id[f.id] = &f;
    all_ids.push_back(f.id);
  }
  LocalizationResult res;
  res.map_count = map.frames.size();
  res.query_count = queries.size();
  for (const auto& q : queries) {
    std::vector<KeyframeId> pool;
    if (gated) {
      const auto similar = similar_clusters(map.store, q.signature, threshold);
      pool = members_of(map.store, similar);
      if (pool.empty()) ++res.fallback_count;
    }
    if (pool.empty()) pool = all_ids;
    const LocalizationFrame* best = nullptr;
    int best_score = -1;
    for (const KeyframeId k : pool) {
      const auto* m = by_id.at(k);
      const int s = shared_word_count(*q.appearance, *m->appearance);
      if (s > best_score || (s == best_score && m->id < best->id)) {
        best = m;
        best_score = s;
      }
    }
    res.chosen.push_back(best->id);
    res.errors.push_back((best->position - q.position).norm());
  }
  res.cdf = make_cdf(res.errors);
  return res;
}

bool is_map_frame(std::size_t index, double map_fraction) {
  const double i = static_cast<double>(index);
  return std::floor((i + 1.0) * map_fraction) > std::floor(i * map_fraction);
}

LocalizationResult localize_dataset(const Dataset& dataset, double map_fraction,
                                    double threshold, bool gated) {
  if (!(map_fraction > 0.0 && map_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "map fraction must lie in (0, 1)");
  }
  if (dataset.frames.empty()) throw Error(ErrorCode::kEmptyMap, "dataset has no frames");
  const auto sigs = signatures_from_log(dataset.scans, dataset.scan_dwell);
  std::vector<double> times;
  for (const auto& f : dataset.frames) times.push_back(f.t);
  const auto assoc = associate_frames(times, sigs);

  std::vector<LocalizationFrame> map_frames, queries;
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    const auto& f = dataset.frames[i];
    LocalizationFrame lf{f.id, f.gt.translation(), &f.appearance, sigs[assoc[i]]};
    (is_map_frame(i, map_fraction) ? map_frames : queries).push_back(std::move(lf));
  }
  const auto map = build_localization_map(std::move(map_frames), threshold);
  return localize_queries(map, queries, threshold, gated);
}

// ---------------------------------------------------------------- report

std::string ReportRow::key() const {
  using csv::format_double;
  return dataset + ',' + std::to_string(seed) + ',' + policy + ',' +
         (gated ? "true" : "false") + ',' + std::to_string(min_matches) + ',' +
         format_double(inlier_distance) + ',' + format_double(wifi_threshold) + ',' +
         format_double(real_time_threshold);
}

ReportRow make_report_row(const std::string& dataset_name, const Dataset& dataset,
                          const RunRecord& run, int match_radius) {
  ReportRow r;
  r.dataset = dataset_name;
  r.seed = run.params.seed;
  r.policy = to_string(run.params.policy);
  r.gated = run.params.gated;
  r.min_matches = run.params.min_matches;
  r.inlier_distance = run.params.inlier_distance;
  r.wifi_threshold = run.params.wifi_threshold;
  r.real_time_threshold = run.params.rtab.real_time_threshold;
  r.rmse_m = trajectory_error(trajectory_rows(run), ground_truth_rows(dataset));
  const auto edges = run.loop_edges();
  r.score = score_loops(edges, dataset.gt_loop_pairs, match_radius);
  const auto l = ledger(run);
  r.loop_cost = l.loop_closure.cost;
  r.overhead_cost = l.overhead_cost();
  r.clusters = run.store.size();
  r.wall_ms = 1000.0 * run.wall.total_s;
  return r;
}

std::string report_header() {
  return "dataset,seed,policy,gated,min_matches,inlier_distance,wifi_threshold,"
         "real_time_threshold,rmse_m,tp,fp,fn,fp_pct,fn_pct,loop_cost,"
         "overhead_cost,clusters,wall_ms";
}

std::string format_report_row(const ReportRow& r) {
  using csv::format_fixed;
  return r.key() + ',' + format_fixed(r.rmse_m, 6) + ',' +
         std::to_string(r.score.true_positives) + ',' +
         std::to_string(r.score.false_positives) + ',' +
         std::to_string(r.score.false_negatives) + ',' +
         format_fixed(r.score.fp_pct, 4) + ',' + format_fixed(r.score.fn_pct, 4) +
         ',' + format_fixed(r.loop_cost, 2) + ',' + format_fixed(r.overhead_cost, 2) +
         ',' + std::to_string(r.clusters) + ',' + format_fixed(r.wall_ms, 1);
}

ReportRow parse_report_row(const std::string& line) {
  const auto cols = csv::split(csv::trim(line));
  if (cols.size() != 18) {
    throw Error(ErrorCode::kParse, "report row: expected 18 columns");
  }
  const std::string where = "report row";
  ReportRow r;
  r.dataset = std::string(cols[0]);
  r.seed = static_cast<std::uint64_t>(csv::parse_int(cols[1], where));
  r.policy = std::string(cols[2]);
  r.gated = cols[3] == "true";
  r.min_matches = static_cast<int>(csv::parse_int(cols[4], where));
  r.inlier_distance = csv::parse_double(cols[5], where);
  r.wifi_threshold = csv::parse_double(cols[6], where);
  r.real_time_threshold = csv::parse_double(cols[7], where);
  r.rmse_m = csv::parse_double(cols[8], where);
  r.score.true_positives = static_cast<int>(csv::parse_int(cols[9], where));
  r.score.false_positives = static_cast<int>(csv::parse_int(cols[10], where));
  r.score.false_negatives = static_cast<int>(csv::parse_int(cols[11], where));
  r.score.fp_pct = csv::parse_double(cols[12], where);
  r.score.fn_pct = csv::parse_double(cols[13], where);
  r.loop_cost = csv::parse_double(cols[14], where);
  r.overhead_cost = csv::parse_double(cols[15], where);
  r.clusters = static_cast<std::size_t>(csv::parse_int(cols[16], where));
  r.wall_ms = csv::parse_double(cols[17], where);
  return r;
}

void write_cdf_csv(std::ostream& out, const CdfCurve& cdf) {
  out << "error_m,fraction\n";
  for (std::size_t i = 0; i < cdf.errors.size(); ++i) {
    out << csv::format_double(cdf.errors[i]) << ','
        << csv::format_double(cdf.fractions[i]) << '\n';
  }
}

void write_similarity_curve_csv(std::ostream& out, const SimilarityCurve& curve) {
  out << "distance_m,similarity\n";
  for (const auto& p : curve.points) {
    out << csv::format_double(p.distance_m) << ','
        << csv::format_double(p.similarity) << '\n';
  }
  out << "# spearman_rho=" << csv::format_double(curve.spearman_rho) << '\n';
}

}  // namespace wifislam
