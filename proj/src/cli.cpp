#include "wifislam/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv.hpp"
#include "wifislam/error.hpp"

namespace wifislam::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kIo:
      return kExitUsage;
    default:
      return kExitData;
  }
}

namespace {

[[noreturn]] void usage(const std::string& msg) {
  throw Error(ErrorCode::kInvalidArgument, msg);
}

json threshold_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double threshold_from_json(const json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    try {
      return csv::parse_double(s, key);
    } catch (const Error&) {
    }
  }
  usage(key + ": expected a number or \"inf\"");
}

json params_json(const PolicyParams& p) {
  return json{
      {"policy", to_string(p.policy)},
      {"gated", p.gated},
      {"min_matches", p.min_matches},
      {"inlier_distance", p.inlier_distance},
      {"wifi_threshold", p.wifi_threshold},
      {"real_time_threshold", threshold_to_json(p.rtab.real_time_threshold)},
      {"rgbd",
       {{"n_predecessors", p.rgbd.n_predecessors},
        {"geodesic_depth", p.rgbd.geodesic_depth},
        {"n_random_keyframes", p.rgbd.n_random_keyframes}}},
      {"rtab",
       {{"stm_capacity", p.rtab.stm_capacity},
        {"wm_transfer_batch", p.rtab.wm_transfer_batch}}},
      {"loop_min_gap_s", p.loop_min_gap_s},
      {"optimize_every", p.optimize_every},
      {"optimizer",
       {{"max_iters", p.optimizer.max_iters},
        {"damping_init", p.optimizer.damping_init},
        {"relative_tolerance", p.optimizer.relative_tolerance}}},
      {"comparison_cost", p.comparison_cost},
      {"iteration_cost", p.iteration_cost},
      {"similarity_cost", p.similarity_cost},
      {"management_cost", p.management_cost},
      {"keep_probability", p.keep_probability},
      {"match_sigma_xy", p.match_sigma_xy},
      {"match_sigma_theta", p.match_sigma_theta},
      {"odom_sigma_floor", p.odom_sigma_floor},
      {"seed", p.seed},
  };
}

template <typename T>
void take(const json& j, const std::string& key, T& dst, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    dst = it->get<T>();
  } catch (const json::exception&) {
    usage(path + key + ": wrong type");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& path) {
  if (!j.is_object()) usage((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) usage("unknown config key '" + path + k + "'");
  }
}

// Keys a config file may carry besides the policy parameters.
const std::set<std::string> kRunKeys = {"world", "seed", "out", "jobs", "dataset_name"};

PolicyParams params_from(const json& j, PolicyParams p, bool allow_run_keys) {
  std::set<std::string> allowed;
  const json defaults = params_json(p);
  for (const auto& [k, v] : defaults.items()) allowed.insert(k);
  if (allow_run_keys) allowed.insert(kRunKeys.begin(), kRunKeys.end());
  check_keys(j, allowed, "");

  if (j.contains("policy")) {
    if (!j["policy"].is_string()) usage("policy: expected a string");
    p.policy = parse_policy(j["policy"].get<std::string>());
  }
  take(j, "gated", p.gated, "");
  take(j, "min_matches", p.min_matches, "");
  take(j, "inlier_distance", p.inlier_distance, "");
  take(j, "wifi_threshold", p.wifi_threshold, "");
  if (j.contains("real_time_threshold")) {
    p.rtab.real_time_threshold =
        threshold_from_json(j["real_time_threshold"], "real_time_threshold");
  }
  if (j.contains("rgbd")) {
    const auto& r = j["rgbd"];
    check_keys(r, {"n_predecessors", "geodesic_depth", "n_random_keyframes"}, "rgbd.");
    take(r, "n_predecessors", p.rgbd.n_predecessors, "rgbd.");
    take(r, "geodesic_depth", p.rgbd.geodesic_depth, "rgbd.");
    take(r, "n_random_keyframes", p.rgbd.n_random_keyframes, "rgbd.");
  }
  if (j.contains("rtab")) {
    const auto& r = j["rtab"];
    check_keys(r, {"stm_capacity", "wm_transfer_batch"}, "rtab.");
    take(r, "stm_capacity", p.rtab.stm_capacity, "rtab.");
    take(r, "wm_transfer_batch", p.rtab.wm_transfer_batch, "rtab.");
  }
  take(j, "loop_min_gap_s", p.loop_min_gap_s, "");
  take(j, "optimize_every", p.optimize_every, "");
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    check_keys(o, {"max_iters", "damping_init", "relative_tolerance"}, "optimizer.");
    take(o, "max_iters", p.optimizer.max_iters, "optimizer.");
    take(o, "damping_init", p.optimizer.damping_init, "optimizer.");
    take(o, "relative_tolerance", p.optimizer.relative_tolerance, "optimizer.");
  }
  take(j, "comparison_cost", p.comparison_cost, "");
  take(j, "iteration_cost", p.iteration_cost, "");
  take(j, "similarity_cost", p.similarity_cost, "");
  take(j, "management_cost", p.management_cost, "");
  take(j, "keep_probability", p.keep_probability, "");
  take(j, "match_sigma_xy", p.match_sigma_xy, "");
  take(j, "match_sigma_theta", p.match_sigma_theta, "");
  take(j, "odom_sigma_floor", p.odom_sigma_floor, "");
  take(j, "seed", p.seed, "");
  return p;
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    usage(what + ": " + e.what());
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

template <typename Fn>
void write_file(const fs::path& p, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text(p, ss.str());
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-')) c = '_';
  }
  return s;
}

}  // namespace

std::string policy_params_to_json(const PolicyParams& params) {
  return params_json(params).dump(2);
}

PolicyParams policy_params_from_json(std::string_view text, PolicyParams base) {
  return params_from(parse_json(text, "policy parameters"), base, false);
}

std::vector<PolicyParams> expand_grid(std::string_view grid_json, const PolicyParams& base) {
  const json g = parse_json(grid_json, "grid");
  static const std::vector<std::string> kAxes = {
      "policy", "gated", "min_matches", "inlier_distance",
      "wifi_threshold", "real_time_threshold", "seed"};
  if (!g.is_object() || g.empty()) usage("grid: expected a non-empty object of axes");
  for (const auto& [k, v] : g.items()) {
    if (std::find(kAxes.begin(), kAxes.end(), k) == kAxes.end()) {
      usage("grid: unknown axis '" + k + "'");
    }
    if (!v.is_array() || v.empty()) usage("grid: axis '" + k + "' must be a non-empty array");
  }

  std::vector<PolicyParams> cells{base};
  for (const auto& axis : kAxes) {
    if (!g.contains(axis)) continue;
    std::vector<PolicyParams> next;
    for (const auto& cell : cells) {
      for (const auto& value : g[axis]) {
        json one = {{axis, value}};
        next.push_back(params_from(one, cell, false));
      }
    }
    cells = std::move(next);
  }
  for (const auto& c : cells) c.validate();
  return cells;
}

std::vector<ReportRow> read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<ReportRow> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (n == 1 && line == report_header()) continue;
    try {
      rows.push_back(parse_report_row(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse,
                  path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

void write_report(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::string text = report_header() + '\n';
  for (const auto& r : rows) text += format_report_row(r) + '\n';
  // Replace atomically so an interrupted sweep never leaves half a report.
  const fs::path tmp = path.string() + ".tmp";
  write_text(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

ReportRow write_run(const fs::path& out, const std::string& dataset_name,
                    const Dataset& dataset, const RunRecord& run) {
  make_dir(out);
  write_file(out / "trajectory.csv",
             [&](std::ostream& o) { write_trajectory_csv(o, trajectory_rows(run)); });
  write_file(out / "loop_events.jsonl",
             [&](std::ostream& o) { write_loop_events_jsonl(o, run.events); });
  write_file(out / "memory_trace.csv",
             [&](std::ostream& o) { write_memory_trace_csv(o, run.memory_trace); });
  write_file(out / "clusters.csv", [&](std::ostream& o) { write_cluster_csv(o, run.store); });
  write_file(out / "representatives.jsonl",
             [&](std::ostream& o) { write_representatives_jsonl(o, run.store); });
  const ReportRow row = make_report_row(dataset_name, dataset, run);
  write_report(out / "report.csv", {row});
  return row;
}

SweepSummary sweep(const Dataset& dataset, const std::string& dataset_name,
                   const std::vector<PolicyParams>& cells, const fs::path& out, int jobs) {
  if (cells.empty()) usage("sweep: the grid has no cells");
  make_dir(out / "cells");
  const fs::path report_path = out / "report.csv";

  std::vector<ReportRow> existing;
  if (fs::exists(report_path)) existing = read_report(report_path);
  std::map<std::string, ReportRow> by_key;
  for (const auto& r : existing) by_key.emplace(r.key(), r);

  // Keys are computed without running anything: the report key depends only
  // on the dataset name and the parameters.
  auto key_of = [&](const PolicyParams& p) {
    ReportRow r;
    r.dataset = dataset_name;
    r.seed = p.seed;
    r.policy = to_string(p.policy);
    r.gated = p.gated;
    r.min_matches = p.min_matches;
    r.inlier_distance = p.inlier_distance;
    r.wifi_threshold = p.wifi_threshold;
    r.real_time_threshold = p.rtab.real_time_threshold;
    return r.key();
  };

  SweepSummary summary;
  std::vector<std::size_t> todo;
  std::vector<std::string> keys;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    keys.push_back(key_of(cells[i]));
    if (!seen.insert(keys.back()).second) continue;  // duplicate cell
    if (by_key.contains(keys.back())) {
      ++summary.skipped;
    } else {
      todo.push_back(i);
    }
  }

  std::vector<std::optional<ReportRow>> computed(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex fail_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const std::size_t i = todo[k];
      try {
        const RunRecord run = run_pipeline(dataset, cells[i]);
        ReportRow row = make_report_row(dataset_name, dataset, run);
        write_text(out / "cells" / (sanitize(keys[i]) + ".csv"),
                   report_header() + '\n' + format_report_row(row) + '\n');
        computed[i] = std::move(row);
      } catch (...) {
        std::lock_guard lock(fail_mutex);
        if (!failure) failure = std::current_exception();
        next = todo.size();
      }
    }
  };
  const int n_threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<ReportRow> rows;
  std::set<std::string> written;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!written.insert(keys[i]).second) continue;
    if (computed[i]) {
      rows.push_back(*computed[i]);
      ++summary.computed;
    } else {
      rows.push_back(by_key.at(keys[i]));
    }
  }
  for (const auto& r : existing) {
    if (written.insert(r.key()).second) rows.push_back(r);  // from other grids
  }
  write_report(report_path, rows);
  summary.rows = rows.size();
  return summary;
}

void write_report_deltas(std::ostream& out, const std::vector<ReportRow>& rows) {
  using csv::format_fixed;
  out << "dataset,seed,policy,min_matches,inlier_distance,wifi_threshold,"
         "real_time_threshold,rmse_vanilla,rmse_gated,fp_vanilla,fp_gated,"
         "fn_pct_vanilla,fn_pct_gated,loop_cost_vanilla,loop_cost_gated,"
         "loop_cost_ratio,overhead_cost,overhead_pct\n";
  std::map<std::string, const ReportRow*> gated;
  for (const auto& r : rows) {
    if (r.gated) gated.emplace(r.key(), &r);
  }
  for (const auto& v : rows) {
    if (v.gated) continue;
    ReportRow probe = v;
    probe.gated = true;
    const auto it = gated.find(probe.key());
    if (it == gated.end()) continue;
    const ReportRow& g = *it->second;
    const double ratio = v.loop_cost > 0 ? g.loop_cost / v.loop_cost : 0.0;
    const double overhead_pct = v.loop_cost > 0 ? 100.0 * g.overhead_cost / v.loop_cost : 0.0;
    out << v.dataset << ',' << v.seed << ',' << v.policy << ',' << v.min_matches << ','
        << csv::format_double(v.inlier_distance) << ','
        << csv::format_double(v.wifi_threshold) << ','
        << csv::format_double(v.real_time_threshold) << ',' << format_fixed(v.rmse_m, 6)
        << ',' << format_fixed(g.rmse_m, 6) << ',' << v.score.false_positives << ','
        << g.score.false_positives << ',' << format_fixed(v.score.fn_pct, 4) << ','
        << format_fixed(g.score.fn_pct, 4) << ',' << format_fixed(v.loop_cost, 2) << ','
        << format_fixed(g.loop_cost, 2) << ',' << format_fixed(ratio, 4) << ','
        << format_fixed(g.overhead_cost, 2) << ',' << format_fixed(overhead_pct, 4)
        << '\n';
  }
}

// ---------------------------------------------------------------- commands

namespace {

// Flags shared by run, sweep and localize. Unset flags leave the config alone.
struct PolicyFlags {
  std::string policy;
  std::string gated;
  std::optional<int> min_matches;
  std::optional<double> inlier_distance;
  std::optional<double> wifi_threshold;
  std::string real_time_threshold;
  std::optional<std::uint64_t> seed;
  std::string config;

  void attach(CLI::App* app) {
    app->add_option("--policy", policy, "rgbd | rtab | orb");
    app->add_option("--gated", gated, "true | false");
    app->add_option("--min-matches", min_matches);
    app->add_option("--inlier-distance", inlier_distance, "metres");
    app->add_option("--wifi-threshold", wifi_threshold, "cosine similarity");
    app->add_option("--real-time-threshold", real_time_threshold, "inf | N cost units");
    app->add_option("--seed", seed);
    app->add_option("--config", config, "JSON config; flags win")->check(CLI::ExistingFile);
  }

  json config_json() const {
    if (config.empty()) return json::object();
    return parse_json(read_text(config), config);
  }

  PolicyParams resolve(const json& cfg, PolicyParams base = {}) const {
    PolicyParams p = params_from(cfg, base, true);
    if (!policy.empty()) p.policy = parse_policy(policy);
    if (!gated.empty()) {
      if (gated == "true" || gated == "1") {
        p.gated = true;
      } else if (gated == "false" || gated == "0") {
        p.gated = false;
      } else {
        usage("--gated expects true or false, got '" + gated + "'");
      }
    }
    if (min_matches) p.min_matches = *min_matches;
    if (inlier_distance) p.inlier_distance = *inlier_distance;
    if (wifi_threshold) p.wifi_threshold = *wifi_threshold;
    if (!real_time_threshold.empty()) {
      p.rtab.real_time_threshold =
          threshold_from_json(json(real_time_threshold), "--real-time-threshold");
    }
    if (seed) p.seed = *seed;
    p.validate();
    return p;
  }
};

std::string dataset_name_of(const Dataset& ds, const json& cfg) {
  if (cfg.contains("dataset_name") && cfg["dataset_name"].is_string()) {
    return cfg["dataset_name"].get<std::string>();
  }
  return ds.world.config.name.empty() ? "dataset" : ds.world.config.name;
}

std::string string_or(const json& cfg, const char* key, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (cfg.contains(key)) {
    if (!cfg[key].is_string()) usage(std::string(key) + ": expected a string");
    return cfg[key].get<std::string>();
  }
  return {};
}

WorldConfig load_world(const std::string& world) {
  const auto presets = preset_worlds();
  if (presets.contains(world)) return presets.at(world);
  if (fs::is_regular_file(world)) {
    try {
      return world_config_from_json(read_text(world));
    } catch (const Error& e) {
      usage(world + ": " + e.what());
    }
  }
  std::string names;
  for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
  usage("unknown world '" + world + "' (presets: " + names +
        "; or a path to a world config JSON)");
}

Dataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "dataset directory '" + dir + "' does not exist");
  }
  return read_dataset(dir);
}

void print_dataset_summary(std::ostream& out, const Dataset& ds) {
  out << "world " << ds.world.config.name << "  seed " << ds.seed << "\n"
      << "frames " << ds.frames.size() << "  dwells " << ds.dwells.size() << "  aps "
      << ds.world.aps.size() << "  gt_loops " << ds.gt_loop_pairs.size() << "\n";
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wi-Fi gated loop closure for visual SLAM: simulator and experiments",
               "wifislam"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // gen
  auto* gen = app.add_subcommand("gen", "synthesize a dataset");
  std::string gen_world;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  std::string gen_config;
  gen->add_option("--world", gen_world, "preset name or world config JSON");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "dataset directory");
  gen->add_option("--config", gen_config)->check(CLI::ExistingFile);

  // run
  auto* run = app.add_subcommand("run", "run one policy over a dataset");
  std::string run_dataset;
  std::string run_out;
  PolicyFlags run_flags;
  run->add_option("dataset", run_dataset, "dataset directory")->required();
  run->add_option("--out", run_out, "run directory (default DATASET/run)");
  run_flags.attach(run);

  // sweep
  auto* sw = app.add_subcommand("sweep", "run a parameter grid, resumably");
  std::string sw_dataset;
  std::string sw_grid;
  std::string sw_out;
  std::optional<int> sw_jobs;
  PolicyFlags sw_flags;
  sw->add_option("dataset", sw_dataset, "dataset directory")->required();
  sw->add_option("--grid", sw_grid, "grid JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", sw_out, "sweep directory");
  sw->add_option("--jobs", sw_jobs, "worker threads (default: processors)");
  sw_flags.attach(sw);

  // curve
  auto* cv = app.add_subcommand("curve", "similarity against distance over all dwell pairs");
  std::string cv_dataset;
  std::string cv_out;
  cv->add_option("dataset", cv_dataset, "dataset directory")->required();
  cv->add_option("--out", cv_out, "output directory (default DATASET)");

  // localize
  auto* lc = app.add_subcommand("localize", "map/query localisation CDF");
  std::string lc_dataset;
  std::string lc_out;
  double lc_split = 0.4;
  PolicyFlags lc_flags;
  lc->add_option("dataset", lc_dataset, "dataset directory")->required();
  lc->add_option("--split", lc_split, "fraction of frames used for the map")
      ->check(CLI::Range(0.0, 1.0));
  lc->add_option("--out", lc_out, "output directory (default DATASET)");
  lc_flags.attach(lc);

  // report
  auto* rp = app.add_subcommand("report", "gated vs vanilla deltas from a report.csv");
  std::string rp_in;
  std::string rp_out;
  rp->add_option("report", rp_in, "report.csv or a directory holding one")->required();
  rp->add_option("--out", rp_out, "output file (default next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      json cfg = json::object();
      if (!gen_config.empty()) cfg = parse_json(read_text(gen_config), gen_config);
      check_keys(cfg, {"world", "seed", "out"}, "");
      const std::string world = string_or(cfg, "world", gen_world);
      const std::string dir = string_or(cfg, "out", gen_out);
      if (world.empty()) usage("gen: --world is required");
      if (dir.empty()) usage("gen: --out is required");
      std::optional<std::uint64_t> seed = gen_seed;
      if (!seed && cfg.contains("seed")) {
        if (!cfg["seed"].is_number_unsigned()) usage("seed: expected a non-negative integer");
        seed = cfg["seed"].get<std::uint64_t>();
      }
      if (!seed) usage("gen: --seed is required");
      const WorldConfig wc = load_world(world);
      const Dataset ds = synthesize(build_world(wc), *seed);
      write_dataset(ds, dir);
      print_dataset_summary(out, ds);
      return kExitOk;
    }

    if (run->parsed()) {
      const json cfg = run_flags.config_json();
      const Dataset ds = load_dataset(run_dataset);
      PolicyParams base;
      base.seed = ds.seed;
      const PolicyParams params = run_flags.resolve(cfg, base);
      const std::string name = dataset_name_of(ds, cfg);
      const fs::path dir = string_or(cfg, "out", run_out).empty()
                               ? fs::path(run_dataset) / "run"
                               : fs::path(string_or(cfg, "out", run_out));
      const RunRecord record = run_pipeline(ds, params);
      make_dir(dir);
      json recorded = params_json(params);
      recorded["dataset_name"] = name;
      write_text(dir / "config.json", recorded.dump(2) + '\n');
      const ReportRow row = write_run(dir, name, ds, record);
      out << report_header() << '\n' << format_report_row(row) << '\n';
      return kExitOk;
    }

    if (sw->parsed()) {
      const json cfg = sw_flags.config_json();
      const Dataset ds = load_dataset(sw_dataset);
      PolicyParams base;
      base.seed = ds.seed;
      const PolicyParams params = sw_flags.resolve(cfg, base);
      const std::string grid_text = read_text(sw_grid);
      const auto cells = expand_grid(grid_text, params);
      const std::string name = dataset_name_of(ds, cfg);
      const std::string out_flag = string_or(cfg, "out", sw_out);
      const fs::path dir = out_flag.empty() ? fs::path(sw_dataset) / "sweep" : fs::path(out_flag);
      int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      if (cfg.contains("jobs")) {
        if (!cfg["jobs"].is_number_integer()) usage("jobs: expected an integer");
        jobs = cfg["jobs"].get<int>();
      }
      if (sw_jobs) jobs = *sw_jobs;
      if (jobs < 1) usage("--jobs must be at least 1");
      make_dir(dir);
      json recorded = {{"base", params_json(params)},
                       {"grid", parse_json(grid_text, sw_grid)},
                       {"dataset_name", name}};
      write_text(dir / "sweep_config.json", recorded.dump(2) + '\n');
      const auto s = sweep(ds, name, cells, dir, jobs);
      out << "cells " << cells.size() << "  computed " << s.computed << "  skipped "
          << s.skipped << "  rows " << s.rows << "\n"
          << "report " << (dir / "report.csv").string() << "\n";
      return kExitOk;
    }

    if (cv->parsed()) {
      const Dataset ds = load_dataset(cv_dataset);
      const fs::path dir = cv_out.empty() ? fs::path(cv_dataset) : fs::path(cv_out);
      const SimilarityCurve curve = similarity_distance_curve(ds);
      make_dir(dir);
      write_file(dir / "similarity_curve.csv",
                 [&](std::ostream& o) { write_similarity_curve_csv(o, curve); });
      out << "pairs " << curve.points.size() << "  spearman_rho "
          << csv::format_fixed(curve.spearman_rho, 4) << "\n";
      return kExitOk;
    }

    if (lc->parsed()) {
      const json cfg = lc_flags.config_json();
      const Dataset ds = load_dataset(lc_dataset);
      const PolicyParams params = lc_flags.resolve(cfg);
      const fs::path dir = lc_out.empty() ? fs::path(lc_dataset) : fs::path(lc_out);
      const LocalizationResult r =
          localize_dataset(ds, lc_split, params.wifi_threshold, params.gated);
      make_dir(dir);
      write_file(dir / "cdf.csv", [&](std::ostream& o) { write_cdf_csv(o, r.cdf); });
      out << "map " << r.map_count << "  queries " << r.query_count << "  fallback "
          << r.fallback_count << "\n"
          << "within_4m " << csv::format_fixed(r.cdf.fraction_within(4.0), 4) << "\n";
      return kExitOk;
    }

    if (rp->parsed()) {
      fs::path in = rp_in;
      if (fs::is_directory(in)) in /= "report.csv";
      if (!fs::is_regular_file(in)) usage("no report at " + in.string());
      const auto rows = read_report(in);
      const fs::path dst = rp_out.empty() ? in.parent_path() / "report_deltas.csv"
                                          : fs::path(rp_out);
      write_file(dst, [&](std::ostream& o) { write_report_deltas(o, rows); });
      out << "rows " << rows.size() << "  deltas " << dst.string() << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace wifislam::cli
