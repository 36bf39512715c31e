#include "wifislam/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "wifislam/error.hpp"

namespace wifislam {

namespace {

using ojson = nlohmann::ordered_json;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool segments_cross(const Point2& p, const Point2& q, const Point2& a,
                    const Point2& b) {
  const double d1 = cross(a, b, p);
  const double d2 = cross(a, b, q);
  const double d3 = cross(p, q, a);
  const double d4 = cross(p, q, b);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

double distance_to_segment(const Point2& p, const Segment2& s) {
  const Point2 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

bool same_point(const Point2& a, const Point2& b) {
  return (a - b).norm() < 1e-9;
}

// Uniform double in [0, 1) from one 64-bit draw.
double unit_draw(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

const char* to_string(Shape shape) {
  switch (shape) {
    case Shape::kSquareLoop: return "square_loop";
    case Shape::kFigureEight: return "figure_eight";
    case Shape::kNineLoop: return "nine_loop";
    case Shape::kLongTrack: return "long_track";
  }
  return "?";
}

Shape parse_shape(std::string_view name) {
  if (name == "square_loop") return Shape::kSquareLoop;
  if (name == "figure_eight") return Shape::kFigureEight;
  if (name == "nine_loop") return Shape::kNineLoop;
  if (name == "long_track") return Shape::kLongTrack;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown shape '" + std::string(name) +
                  "' (square_loop, figure_eight, nine_loop, long_track)");
}

std::vector<Point2> shape_waypoints(Shape shape, double s) {
  if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "scale must be positive");
  switch (shape) {
    case Shape::kSquareLoop:
      return {{0, 0}, {s, 0}, {s, s}, {0, s}, {0, 0}};
    case Shape::kFigureEight: {
      const double a = s;
      const double b = s / 2.0;
      return {{0, -b}, {0, a}, {-a, a}, {-a, 0}, {b, 0}, {b, -b}, {0, -b}};
    }
    case Shape::kNineLoop: {
      // Tail, then a loop on top of it, then back down the tail.
      const double w = s;
      const double h = s / 2.0;
      return {{0, -s}, {0, 0}, {0, h}, {-w, h}, {-w, 0}, {0, 0}, {0, -s}};
    }
    case Shape::kLongTrack:
      return {{0, 0}, {3 * s, 0}, {3 * s, s / 2.0}, {0, s / 2.0}, {0, 0}};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown shape");
}

namespace {

struct Polyline {
  std::vector<Point2> pts;
  std::vector<double> cum;  // arc length at each waypoint

  explicit Polyline(std::vector<Point2> p) : pts(std::move(p)) {
    cum.push_back(0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
    }
  }
  double length() const { return cum.back(); }

  Pose2 at(double s) const {
    s = std::clamp(s, 0.0, length());
    std::size_t k = 1;
    while (k + 1 < pts.size() && s >= cum[k]) ++k;
    const Point2 d = pts[k] - pts[k - 1];
    const double len = cum[k] - cum[k - 1];
    const Point2 p = pts[k - 1] + d * ((s - cum[k - 1]) / len);
    return make_pose(p.x(), p.y(), std::atan2(d.y(), d.x()));
  }
};

void validate(const TrajectorySpec& spec) {
  if (!(spec.scale > 0 && spec.speed > 0 && spec.pause_every > 0 &&
        spec.pause_duration >= 0 && spec.frame_rate_hz > 0 &&
        spec.scans_per_dwell > 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "trajectory magnitudes must be positive");
  }
}

}  // namespace

Trajectory generate_trajectory(const TrajectorySpec& spec) {
  validate(spec);
  Trajectory traj;
  const Polyline line(shape_waypoints(spec.shape, spec.scale));
  traj.waypoints = line.pts;
  traj.length = line.length();

  const int n_dwells =
      static_cast<int>(std::floor(traj.length / spec.pause_every + 1e-9));
  for (int k = 0; k < n_dwells; ++k) {
    const double arc = spec.pause_every * (k + 1);
    DwellMarker d;
    d.index = k;
    d.t_start = arc / spec.speed + k * spec.pause_duration;
    d.t_end = d.t_start + spec.pause_duration;
    d.position = line.at(arc).translation();
    traj.dwells.push_back(d);
  }
  traj.duration =
      traj.length / spec.speed + n_dwells * spec.pause_duration;

  auto arc_at = [&](double t) {
    double paused = 0.0;
    for (const auto& d : traj.dwells) {
      paused += std::clamp(t - d.t_start, 0.0, spec.pause_duration);
    }
    return spec.speed * (t - paused);
  };
  auto in_dwell = [&](double t) {
    return std::any_of(traj.dwells.begin(), traj.dwells.end(),
                       [t](const DwellMarker& d) {
                         return t > d.t_start && t <= d.t_end;
                       });
  };

  const double dt = 1.0 / spec.frame_rate_hz;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t > traj.duration + 1e-9) break;
    if (in_dwell(t)) continue;
    traj.samples.push_back({t, line.at(arc_at(t))});
  }
  if (traj.samples.empty() ||
      traj.samples.back().t < traj.duration - 1e-9) {
    traj.samples.push_back({traj.duration, line.at(traj.length)});
  }
  return traj;
}

int wall_crossings(const FloorPlan& plan, const Point2& p, const Point2& q) {
  int n = 0;
  for (const auto& w : plan.walls) {
    if (segments_cross(p, q, w.a, w.b)) ++n;
  }
  return n;
}

double mean_rssi(const AccessPoint& ap, const Point2& pos, const FloorPlan& plan,
                 const PropagationParams& params) {
  const double d = std::max((pos - ap.position).norm(), 1.0);
  return ap.tx_power_at_1m - 10.0 * params.path_loss_exponent * std::log10(d) -
         params.wall_loss_db * wall_crossings(plan, ap.position, pos);
}

std::optional<double> rssi_at(const AccessPoint& ap, const Point2& pos,
                              const FloorPlan& plan,
                              const PropagationParams& params,
                              std::mt19937_64& rng) {
  double p = mean_rssi(ap, pos, plan, params);
  if (params.noise_sigma_db > 0.0) {
    p += std::normal_distribution<double>(0.0, params.noise_sigma_db)(rng);
  }
  if (p < params.visibility_floor_dbm) return std::nullopt;
  return p;
}

// ---------------------------------------------------------------- appearance

AppearanceModel::AppearanceModel(std::vector<Region> regions,
                                 AppearanceParams params)
    : regions_(std::move(regions)), params_(params) {
  if (params_.words_per_cell <= 0 || params_.cell_spacing <= 0 ||
      params_.view_radius <= 0 || params_.generic_vocab < 0 ||
      params_.generic_words < 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad appearance parameters");
  }
  for (const auto& r : regions_) {
    cells_per_region_ = std::max(
        cells_per_region_,
        static_cast<int>(std::ceil(r.length / params_.cell_spacing - 1e-9)));
    templates_ = std::max(templates_, r.template_id + 1);
  }
  template_users_.assign(static_cast<std::size_t>(templates_), 0);
  for (const auto& r : regions_) ++template_users_[static_cast<std::size_t>(r.template_id)];
}

Point2 AppearanceModel::cell_centre(const Region& r, int cell) const {
  return transform_point(r.frame,
                         Point2((cell + 0.5) * params_.cell_spacing, 0.0));
}

bool AppearanceModel::slot_is_shared(int template_id, int cell, int slot) const {
  if (template_users_[static_cast<std::size_t>(template_id)] < 2) return true;
  const std::uint64_t key = mix_seed(
      mix_seed(params_.layout_seed, static_cast<std::uint64_t>(template_id)),
      static_cast<std::uint64_t>(cell) * 1024u + static_cast<std::uint64_t>(slot));
  return unit_draw(key) < params_.alias_share;
}

WordId AppearanceModel::word_for(const Region& r, int cell, int slot) const {
  const int k = params_.words_per_cell;
  const int m = cells_per_region_;
  if (slot_is_shared(r.template_id, cell, slot)) {
    return params_.generic_vocab + (r.template_id * m + cell) * k + slot;
  }
  return params_.generic_vocab + templates_ * m * k + (r.id * m + cell) * k +
         slot;
}

Appearance AppearanceModel::sample(const Pose2& pose, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<WordId> words;
  const Point2 p = pose.translation();
  for (const auto& r : regions_) {
    const int cells =
        static_cast<int>(std::ceil(r.length / params_.cell_spacing - 1e-9));
    for (int c = 0; c < cells; ++c) {
      if ((cell_centre(r, c) - p).norm() > params_.view_radius) continue;
      for (int s = 0; s < params_.words_per_cell; ++s) {
        if (unit(rng) < params_.keep_probability) words.push_back(word_for(r, c, s));
      }
    }
  }
  if (params_.generic_vocab > 0) {
    std::uniform_int_distribution<WordId> generic(0, params_.generic_vocab - 1);
    for (int g = 0; g < params_.generic_words; ++g) words.push_back(generic(rng));
  }
  return annotate(pose, std::move(words));
}

Appearance AppearanceModel::annotate(const Pose2& pose,
                                     std::vector<WordId> words) const {
  std::sort(words.begin(), words.end());
  Appearance app;
  app.sources.reserve(words.size());
  const int k = params_.words_per_cell;
  const int m = std::max(cells_per_region_, 1);
  const int variant_base = params_.generic_vocab + templates_ * m * k;
  const Point2 p = pose.translation();
  for (const WordId w : words) {
    std::int32_t source = -1;
    if (w >= params_.generic_vocab && w < variant_base) {
      const int local = w - params_.generic_vocab;
      const int tmpl = local / (m * k);
      const int cell = (local / k) % m;
      // The nearest region of that template whose cell produced the word.
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : regions_) {
        if (r.template_id != tmpl) continue;
        const double d = (cell_centre(r, cell) - p).norm();
        if (d < best) {
          best = d;
          source = r.id;
        }
      }
    } else if (w >= variant_base) {
      source = (w - variant_base) / (m * k);
    }
    app.sources.push_back(source);
  }
  app.words = std::move(words);

  // Place template: the region whose nearest cell is closest to the pose.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : regions_) {
    const Segment2 seg{r.frame.translation(),
                       transform_point(r.frame, Point2(r.length, 0.0))};
    const double d = distance_to_segment(p, seg);
    if (d < best) {
      best = d;
      app.place_template = r.template_id;
    }
  }
  return app;
}

SceneFrames AppearanceModel::scene() const {
  SceneFrames s;
  for (const auto& r : regions_) s.region_frames.push_back(r.frame);
  return s;
}

// ---------------------------------------------------------------- world

std::vector<Segment2> corridor_segments(std::span<const Point2> waypoints) {
  std::vector<Segment2> out;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Point2& p = waypoints[i - 1];
    const Point2& q = waypoints[i];
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Segment2& s) {
      return (same_point(s.a, p) && same_point(s.b, q)) ||
             (same_point(s.a, q) && same_point(s.b, p));
    });
    if (!seen) out.push_back({p, q});
  }
  return out;
}

namespace {

std::vector<Segment2> build_walls(const std::vector<Segment2>& corridors,
                                  const WallLayout& layout) {
  const double half = layout.corridor_half_width;
  auto open = [&](const Point2& p) {
    return std::any_of(corridors.begin(), corridors.end(), [&](const Segment2& s) {
      return distance_to_segment(p, s) < half - 1e-6;
    });
  };
  std::vector<Segment2> walls;
  for (const auto& c : corridors) {
    const double len = (c.b - c.a).norm();
    const Point2 u = (c.b - c.a) / len;
    const Point2 n(-u.y(), u.x());
    for (const double side : {1.0, -1.0}) {
      if (layout.side_walls) {
        // 1 m pieces; pieces inside another corridor are doorways.
        std::optional<Segment2> run;
        const int pieces = static_cast<int>(std::ceil(len + 2 * half));
        for (int i = 0; i < pieces; ++i) {
          const double s0 = -half + i;
          const double s1 = std::min(s0 + 1.0, len + half);
          const Point2 p0 = c.a + u * s0 + side * n * half;
          const Point2 p1 = c.a + u * s1 + side * n * half;
          if (open((p0 + p1) / 2.0)) {
            if (run) walls.push_back(*run);
            run.reset();
          } else if (run) {
            run->b = p1;
          } else {
            run = Segment2{p0, p1};
          }
        }
        if (run) walls.push_back(*run);
      }
      if (layout.partitions && layout.room_width > 0) {
        for (double s = layout.room_width; s < len - 1e-9; s += layout.room_width) {
          const Point2 p0 = c.a + u * s + side * n * half;
          const Point2 p1 = p0 + side * n * layout.room_depth;
          bool clear = true;
          for (int k = 1; k <= 6 && clear; ++k) {
            if (open(p0 + (p1 - p0) * (k / 6.0))) clear = false;
          }
          if (clear) walls.push_back({p0, p1});
        }
      }
    }
  }
  return walls;
}

}  // namespace

World build_world(const WorldConfig& config) {
  validate(config.trajectory);
  if (config.n_aps <= 0) throw Error(ErrorCode::kInvalidArgument, "n_aps must be positive");
  if (!(config.propagation.path_loss_exponent > 0 &&
        config.propagation.wall_loss_db >= 0 &&
        config.propagation.noise_sigma_db >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad propagation parameters");
  }
  World world;
  world.config = config;
  const auto waypoints =
      shape_waypoints(config.trajectory.shape, config.trajectory.scale);
  world.corridors = corridor_segments(waypoints);
  world.plan.walls = build_walls(world.corridors, config.walls);

  if (!config.corridor_templates.empty() &&
      config.corridor_templates.size() != world.corridors.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "corridor_templates needs one entry per corridor (" +
                    std::to_string(world.corridors.size()) + ")");
  }
  std::vector<Region> regions;
  std::vector<double> lengths;
  for (std::size_t i = 0; i < world.corridors.size(); ++i) {
    const auto& c = world.corridors[i];
    const Point2 d = c.b - c.a;
    Region r;
    r.id = static_cast<int>(i);
    r.frame = make_pose(c.a.x(), c.a.y(), std::atan2(d.y(), d.x()));
    r.length = d.norm();
    r.template_id = config.corridor_templates.empty()
                        ? static_cast<int>(i)
                        : config.corridor_templates[i];
    if (r.template_id < 0) throw Error(ErrorCode::kInvalidArgument, "negative template id");
    regions.push_back(r);
    lengths.push_back(r.length);
  }
  world.appearance = AppearanceModel(std::move(regions), config.appearance);

  // Access points sit in the rooms beside the corridors.
  std::mt19937_64 layout(config.layout_seed);
  std::discrete_distribution<std::size_t> pick(lengths.begin(), lengths.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < config.n_aps; ++i) {
    const auto& c = world.corridors[pick(layout)];
    const double len = (c.b - c.a).norm();
    const Point2 u = (c.b - c.a) / len;
    const Point2 n(-u.y(), u.x());
    const double along = unit(layout) * len;
    const double side = unit(layout) < 0.5 ? -1.0 : 1.0;
    const double off = config.ap_offset_min +
                       unit(layout) * (config.ap_offset_max - config.ap_offset_min);
    AccessPoint ap;
    ap.id = ApId::from_masked(0x020000000000ULL +
                              (static_cast<std::uint64_t>(i + 1) << 4));
    ap.position = c.a + u * along + n * side * off;
    world.aps.push_back(ap);
  }

  Point2 lo = waypoints.front();
  Point2 hi = waypoints.front();
  auto grow = [&](const Point2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& p : waypoints) grow(p);
  for (const auto& w : world.plan.walls) {
    grow(w.a);
    grow(w.b);
  }
  for (const auto& ap : world.aps) grow(ap.position);
  world.plan.lo = lo - Point2(1.0, 1.0);
  world.plan.hi = hi + Point2(1.0, 1.0);
  return world;
}

std::vector<std::pair<KeyframeId, KeyframeId>> ground_truth_loops(
    std::span<const DatasetFrame> frames, double separation_m, double min_gap_s) {
  std::vector<std::pair<KeyframeId, KeyframeId>> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = i + 1; j < frames.size(); ++j) {
      if (std::abs(frames[j].t - frames[i].t) <= min_gap_s) continue;
      const double d =
          (frames[i].gt.translation() - frames[j].gt.translation()).norm();
      if (d < separation_m) {
        out.emplace_back(std::min(frames[i].id, frames[j].id),
                         std::max(frames[i].id, frames[j].id));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dataset synthesize(const World& world, std::uint64_t seed) {
  Dataset ds;
  ds.world = world;
  ds.seed = seed;
  const auto& cfg = world.config;
  const Trajectory traj = generate_trajectory(cfg.trajectory);
  ds.dwells = traj.dwells;

  // Independent streams so that, e.g., radio noise does not shift odometry.
  std::mt19937_64 radio_rng(mix_seed(seed, 1));
  std::mt19937_64 odom_rng(mix_seed(seed, 2));
  std::mt19937_64 look_rng(mix_seed(seed, 3));
  std::normal_distribution<double> odom_gauss(0.0, 1.0);
  std::normal_distribution<double> radio_gauss(0.0, 1.0);

  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    DatasetFrame f;
    f.id = static_cast<KeyframeId>(i);
    f.t = traj.samples[i].t;
    f.gt = traj.samples[i].pose;
    if (i > 0) {
      const Pose2 truth = between(traj.samples[i - 1].pose, f.gt);
      const double d = std::hypot(truth.x, truth.y);
      const double sxy = cfg.odometry.sigma_xy * std::sqrt(d);
      const double sth = cfg.odometry.sigma_theta * std::sqrt(d);
      const double nx = odom_gauss(odom_rng);
      const double ny = odom_gauss(odom_rng);
      const double nt = odom_gauss(odom_rng);
      f.odom_delta = make_pose(truth.x + sxy * nx, truth.y + sxy * ny,
                               truth.theta + cfg.odometry.bias_theta * d + sth * nt);
    }
    f.appearance = world.appearance.sample(f.gt, look_rng);
    ds.frames.push_back(std::move(f));
  }

  const auto& spec = cfg.trajectory;
  for (const auto& d : traj.dwells) {
    std::vector<int> crossings;
    crossings.reserve(world.aps.size());
    for (const auto& ap : world.aps) {
      crossings.push_back(wall_crossings(world.plan, ap.position, d.position));
    }
    for (int s = 0; s < spec.scans_per_dwell; ++s) {
      const double t = d.t_start + (s + 0.5) * spec.pause_duration /
                                       spec.scans_per_dwell;
      for (std::size_t a = 0; a < world.aps.size(); ++a) {
        const auto& ap = world.aps[a];
        const double dist = std::max((d.position - ap.position).norm(), 1.0);
        const double mean = ap.tx_power_at_1m -
                            10.0 * cfg.propagation.path_loss_exponent *
                                std::log10(dist) -
                            cfg.propagation.wall_loss_db * crossings[a];
        for (int r = 0; r < ap.radios; ++r) {
          const double p = mean + cfg.propagation.noise_sigma_db * radio_gauss(radio_rng);
          if (p < cfg.propagation.visibility_floor_dbm) continue;
          ds.scans.push_back({t, Bssid{ap.id.bits() | static_cast<std::uint64_t>(r)},
                              p});
          ds.scan_dwell.push_back(d.index);
        }
      }
    }
  }

  ds.gt_loop_pairs =
      ground_truth_loops(ds.frames, cfg.loop_separation_m, cfg.loop_min_gap_s);
  return ds;
}

// ---------------------------------------------------------------- presets

std::vector<std::string> preset_names() {
  return {"a_hall", "b_hall", "c_hall", "j_hall"};
}

std::map<std::string, WorldConfig> preset_worlds() {
  std::map<std::string, WorldConfig> out;

  WorldConfig c;
  c.name = "c_hall";
  c.trajectory.shape = Shape::kSquareLoop;
  c.trajectory.scale = 20.0;
  c.n_aps = 35;
  c.walls.room_width = 4.0;
  c.corridor_templates = {0, 1, 0, 2};  // south and north look alike
  out[c.name] = c;

  WorldConfig b;
  b.name = "b_hall";
  b.trajectory.shape = Shape::kFigureEight;
  b.trajectory.scale = 20.0;
  b.n_aps = 40;
  b.walls.room_width = 4.0;
  b.corridor_templates = {0, 1, 2, 3, 2, 1};  // top/bottom, left/right
  out[b.name] = b;

  WorldConfig j;
  j.name = "j_hall";
  j.trajectory.shape = Shape::kNineLoop;
  j.trajectory.scale = 30.0;
  j.n_aps = 70;
  j.walls.room_width = 3.0;
  j.propagation.wall_loss_db = 7.0;
  j.odometry = {0.01, 0.005, 0.002};  // long loop with a drifting heading
  out[j.name] = j;

  WorldConfig a;
  a.name = "a_hall";
  a.trajectory.shape = Shape::kLongTrack;
  a.trajectory.scale = 20.0;
  a.n_aps = 45;
  a.walls.side_walls = false;
  a.walls.room_width = 15.0;
  a.propagation.path_loss_exponent = 3.5;
  out[a.name] = a;

  return out;
}

WorldConfig preset_world(const std::string& name) {
  const auto presets = preset_worlds();
  const auto it = presets.find(name);
  if (it == presets.end()) {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::kInvalidArgument,
                "unknown world '" + name + "'; valid presets: " + valid);
  }
  return it->second;
}

// ---------------------------------------------------------------- json

namespace {

ojson config_json(const WorldConfig& c) {
  ojson j;
  j["name"] = c.name;
  j["trajectory"] = {
      {"shape", to_string(c.trajectory.shape)},
      {"scale", c.trajectory.scale},
      {"speed", c.trajectory.speed},
      {"pause_every", c.trajectory.pause_every},
      {"pause_duration", c.trajectory.pause_duration},
      {"frame_rate_hz", c.trajectory.frame_rate_hz},
      {"scans_per_dwell", c.trajectory.scans_per_dwell}};
  j["n_aps"] = c.n_aps;
  j["ap_offset_min"] = c.ap_offset_min;
  j["ap_offset_max"] = c.ap_offset_max;
  j["layout_seed"] = c.layout_seed;
  j["walls"] = {{"side_walls", c.walls.side_walls},
                {"corridor_half_width", c.walls.corridor_half_width},
                {"partitions", c.walls.partitions},
                {"room_width", c.walls.room_width},
                {"room_depth", c.walls.room_depth}};
  j["propagation"] = {
      {"path_loss_exponent", c.propagation.path_loss_exponent},
      {"wall_loss_db", c.propagation.wall_loss_db},
      {"noise_sigma_db", c.propagation.noise_sigma_db},
      {"visibility_floor_dbm", c.propagation.visibility_floor_dbm}};
  j["appearance"] = {{"alias_share", c.appearance.alias_share},
                     {"words_per_cell", c.appearance.words_per_cell},
                     {"cell_spacing", c.appearance.cell_spacing},
                     {"view_radius", c.appearance.view_radius},
                     {"keep_probability", c.appearance.keep_probability},
                     {"generic_words", c.appearance.generic_words},
                     {"generic_vocab", c.appearance.generic_vocab},
                     {"layout_seed", c.appearance.layout_seed}};
  j["corridor_templates"] = c.corridor_templates;
  j["odometry"] = {{"sigma_xy", c.odometry.sigma_xy},
                   {"sigma_theta", c.odometry.sigma_theta},
                   {"bias_theta", c.odometry.bias_theta}};
  j["loop_separation_m"] = c.loop_separation_m;
  j["loop_min_gap_s"] = c.loop_min_gap_s;
  return j;
}

template <typename T>
void take(const ojson& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

WorldConfig config_from(const ojson& j) {
  WorldConfig c;
  if (j.contains("preset")) c = preset_world(j.at("preset").get<std::string>());
  take(j, "name", c.name);
  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    if (t.contains("shape")) c.trajectory.shape = parse_shape(t.at("shape").get<std::string>());
    take(t, "scale", c.trajectory.scale);
    take(t, "speed", c.trajectory.speed);
    take(t, "pause_every", c.trajectory.pause_every);
    take(t, "pause_duration", c.trajectory.pause_duration);
    take(t, "frame_rate_hz", c.trajectory.frame_rate_hz);
    take(t, "scans_per_dwell", c.trajectory.scans_per_dwell);
  }
  take(j, "n_aps", c.n_aps);
  take(j, "ap_offset_min", c.ap_offset_min);
  take(j, "ap_offset_max", c.ap_offset_max);
  take(j, "layout_seed", c.layout_seed);
  if (j.contains("walls")) {
    const auto& w = j.at("walls");
    take(w, "side_walls", c.walls.side_walls);
    take(w, "corridor_half_width", c.walls.corridor_half_width);
    take(w, "partitions", c.walls.partitions);
    take(w, "room_width", c.walls.room_width);
    take(w, "room_depth", c.walls.room_depth);
  }
  if (j.contains("propagation")) {
    const auto& p = j.at("propagation");
    take(p, "path_loss_exponent", c.propagation.path_loss_exponent);
    take(p, "wall_loss_db", c.propagation.wall_loss_db);
    take(p, "noise_sigma_db", c.propagation.noise_sigma_db);
    take(p, "visibility_floor_dbm", c.propagation.visibility_floor_dbm);
  }
  if (j.contains("appearance")) {
    const auto& a = j.at("appearance");
    take(a, "alias_share", c.appearance.alias_share);
    take(a, "words_per_cell", c.appearance.words_per_cell);
    take(a, "cell_spacing", c.appearance.cell_spacing);
    take(a, "view_radius", c.appearance.view_radius);
    take(a, "keep_probability", c.appearance.keep_probability);
    take(a, "generic_words", c.appearance.generic_words);
    take(a, "generic_vocab", c.appearance.generic_vocab);
    take(a, "layout_seed", c.appearance.layout_seed);
  }
  take(j, "corridor_templates", c.corridor_templates);
  if (j.contains("odometry")) {
    take(j.at("odometry"), "sigma_xy", c.odometry.sigma_xy);
    take(j.at("odometry"), "sigma_theta", c.odometry.sigma_theta);
    take(j.at("odometry"), "bias_theta", c.odometry.bias_theta);
  }
  take(j, "loop_separation_m", c.loop_separation_m);
  take(j, "loop_min_gap_s", c.loop_min_gap_s);
  return c;
}

ojson point_json(const Point2& p) { return ojson::array({p.x(), p.y()}); }

Point2 point_from(const ojson& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

std::string world_config_to_json(const WorldConfig& config) {
  return config_json(config).dump(2);
}

WorldConfig world_config_from_json(const std::string& text) {
  try {
    const auto j = ojson::parse(text);
    return config_from(j.contains("config") ? j.at("config") : j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("world config: ") + e.what());
  }
}

// ---------------------------------------------------------------- dataset io

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + p.string());
  return in;
}

constexpr const char* kFramesHeader =
    "id,t_s,gt_x,gt_y,gt_theta,odo_dx,odo_dy,odo_dtheta,template_id,words";

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  using csv::format_double;
  {
    auto out = open_out(dir / "frames.csv");
    out << kFramesHeader << '\n';
    for (const auto& f : ds.frames) {
      out << f.id << ',' << format_double(f.t) << ',' << format_double(f.gt.x)
          << ',' << format_double(f.gt.y) << ',' << format_double(f.gt.theta)
          << ',' << format_double(f.odom_delta.x) << ','
          << format_double(f.odom_delta.y) << ','
          << format_double(f.odom_delta.theta) << ','
          << f.appearance.place_template << ',';
      for (std::size_t i = 0; i < f.appearance.words.size(); ++i) {
        if (i > 0) out << '|';
        out << f.appearance.words[i];
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "scans.csv");
    write_scan_log(out, ds.scans, ds.scan_dwell);
  }
  {
    auto out = open_out(dir / "loops_gt.csv");
    out << "id_a,id_b\n";
    for (const auto& [a, b] : ds.gt_loop_pairs) out << a << ',' << b << '\n';
  }
  {
    ojson j;
    j["seed"] = ds.seed;
    j["config"] = config_json(ds.world.config);
    ojson walls = ojson::array();
    for (const auto& w : ds.world.plan.walls) {
      walls.push_back(ojson::array({point_json(w.a), point_json(w.b)}));
    }
    j["plan"] = {{"bounds", {point_json(ds.world.plan.lo), point_json(ds.world.plan.hi)}},
                 {"walls", walls}};
    ojson aps = ojson::array();
    for (const auto& ap : ds.world.aps) {
      aps.push_back({{"id", to_string(ap.id)},
                     {"position", point_json(ap.position)},
                     {"tx_power_at_1m", ap.tx_power_at_1m},
                     {"radios", ap.radios}});
    }
    j["aps"] = aps;
    ojson regions = ojson::array();
    for (const auto& r : ds.world.appearance.regions()) {
      regions.push_back({{"id", r.id},
                         {"origin", {r.frame.x, r.frame.y, r.frame.theta}},
                         {"length", r.length},
                         {"template_id", r.template_id}});
    }
    j["regions"] = regions;
    ojson dwells = ojson::array();
    for (const auto& d : ds.dwells) {
      dwells.push_back({{"index", d.index},
                        {"x", d.position.x()},
                        {"y", d.position.y()},
                        {"t_start", d.t_start},
                        {"t_end", d.t_end}});
    }
    j["dwells"] = dwells;
    auto out = open_out(dir / "world.json");
    out << j.dump(2) << '\n';
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ojson j;
  {
    auto in = open_in(dir / "world.json");
    try {
      j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kBadDataset, std::string("world.json: ") + e.what());
    }
  }
  try {
    ds.seed = j.value("seed", std::uint64_t{0});
    ds.world = build_world(config_from(j.contains("config") ? j.at("config") : j));
    if (j.contains("plan")) {
      ds.world.plan.walls.clear();
      for (const auto& w : j.at("plan").at("walls")) {
        ds.world.plan.walls.push_back({point_from(w.at(0)), point_from(w.at(1))});
      }
    }
    if (j.contains("aps")) {
      ds.world.aps.clear();
      for (const auto& a : j.at("aps")) {
        AccessPoint ap;
        ap.id = mask_bssid(parse_bssid(a.at("id").get<std::string>()));
        ap.position = point_from(a.at("position"));
        ap.tx_power_at_1m = a.value("tx_power_at_1m", -30.0);
        ap.radios = a.value("radios", 2);
        ds.world.aps.push_back(ap);
      }
    }
    if (j.contains("dwells")) {
      for (const auto& d : j.at("dwells")) {
        ds.dwells.push_back({d.at("index").get<int>(), d.at("t_start").get<double>(),
                             d.at("t_end").get<double>(),
                             Point2(d.at("x").get<double>(), d.at("y").get<double>())});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadDataset, std::string("world.json: ") + e.what());
  }

  {
    auto in = open_in(dir / "frames.csv");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto row = csv::trim(line);
      if (line_no == 1) {
        if (row != kFramesHeader) {
          throw Error(ErrorCode::kBadDataset, "frames.csv: unexpected header");
        }
        continue;
      }
      if (row.empty()) continue;
      const std::string where =
          "frames.csv frame index " + std::to_string(ds.frames.size());
      const auto cols = csv::split(row);
      if (cols.size() != 10) {
        throw Error(ErrorCode::kBadDataset, where + ": expected 10 columns");
      }
      try {
        DatasetFrame f;
        f.id = csv::parse_int(cols[0], where);
        f.t = csv::parse_double(cols[1], where);
        f.gt = make_pose(csv::parse_double(cols[2], where),
                         csv::parse_double(cols[3], where),
                         csv::parse_double(cols[4], where));
        f.odom_delta = make_pose(csv::parse_double(cols[5], where),
                                 csv::parse_double(cols[6], where),
                                 csv::parse_double(cols[7], where));
        std::vector<WordId> words;
        if (!csv::trim(cols[9]).empty()) {
          for (const auto tok : csv::split(cols[9], '|')) {
            words.push_back(static_cast<WordId>(csv::parse_int(tok, where)));
          }
        }
        if (words.empty()) {
          throw Error(ErrorCode::kBadDataset, where + ": frame has no words");
        }
        f.appearance = ds.world.appearance.annotate(f.gt, std::move(words));
        f.appearance.place_template =
            static_cast<std::int32_t>(csv::parse_int(cols[8], where));
        if (!ds.frames.empty()) {
          if (f.id <= ds.frames.back().id) {
            throw Error(ErrorCode::kBadDataset, where + ": ids must increase");
          }
          if (f.t < ds.frames.back().t) {
            throw Error(ErrorCode::kBadDataset, where + ": timestamps must not decrease");
          }
        }
        ds.frames.push_back(std::move(f));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kBadDataset) throw;
        throw Error(ErrorCode::kBadDataset, e.what());
      }
    }
  }
  {
    auto in = open_in(dir / "scans.csv");
    try {
      auto log = read_scan_log(in);
      ds.scans = std::move(log.readings);
      ds.scan_dwell = log.dwell_index.empty() ? split_dwells(ds.scans, 5.0)
                                              : std::move(log.dwell_index);
    } catch (const Error& e) {
      throw Error(ErrorCode::kBadDataset, std::string("scans.csv: ") + e.what());
    }
  }
  {
    auto in = open_in(dir / "loops_gt.csv");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 || csv::trim(line).empty()) continue;
      const std::string where = "loops_gt.csv line " + std::to_string(line_no);
      const auto cols = csv::split(csv::trim(line));
      if (cols.size() != 2) throw Error(ErrorCode::kBadDataset, where + ": expected 2 columns");
      try {
        const KeyframeId a = csv::parse_int(cols[0], where);
        const KeyframeId b = csv::parse_int(cols[1], where);
        ds.gt_loop_pairs.emplace_back(std::min(a, b), std::max(a, b));
      } catch (const Error& e) {
        throw Error(ErrorCode::kBadDataset, e.what());
      }
    }
  }
  return ds;
}

}  // namespace wifislam
