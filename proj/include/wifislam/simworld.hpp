#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wifislam/frontend.hpp"
#include "wifislam/posegraph.hpp"
#include "wifislam/signature.hpp"
#include "wifislam/types.hpp"

namespace wifislam {

struct Segment2 {
  Point2 a = Point2::Zero();
  Point2 b = Point2::Zero();
};

struct FloorPlan {
  std::vector<Segment2> walls;
  Point2 lo = Point2::Zero();  // bounds
  Point2 hi = Point2::Zero();
};

struct AccessPoint {
  ApId id;
  Point2 position = Point2::Zero();
  double tx_power_at_1m = -30.0;
  int radios = 2;  // BSSIDs advertised, differing in the low nibble
};

struct PropagationParams {
  double path_loss_exponent = 3.0;
  double wall_loss_db = 5.0;
  double noise_sigma_db = 2.0;
  double visibility_floor_dbm = -95.0;
};

enum class Shape { kSquareLoop, kFigureEight, kNineLoop, kLongTrack };

const char* to_string(Shape shape);
Shape parse_shape(std::string_view name);

struct TrajectorySpec {
  Shape shape = Shape::kSquareLoop;
  double scale = 20.0;          // metres
  double speed = 0.5;           // m/s while moving
  double pause_every = 3.5;     // metres of arc between dwells
  double pause_duration = 10.0; // seconds
  double frame_rate_hz = 2.0;
  int scans_per_dwell = 5;
};

struct DwellMarker {
  int index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  Point2 position = Point2::Zero();
};

struct TrajectorySample {
  double t = 0.0;
  Pose2 pose;
};

struct Trajectory {
  std::vector<Point2> waypoints;
  double length = 0.0;
  std::vector<TrajectorySample> samples;  // frames; none strictly inside a dwell
  std::vector<DwellMarker> dwells;
  double duration = 0.0;
};

/// Closed or out-and-back polyline for `shape` at `scale`.
std::vector<Point2> shape_waypoints(Shape shape, double scale);

Trajectory generate_trajectory(const TrajectorySpec& spec);

/// Proper crossings between segment p->q and the plan's walls.
int wall_crossings(const FloorPlan& plan, const Point2& p, const Point2& q);

/// Noise-free received power in dBm (may fall below the floor).
double mean_rssi(const AccessPoint& ap, const Point2& pos, const FloorPlan& plan,
                 const PropagationParams& params);

/// Log-distance path loss with wall attenuation and Gaussian noise; empty
/// when the result falls below the visibility floor.
std::optional<double> rssi_at(const AccessPoint& ap, const Point2& pos,
                              const FloorPlan& plan,
                              const PropagationParams& params,
                              std::mt19937_64& rng);

/// A straight corridor seen as an appearance region. Regions sharing a
/// template look alike at equal template-local coordinates.
struct Region {
  int id = 0;
  Pose2 frame;  // origin at the corridor start, x along the corridor
  double length = 0.0;
  int template_id = 0;
};

struct AppearanceParams {
  double alias_share = 0.5;  // fraction of cell words shared between aliases
  int words_per_cell = 10;
  double cell_spacing = 1.0;
  double view_radius = 2.0;
  double keep_probability = 0.9;  // per frame jitter
  int generic_words = 3;
  int generic_vocab = 30;
  std::uint64_t layout_seed = 777;
};

/// Deterministic word layout over the regions plus per-frame sampling.
class AppearanceModel {
 public:
  AppearanceModel() = default;
  AppearanceModel(std::vector<Region> regions, AppearanceParams params);

  const std::vector<Region>& regions() const noexcept { return regions_; }
  const AppearanceParams& params() const noexcept { return params_; }
  int cells_per_region() const noexcept { return cells_per_region_; }
  int template_count() const noexcept { return templates_; }

  /// Words seen from `pose`, jittered and with generic clutter.
  Appearance sample(const Pose2& pose, std::mt19937_64& rng) const;

  /// Recovers source regions and place template for `words` observed at
  /// `pose`. Used both when sampling and when loading a stored dataset.
  Appearance annotate(const Pose2& pose, std::vector<WordId> words) const;

  SceneFrames scene() const;

 private:
  Point2 cell_centre(const Region& r, int cell) const;
  bool slot_is_shared(int template_id, int cell, int slot) const;
  WordId word_for(const Region& r, int cell, int slot) const;

  std::vector<Region> regions_;
  AppearanceParams params_;
  int cells_per_region_ = 0;
  int templates_ = 0;
  std::vector<int> template_users_;
};

struct OdometryNoise {
  double sigma_xy = 0.01;     // metres per sqrt(metre)
  double sigma_theta = 0.002; // radians per sqrt(metre)
  double bias_theta = 0.0;    // systematic heading drift, radians per metre
};

struct WallLayout {
  bool side_walls = true;
  double corridor_half_width = 1.25;
  bool partitions = true;
  double room_width = 4.0;
  double room_depth = 6.0;
};

struct WorldConfig {
  std::string name = "custom";
  TrajectorySpec trajectory;
  int n_aps = 35;
  double ap_offset_min = 2.0;
  double ap_offset_max = 7.0;
  std::uint64_t layout_seed = 12345;
  WallLayout walls;
  PropagationParams propagation;
  AppearanceParams appearance;
  // Template per corridor, in traversal order of first visit. Empty means
  // every corridor has its own template.
  std::vector<int> corridor_templates;
  OdometryNoise odometry;
  double loop_separation_m = 2.0;
  double loop_min_gap_s = 30.0;
};

struct World {
  WorldConfig config;
  std::vector<Segment2> corridors;
  FloorPlan plan;
  std::vector<AccessPoint> aps;
  AppearanceModel appearance;
};

/// Deduplicated straight pieces of the waypoint polyline.
std::vector<Segment2> corridor_segments(std::span<const Point2> waypoints);

World build_world(const WorldConfig& config);

struct DatasetFrame {
  KeyframeId id = 0;
  double t = 0.0;
  Pose2 gt;
  Pose2 odom_delta;  // measured motion since the previous frame
  Appearance appearance;
};

struct Dataset {
  World world;
  std::uint64_t seed = 0;
  std::vector<DatasetFrame> frames;
  std::vector<ScanReading> scans;
  std::vector<int> scan_dwell;
  std::vector<DwellMarker> dwells;
  std::vector<std::pair<KeyframeId, KeyframeId>> gt_loop_pairs;  // a < b

  SceneFrames scene() const { return world.appearance.scene(); }
};

Dataset synthesize(const World& world, std::uint64_t seed);

/// Pairs closer than `separation_m` whose timestamps differ by more than
/// `min_gap_s`, as (lower id, higher id) in lexicographic order.
std::vector<std::pair<KeyframeId, KeyframeId>> ground_truth_loops(
    std::span<const DatasetFrame> frames, double separation_m, double min_gap_s);

std::vector<std::string> preset_names();
std::map<std::string, WorldConfig> preset_worlds();
/// Throws kInvalidArgument listing the valid names.
WorldConfig preset_world(const std::string& name);

// world.json config section.
std::string world_config_to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const std::string& text);

// Directory with frames.csv, scans.csv, loops_gt.csv and world.json.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Throws kBadDataset (with the frame index where one applies) or kIo.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace wifislam
