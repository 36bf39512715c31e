#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "wifislam/simworld.hpp"

using namespace wifislam;
using testing::thrown;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wifislam_unit_" + name);
  fs::remove_all(p);
  return p;
}

bool proper_cross(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  auto orient = [](const Point2& o, const Point2& u, const Point2& v) {
    const double c = (u - o).x() * (v - o).y() - (u - o).y() * (v - o).x();
    return (c > 1e-12) - (c < -1e-12);
  };
  return orient(p, q, a) * orient(p, q, b) < 0 && orient(a, b, p) * orient(a, b, q) < 0;
}

AccessPoint ap_at(double x, double y) {
  AccessPoint ap;
  ap.id = testing::ap(1);
  ap.position = Point2(x, y);
  ap.tx_power_at_1m = -30.0;
  return ap;
}

}  // namespace

TEST_CASE("rssi examples") {
  PropagationParams p;
  p.noise_sigma_db = 0.0;
  FloorPlan open;
  const AccessPoint ap = ap_at(0, 0);
  CHECK(mean_rssi(ap, Point2(1, 0), open, p) == doctest::Approx(-30.0));
  CHECK(mean_rssi(ap, Point2(0.3, 0), open, p) == doctest::Approx(-30.0));

  FloorPlan walled;
  walled.walls.push_back({Point2(5, -1), Point2(5, 1)});
  CHECK(wall_crossings(walled, Point2(0, 0), Point2(10, 0)) == 1);
  CHECK(mean_rssi(ap, Point2(10, 0), walled, p) == doctest::Approx(-65.0));

  std::mt19937_64 rng(1);
  const auto r = rssi_at(ap, Point2(10, 0), walled, p, rng);
  REQUIRE(r);
  CHECK(*r == doctest::Approx(-65.0));
  CHECK_FALSE(rssi_at(ap, Point2(1000, 0), open, p, rng));

  double prev = 0.0;
  for (double d = 1.0; d < 60.0; d += 0.25) {
    const double v = mean_rssi(ap, Point2(d, 0), open, p);
    if (d > 1.0) CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("trajectory examples") {
  TrajectorySpec spec;
  spec.shape = Shape::kSquareLoop;
  spec.scale = 20.0;
  const Trajectory t = generate_trajectory(spec);
  CHECK(t.length == doctest::Approx(80.0));
  CHECK(t.dwells.size() == 22);
  const Point2 first = t.samples.front().pose.translation();
  const Point2 last = t.samples.back().pose.translation();
  CHECK((first - last).norm() < 1e-9);
  for (std::size_t i = 1; i < t.samples.size(); ++i) {
    CHECK(t.samples[i].t > t.samples[i - 1].t);
  }
  for (const auto& s : t.samples) {
    for (const auto& d : t.dwells) {
      CHECK_FALSE((s.t > d.t_start && s.t <= d.t_end));
    }
  }

  const auto eight = shape_waypoints(Shape::kFigureEight, 20.0);
  int crossings = 0;
  for (std::size_t i = 0; i + 1 < eight.size(); ++i) {
    for (std::size_t j = i + 2; j + 1 < eight.size(); ++j) {
      crossings += proper_cross(eight[i], eight[i + 1], eight[j], eight[j + 1]);
    }
  }
  CHECK(crossings == 1);

  spec.speed = 0.0;
  CHECK(thrown([&] { generate_trajectory(spec); }) == ErrorCode::kInvalidArgument);
  CHECK(thrown([] { parse_shape("spiral"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("noise-free odometry composes back to ground truth") {
  WorldConfig cfg = preset_world("c_hall");
  cfg.odometry = {0.0, 0.0, 0.0};
  cfg.corridor_templates.clear();
  const Dataset ds = synthesize(build_world(cfg), 3);
  Pose2 p = ds.frames.front().gt;
  for (std::size_t i = 1; i < ds.frames.size(); ++i) {
    p = compose(p, ds.frames[i].odom_delta);
    CHECK((p.translation() - ds.frames[i].gt.translation()).norm() < 1e-9);
    CHECK(std::abs(wrap_angle(p.theta - ds.frames[i].gt.theta)) < 1e-9);
  }
}

TEST_CASE("odometry drifts with default noise") {
  const Dataset ds = synthesize(build_world(preset_world("c_hall")), 3);
  Pose2 p = ds.frames.front().gt;
  for (std::size_t i = 1; i < ds.frames.size(); ++i) p = compose(p, ds.frames[i].odom_delta);
  CHECK((p.translation() - ds.frames.back().gt.translation()).norm() > 1e-3);
}

TEST_CASE("corridors sharing a template give frames the same template id") {
  const Dataset ds = synthesize(build_world(preset_world("c_hall")), 1);
  // South (y = 0) and north (y = 20) corridors share a template; east does not.
  std::set<int> south, north, east;
  for (const auto& f : ds.frames) {
    const double x = f.gt.x;
    const double y = f.gt.y;
    if (std::abs(y) < 1e-6 && x > 5 && x < 15) south.insert(f.appearance.place_template);
    if (std::abs(y - 20) < 1e-6 && x > 5 && x < 15) north.insert(f.appearance.place_template);
    if (std::abs(x - 20) < 1e-6 && y > 5 && y < 15) east.insert(f.appearance.place_template);
  }
  REQUIRE(south.size() == 1);
  CHECK(south == north);
  CHECK(south != east);
}

TEST_CASE("ground-truth loop pairs") {
  const Dataset ds = synthesize(build_world(preset_world("c_hall")), 2);
  REQUIRE_FALSE(ds.gt_loop_pairs.empty());
  for (const auto& [a, b] : ds.gt_loop_pairs) {
    CHECK(a < b);
    const auto& fa = ds.frames[static_cast<std::size_t>(a)];
    const auto& fb = ds.frames[static_cast<std::size_t>(b)];
    CHECK(fb.t - fa.t > 30.0);
    CHECK((fa.gt.translation() - fb.gt.translation()).norm() < 2.0);
  }
  CHECK(std::is_sorted(ds.gt_loop_pairs.begin(), ds.gt_loop_pairs.end()));
  CHECK(ground_truth_loops(ds.frames, 2.0, 30.0) == ds.gt_loop_pairs);
}

TEST_CASE("presets") {
  CHECK(preset_names() == std::vector<std::string>{"a_hall", "b_hall", "c_hall", "j_hall"});
  CHECK(preset_world("c_hall").n_aps == 35);
  CHECK(preset_world("c_hall").n_aps < 40);
  CHECK(preset_world("j_hall").n_aps == 70);
  CHECK(preset_world("b_hall").trajectory.shape == Shape::kFigureEight);
  CHECK(build_world(preset_world("a_hall")).plan.walls.size() <
        build_world(preset_world("c_hall")).plan.walls.size());
  try {
    preset_world("d_hall");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
    CHECK(std::string(e.what()).find("c_hall") != std::string::npos);
  }
  for (const auto& name : preset_names()) {
    const World w = build_world(preset_world(name));
    for (const auto& wall : w.plan.walls) {
      for (const Point2& p : {wall.a, wall.b}) {
        CHECK(p.x() >= w.plan.lo.x());
        CHECK(p.y() >= w.plan.lo.y());
        CHECK(p.x() <= w.plan.hi.x());
        CHECK(p.y() <= w.plan.hi.y());
      }
    }
  }
}

TEST_CASE("world config json round trip") {
  WorldConfig c = preset_world("j_hall");
  c.odometry.bias_theta = 0.003;
  const WorldConfig back = world_config_from_json(world_config_to_json(c));
  CHECK(world_config_to_json(back) == world_config_to_json(c));
  CHECK(back.odometry.bias_theta == 0.003);
  CHECK(back.trajectory.shape == Shape::kNineLoop);
}

TEST_CASE("synthesis is a pure function of config and seed") {
  const World w = build_world(preset_world("c_hall"));
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  write_dataset(synthesize(w, 11), a);
  write_dataset(synthesize(w, 11), b);
  for (const char* f : {"frames.csv", "scans.csv", "loops_gt.csv", "world.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const fs::path c = scratch("det_c");
  write_dataset(synthesize(w, 12), c);
  CHECK(slurp(a / "frames.csv") != slurp(c / "frames.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("dataset write/read round trip") {
  const Dataset ds = synthesize(build_world(preset_world("b_hall")), 5);
  const fs::path dir = scratch("roundtrip");
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  CHECK(back.seed == 5);
  REQUIRE(back.frames.size() == ds.frames.size());
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const auto& x = ds.frames[i];
    const auto& y = back.frames[i];
    CHECK(x.id == y.id);
    CHECK(x.t == y.t);
    CHECK(x.gt.x == y.gt.x);
    CHECK(x.odom_delta.theta == y.odom_delta.theta);
    CHECK(x.appearance.words == y.appearance.words);
    CHECK(x.appearance.sources == y.appearance.sources);
    CHECK(x.appearance.place_template == y.appearance.place_template);
  }
  CHECK(back.scans.size() == ds.scans.size());
  CHECK(back.scan_dwell == ds.scan_dwell);
  CHECK(back.gt_loop_pairs == ds.gt_loop_pairs);
  CHECK(back.dwells.size() == ds.dwells.size());
  CHECK(back.world.aps.size() == ds.world.aps.size());

  // A second write of what was read is byte-identical.
  const fs::path again = scratch("roundtrip2");
  write_dataset(back, again);
  CHECK(slurp(dir / "frames.csv") == slurp(again / "frames.csv"));
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_CASE("malformed datasets report the frame index") {
  const Dataset ds = synthesize(build_world(preset_world("c_hall")), 5);
  const fs::path dir = scratch("bad");
  write_dataset(ds, dir);
  std::istringstream lines(slurp(dir / "frames.csv"));
  std::string line, text;
  for (int n = 0; std::getline(lines, line); ++n) {
    if (n == 4) line = "3,1.5,x,0,0,0,0,0,0,1|2";  // frame index 3
    text += line + "\n";
  }
  std::ofstream(dir / "frames.csv") << text;
  try {
    read_dataset(dir);
    FAIL("expected kBadDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadDataset);
    CHECK(std::string(e.what()).find("frame index 3") != std::string::npos);
  }
  fs::remove(dir / "frames.csv");
  CHECK(thrown([&] { read_dataset(dir); }).has_value());
  fs::remove_all(dir);
  CHECK(thrown([&] { read_dataset(dir); }).has_value());
}
