#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "wifislam/cli.hpp"
#include "wifislam/eval.hpp"

namespace py = pybind11;
using namespace wifislam;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Point2> to_points(const Points& m) {
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m(i, 0), m(i, 1));
  return out;
}

Signature to_signature(const std::map<std::string, double>& strengths) {
  std::map<ApId, double> merged;
  for (const auto& [bssid, s] : strengths) merged[mask_bssid(parse_bssid(bssid))] += s;
  return Signature(std::vector<Signature::Entry>(merged.begin(), merged.end()), 0.0, 0);
}

py::dict report_dict(const ReportRow& r) {
  py::dict d;
  d["dataset"] = r.dataset;
  d["seed"] = r.seed;
  d["policy"] = r.policy;
  d["gated"] = r.gated;
  d["min_matches"] = r.min_matches;
  d["inlier_distance"] = r.inlier_distance;
  d["wifi_threshold"] = r.wifi_threshold;
  d["real_time_threshold"] = r.real_time_threshold;
  d["rmse_m"] = r.rmse_m;
  d["tp"] = r.score.true_positives;
  d["fp"] = r.score.false_positives;
  d["fn"] = r.score.false_negatives;
  d["fp_pct"] = r.score.fp_pct;
  d["fn_pct"] = r.score.fn_pct;
  d["loop_cost"] = r.loop_cost;
  d["overhead_cost"] = r.overhead_cost;
  d["clusters"] = r.clusters;
  d["wall_ms"] = r.wall_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wi-Fi gated loop closure: simulator, policies and metrics";

  static py::exception<Error> error(m, "WifiSlamError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Pose2>(m, "Pose2")
      .def(py::init(&make_pose), py::arg("x") = 0.0, py::arg("y") = 0.0,
           py::arg("theta") = 0.0)
      .def_readonly("x", &Pose2::x)
      .def_readonly("y", &Pose2::y)
      .def_readonly("theta", &Pose2::theta)
      .def("__mul__", &compose)
      .def("inverse", &inverse)
      .def("__repr__", [](const Pose2& p) {
        std::ostringstream s;
        s << "Pose2(" << p.x << ", " << p.y << ", " << p.theta << ")";
        return s.str();
      });
  m.def("between", &between, "b expressed in the frame of a");

  m.def("mask_bssid", [](const std::string& b) { return to_string(mask_bssid(parse_bssid(b))); });
  m.def("strength_of", &strength_of, py::arg("rssi_dbm"));
  m.def(
      "cosine_similarity",
      [](const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
        return cosine_similarity(to_signature(a), to_signature(b));
      },
      "Strengths keyed by BSSID; radios of one AP are summed after masking.");

  m.def(
      "kabsch_align",
      [](const Points& est, const Points& gt) {
        const RigidTransform2 r = kabsch_align(to_points(est), to_points(gt));
        return py::make_tuple(Eigen::Matrix2d(r.rotation), Eigen::Vector2d(r.translation));
      },
      py::arg("est"), py::arg("gt"), "(R, t) minimising |R est + t - gt|.");
  m.def(
      "rmse", [](const Points& a, const Points& b) { return rmse(to_points(a), to_points(b)); },
      py::arg("est"), py::arg("gt"));

  m.def("preset_names", &preset_names);
  m.def(
      "generate",
      [](const std::string& world, std::uint64_t seed, const std::string& out) {
        const Dataset ds = synthesize(build_world(preset_world(world)), seed);
        write_dataset(ds, out);
        return py::dict(py::arg("frames") = ds.frames.size(), py::arg("dwells") = ds.dwells.size(),
                        py::arg("aps") = ds.world.aps.size(),
                        py::arg("gt_loops") = ds.gt_loop_pairs.size());
      },
      py::arg("world"), py::arg("seed"), py::arg("out"));

  m.def(
      "run",
      [](const std::string& dataset_dir, const std::string& params_json) {
        const Dataset ds = read_dataset(dataset_dir);
        PolicyParams base;
        base.seed = ds.seed;
        const PolicyParams p = cli::policy_params_from_json(params_json, base);
        RunRecord run;
        {
          py::gil_scoped_release release;
          run = run_pipeline(ds, p);
        }
        py::dict d = report_dict(make_report_row(ds.world.config.name, ds, run));
        d["loop_edges"] = run.loop_edges();
        return d;
      },
      py::arg("dataset_dir"), py::arg("params_json") = "{}",
      "Runs one policy; params use the same JSON keys as the CLI config.");

  m.def(
      "similarity_curve",
      [](const std::string& dataset_dir) {
        const SimilarityCurve c = similarity_distance_curve(read_dataset(dataset_dir));
        std::vector<double> d, s;
        for (const auto& p : c.points) {
          d.push_back(p.distance_m);
          s.push_back(p.similarity);
        }
        return py::make_tuple(d, s, c.spearman_rho);
      },
      py::arg("dataset_dir"));

  m.def(
      "localize",
      [](const std::string& dataset_dir, double split, double threshold, bool gated) {
        const LocalizationResult r =
            localize_dataset(read_dataset(dataset_dir), split, threshold, gated);
        return py::dict(py::arg("errors") = r.errors, py::arg("map_count") = r.map_count,
                        py::arg("query_count") = r.query_count,
                        py::arg("fallback_count") = r.fallback_count,
                        py::arg("within_4m") = r.cdf.fraction_within(4.0));
      },
      py::arg("dataset_dir"), py::arg("split") = 0.4, py::arg("threshold") = 0.85,
      py::arg("gated") = true);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "wifislam");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process: (exit code, stdout, stderr).");
}
