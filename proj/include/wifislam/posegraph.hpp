#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wifislam/types.hpp"

namespace wifislam {

/// Planar pose. theta is kept in (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  static Pose2 identity() { return {}; }
  Eigen::Vector2d translation() const { return {x, y}; }
};

double wrap_angle(double a);
Pose2 make_pose(double x, double y, double theta);

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& a);
/// inverse(a) o b: `b` expressed in the frame of `a`.
Pose2 between(const Pose2& a, const Pose2& b);
Eigen::Vector2d transform_point(const Pose2& p, const Eigen::Vector2d& pt);

enum class EdgeKind { kOdometry, kLoop };

struct GraphEdge {
  KeyframeId from = 0;
  KeyframeId to = 0;
  Pose2 relative;  // pose of `to` in the frame of `from`
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();
  EdgeKind kind = EdgeKind::kOdometry;
};

/// Throws kBadInformation unless `info` is symmetric positive definite.
void check_information(const Eigen::Matrix3d& info);

class PoseGraph {
 public:
  using NodeMap = std::map<KeyframeId, Pose2>;

  void add_node(KeyframeId id, const Pose2& estimate);
  /// Validates endpoints (kDanglingEdge), from != to, and SPD information.
  void add_edge(const GraphEdge& edge);

  bool has_node(KeyframeId id) const { return nodes_.contains(id); }
  const Pose2& pose(KeyframeId id) const;
  void set_pose(KeyframeId id, const Pose2& p);

  const NodeMap& nodes() const noexcept { return nodes_; }
  const std::vector<GraphEdge>& edges() const noexcept { return edges_; }
  std::size_t loop_edge_count() const noexcept { return loop_edges_; }

 private:
  NodeMap nodes_;
  std::vector<GraphEdge> edges_;
  std::size_t loop_edges_ = 0;
};

struct EdgeLinearization {
  Eigen::Vector3d residual;
  Eigen::Matrix3d d_from;  // d residual / d (x, y, theta) of `from`
  Eigen::Matrix3d d_to;
};

/// Residual of the measured transform against the one implied by the two
/// poses: between(edge.relative, between(from, to)) as (dx, dy, dtheta) with
/// the angle wrapped.
Eigen::Vector3d residual(const GraphEdge& edge, const Pose2& from,
                         const Pose2& to);
Eigen::Vector3d residual(const GraphEdge& edge, const PoseGraph::NodeMap& nodes);
EdgeLinearization linearize(const GraphEdge& edge, const Pose2& from,
                            const Pose2& to);

/// Sum over edges of r^T * information * r.
double total_error(const PoseGraph& graph);

struct OptimizeOptions {
  int max_iters = 50;
  double damping_init = 1e-4;
  double relative_tolerance = 1e-9;
};

struct OptimizeReport {
  int iterations = 0;  // linear solves, accepted or not
  int accepted_steps = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  std::vector<double> accepted_errors;  // error after each accepted step
};

/// Levenberg-Marquardt over all poses except the lowest id, which is held
/// fixed as the gauge. Throws kDisconnectedGraph / kBadInformation.
PoseGraph optimize(const PoseGraph& graph, const OptimizeOptions& options = {},
                   OptimizeReport* report = nullptr);

using Point2 = Eigen::Vector2d;

struct RigidTransform2 {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  Point2 apply(const Point2& p) const { return rotation * p + translation; }
};

/// Rigid transform minimising sum |R*est_i + t - gt_i|^2, with det(R) = +1.
RigidTransform2 kabsch_align(std::span<const Point2> est,
                             std::span<const Point2> gt);

double rmse(std::span<const Point2> est, std::span<const Point2> gt);

struct TrajectoryRow {
  KeyframeId id = 0;
  double t_s = 0.0;
  Pose2 pose;
};

// `keyframe_id,t_s,x_m,y_m,theta_rad`, shared by estimates and ground truth.
void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

}  // namespace wifislam
