#include "wifislam/posegraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <queue>
#include <string>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "csv.hpp"
#include "wifislam/error.hpp"

namespace wifislam {

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Pose2 make_pose(double x, double y, double theta) {
  return {x, y, wrap_angle(theta)};
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
          wrap_angle(a.theta + b.theta)};
}

Pose2 inverse(const Pose2& a) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {-(c * a.x + s * a.y), s * a.x - c * a.y, wrap_angle(-a.theta)};
}

Pose2 between(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(b.theta - a.theta)};
}

Eigen::Vector2d transform_point(const Pose2& p, const Eigen::Vector2d& pt) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  return {p.x + c * pt.x() - s * pt.y(), p.y + s * pt.x() + c * pt.y()};
}

void check_information(const Eigen::Matrix3d& info) {
  if (!info.allFinite()) {
    throw Error(ErrorCode::kBadInformation, "information has non-finite entries");
  }
  const double scale = std::max(1.0, info.cwiseAbs().maxCoeff());
  if ((info - info.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw Error(ErrorCode::kBadInformation, "information is not symmetric");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(info);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kBadInformation,
                "information is not positive definite");
  }
}

void PoseGraph::add_node(KeyframeId id, const Pose2& estimate) {
  if (!nodes_.emplace(id, make_pose(estimate.x, estimate.y, estimate.theta))
           .second) {
    throw Error(ErrorCode::kInvalidArgument,
                "duplicate node id " + std::to_string(id));
  }
}

void PoseGraph::add_edge(const GraphEdge& edge) {
  if (edge.from == edge.to) {
    throw Error(ErrorCode::kInvalidArgument, "edge endpoints must differ");
  }
  if (!has_node(edge.from) || !has_node(edge.to)) {
    throw Error(ErrorCode::kDanglingEdge,
                "edge " + std::to_string(edge.from) + "->" +
                    std::to_string(edge.to) + " references a missing node");
  }
  check_information(edge.information);
  edges_.push_back(edge);
  if (edge.kind == EdgeKind::kLoop) ++loop_edges_;
}

const Pose2& PoseGraph::pose(KeyframeId id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw Error(ErrorCode::kDanglingEdge, "no node " + std::to_string(id));
  }
  return it->second;
}

void PoseGraph::set_pose(KeyframeId id, const Pose2& p) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw Error(ErrorCode::kDanglingEdge, "no node " + std::to_string(id));
  }
  it->second = make_pose(p.x, p.y, p.theta);
}

Eigen::Vector3d residual(const GraphEdge& edge, const Pose2& from,
                         const Pose2& to) {
  const Pose2 e = between(edge.relative, between(from, to));
  return {e.x, e.y, e.theta};
}

Eigen::Vector3d residual(const GraphEdge& edge,
                         const PoseGraph::NodeMap& nodes) {
  const auto a = nodes.find(edge.from);
  const auto b = nodes.find(edge.to);
  if (a == nodes.end() || b == nodes.end()) {
    throw Error(ErrorCode::kDanglingEdge,
                "edge " + std::to_string(edge.from) + "->" +
                    std::to_string(edge.to) + " references a missing node");
  }
  return residual(edge, a->second, b->second);
}

EdgeLinearization linearize(const GraphEdge& edge, const Pose2& from,
                            const Pose2& to) {
  // r_t = Rz^T (Ri^T (tj - ti) - tz),  r_theta = thj - thi - thz
  const double ci = std::cos(from.theta);
  const double si = std::sin(from.theta);
  const double cz = std::cos(edge.relative.theta);
  const double sz = std::sin(edge.relative.theta);
  Eigen::Matrix2d ri_t;
  ri_t << ci, si, -si, ci;
  Eigen::Matrix2d dri_t;  // d(Ri^T)/d theta_i
  dri_t << -si, ci, -ci, -si;
  Eigen::Matrix2d rz_t;
  rz_t << cz, sz, -sz, cz;
  const Eigen::Vector2d d(to.x - from.x, to.y - from.y);

  EdgeLinearization lin;
  lin.residual = residual(edge, from, to);
  lin.d_from.setZero();
  lin.d_to.setZero();
  lin.d_from.block<2, 2>(0, 0) = -rz_t * ri_t;
  lin.d_from.block<2, 1>(0, 2) = rz_t * dri_t * d;
  lin.d_from(2, 2) = -1.0;
  lin.d_to.block<2, 2>(0, 0) = rz_t * ri_t;
  lin.d_to(2, 2) = 1.0;
  return lin;
}

namespace {

double error_of(const std::vector<GraphEdge>& edges,
                const PoseGraph::NodeMap& nodes) {
  double sum = 0.0;
  for (const auto& e : edges) {
    const Eigen::Vector3d r = residual(e, nodes);
    sum += r.dot(e.information * r);
  }
  return sum;
}

void check_connected(const PoseGraph& graph) {
  const auto& nodes = graph.nodes();
  if (nodes.empty()) return;
  std::unordered_map<KeyframeId, std::vector<KeyframeId>> adj;
  for (const auto& e : graph.edges()) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::unordered_map<KeyframeId, bool> seen;
  std::queue<KeyframeId> q;
  q.push(nodes.begin()->first);
  seen[nodes.begin()->first] = true;
  while (!q.empty()) {
    const KeyframeId k = q.front();
    q.pop();
    for (const KeyframeId n : adj[k]) {
      if (!seen[n]) {
        seen[n] = true;
        q.push(n);
      }
    }
  }
  for (const auto& [id, pose] : nodes) {
    if (!seen[id]) {
      throw Error(ErrorCode::kDisconnectedGraph,
                  "node " + std::to_string(id) +
                      " is not connected to the anchor node");
    }
  }
}

}  // namespace

double total_error(const PoseGraph& graph) {
  return error_of(graph.edges(), graph.nodes());
}

PoseGraph optimize(const PoseGraph& graph, const OptimizeOptions& options,
                   OptimizeReport* report) {
  OptimizeReport local;
  OptimizeReport& rep = report ? *report : local;
  rep = OptimizeReport{};

  for (const auto& e : graph.edges()) {
    residual(e, graph.nodes());
    check_information(e.information);
  }
  check_connected(graph);

  PoseGraph result = graph;
  const auto& edges = graph.edges();
  rep.initial_error = error_of(edges, graph.nodes());
  rep.final_error = rep.initial_error;
  if (graph.nodes().size() < 2 || edges.empty() || rep.initial_error == 0.0) {
    return result;
  }

  // Variable layout: every node but the anchor, in id order.
  std::unordered_map<KeyframeId, int> slot;
  std::vector<Pose2> current;
  std::vector<KeyframeId> ids;
  for (const auto& [id, p] : graph.nodes()) {
    slot.emplace(id, static_cast<int>(current.size()));
    current.push_back(p);
    ids.push_back(id);
  }
  const int n_vars = 3 * (static_cast<int>(current.size()) - 1);
  auto var_of = [](int s) { return 3 * (s - 1); };  // slot 0 is the anchor

  struct Link {
    int from;
    int to;
    const GraphEdge* edge;
  };
  std::vector<Link> links;
  links.reserve(edges.size());
  for (const auto& e : edges) links.push_back({slot.at(e.from), slot.at(e.to), &e});

  auto error_at = [&](const std::vector<Pose2>& x) {
    double sum = 0.0;
    for (const auto& l : links) {
      const Eigen::Vector3d r = residual(*l.edge, x[l.from], x[l.to]);
      sum += r.dot(l.edge->information * r);
    }
    return sum;
  };

  // The sparsity pattern is fixed, so every 3x3 block gets a slot in the
  // value array once and later linearisations write straight into it.
  Eigen::SparseMatrix<double> h_base(n_vars, n_vars);
  {
    std::vector<Eigen::Triplet<double>> pattern;
    pattern.reserve(links.size() * 36 + static_cast<std::size_t>(n_vars));
    for (int i = 0; i < n_vars; ++i) pattern.emplace_back(i, i, 0.0);
    for (const auto& l : links) {
      for (const int a : {l.from, l.to}) {
        for (const int c : {l.from, l.to}) {
          if (a == 0 || c == 0) continue;
          for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) pattern.emplace_back(var_of(a) + r, var_of(c) + k, 0.0);
          }
        }
      }
    }
    h_base.setFromTriplets(pattern.begin(), pattern.end());
    h_base.makeCompressed();
  }
  auto value_index = [&](int row, int col) {
    const int* inner = h_base.innerIndexPtr();
    const int* begin = inner + h_base.outerIndexPtr()[col];
    const int* end = inner + h_base.outerIndexPtr()[col + 1];
    return static_cast<int>(std::lower_bound(begin, end, row) - inner);
  };
  // Per link, block (p,q), block column c: value index of the block's first row.
  struct BlockSlots {
    int at[2][2][3];
  };
  std::vector<BlockSlots> slots(links.size());
  for (std::size_t li = 0; li < links.size(); ++li) {
    const int node[2] = {links[li].from, links[li].to};
    for (int p = 0; p < 2; ++p) {
      for (int q = 0; q < 2; ++q) {
        for (int c = 0; c < 3; ++c) {
          slots[li].at[p][q][c] = node[p] == 0 || node[q] == 0
                                      ? -1
                                      : value_index(var_of(node[p]), var_of(node[q]) + c);
        }
      }
    }
  }
  std::vector<int> diagonal(static_cast<std::size_t>(n_vars));
  for (int i = 0; i < n_vars; ++i) diagonal[static_cast<std::size_t>(i)] = value_index(i, i);

  double error = rep.initial_error;
  double lambda = options.damping_init;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.analyzePattern(h_base);
  bool converged = false;

  while (rep.iterations < options.max_iters) {
    std::fill_n(h_base.valuePtr(), h_base.nonZeros(), 0.0);
    double* values = h_base.valuePtr();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_vars);
    for (std::size_t li = 0; li < links.size(); ++li) {
      const auto& l = links[li];
      const GraphEdge& e = *l.edge;
      const auto lin = linearize(e, current[static_cast<std::size_t>(l.from)],
                                 current[static_cast<std::size_t>(l.to)]);
      const Eigen::Vector3d w = e.information * lin.residual;
      const Eigen::Matrix3d* jac[2] = {&lin.d_from, &lin.d_to};
      const int node[2] = {l.from, l.to};
      for (int p = 0; p < 2; ++p) {
        if (node[p] == 0) continue;
        b.segment<3>(var_of(node[p])) += jac[p]->transpose() * w;
        for (int q = 0; q < 2; ++q) {
          if (node[q] == 0) continue;
          const Eigen::Matrix3d h = jac[p]->transpose() * e.information * (*jac[q]);
          for (int c = 0; c < 3; ++c) {
            double* col = values + slots[li].at[p][q][c];
            for (int r = 0; r < 3; ++r) col[r] += h(r, c);
          }
        }
      }
    }

    bool improved = false;
    Eigen::SparseMatrix<double> h = h_base;
    while (rep.iterations < options.max_iters) {
      ++rep.iterations;
      std::copy_n(h_base.valuePtr(), h_base.nonZeros(), h.valuePtr());
      for (const int d : diagonal) h.valuePtr()[d] += lambda;
      solver.factorize(h);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(-b);

      std::vector<Pose2> candidate = current;
      for (std::size_t s = 1; s < candidate.size(); ++s) {
        const int o = var_of(static_cast<int>(s));
        auto& p = candidate[s];
        p = make_pose(p.x + delta[o], p.y + delta[o + 1], p.theta + delta[o + 2]);
      }
      const double new_error = error_at(candidate);
      if (new_error < error) {
        const double rel = (error - new_error) / std::max(error, 1e-300);
        current = std::move(candidate);
        error = new_error;
        lambda = std::max(lambda / 10.0, 1e-12);
        ++rep.accepted_steps;
        rep.accepted_errors.push_back(error);
        improved = true;
        converged = rel < options.relative_tolerance;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
    if (!improved || converged || error == 0.0) break;
  }

  for (std::size_t s = 0; s < current.size(); ++s) result.set_pose(ids[s], current[s]);
  rep.final_error = error;
  return result;
}

RigidTransform2 kabsch_align(std::span<const Point2> est,
                             std::span<const Point2> gt) {
  if (est.size() != gt.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "alignment needs equal-length trajectories (" +
                    std::to_string(est.size()) + " vs " +
                    std::to_string(gt.size()) + ")");
  }
  if (est.size() < 2) {
    throw Error(ErrorCode::kDegenerateAlignment,
                "alignment needs at least two points");
  }
  const double n = static_cast<double>(est.size());
  Point2 ce = Point2::Zero();
  Point2 cg = Point2::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    ce += est[i];
    cg += gt[i];
  }
  ce /= n;
  cg /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double spread_e = 0.0;
  double spread_g = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Point2 de = est[i] - ce;
    const Point2 dg = gt[i] - cg;
    cov += de * dg.transpose();
    spread_e += de.squaredNorm();
    spread_g += dg.squaredNorm();
  }
  if (spread_e <= 1e-24 * n || spread_g <= 1e-24 * n) {
    throw Error(ErrorCode::kDegenerateAlignment,
                "points are coincident; rotation is undetermined");
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d u = svd.matrixU();
  const Eigen::Matrix2d v = svd.matrixV();
  Eigen::Matrix2d sign = Eigen::Matrix2d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) sign(1, 1) = -1.0;
  RigidTransform2 out;
  out.rotation = v * sign * u.transpose();
  out.translation = cg - out.rotation * ce;
  return out;
}

double rmse(std::span<const Point2> est, std::span<const Point2> gt) {
  if (est.size() != gt.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "rmse needs equal-length trajectories");
  }
  if (est.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "rmse of an empty trajectory");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    sum += (est[i] - gt[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(est.size()));
}

void write_trajectory_csv(std::ostream& out,
                          std::span<const TrajectoryRow> rows) {
  out << "keyframe_id,t_s,x_m,y_m,theta_rad\n";
  for (const auto& r : rows) {
    out << r.id << ',' << csv::format_double(r.t_s) << ','
        << csv::format_double(r.pose.x) << ',' << csv::format_double(r.pose.y)
        << ',' << csv::format_double(r.pose.theta) << '\n';
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::vector<TrajectoryRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || csv::trim(line).empty()) continue;
    const auto cols = csv::split(csv::trim(line));
    const std::string where = "trajectory line " + std::to_string(line_no);
    if (cols.size() != 5) {
      throw Error(ErrorCode::kParse, where + ": expected 5 columns");
    }
    TrajectoryRow r;
    r.id = csv::parse_int(cols[0], where);
    r.t_s = csv::parse_double(cols[1], where);
    r.pose = make_pose(csv::parse_double(cols[2], where),
                       csv::parse_double(cols[3], where),
                       csv::parse_double(cols[4], where));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace wifislam
