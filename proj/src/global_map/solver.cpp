#include "conetrack/global_map/solver.hpp"

#include "conetrack/global_map/residuals.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace conetrack::global_map {

std::string_view to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::kConverged:
      return "converged";
    case SolverStatus::kMaxIterations:
      return "max_iterations";
    case SolverStatus::kRankDeficient:
      return "rank_deficient";
    case SolverStatus::kNoVariables:
      return "no_variables";
  }
  return "converged";
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Column layout: poses 1..n-1 (pose 0 is the gauge), then landmarks.
struct Layout {
  int pose_count;
  int landmark_count;

  int pose(int id) const { return id == 0 ? -1 : 3 * (id - 1); }
  int landmark(int id) const { return 3 * (pose_count - 1) + 2 * id; }
  int size() const { return 3 * (pose_count - 1) + 2 * landmark_count; }
};

struct NormalEquations {
  SparseMatrix hessian;
  Eigen::VectorXd gradient;
};

void add_block(std::vector<Triplet>& t, int row, int col, const Eigen::MatrixXd& block) {
  if (row < 0 || col < 0) return;
  for (int r = 0; r < block.rows(); ++r) {
    for (int c = 0; c < block.cols(); ++c) {
      t.emplace_back(row + r, col + c, block(r, c));
    }
  }
}

NormalEquations linearize(const Graph& graph, const Layout& layout) {
  std::vector<Triplet> triplets;
  triplets.reserve(graph.odometry.size() * 36 + graph.observations.size() * 25);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.size());

  auto accumulate = [&](const std::vector<std::pair<int, Eigen::MatrixXd>>& blocks,
                        const Eigen::MatrixXd& information, const Eigen::VectorXd& residual) {
    for (const auto& [col_a, ja] : blocks) {
      if (col_a < 0) continue;
      g.segment(col_a, ja.cols()) += ja.transpose() * information * residual;
      for (const auto& [col_b, jb] : blocks) {
        if (col_b < 0) continue;
        add_block(triplets, col_a, col_b, ja.transpose() * information * jb);
      }
    }
  };

  for (const OdometryEdge& e : graph.odometry) {
    const Pose2d& from = graph.poses[static_cast<std::size_t>(e.from)].pose;
    const Pose2d& to = graph.poses[static_cast<std::size_t>(e.to)].pose;
    const Vector3d r = odometry_residual(from, to, e.relative);
    const auto j = odometry_jacobians(from, to, e.relative);
    accumulate({{layout.pose(e.from), j.d_from}, {layout.pose(e.to), j.d_to}}, e.information, r);
  }
  for (const ObservationEdge& e : graph.observations) {
    const Pose2d& pose = graph.poses[static_cast<std::size_t>(e.pose)].pose;
    const Vector2d& lm = graph.landmarks[static_cast<std::size_t>(e.landmark)].position;
    const Vector2d r = observation_residual(pose, lm, e.measurement);
    const auto j = observation_jacobians(pose, lm);
    accumulate({{layout.pose(e.pose), j.d_pose}, {layout.landmark(e.landmark), j.d_landmark}},
               e.information, r);
  }

  NormalEquations ne;
  ne.hessian.resize(layout.size(), layout.size());
  ne.hessian.setFromTriplets(triplets.begin(), triplets.end());
  ne.gradient = std::move(g);
  return ne;
}

Graph apply_step(const Graph& graph, const Layout& layout, const Eigen::VectorXd& step) {
  Graph out = graph;
  for (std::size_t i = 1; i < out.poses.size(); ++i) {
    const int col = layout.pose(static_cast<int>(i));
    Pose2d& p = out.poses[i].pose;
    p = Pose2d(p.x + step[col], p.y + step[col + 1], p.theta + step[col + 2]);
  }
  for (std::size_t i = 0; i < out.landmarks.size(); ++i) {
    const int col = layout.landmark(static_cast<int>(i));
    out.landmarks[i].position += step.segment<2>(col);
  }
  return out;
}

bool full_rank(const SparseMatrix& hessian) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(hessian);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double largest = d.cwiseAbs().maxCoeff();
  return d.minCoeff() > 1e-12 * std::max(largest, 1.0);
}

}  // namespace

OptimizeResult optimize(const Graph& graph, const SolverConfig& config) {
  OptimizeResult result;
  result.graph = graph;
  result.initial_cost = result.final_cost = total_cost(graph);
  result.cost_history.push_back(result.initial_cost);

  const Layout layout{static_cast<int>(graph.poses.size()), static_cast<int>(graph.landmarks.size())};
  if (graph.poses.empty() || layout.size() == 0) {
    result.status = SolverStatus::kNoVariables;
    return result;
  }

  double cost = result.initial_cost;
  double damping = config.initial_damping;
  result.status = SolverStatus::kMaxIterations;
  Eigen::SimplicialLDLT<SparseMatrix> solver;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (cost <= std::numeric_limits<double>::min()) {
      result.status = SolverStatus::kConverged;
      break;
    }
    const NormalEquations ne = linearize(result.graph, layout);
    const Eigen::VectorXd diag = ne.hessian.diagonal().cwiseMax(1e-9);

    bool accepted = false;
    double new_cost = cost;
    Graph candidate;
    while (damping <= config.max_damping) {
      SparseMatrix damped = ne.hessian;
      for (int i = 0; i < layout.size(); ++i) damped.coeffRef(i, i) += damping * diag[i];
      solver.compute(damped);
      if (solver.info() == Eigen::Success) {
        const Eigen::VectorXd step = solver.solve(-ne.gradient);
        candidate = apply_step(result.graph, layout, step);
        new_cost = total_cost(candidate);
        if (std::isfinite(new_cost) && new_cost < cost) {
          accepted = true;
          break;
        }
      }
      damping *= 10.0;
    }
    if (!accepted) {
      result.status = SolverStatus::kConverged;
      break;
    }
    damping = std::max(damping / 10.0, 1e-12);
    const double decrease = (cost - new_cost) / cost;
    result.graph = std::move(candidate);
    cost = new_cost;
    result.iterations = iter + 1;
    result.cost_history.push_back(cost);
    if (decrease < config.relative_tolerance) {
      result.status = SolverStatus::kConverged;
      break;
    }
  }
  result.final_cost = cost;

  if (!full_rank(linearize(result.graph, layout).hessian)) {
    result.status = SolverStatus::kRankDeficient;
  }
  return result;
}

}  // namespace conetrack::global_map
