#pragma once

#include "conetrack/global_map/graph.hpp"

#include <string_view>

namespace conetrack::global_map {

struct SolverConfig {
  double relative_tolerance{1e-8};
  int max_iterations{100};
  double initial_damping{1e-4};
  double max_damping{1e12};
};

enum class SolverStatus { kConverged, kMaxIterations, kRankDeficient, kNoVariables };

std::string_view to_string(SolverStatus s);

struct OptimizeResult {
  Graph graph;
  double initial_cost{0.0};
  double final_cost{0.0};
  int iterations{0};
  SolverStatus status{SolverStatus::kConverged};
  std::vector<double> cost_history;  // accepted iterates, starting with the initial cost
};

/// Damped Gauss-Newton on the sparse normal equations. The first pose node is
/// held fixed as the gauge.
OptimizeResult optimize(const Graph& graph, const SolverConfig& config = {});

}  // namespace conetrack::global_map
