#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sensorsched/config.hpp"
#include "sensorsched/cost.hpp"
#include "sensorsched/simulation.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched::tools {

/// Largest finite g(S) over the admissible actions.
double MaxActionCost(const SensorCostSpec& cost, int m);

/// Discount horizon from the config, or the smallest one whose truncation
/// bound is below 1e-6.
int DiscountHorizon(const ExperimentConfig& config, int m);

struct BoundCheck {
  CovarianceMatrix p;
  /// J̄*(P) recovered from the table.
  double value_bound = 0.0;
  /// Truncated discounted cost of the policy from P.
  double policy_cost = 0.0;
  double truncation_bound = 0.0;
  /// policy_cost - (value_bound + truncation_bound + β·tol/(1-β)).
  double slack = 0.0;
  bool rollout_truncated = false;
  bool holds = false;
};

/// Simulated cost of the policy never exceeds the recovered value bound.
BoundCheck CheckValueBound(const Policy& policy, const CovarianceMatrix& p,
                           int horizon);

/// `count` distinct feasible mesh points drawn uniformly with `seed`.
std::vector<CovarianceMatrix> SampleFeasiblePoints(const ValueTable& table,
                                                   int count, std::uint64_t seed);

/// P(λ) = scale·λ·I for λ = 1..count.
std::vector<CovarianceMatrix> LambdaSweep(int n, double scale, int count);

struct CycleSummary {
  Rollout rollout;
  CycleReport cycle;
  double long_run_average = 0.0;
};

CycleSummary RunCycle(const SystemModel& model, const SelectionRule& rule,
                      const SensorCostSpec& cost, const CovarianceMatrix& p0,
                      const ExperimentSettings& settings);

/// Model, mesh and converged table for one configuration.
struct SynthesisRun {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const ValueTable> table;
  std::size_t conditioning_failures = 0;
};

SynthesisRun RunSynthesis(const ExperimentConfig& config);

}  // namespace sensorsched::tools
