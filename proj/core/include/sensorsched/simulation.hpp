#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sensorsched/cost.hpp"
#include "sensorsched/psd.hpp"
#include "sensorsched/system_model.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched {

struct Rollout {
  /// P₀ … P_T (horizon + 1 entries unless truncated).
  std::vector<CovarianceMatrix> covariances;
  /// S₀ … S_{T-1}.
  std::vector<SensorSubset> actions;
  /// c(P_t, S_t) for each action.
  std::vector<double> stage_costs;
  int horizon = 0;
  /// Set when the rule had no feasible action before the horizon.
  bool truncated = false;
};

struct CycleReport {
  int period = 0;
  int phase_start = 0;
  std::vector<SensorSubset> cycle_actions;
  /// (1/p) Σ Tr(P_t) over one converged period.
  double average_trace_cost = 0.0;
  bool converged = false;
};

struct DiscountedCost {
  double estimate = 0.0;
  /// β^T (γ + g_max) / (1-β): bound on the discarded tail.
  double truncation_bound = 0.0;
};

/// Applies `rule` for `horizon` steps from P0, recording f-updates and
/// stage costs. A PolicyDomainError ends the rollout early with
/// `truncated = true`.
Rollout RolloutPolicy(const SystemModel& model, const SelectionRule& rule,
                      const SensorCostSpec& cost, const CovarianceMatrix& p0,
                      int horizon);

DiscountedCost EvaluateDiscountedCost(const Rollout& rollout, double beta,
                                      double gamma, double g_max);

/// Horizon T making the truncation bound β^T (γ + g_max)/(1-β) < `target`.
int TruncationHorizon(double beta, double gamma, double g_max,
                      double target = 1e-6);

/// Smallest period p ≤ p_max (and earliest phase for it) such that actions
/// are p-periodic through the end of the rollout and ‖P_{t+p} − P_t‖_max <
/// cycle_tol on the tail. The tail must cover at least two full periods.
CycleReport DetectCycle(const Rollout& rollout, double cycle_tol = 1e-8,
                        int p_max = 50);

/// (1/T) Σ_{t=1..T} Tr(P_t) over the whole rollout.
double LongRunAverageTrace(const Rollout& rollout);

/// True when `a` is a cyclic rotation of `b`.
bool SameCycle(const std::vector<SensorSubset>& a,
               const std::vector<SensorSubset>& b);

/// "{4,2,1}" for singleton cycles, "{{1,2},{3}}" otherwise.
std::string FormatCycle(const std::vector<SensorSubset>& cycle);

/// Always selects the same subset.
class FixedSelection : public SelectionRule {
 public:
  explicit FixedSelection(SensorSubset s) : s_(std::move(s)) {}
  SensorSubset Select(const CovarianceMatrix&) const override { return s_; }
  std::string Name() const override { return "fixed" + s_.ToString(); }

 private:
  SensorSubset s_;
};

/// One-step lookahead on the estimation cost: argmin_S Tr(Φ f(P,S)) + g(S),
/// ties to the first subset in canonical order.
class GreedySelection : public SelectionRule {
 public:
  GreedySelection(SystemModel model, SensorCostSpec cost);
  SensorSubset Select(const CovarianceMatrix& p) const override;
  std::string Name() const override { return "greedy"; }

 private:
  SystemModel model_;
  SensorCostSpec cost_;
  std::vector<SensorSubset> actions_;
  std::vector<Eigen::MatrixXd> info_;
};

struct SteadyStateChoice {
  int best_sensor = 0;
  double steady_trace = 0.0;
  /// Steady trace per sensor; nullopt where the fixed-sensor iteration
  /// diverged.
  std::vector<std::optional<double>> per_sensor;
};

/// Best single sensor by steady-state trace. Singletons whose iteration
/// diverges are skipped with a warning; DivergenceError if none converge.
SteadyStateChoice SteadyStatePolicy(const SystemModel& model, double tol = 1e-12,
                                    int max_iter = 100000);

}  // namespace sensorsched
