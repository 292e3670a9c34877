#include "experiment.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace sensorsched::tools {

double MaxActionCost(const SensorCostSpec& cost, int m) {
  double g_max = 0.0;
  for (const auto& s : AdmissibleActions(cost, m)) {
    g_max = std::max(g_max, SensorCost(cost, s).value());
  }
  return g_max;
}

int DiscountHorizon(const ExperimentConfig& config, int m) {
  if (config.experiment.discount_horizon > 0) {
    return config.experiment.discount_horizon;
  }
  const auto& s = config.synthesis;
  return TruncationHorizon(s.beta, s.mesh.gamma, MaxActionCost(s.cost, m));
}

BoundCheck CheckValueBound(const Policy& policy, const CovarianceMatrix& p,
                           int horizon) {
  const auto& config = policy.config();
  BoundCheck out{p};
  out.value_bound = policy.RecoverValue(p).ToDouble();
  const Rollout rollout =
      RolloutPolicy(policy.model(), policy, config.cost, p, horizon);
  const double g_max = MaxActionCost(config.cost, policy.model().m());
  const auto cost =
      EvaluateDiscountedCost(rollout, config.beta, config.mesh.gamma, g_max);
  out.policy_cost = cost.estimate;
  out.truncation_bound = cost.truncation_bound;
  out.rollout_truncated = rollout.truncated;
  const double allowance =
      config.beta * config.convergence_tol / (1.0 - config.beta);
  out.slack = out.policy_cost -
              (out.value_bound + out.truncation_bound + allowance);
  out.holds = !rollout.truncated && out.slack <= 0.0;
  return out;
}

std::vector<CovarianceMatrix> SampleFeasiblePoints(const ValueTable& table,
                                                   int count, std::uint64_t seed) {
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    if (table.values[i] != std::numeric_limits<double>::infinity()) {
      feasible.push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  std::sample(feasible.begin(), feasible.end(), std::back_inserter(picked),
              std::min<std::size_t>(count, feasible.size()), rng);
  std::vector<CovarianceMatrix> out;
  for (auto i : picked) out.push_back(table.mesh->CovariancePoint(i));
  return out;
}

std::vector<CovarianceMatrix> LambdaSweep(int n, double scale, int count) {
  std::vector<CovarianceMatrix> out;
  for (int lambda = 1; lambda <= count; ++lambda) {
    out.push_back(CovarianceMatrix::ScaledIdentity(n, scale * lambda));
  }
  return out;
}

CycleSummary RunCycle(const SystemModel& model, const SelectionRule& rule,
                      const SensorCostSpec& cost, const CovarianceMatrix& p0,
                      const ExperimentSettings& settings) {
  CycleSummary out;
  out.rollout = RolloutPolicy(model, rule, cost, p0, settings.horizon);
  out.cycle = DetectCycle(out.rollout, settings.cycle_tol, settings.max_period);
  if (out.rollout.covariances.size() > 1) {
    out.long_run_average = LongRunAverageTrace(out.rollout);
  }
  return out;
}

SynthesisRun RunSynthesis(const ExperimentConfig& config) {
  const SystemModel model = config.Model();
  SynthesisRun run;
  EnumerationOptions options;
  options.threads = config.synthesis.threads;
  run.mesh = std::make_shared<const Mesh>(
      Mesh::Enumerate(config.synthesis.mesh, options));
  const auto transitions =
      TransitionTable::Build(model, *run.mesh, config.synthesis);
  run.conditioning_failures = transitions.conditioning_failures();
  run.table = std::make_shared<const ValueTable>(
      Synthesize(config.synthesis, transitions, run.mesh));
  return run;
}

}  // namespace sensorsched::tools
