#include "sensorsched/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sensorsched/log.hpp"

namespace sensorsched {

Rollout RolloutPolicy(const SystemModel& model, const SelectionRule& rule,
                      const SensorCostSpec& cost, const CovarianceMatrix& p0,
                      int horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  if (p0.dim() != model.n()) {
    throw DimensionError("RolloutPolicy: P0 has the wrong dimension");
  }
  Rollout out;
  out.horizon = horizon;
  out.covariances.reserve(horizon + 1);
  out.covariances.push_back(p0);
  for (int t = 0; t < horizon; ++t) {
    const CovarianceMatrix& p = out.covariances.back();
    SensorSubset s;
    try {
      s = rule.Select(p);
    } catch (const PolicyDomainError& e) {
      Warn(std::string("rollout stopped at t=") + std::to_string(t) + ": " +
           e.what());
      out.truncated = true;
      break;
    }
    out.stage_costs.push_back(StageCost(cost, p, s).ToDouble());
    out.actions.push_back(s);
    out.covariances.push_back(CovarianceUpdate(model, p, s));
  }
  return out;
}

DiscountedCost EvaluateDiscountedCost(const Rollout& rollout, double beta,
                                      double gamma, double g_max) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("beta must lie in [0, 1)");
  }
  DiscountedCost out;
  double discount = 1.0;
  for (double c : rollout.stage_costs) {
    out.estimate += discount * c;
    discount *= beta;
  }
  out.truncation_bound = discount * (gamma + g_max) / (1.0 - beta);
  return out;
}

int TruncationHorizon(double beta, double gamma, double g_max, double target) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("beta must lie in [0, 1)");
  }
  if (!(target > 0.0)) throw std::invalid_argument("target must be positive");
  const double scale = (gamma + g_max) / (1.0 - beta);
  if (scale < target || beta == 0.0) return 1;
  return static_cast<int>(std::floor(std::log(target / scale) / std::log(beta))) + 1;
}

namespace {

double MaxAbsDiff(const CovarianceMatrix& a, const CovarianceMatrix& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace

CycleReport DetectCycle(const Rollout& rollout, double cycle_tol, int p_max) {
  if (!(cycle_tol > 0.0)) throw std::invalid_argument("cycle_tol must be positive");
  if (p_max < 1) throw std::invalid_argument("p_max must be at least 1");
  CycleReport report;
  const int t_end = static_cast<int>(rollout.actions.size());
  const auto& cov = rollout.covariances;
  for (int p = 1; p <= p_max && 2 * p <= t_end; ++p) {
    // Walk back from the end while both conditions hold.
    int s = t_end - p;
    while (s > 0) {
      const int t = s - 1;
      if (!(rollout.actions[t] == rollout.actions[t + p])) break;
      if (MaxAbsDiff(cov[t], cov[t + p]) >= cycle_tol) break;
      --s;
    }
    // The last covariance pair (t = t_end - p) must also agree.
    bool tail_ok = true;
    for (int t = s; t + p <= t_end; ++t) {
      if (MaxAbsDiff(cov[t], cov[t + p]) >= cycle_tol) {
        tail_ok = false;
        break;
      }
    }
    if (!tail_ok || t_end - s < 2 * p) continue;
    report.period = p;
    report.phase_start = s;
    report.cycle_actions.assign(rollout.actions.begin() + s,
                                rollout.actions.begin() + s + p);
    double sum = 0.0;
    for (int t = t_end - p + 1; t <= t_end; ++t) sum += cov[t].trace();
    report.average_trace_cost = sum / p;
    report.converged = true;
    return report;
  }
  return report;
}

double LongRunAverageTrace(const Rollout& rollout) {
  const std::size_t t_end = rollout.covariances.size() - 1;
  if (t_end == 0) throw std::invalid_argument("rollout has no steps");
  double sum = 0.0;
  for (std::size_t t = 1; t <= t_end; ++t) sum += rollout.covariances[t].trace();
  return sum / static_cast<double>(t_end);
}

bool SameCycle(const std::vector<SensorSubset>& a,
               const std::vector<SensorSubset>& b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  const std::size_t p = a.size();
  for (std::size_t shift = 0; shift < p; ++shift) {
    bool match = true;
    for (std::size_t i = 0; i < p && match; ++i) {
      match = a[(i + shift) % p] == b[i];
    }
    if (match) return true;
  }
  return false;
}

std::string FormatCycle(const std::vector<SensorSubset>& cycle) {
  const bool singletons = std::all_of(
      cycle.begin(), cycle.end(), [](const auto& s) { return s.size() == 1; });
  std::string out = "{";
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    if (i) out += ",";
    out += singletons ? std::to_string(cycle[i].indices().front())
                      : cycle[i].ToString();
  }
  return out + "}";
}

GreedySelection::GreedySelection(SystemModel model, SensorCostSpec cost)
    : model_(std::move(model)), cost_(std::move(cost)) {
  cost_.Validate();
  actions_ = AdmissibleActions(cost_, model_.m());
  for (const auto& s : actions_) info_.push_back(InformationMatrix(model_, s));
}

SensorSubset GreedySelection::Select(const CovarianceMatrix& p) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = actions_.size();
  for (std::size_t k = 0; k < actions_.size(); ++k) {
    double candidate;
    try {
      candidate = WeightedTrace(cost_, CovarianceUpdate(model_, p.matrix(), info_[k])) +
                  SensorCost(cost_, actions_[k]).value();
    } catch (const ConditioningError&) {
      continue;
    }
    if (candidate < best) {
      best = candidate;
      arg = k;
    }
  }
  if (arg == actions_.size()) {
    throw PolicyDomainError("greedy: every update is ill-conditioned");
  }
  return actions_[arg];
}

SteadyStateChoice SteadyStatePolicy(const SystemModel& model, double tol,
                                    int max_iter) {
  SteadyStateChoice out;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= model.m(); ++i) {
    try {
      const double tr =
          FixedSensorSteadyState(model, SensorSubset({i}), tol, max_iter).trace();
      out.per_sensor.push_back(tr);
      if (tr < best) {
        best = tr;
        out.best_sensor = i;
      }
    } catch (const DivergenceError&) {
      Warn("sensor " + std::to_string(i) + " alone does not stabilize the filter");
      out.per_sensor.push_back(std::nullopt);
    }
  }
  if (out.best_sensor == 0) {
    throw DivergenceError("no single sensor yields a finite steady state");
  }
  out.steady_trace = best;
  return out;
}

}  // namespace sensorsched
