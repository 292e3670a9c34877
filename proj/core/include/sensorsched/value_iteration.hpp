#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sensorsched/cost.hpp"
#include "sensorsched/mesh.hpp"
#include "sensorsched/psd.hpp"
#include "sensorsched/system_model.hpp"

namespace sensorsched {

namespace detail {
class LookaheadEvaluator;
}  // namespace detail

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last_change)
      : std::runtime_error(what), last_change_(last_change) {}
  double last_change() const { return last_change_; }

 private:
  double last_change_;
};

/// Raised when no mesh point admits a feasible action, i.e. no policy keeps
/// the covariance inside the trace budget.
class AssumptionViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the policy has no feasible action at the queried covariance.
class PolicyDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Quantizer { Theta, ThetaDoublePrime };
enum class Lookahead { OneLevel, TwoLevel };

std::string ToString(Quantizer q);
std::string ToString(Lookahead l);

struct SynthesisConfig {
  double beta = 0.95;
  MeshConfig mesh;
  SensorCostSpec cost = SensorCostSpec::ExactlyOne();
  Quantizer quantizer = Quantizer::ThetaDoublePrime;
  double convergence_tol = 1e-6;
  int max_iterations = 2000;
  /// Worker threads for transition precomputation and sweeps. Results do not
  /// depend on this value.
  int threads = 1;
  /// Lookahead depth used by Policy::SelectAction.
  Lookahead lookahead = Lookahead::TwoLevel;

  /// Throws std::invalid_argument / SpecificationError on bad fields.
  void Validate() const;
};

/// Integer grid image of the configured quantizer applied to `p`.
IntegerMatrix Quantize(const Eigen::Ref<const Eigen::MatrixXd>& p,
                       const SynthesisConfig& config);

inline constexpr std::uint32_t kNoSuccessor = 0xffffffffu;

/// Successor structure of the finite MDP on the mesh: for every point and
/// admissible action, the mesh index of quantize(f(P,S)) or kNoSuccessor
/// when it leaves the mesh (or the update is ill-conditioned). The successor
/// does not depend on the value function, so it is computed once.
class TransitionTable {
 public:
  static TransitionTable Build(const SystemModel& model, const Mesh& mesh,
                               const SynthesisConfig& config);

  std::size_t num_points() const { return trace_cost_.size(); }
  std::size_t num_actions() const { return actions_.size(); }
  const std::vector<SensorSubset>& actions() const { return actions_; }

  std::uint32_t successor(std::size_t point, std::size_t action) const {
    return successors_[point * actions_.size() + action];
  }
  /// Tr(Φ P) at the point.
  double trace_cost(std::size_t point) const { return trace_cost_[point]; }
  /// g(S) of the action (always finite).
  double action_cost(std::size_t action) const { return action_cost_[action]; }
  /// Number of (point, action) pairs whose update raised ConditioningError.
  std::size_t conditioning_failures() const { return conditioning_failures_; }

 private:
  std::vector<SensorSubset> actions_;
  std::vector<double> action_cost_;
  std::vector<double> trace_cost_;
  std::vector<std::uint32_t> successors_;
  std::size_t conditioning_failures_ = 0;
};

/// One application of the mesh-restricted Bellman operator to `prev`
/// (+inf entries mark infeasible points). Writes values and argmin action
/// indices (-1 when no action is feasible). Ties go to the first action in
/// canonical order.
void ApplyBellmanOperator(const TransitionTable& transitions, double beta,
                          std::span<const double> prev, std::span<double> next,
                          std::span<std::int32_t> argmin, int threads = 1);

struct ValueTable {
  std::shared_ptr<const Mesh> mesh;
  /// Admissible actions in canonical order; greedy_action indexes into this.
  std::vector<SensorSubset> actions;
  /// J̄ restricted to the mesh; +inf marks infeasible points.
  std::vector<double> values;
  std::vector<std::int32_t> greedy_action;
  int iterations_run = 0;
  double final_sup_change = 0.0;
  std::size_t infeasible_count = 0;

  ExtendedReal Value(std::size_t i) const { return ExtendedReal(values.at(i)); }
  std::optional<SensorSubset> Action(std::size_t i) const;
};

struct BackupResult {
  ExtendedReal value = ExtendedReal::Infeasible();
  std::optional<SensorSubset> action;
};

/// min_S { c(P,S) + β·table(quantize(f(P,S))) } at an arbitrary covariance.
/// Actions whose quantized successor is not a mesh point (or whose update is
/// ill-conditioned) are infeasible.
BackupResult OneStepLookahead(const SystemModel& model, const Eigen::Ref<const Eigen::MatrixXd>& p,
                              const ValueTable& table,
                              const SynthesisConfig& config);

/// The backup at a mesh point. Throws std::invalid_argument when `point` is
/// not on the mesh of `prev`.
BackupResult BellmanBackup(const SystemModel& model, const CovarianceMatrix& point,
                           const ValueTable& prev, const SynthesisConfig& config);

/// Synchronous value iteration from J̄₀ ≡ 0 until the sup-norm change over
/// feasible points is below convergence_tol. Throws NonConvergenceError or
/// AssumptionViolationError.
ValueTable Synthesize(const SynthesisConfig& config, const SystemModel& model,
                      std::shared_ptr<const Mesh> mesh);

/// Same, reusing a prebuilt transition table.
ValueTable Synthesize(const SynthesisConfig& config,
                      const TransitionTable& transitions,
                      std::shared_ptr<const Mesh> mesh);

/// J̄*(P) recovered from the converged table by one backup. Requires
/// Tr(P) ≤ γ (std::domain_error otherwise).
ExtendedReal RecoverValue(const ValueTable& table, const CovarianceMatrix& p,
                          const SystemModel& model, const SynthesisConfig& config);

/// 2εn² / (1-β)².
double SuboptimalityBound(const SynthesisConfig& config);
/// 1 / (1-β).
double LipschitzConstant(double beta);

/// Sensor-selection rule derived from a converged value table.
class SelectionRule {
 public:
  virtual ~SelectionRule() = default;
  /// Throws PolicyDomainError when no action is feasible at `p`.
  virtual SensorSubset Select(const CovarianceMatrix& p) const = 0;
  virtual std::string Name() const = 0;
};

/// argmin_S { c(P,S) + β·J̄*(f(P,S)) } with J̄* recovered off the mesh
/// (two-level lookahead), or with quantize(f(P,S)) read from the table
/// directly (one-level).
class Policy : public SelectionRule {
 public:
  Policy(std::shared_ptr<const ValueTable> table, SystemModel model,
         SynthesisConfig config);

  SensorSubset Select(const CovarianceMatrix& p) const override;
  std::string Name() const override;

  ExtendedReal RecoverValue(const CovarianceMatrix& p) const;
  const ValueTable& table() const { return *table_; }
  const SynthesisConfig& config() const { return config_; }
  const SystemModel& model() const { return model_; }

 private:
  std::shared_ptr<const ValueTable> table_;
  SystemModel model_;
  SynthesisConfig config_;
  std::shared_ptr<const detail::LookaheadEvaluator> evaluator_;
};

/// Binary value-table artifact:
///   "SSVTAB\0\0" | u32 version | u64 mesh identity hash | u64 source hash |
///   f64 beta | u32 quantizer | u32 lookahead | f64 tol | u32 max_iterations |
///   u32 iterations_run | f64 final_sup_change | u64 infeasible_count |
///   u32 cost length | cost description bytes | u32 action count |
///   per action: u64 sensor mask | u64 point count |
///   per point: f64 value, i32 action | u64 FNV-1a digest of everything above
struct PolicyArtifactHeader {
  std::uint64_t mesh_hash = 0;
  std::uint64_t source_hash = 0;
  double beta = 0.0;
  Quantizer quantizer = Quantizer::ThetaDoublePrime;
  Lookahead lookahead = Lookahead::TwoLevel;
  double convergence_tol = 0.0;
  int max_iterations = 0;
  std::string cost_description;
};

void WriteValueTable(std::ostream& out, const ValueTable& table,
                     const SynthesisConfig& config, std::uint64_t source_hash = 0);

struct ValueTableArtifact {
  PolicyArtifactHeader header;
  ValueTable table;
};

/// Throws std::runtime_error on malformed input, digest mismatch, or when the
/// artifact was produced for a different mesh.
ValueTableArtifact ReadValueTable(std::istream& in,
                                  std::shared_ptr<const Mesh> mesh);

}  // namespace sensorsched
