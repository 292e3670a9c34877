#include "sensorsched/value_iteration.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

#include "kernels.hpp"
#include "lookahead.hpp"
#include "sensorsched/log.hpp"

namespace sensorsched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename Body>
void ParallelBlocks(std::size_t count, int threads, Body&& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count < 2 * static_cast<std::size_t>(threads)) {
    body(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + threads - 1) / threads;
  std::vector<std::jthread> pool;
  for (int w = 0; w < threads; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

}  // namespace

std::string ToString(Quantizer q) {
  return q == Quantizer::Theta ? "theta" : "theta-pp";
}

std::string ToString(Lookahead l) {
  return l == Lookahead::OneLevel ? "one" : "two";
}

void SynthesisConfig::Validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("beta must lie in [0, 1)");
  }
  if (!(convergence_tol > 0.0)) {
    throw std::invalid_argument("convergence_tol must be positive");
  }
  if (max_iterations < 1) {
    throw std::invalid_argument("max_iterations must be >= 1");
  }
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  mesh.Validate();
  cost.Validate();
}

IntegerMatrix Quantize(const Eigen::Ref<const Eigen::MatrixXd>& p,
                       const SynthesisConfig& config) {
  return config.quantizer == Quantizer::Theta
             ? ThetaGrid(p, config.mesh.epsilon)
             : ThetaPPGrid(p, config.mesh.epsilon);
}

// ---------------------------------------------------------------------------
// Transition table and sweeps.

TransitionTable TransitionTable::Build(const SystemModel& model,
                                       const Mesh& mesh,
                                       const SynthesisConfig& config) {
  config.Validate();
  if (mesh.config() != config.mesh) {
    throw std::invalid_argument(
        "TransitionTable: mesh does not match the synthesis configuration");
  }
  if (mesh.config().n != model.n()) {
    throw DimensionError("TransitionTable: mesh and model dimensions differ");
  }
  if (mesh.size() >= kNoSuccessor) {
    throw CapacityError("TransitionTable: mesh too large for 32-bit indices");
  }

  TransitionTable table;
  table.actions_ = AdmissibleActions(config.cost, model.m());
  for (const auto& s : table.actions_) {
    table.action_cost_.push_back(SensorCost(config.cost, s).value());
  }
  const std::size_t num_actions = table.actions_.size();
  table.trace_cost_.resize(mesh.size());
  table.successors_.assign(mesh.size() * num_actions, kNoSuccessor);

  const detail::LookaheadEvaluator evaluator(model, table.actions_, config);
  std::atomic<std::size_t> failures{0};
  ParallelBlocks(mesh.size(), config.threads,
                 [&](std::size_t begin, std::size_t end) {
                   failures += evaluator.BuildRange(mesh, begin, end,
                                                    table.trace_cost_,
                                                    table.successors_);
                 });
  table.conditioning_failures_ = failures;
  if (table.conditioning_failures_ > 0) {
    Warn(std::to_string(table.conditioning_failures_) +
         " (point, action) updates were ill-conditioned and treated as "
         "infeasible");
  }
  return table;
}

void ApplyBellmanOperator(const TransitionTable& transitions, double beta,
                          std::span<const double> prev, std::span<double> next,
                          std::span<std::int32_t> argmin, int threads) {
  const std::size_t n = transitions.num_points();
  if (prev.size() != n || next.size() != n || argmin.size() != n) {
    throw DimensionError("ApplyBellmanOperator: table size mismatch");
  }
  const std::size_t num_actions = transitions.num_actions();
  ParallelBlocks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = kInf;
      std::int32_t best_action = -1;
      const double trace = transitions.trace_cost(i);
      for (std::size_t a = 0; a < num_actions; ++a) {
        const std::uint32_t s = transitions.successor(i, a);
        if (s == kNoSuccessor) continue;
        const double v = prev[s];
        if (v == kInf) continue;
        const double candidate =
            trace + transitions.action_cost(a) + beta * v;
        if (candidate < best) {
          best = candidate;
          best_action = static_cast<std::int32_t>(a);
        }
      }
      next[i] = best;
      argmin[i] = best_action;
    }
  });
}

std::optional<SensorSubset> ValueTable::Action(std::size_t i) const {
  const auto a = greedy_action.at(i);
  if (a < 0) return std::nullopt;
  return actions.at(static_cast<std::size_t>(a));
}

ValueTable Synthesize(const SynthesisConfig& config,
                      const TransitionTable& transitions,
                      std::shared_ptr<const Mesh> mesh) {
  config.Validate();
  if (!mesh || mesh->size() != transitions.num_points()) {
    throw std::invalid_argument("Synthesize: mesh does not match transitions");
  }
  const std::size_t n = mesh->size();
  ValueTable table;
  table.mesh = mesh;
  table.actions = transitions.actions();
  table.values.assign(n, 0.0);
  table.greedy_action.assign(n, -1);
  std::vector<double> next(n);

  double change = kInf;
  bool converged = false;
  for (int k = 1; k <= config.max_iterations; ++k) {
    ApplyBellmanOperator(transitions, config.beta, table.values, next,
                         table.greedy_action, config.threads);
    change = 0.0;
    bool feasibility_changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const bool was = table.values[i] != kInf;
      const bool is = next[i] != kInf;
      if (was != is) {
        feasibility_changed = true;
      } else if (is) {
        change = std::max(change, std::abs(next[i] - table.values[i]));
      }
    }
    table.values.swap(next);
    table.iterations_run = k;
    table.final_sup_change = change;
    if (!feasibility_changed && change < config.convergence_tol) {
      converged = true;
      break;
    }
  }

  table.infeasible_count = static_cast<std::size_t>(
      std::count(table.values.begin(), table.values.end(), kInf));
  if (table.infeasible_count == n) {
    throw AssumptionViolationError(
        "every mesh point is infeasible: no sensor selection keeps the "
        "quantized covariance inside the trace budget");
  }
  if (!converged) {
    throw NonConvergenceError(
        "value iteration did not converge within " +
            std::to_string(config.max_iterations) +
            " sweeps (last sup change " + std::to_string(change) + ")",
        change);
  }
  if (table.infeasible_count > 0) {
    Warn(std::to_string(table.infeasible_count) + " of " + std::to_string(n) +
         " mesh points have no action whose quantized successor stays in the "
         "mesh; they are excluded from the value function");
  }
  return table;
}

ValueTable Synthesize(const SynthesisConfig& config, const SystemModel& model,
                      std::shared_ptr<const Mesh> mesh) {
  if (!mesh) throw std::invalid_argument("Synthesize: null mesh");
  const TransitionTable transitions =
      TransitionTable::Build(model, *mesh, config);
  return Synthesize(config, transitions, std::move(mesh));
}

// ---------------------------------------------------------------------------
// Off-mesh evaluation.

BackupResult OneStepLookahead(const SystemModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& p,
                              const ValueTable& table,
                              const SynthesisConfig& config) {
  const detail::LookaheadEvaluator evaluator(model, table.actions, config);
  return evaluator.Backup(p, table);
}

BackupResult BellmanBackup(const SystemModel& model,
                           const CovarianceMatrix& point,
                           const ValueTable& prev,
                           const SynthesisConfig& config) {
  if (!prev.mesh) throw std::invalid_argument("BellmanBackup: table has no mesh");
  if (!prev.mesh->Lookup(point)) {
    throw std::invalid_argument("BellmanBackup: point is not on the mesh");
  }
  return OneStepLookahead(model, point.matrix(), prev, config);
}

namespace {

void RequireWithinBudget(const CovarianceMatrix& p,
                         const SynthesisConfig& config) {
  const double gamma = config.mesh.gamma;
  if (p.trace() > gamma + 1e-9 * std::max(1.0, gamma)) {
    throw std::domain_error("covariance trace " + std::to_string(p.trace()) +
                            " exceeds the budget " + std::to_string(gamma));
  }
}

}  // namespace

ExtendedReal RecoverValue(const ValueTable& table, const CovarianceMatrix& p,
                          const SystemModel& model,
                          const SynthesisConfig& config) {
  RequireWithinBudget(p, config);
  return OneStepLookahead(model, p.matrix(), table, config).value;
}

double SuboptimalityBound(const SynthesisConfig& config) {
  const double n = config.mesh.n;
  const double gap = 1.0 - config.beta;
  return 2.0 * config.mesh.epsilon * n * n / (gap * gap);
}

double LipschitzConstant(double beta) { return 1.0 / (1.0 - beta); }

// ---------------------------------------------------------------------------
// Policy.

Policy::Policy(std::shared_ptr<const ValueTable> table, SystemModel model,
               SynthesisConfig config)
    : table_(std::move(table)),
      model_(std::move(model)),
      config_(std::move(config)) {
  if (!table_ || !table_->mesh) {
    throw std::invalid_argument("Policy: value table without mesh");
  }
  if (table_->mesh->config().n != model_.n()) {
    throw DimensionError("Policy: model dimension does not match the mesh");
  }
  evaluator_ = std::make_shared<const detail::LookaheadEvaluator>(
      model_, table_->actions, config_);
}

ExtendedReal Policy::RecoverValue(const CovarianceMatrix& p) const {
  RequireWithinBudget(p, config_);
  return evaluator_->Backup(p.matrix(), *table_).value;
}

SensorSubset Policy::Select(const CovarianceMatrix& p) const {
  if (p.dim() != model_.n()) {
    throw DimensionError("Policy::Select: dimension mismatch");
  }
  if (config_.lookahead == Lookahead::OneLevel) {
    auto result = evaluator_->Backup(p.matrix(), *table_);
    if (!result.action) {
      throw PolicyDomainError("no feasible action at covariance with trace " +
                              std::to_string(p.trace()));
    }
    return *result.action;
  }

  const double gamma = config_.mesh.gamma;
  const double budget = gamma + 1e-9 * std::max(1.0, gamma);
  const double trace_cost = WeightedTrace(config_.cost, p.matrix());
  const auto posteriors = evaluator_->Posteriors(p.matrix());
  double best = kInf;
  std::optional<std::size_t> best_action;
  for (std::size_t a = 0; a < posteriors.size(); ++a) {
    if (!posteriors[a] || posteriors[a]->trace() > budget) continue;
    const BackupResult next = evaluator_->Backup(*posteriors[a], *table_);
    if (!next.value.finite()) continue;
    const double candidate = trace_cost + evaluator_->action_cost(a) +
                             config_.beta * next.value.value();
    if (candidate < best) {
      best = candidate;
      best_action = a;
    }
  }
  if (!best_action) {
    throw PolicyDomainError("no feasible action at covariance with trace " +
                            std::to_string(p.trace()));
  }
  return table_->actions[*best_action];
}

std::string Policy::Name() const {
  return "vi(eps=" + std::to_string(config_.mesh.epsilon) +
         ",lookahead=" + ToString(config_.lookahead) + ")";
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

constexpr char kTableMagic[8] = {'S', 'S', 'V', 'T', 'A', 'B', 0, 0};
constexpr std::uint32_t kTableVersion = 1;
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

class DigestWriter {
 public:
  explicit DigestWriter(std::ostream& out) : out_(out) {}
  template <typename T>
  void Put(const T& value) {
    Bytes(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void Bytes(const char* data, std::size_t size) {
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= static_cast<unsigned char>(data[i]);
      hash_ *= kFnvPrime;
    }
    out_.write(data, static_cast<std::streamsize>(size));
  }
  std::uint64_t digest() const { return hash_; }

 private:
  std::ostream& out_;
  std::uint64_t hash_ = kFnvOffset;
};

class DigestReader {
 public:
  explicit DigestReader(std::istream& in) : in_(in) {}
  template <typename T>
  T Get() {
    T value{};
    Bytes(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
  }
  void Bytes(char* data, std::size_t size) {
    if (!in_.read(data, static_cast<std::streamsize>(size))) {
      throw std::runtime_error("value-table artifact: unexpected end of input");
    }
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= static_cast<unsigned char>(data[i]);
      hash_ *= kFnvPrime;
    }
  }
  std::uint64_t digest() const { return hash_; }

 private:
  std::istream& in_;
  std::uint64_t hash_ = kFnvOffset;
};

}  // namespace

void WriteValueTable(std::ostream& out, const ValueTable& table,
                     const SynthesisConfig& config, std::uint64_t source_hash) {
  static_assert(std::endian::native == std::endian::little);
  if (!table.mesh) throw std::invalid_argument("WriteValueTable: no mesh");
  DigestWriter w(out);
  w.Bytes(kTableMagic, sizeof(kTableMagic));
  w.Put<std::uint32_t>(kTableVersion);
  w.Put<std::uint64_t>(table.mesh->IdentityHash());
  w.Put<std::uint64_t>(source_hash);
  w.Put<double>(config.beta);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(config.quantizer));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(config.lookahead));
  w.Put<double>(config.convergence_tol);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(config.max_iterations));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(table.iterations_run));
  w.Put<double>(table.final_sup_change);
  w.Put<std::uint64_t>(table.infeasible_count);
  const std::string cost = config.cost.Describe();
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(cost.size()));
  w.Bytes(cost.data(), cost.size());
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(table.actions.size()));
  for (const auto& s : table.actions) w.Put<std::uint64_t>(s.mask());
  w.Put<std::uint64_t>(table.values.size());
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    w.Put<double>(table.values[i]);
    w.Put<std::int32_t>(table.greedy_action[i]);
  }
  const std::uint64_t digest = w.digest();
  out.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
  if (!out) throw std::runtime_error("value-table artifact: write failed");
}

ValueTableArtifact ReadValueTable(std::istream& in,
                                  std::shared_ptr<const Mesh> mesh) {
  if (!mesh) throw std::invalid_argument("ReadValueTable: null mesh");
  DigestReader r(in);
  char magic[8];
  r.Bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kTableMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("value-table artifact: bad magic");
  }
  if (r.Get<std::uint32_t>() != kTableVersion) {
    throw std::runtime_error("value-table artifact: unsupported version");
  }
  ValueTableArtifact art;
  auto& h = art.header;
  h.mesh_hash = r.Get<std::uint64_t>();
  h.source_hash = r.Get<std::uint64_t>();
  h.beta = r.Get<double>();
  h.quantizer = static_cast<Quantizer>(r.Get<std::uint32_t>());
  h.lookahead = static_cast<Lookahead>(r.Get<std::uint32_t>());
  h.convergence_tol = r.Get<double>();
  h.max_iterations = static_cast<int>(r.Get<std::uint32_t>());
  auto& t = art.table;
  t.iterations_run = static_cast<int>(r.Get<std::uint32_t>());
  t.final_sup_change = r.Get<double>();
  t.infeasible_count = r.Get<std::uint64_t>();
  h.cost_description.resize(r.Get<std::uint32_t>());
  r.Bytes(h.cost_description.data(), h.cost_description.size());
  const auto num_actions = r.Get<std::uint32_t>();
  for (std::uint32_t a = 0; a < num_actions; ++a) {
    t.actions.push_back(SensorSubset::FromMask(r.Get<std::uint64_t>()));
  }
  const auto count = r.Get<std::uint64_t>();
  if (h.mesh_hash != mesh->IdentityHash() || count != mesh->size()) {
    throw std::runtime_error(
        "value-table artifact was produced for a different mesh");
  }
  t.values.resize(count);
  t.greedy_action.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    t.values[i] = r.Get<double>();
    t.greedy_action[i] = r.Get<std::int32_t>();
    if (t.greedy_action[i] >= static_cast<std::int32_t>(num_actions)) {
      throw std::runtime_error("value-table artifact: action out of range");
    }
  }
  const std::uint64_t computed = r.digest();
  std::uint64_t stored = 0;
  if (!in.read(reinterpret_cast<char*>(&stored), sizeof(stored)) ||
      stored != computed) {
    throw std::runtime_error("value-table artifact: digest mismatch");
  }
  t.mesh = std::move(mesh);
  return art;
}

}  // namespace sensorsched
