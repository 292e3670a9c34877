#include "sensorsched/value_iteration.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "properties.hpp"
#include "scalar_oracle.hpp"
#include "test_support.hpp"

namespace sensorsched {
namespace {

using Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

SynthesisConfig ScalarConfig() {
  SynthesisConfig config;
  config.beta = 0.9;
  config.mesh = {1, 0.5, 3.0};
  config.cost = SensorCostSpec::Cardinality();
  config.convergence_tol = 1e-9;
  return config;
}

std::shared_ptr<const Mesh> MakeMesh(const MeshConfig& config) {
  return std::make_shared<const Mesh>(Mesh::Enumerate(config));
}

// Two-state, two-sensor system small enough to enumerate quickly.
SystemModel SmallModel() {
  MatrixXd a(2, 2), c(2, 2);
  a << 0.8, 0.3, -0.2, 0.9;
  c << 1.0, 0.0, 0.5, 1.0;
  return SystemModel(a, 0.2 * MatrixXd::Identity(2, 2), c,
                     Eigen::Vector2d(0.3, 0.6).asDiagonal());
}

SynthesisConfig SmallConfig() {
  SynthesisConfig config;
  config.beta = 0.8;
  config.mesh = {2, 0.25, 3.0};
  config.cost = SensorCostSpec::ExactlyOne();
  return config;
}

TEST(SynthesisConfig, Validate) {
  auto config = ScalarConfig();
  EXPECT_NO_THROW(config.Validate());
  config.beta = 1.0;
  EXPECT_THROW(config.Validate(), std::invalid_argument);
  config = ScalarConfig();
  config.threads = 0;
  EXPECT_THROW(config.Validate(), std::invalid_argument);
  config = ScalarConfig();
  config.convergence_tol = 0.0;
  EXPECT_THROW(config.Validate(), std::invalid_argument);
}

TEST(Bounds, SuboptimalityAndLipschitz) {
  SynthesisConfig config;
  config.mesh = {1, 1.0, 10.0};
  config.beta = 0.75;
  EXPECT_DOUBLE_EQ(SuboptimalityBound(config), 32.0);
  config.mesh = {3, 0.5, 15.0};
  config.beta = 0.95;
  EXPECT_NEAR(SuboptimalityBound(config), 3600.0, 3600.0 * 1e-9);
  config.mesh.epsilon = 0.0;
  EXPECT_EQ(SuboptimalityBound(config), 0.0);
  EXPECT_DOUBLE_EQ(LipschitzConstant(0.5), 2.0);
  EXPECT_NEAR(LipschitzConstant(0.95), 20.0, 1e-12);
}

TEST(Synthesize, MatchesScalarOracle) {
  tools::ScalarInstance base;
  for (const bool cardinality : {true, false}) {
    for (const bool tight : {true, false}) {
      tools::ScalarInstance inst = base;
      inst.cardinality_cost = cardinality;
      inst.tight_quantizer = tight;
      const auto result = tools::CheckScalarOracle(inst);
      EXPECT_TRUE(result.passed()) << result.first_failure;
    }
  }
  tools::ScalarInstance two_sensors;
  two_sensors.a = 1.1;
  two_sensors.c = {1.0, 0.4};
  two_sensors.v = {0.5, 0.05};
  two_sensors.epsilon = 0.25;
  two_sensors.gamma = 4.0;
  const auto result = tools::CheckScalarOracle(two_sensors);
  EXPECT_TRUE(result.passed()) << result.first_failure;
}

TEST(Synthesize, ScalarValuesMonotoneInCovariance) {
  const auto config = ScalarConfig();
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, test::ScalarModel(), mesh);
  for (std::size_t i = 1; i < mesh->size(); ++i) {
    EXPECT_GE(table.values[i], table.values[i - 1]) << i;
  }
  EXPECT_EQ(table.infeasible_count, 0u);
  EXPECT_LT(table.final_sup_change, config.convergence_tol);
}

TEST(Synthesize, ZeroDiscountStopsAfterTwoSweeps) {
  auto config = ScalarConfig();
  config.beta = 0.0;
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, test::ScalarModel(), mesh);
  EXPECT_EQ(table.iterations_run, 2);
  // With β = 0 the value is the cheapest stage cost: Tr(P) + 0 sensors.
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    EXPECT_DOUBLE_EQ(table.values[i], mesh->Point(i)(0, 0));
    EXPECT_EQ(table.Action(i), SensorSubset{});
  }
}

TEST(Synthesize, DeterministicAcrossThreadCounts) {
  auto config = SmallConfig();
  const auto mesh = MakeMesh(config.mesh);
  const auto one = Synthesize(config, SmallModel(), mesh);
  config.threads = 3;
  const auto three = Synthesize(config, SmallModel(), mesh);
  EXPECT_EQ(one.values, three.values);
  EXPECT_EQ(one.greedy_action, three.greedy_action);
  EXPECT_EQ(one.iterations_run, three.iterations_run);
}

TEST(Synthesize, FixedPointOfBellmanBackup) {
  const auto config = SmallConfig();
  const auto model = SmallModel();
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, model, mesh);
  ASSERT_LT(table.infeasible_count, mesh->size());
  int checked = 0;
  for (std::size_t i = 0; i < mesh->size(); i += 7) {
    const auto backup = BellmanBackup(model, mesh->CovariancePoint(i), table, config);
    if (!std::isfinite(table.values[i])) {
      EXPECT_FALSE(backup.value.finite());
      continue;
    }
    ASSERT_TRUE(backup.value.finite());
    EXPECT_NEAR(backup.value.value(), table.values[i], config.convergence_tol);
    EXPECT_EQ(backup.action, table.Action(i));
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Synthesize, TieGoesToLowestIndex) {
  // Two identical sensors: every choice ties.
  const SystemModel model(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, 0.1),
                          MatrixXd::Constant(2, 1, 1.0),
                          0.1 * MatrixXd::Identity(2, 2));
  auto config = ScalarConfig();
  config.cost = SensorCostSpec::ExactlyOne();
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, model, mesh);
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    EXPECT_EQ(table.Action(i), SensorSubset{1});
  }
}

TEST(Synthesize, NonConvergence) {
  auto config = ScalarConfig();
  config.max_iterations = 3;
  const auto mesh = MakeMesh(config.mesh);
  try {
    Synthesize(config, test::ScalarModel(), mesh);
    FAIL() << "expected NonConvergenceError";
  } catch (const NonConvergenceError& e) {
    EXPECT_GT(e.last_change(), config.convergence_tol);
  }
}

TEST(Synthesize, EveryPointInfeasible) {
  // f(P,S) ⪰ ... ≥ 0.9 for every P, above the budget 0.5.
  const SystemModel model(MatrixXd::Constant(1, 1, 2.0), MatrixXd::Constant(1, 1, 1.0),
                          MatrixXd::Constant(1, 1, 1.0), MatrixXd::Constant(1, 1, 100.0));
  SynthesisConfig config;
  config.beta = 0.9;
  config.mesh = {1, 0.25, 0.5};
  const auto mesh = MakeMesh(config.mesh);
  EXPECT_THROW(Synthesize(config, model, mesh), AssumptionViolationError);
}

TEST(ApplyBellmanOperator, InfeasibleSuccessorsPropagate) {
  // Unobservable growth: from the top of the mesh nothing stays inside.
  const SystemModel model(MatrixXd::Constant(1, 1, 1.2), MatrixXd::Constant(1, 1, 0.1),
                          MatrixXd::Constant(1, 1, 1.0), MatrixXd::Constant(1, 1, 0.1));
  auto config = ScalarConfig();
  config.cost = SensorCostSpec::Cardinality();
  const auto mesh = MakeMesh(config.mesh);
  const auto transitions = TransitionTable::Build(model, *mesh, config);
  std::vector<double> prev(mesh->size(), 0.0), next(mesh->size());
  std::vector<std::int32_t> argmin(mesh->size());
  prev.back() = kInf;
  ApplyBellmanOperator(transitions, config.beta, prev, next, argmin);
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    bool any = false;
    for (std::size_t a = 0; a < transitions.num_actions(); ++a) {
      const auto s = transitions.successor(i, a);
      any = any || (s != kNoSuccessor && std::isfinite(prev[s]));
    }
    EXPECT_EQ(std::isfinite(next[i]), any) << i;
    EXPECT_EQ(argmin[i] >= 0, any) << i;
  }
}

TEST(BellmanBackup, RejectsOffMeshPoint) {
  const auto config = ScalarConfig();
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, test::ScalarModel(), mesh);
  const CovarianceMatrix off(MatrixXd::Constant(1, 1, 0.3));
  EXPECT_THROW(BellmanBackup(test::ScalarModel(), off, table, config),
               std::invalid_argument);
  const CovarianceMatrix above(MatrixXd::Constant(1, 1, 4.0));
  EXPECT_THROW(BellmanBackup(test::ScalarModel(), above, table, config),
               std::invalid_argument);
}

TEST(Policy, RecoverValueRequiresBudget) {
  const auto config = ScalarConfig();
  const auto mesh = MakeMesh(config.mesh);
  auto table = std::make_shared<const ValueTable>(
      Synthesize(config, test::ScalarModel(), mesh));
  const Policy policy(table, test::ScalarModel(), config);
  const CovarianceMatrix inside(MatrixXd::Constant(1, 1, 1.3));
  EXPECT_TRUE(policy.RecoverValue(inside).finite());
  const CovarianceMatrix outside(MatrixXd::Constant(1, 1, 3.5));
  EXPECT_THROW(policy.RecoverValue(outside), std::domain_error);
  EXPECT_THROW(RecoverValue(*table, outside, test::ScalarModel(), config),
               std::domain_error);
}

TEST(Policy, RecoveredValueIsMonotoneOffMesh) {
  const auto config = ScalarConfig();
  const auto mesh = MakeMesh(config.mesh);
  auto table = std::make_shared<const ValueTable>(
      Synthesize(config, test::ScalarModel(), mesh));
  const Policy policy(table, test::ScalarModel(), config);
  double last = -1.0;
  for (double p = 0.0; p <= 3.0; p += 0.1) {
    const double v = policy.RecoverValue(CovarianceMatrix(MatrixXd::Constant(1, 1, p)))
                         .value();
    EXPECT_GE(v, last - 1e-12) << p;
    last = v;
  }
}

TEST(Policy, SelectsAdmissibleAction) {
  const auto config = SmallConfig();
  const auto mesh = MakeMesh(config.mesh);
  auto table = std::make_shared<const ValueTable>(Synthesize(config, SmallModel(), mesh));
  for (const auto lookahead : {Lookahead::OneLevel, Lookahead::TwoLevel}) {
    auto cfg = config;
    cfg.lookahead = lookahead;
    const Policy policy(table, SmallModel(), cfg);
    const auto s = policy.Select(CovarianceMatrix::Identity(2));
    EXPECT_EQ(s.size(), 1u);
    EXPECT_FALSE(policy.Name().empty());
  }
}

TEST(ValueTableArtifact, RoundTrip) {
  const auto config = SmallConfig();
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, SmallModel(), mesh);
  std::stringstream buffer;
  WriteValueTable(buffer, table, config, 42);
  const auto loaded = ReadValueTable(buffer, mesh);
  EXPECT_EQ(loaded.header.source_hash, 42u);
  EXPECT_EQ(loaded.header.beta, config.beta);
  EXPECT_EQ(loaded.header.mesh_hash, mesh->IdentityHash());
  EXPECT_EQ(loaded.header.cost_description, config.cost.Describe());
  EXPECT_EQ(loaded.table.values, table.values);
  EXPECT_EQ(loaded.table.greedy_action, table.greedy_action);
  EXPECT_EQ(loaded.table.actions, table.actions);
  EXPECT_EQ(loaded.table.iterations_run, table.iterations_run);
}

TEST(ValueTableArtifact, RejectsWrongMeshAndCorruption) {
  const auto config = SmallConfig();
  const auto mesh = MakeMesh(config.mesh);
  const auto table = Synthesize(config, SmallModel(), mesh);
  std::stringstream buffer;
  WriteValueTable(buffer, table, config);
  const std::string bytes = buffer.str();

  std::stringstream other_mesh(bytes);
  EXPECT_THROW(ReadValueTable(other_mesh, MakeMesh({2, 0.25, 2.0})),
               std::runtime_error);
  std::string flipped = bytes;
  flipped[bytes.size() - 20] ^= 0x10;
  std::stringstream corrupted(flipped);
  EXPECT_THROW(ReadValueTable(corrupted, mesh), std::runtime_error);
}

}  // namespace
}  // namespace sensorsched
