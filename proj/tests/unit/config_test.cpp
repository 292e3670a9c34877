#include "sensorsched/config.hpp"

#include <cmath>
#include <string>

#include <gtest/gtest.h>

namespace sensorsched {
namespace {

const char* kMinimal = R"({
  "system": {"A": [[0.5]], "W": [[0.1]], "C": [[1.0], [2.0]], "V": [0.1, 0.2]},
  "synthesis": {"epsilon": "1/4", "gamma": 3}
})";

std::string WithSynthesis(const std::string& synthesis) {
  return R"({"system": {"A": [[0.5]], "W": [[0.1]], "C": [[1.0]], "V": [[0.1]]},
             "synthesis": )" +
         synthesis + "}";
}

// Expects ParseConfig to fail with a message naming `key`.
void ExpectConfigError(const std::string& text, const std::string& key) {
  try {
    ParseConfig(text);
    ADD_FAILURE() << "expected ConfigError mentioning " << key;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
  }
}

TEST(ParseRational, Forms) {
  EXPECT_DOUBLE_EQ(ParseRational("0.5"), 0.5);
  EXPECT_DOUBLE_EQ(ParseRational("1e-1"), 0.1);
  EXPECT_EQ(ParseRational("3/7"), 3.0 / 7.0);
  EXPECT_EQ(ParseRational(" 3 / 5 "), 3.0 / 5.0);
  EXPECT_THROW(ParseRational("1/0"), ConfigError);
  EXPECT_THROW(ParseRational("abc"), ConfigError);
  EXPECT_THROW(ParseRational("1/2/3"), ConfigError);
  EXPECT_THROW(ParseRational(""), ConfigError);
}

TEST(ParseConfig, MinimalDefaults) {
  const auto cfg = ParseConfig(kMinimal);
  EXPECT_EQ(cfg.synthesis.mesh.n, 1);
  EXPECT_EQ(cfg.synthesis.mesh.epsilon, 0.25);
  EXPECT_EQ(cfg.epsilon_text, "1/4");
  EXPECT_EQ(cfg.synthesis.beta, 0.95);
  EXPECT_EQ(cfg.synthesis.quantizer, Quantizer::ThetaDoublePrime);
  EXPECT_EQ(cfg.synthesis.lookahead, Lookahead::TwoLevel);
  EXPECT_EQ(cfg.synthesis.cost.kind, SensorCostSpec::Kind::ExactlyOne);
  EXPECT_EQ(cfg.v(1, 1), 0.2);
  EXPECT_EQ(cfg.v(0, 1), 0.0);
  EXPECT_EQ(cfg.experiment.horizon, 400);
  EXPECT_EQ(cfg.output.directory, "out");
  EXPECT_EQ(cfg.Model().m(), 2);
}

TEST(ParseConfig, BenchmarkConfigFile) {
  const auto cfg = LoadConfig(SENSORSCHED_BENCHMARK_CONFIG);
  EXPECT_EQ(cfg.synthesis.mesh.n, 3);
  EXPECT_EQ(cfg.synthesis.mesh.gamma, 15.0);
  EXPECT_EQ(cfg.synthesis.mesh.TraceBudget(), 30);
  EXPECT_EQ(cfg.synthesis.beta, 0.95);
  EXPECT_EQ(cfg.Model().m(), 4);
}

TEST(ParseConfig, FullOptions) {
  const auto cfg = ParseConfig(R"({
    "system": {"A": [[0.5, 0], [0, 0.5]], "W": [[1, 0], [0, 1]],
               "C": [[1, 0], [0, 1]], "V": [[1, 0], [0, 1]]},
    "synthesis": {"beta": 0.8, "epsilon": 0.5, "gamma": 4,
                  "cost": {"kind": "custom",
                           "table": [{"sensors": [1], "cost": 0.5},
                                     {"sensors": [1, 2], "cost": "inf"}],
                           "weight": [[2, 0], [0, 1]]},
                  "quantizer": "theta", "lookahead": "one",
                  "convergence_tol": 1e-7, "max_iterations": 50, "threads": 2},
    "experiment": {"initial_covariances": ["identity", [[2, 0], [0, 1]]],
                   "lambda_sweep": {"scale": 0.1, "count": 5},
                   "horizon": 50, "discount_horizon": 60, "cycle_tol": 1e-6,
                   "max_period": 10, "sample_points": 3, "seed": 9},
    "output": {"directory": "results", "formats": ["csv"]}
  })");
  const auto& s = cfg.synthesis;
  EXPECT_EQ(s.beta, 0.8);
  EXPECT_EQ(s.quantizer, Quantizer::Theta);
  EXPECT_EQ(s.lookahead, Lookahead::OneLevel);
  EXPECT_EQ(s.max_iterations, 50);
  EXPECT_EQ(s.threads, 2);
  ASSERT_EQ(s.cost.kind, SensorCostSpec::Kind::Custom);
  EXPECT_EQ(s.cost.table.at(SensorSubset{1}), 0.5);
  EXPECT_TRUE(std::isinf(s.cost.table.at(SensorSubset{1, 2})));
  ASSERT_TRUE(s.cost.weight.has_value());
  EXPECT_EQ((*s.cost.weight)(0, 0), 2.0);
  ASSERT_EQ(cfg.experiment.initial_covariances.size(), 2u);
  EXPECT_EQ(cfg.experiment.initial_covariances[0], Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(cfg.experiment.initial_covariances[1](0, 0), 2.0);
  EXPECT_EQ(cfg.experiment.lambda_count, 5);
  EXPECT_EQ(cfg.experiment.discount_horizon, 60);
  EXPECT_EQ(cfg.experiment.seed, 9u);
  EXPECT_EQ(cfg.output.directory, "results");
}

TEST(ParseConfig, CostForms) {
  EXPECT_EQ(ParseConfig(WithSynthesis(R"({"epsilon": 1, "gamma": 2, "cost": "cardinality"})"))
                .synthesis.cost.kind,
            SensorCostSpec::Kind::Cardinality);
  const auto k = ParseConfig(WithSynthesis(
      R"({"epsilon": 1, "gamma": 2, "cost": {"kind": "at_most_k", "k": 1}})"));
  EXPECT_EQ(k.synthesis.cost.kind, SensorCostSpec::Kind::AtMostK);
  EXPECT_EQ(k.synthesis.cost.k, 1);
}

TEST(ParseConfig, ErrorsNameTheKey) {
  ExpectConfigError("{not json", "invalid JSON");
  ExpectConfigError(R"({"synthesis": {"epsilon": 1, "gamma": 1}})", "system");
  ExpectConfigError(R"({"system": {"A": [[1]], "W": [[1]], "C": [[1]]},
                        "synthesis": {"epsilon": 1, "gamma": 1}})",
                    "system.V");
  ExpectConfigError(R"({"system": {"A": [[1, 0]], "W": [[1]], "C": [[1]], "V": [1]},
                        "synthesis": {"epsilon": 1, "gamma": 1}})",
                    "system.A");
  ExpectConfigError(R"({"system": {"A": [[1]], "W": [[1]], "C": [[1, 2]], "V": [1]},
                        "synthesis": {"epsilon": 1, "gamma": 1}})",
                    "system.C");
  ExpectConfigError(R"({"system": {"A": [["x"]], "W": [[1]], "C": [[1]], "V": [1]},
                        "synthesis": {"epsilon": 1, "gamma": 1}})",
                    "system.A[0][0]");
  ExpectConfigError(WithSynthesis(R"({"gamma": 1})"), "synthesis.epsilon");
  ExpectConfigError(WithSynthesis(R"({"epsilon": "1/x", "gamma": 1})"),
                    "synthesis.epsilon");
  ExpectConfigError(WithSynthesis(R"({"epsilon": 1})"), "synthesis.gamma");
  ExpectConfigError(WithSynthesis(R"({"epsilon": 1, "gamma": 1, "quantizer": "omega"})"),
                    "synthesis.quantizer");
  ExpectConfigError(WithSynthesis(R"({"epsilon": 1, "gamma": 1, "lookahead": "three"})"),
                    "synthesis.lookahead");
  ExpectConfigError(WithSynthesis(R"({"epsilon": 1, "gamma": 1, "cost": "free"})"),
                    "synthesis.cost");
  ExpectConfigError(WithSynthesis(R"({"epsilon": 1, "gamma": 1, "beta": 1.5})"),
                    "synthesis");
  ExpectConfigError(WithSynthesis(R"({"epsilon": 1, "gamma": 1, "max_iterations": 2.5})"),
                    "synthesis.max_iterations");
}

TEST(ParseConfig, ModelIsValidatedWhileParsing) {
  ExpectConfigError(R"({"system": {"A": [[1]], "W": [[0]], "C": [[1]], "V": [1]},
                        "synthesis": {"epsilon": 1, "gamma": 1}})",
                    "W must be positive definite");
  auto cfg = ParseConfig(kMinimal);
  cfg.w(0, 0) = -1.0;
  EXPECT_THROW(cfg.Model(), ConfigError);
}

TEST(ExperimentConfig, Hashes) {
  const auto base = ParseConfig(kMinimal);
  auto changed_beta = base;
  changed_beta.synthesis.beta = 0.9;
  EXPECT_EQ(base.MeshHash(), changed_beta.MeshHash());
  EXPECT_NE(base.SynthesisHash(), changed_beta.SynthesisHash());
  auto changed_gamma = base;
  changed_gamma.synthesis.mesh.gamma = 4.0;
  EXPECT_NE(base.MeshHash(), changed_gamma.MeshHash());
  auto changed_horizon = base;
  changed_horizon.experiment.horizon = 10;
  EXPECT_EQ(base.SynthesisHash(), changed_horizon.SynthesisHash());
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(Fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(Fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(Fnv1a("foobar"), 0x85944171f73967e8ull);
}

}  // namespace
}  // namespace sensorsched
