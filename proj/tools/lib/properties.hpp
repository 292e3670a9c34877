#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sensorsched/system_model.hpp"
#include "scalar_oracle.hpp"

namespace sensorsched::tools {

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  /// Largest violation seen, in the property's own units (0 when none).
  double worst = 0.0;
  /// Description of the first failing case.
  std::string first_failure;

  bool passed() const { return cases > 0 && failures == 0; }
};

/// Random instances for the suites. All draws come from one engine so a
/// seed reproduces a whole run.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  int Dim(int lo = 1, int hi = 4);
  double Uniform(double lo, double hi);
  Eigen::MatrixXd Gaussian(int rows, int cols);
  /// B Bᵀ for a random B of random rank, scaled to trace ≈ `scale`.
  Eigen::MatrixXd Psd(int n, double scale = 5.0);
  /// Psd(n) + floor·I.
  Eigen::MatrixXd Pd(int n, double floor = 0.2, double scale = 5.0);
  /// Random A rescaled to the given spectral norm.
  Eigen::MatrixXd WithSpectralNorm(int n, double norm);
  /// Model with n states, m in [1, 4] sensors, W ≻ 0 and diagonal V.
  SystemModel Model(int n, double a_norm = 1.2);
  SensorSubset Subset(int m);
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

PropertyResult CheckQuantizerOrdering(std::uint64_t seed, int cases = 1000);
PropertyResult CheckMatrixInversionBound(std::uint64_t seed, int cases = 100);
PropertyResult CheckPerturbationBound(std::uint64_t seed, int cases = 1000);
PropertyResult CheckMonotoneInCovariance(std::uint64_t seed, int cases = 1000);
PropertyResult CheckMonotoneInSensors(std::uint64_t seed, int cases = 1000);
PropertyResult CheckContraction(std::uint64_t seed, int pairs = 50);
PropertyResult CheckDualFormula(std::uint64_t seed, int cases = 1000);
/// Full pipeline against SolveScalar: every mesh value to 1e-8 and every
/// greedy action.
PropertyResult CheckScalarOracle(const ScalarInstance& instance);

/// Every suite above with its default case count.
std::vector<PropertyResult> RunAllSuites(std::uint64_t seed);

/// Covariance update in gain form with the Joseph-stabilized posterior,
/// independent of the information-form implementation.
Eigen::MatrixXd GainFormUpdate(const SystemModel& model, const Eigen::MatrixXd& p,
                               const SensorSubset& s);

}  // namespace sensorsched::tools
