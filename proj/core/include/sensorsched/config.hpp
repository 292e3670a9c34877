#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sensorsched/system_model.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentSettings {
  /// Rollout starting points; identity when the list is empty.
  std::vector<Eigen::MatrixXd> initial_covariances;
  /// P(λ) = scale·λ·I for λ = 1..count.
  double lambda_scale = 0.01;
  int lambda_count = 250;
  /// Horizon used for rollouts and cycle detection.
  int horizon = 400;
  /// Horizon used for discounted-cost estimates; 0 picks the smallest horizon
  /// with truncation bound below 1e-6.
  int discount_horizon = 0;
  double cycle_tol = 1e-8;
  int max_period = 50;
  /// Mesh points sampled for the value/policy inequality check.
  int sample_points = 100;
  std::uint64_t seed = 0;
};

struct OutputSettings {
  std::filesystem::path directory = "out";
  std::vector<std::string> formats = {"csv"};
};

struct ExperimentConfig {
  Eigen::MatrixXd a, w, c, v;
  SynthesisConfig synthesis;
  /// Text of epsilon as written (e.g. "3/7"), for reports.
  std::string epsilon_text;
  ExperimentSettings experiment;
  OutputSettings output;

  /// Builds the validated model; throws ConfigError.
  SystemModel Model() const;
  /// Hash of the fields that determine the mesh (n, ε, γ).
  std::uint64_t MeshHash() const;
  /// Hash of everything that determines the value table.
  std::uint64_t SynthesisHash() const;
};

/// Parses "0.5", "1e-1" or an exact ratio "3/7". Throws ConfigError.
double ParseRational(std::string_view text);

/// Parses a JSON document. Every dimension and range is checked before
/// returning; the first problem found is reported as a ConfigError naming
/// the offending key.
ExperimentConfig ParseConfig(std::string_view json_text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

/// 64-bit FNV-1a of a byte string.
std::uint64_t Fnv1a(std::string_view bytes);

}  // namespace sensorsched
