#pragma once

#include <vector>

namespace sensorsched::tools {

/// Scalar instance x' = a x + w-noise, sensors y_i = c_i x + v_i-noise.
struct ScalarInstance {
  double a = 0.5;
  double w = 0.1;
  std::vector<double> c = {1.0};
  std::vector<double> v = {0.1};
  double beta = 0.9;
  double epsilon = 0.5;
  double gamma = 3.0;
  /// true: g(S) = |S| over all subsets; false: exactly one sensor, g = 0.
  bool cardinality_cost = true;
  /// false: plain rounding plus one (Θ); true: smallest dominating (Θ″).
  bool tight_quantizer = true;
  double tol = 1e-6;
  int max_iterations = 2000;
};

struct ScalarSolution {
  /// Values at p = ε·k, k = 0..K; +inf where infeasible.
  std::vector<double> values;
  /// Chosen subset per point as a bitmask (bit i = sensor i+1); -1 if none.
  std::vector<long> action_mask;
  int iterations = 0;
};

/// Brute-force value iteration on the grid {0, ε, .., Kε}, written without
/// any of the library's matrix machinery.
ScalarSolution SolveScalar(const ScalarInstance& inst);

}  // namespace sensorsched::tools
