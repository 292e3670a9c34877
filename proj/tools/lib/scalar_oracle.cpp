#include "scalar_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace sensorsched::tools {

ScalarSolution SolveScalar(const ScalarInstance& inst) {
  const double inf = std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(inst.c.size());
  const long budget = static_cast<long>(std::floor(inst.gamma / inst.epsilon + 1e-12));

  // Subsets by size, then lexicographically by their sorted members.
  std::vector<long> masks;
  for (long s = 0; s < (1L << m); ++s) {
    const int size = std::popcount(static_cast<unsigned long>(s));
    if (inst.cardinality_cost || size == 1) masks.push_back(s);
  }
  auto members = [](long s) {
    std::vector<int> out;
    for (int i = 0; i < 62; ++i) {
      if (s >> i & 1) out.push_back(i);
    }
    return out;
  };
  std::stable_sort(masks.begin(), masks.end(), [&](long x, long y) {
    const int px = std::popcount(static_cast<unsigned long>(x));
    const int py = std::popcount(static_cast<unsigned long>(y));
    if (px != py) return px < py;
    return members(x) < members(y);
  });

  // successor[k][j]: grid index reached from ε·k under subset j, or -1.
  const std::size_t points = static_cast<std::size_t>(budget) + 1;
  std::vector<std::vector<long>> next(points, std::vector<long>(masks.size(), -1));
  for (long k = 0; k <= budget; ++k) {
    const double p = inst.epsilon * static_cast<double>(k);
    const double prior = inst.a * inst.a * p + inst.w;
    for (std::size_t j = 0; j < masks.size(); ++j) {
      double info = 0.0;
      for (int i : members(masks[j])) info += inst.c[i] * inst.c[i] / inst.v[i];
      const double post = info == 0.0 ? prior : 1.0 / (1.0 / prior + info);
      const double q = post / inst.epsilon;
      long z = std::lround(q);
      if (inst.tight_quantizer) {
        const double grid = inst.epsilon * static_cast<double>(z);
        if (grid - post < -1e-9 * std::max(1.0, grid)) ++z;
      } else {
        ++z;
      }
      if (z >= 0 && z <= budget) next[k][j] = z;
    }
  }

  ScalarSolution sol;
  std::vector<double> j_prev(points, 0.0), j_next(points);
  sol.action_mask.assign(points, -1);
  for (int it = 1; it <= inst.max_iterations; ++it) {
    double change = 0.0;
    bool same_support = true;
    for (std::size_t k = 0; k < points; ++k) {
      double best = inf;
      long arg = -1;
      for (std::size_t j = 0; j < masks.size(); ++j) {
        const long z = next[k][j];
        if (z < 0 || std::isinf(j_prev[z])) continue;
        const double g = inst.cardinality_cost
                             ? std::popcount(static_cast<unsigned long>(masks[j]))
                             : 0.0;
        const double cand = inst.epsilon * static_cast<double>(k) + g +
                            inst.beta * j_prev[z];
        if (cand < best) {
          best = cand;
          arg = masks[j];
        }
      }
      j_next[k] = best;
      sol.action_mask[k] = arg;
      if (std::isinf(best) != std::isinf(j_prev[k])) same_support = false;
      if (!std::isinf(best) && !std::isinf(j_prev[k])) {
        change = std::max(change, std::abs(best - j_prev[k]));
      }
    }
    std::swap(j_prev, j_next);
    sol.iterations = it;
    if (same_support && change < inst.tol) break;
  }
  sol.values = j_prev;
  return sol;
}

}  // namespace sensorsched::tools
