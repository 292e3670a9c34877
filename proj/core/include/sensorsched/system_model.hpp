#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sensorsched/psd.hpp"

namespace sensorsched {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Set of active sensors, stored as strictly increasing 1-based indices.
class SensorSubset {
 public:
  SensorSubset() = default;
  /// Throws std::invalid_argument unless indices are strictly increasing and
  /// each is >= 1.
  explicit SensorSubset(std::vector<int> indices);
  SensorSubset(std::initializer_list<int> indices)
      : SensorSubset(std::vector<int>(indices)) {}

  static SensorSubset FromMask(std::uint64_t mask);

  const std::vector<int>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(int sensor) const;
  bool IsSubsetOf(const SensorSubset& other) const;
  /// Bit i-1 set for each selected sensor i.
  std::uint64_t mask() const;
  /// "{1,3}" style; "{}" for the empty set.
  std::string ToString() const;

  friend bool operator==(const SensorSubset&, const SensorSubset&) = default;
  /// Canonical order: by cardinality, then lexicographic.
  friend bool operator<(const SensorSubset& a, const SensorSubset& b);

 private:
  std::vector<int> indices_;
};

struct Submodel {
  Eigen::MatrixXd c;  // |S| x n
  Eigen::MatrixXd v;  // |S| x |S|
};

struct SchurReport {
  bool stable = false;
  double spectral_radius = 0.0;
  std::vector<double> eigen_moduli;
};

/// Linear-Gaussian system x⁺ = A x + w, y = C x + v with w ~ N(0, W),
/// v ~ N(0, V). Row i of C (1-based) is sensor i.
class SystemModel {
 public:
  /// Validates shapes, W ≻ 0, V symmetric with positive diagonal. Throws
  /// DimensionError or std::invalid_argument.
  SystemModel(Eigen::MatrixXd a, Eigen::MatrixXd w, Eigen::MatrixXd c,
              Eigen::MatrixXd v);

  int n() const { return static_cast<int>(a_.rows()); }
  int m() const { return static_cast<int>(c_.rows()); }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& w() const { return w_; }
  const Eigen::MatrixXd& c() const { return c_; }
  const Eigen::MatrixXd& v() const { return v_; }

  /// Throws std::out_of_range if any index exceeds m().
  void Validate(const SensorSubset& s) const;

 private:
  Eigen::MatrixXd a_, w_, c_, v_;
};

/// Rows of C and the principal submatrix of V selected by `s`. Throws
/// std::out_of_range for bad indices and ConditioningError when V_S is not
/// positive definite.
Submodel ExtractSubmodel(const SystemModel& model, const SensorSubset& s);

/// C_Sᵀ V_S⁻¹ C_S; the n x n zero matrix for the empty selection.
Eigen::MatrixXd InformationMatrix(const SystemModel& model,
                                  const SensorSubset& s);

/// Kalman covariance recursion f(P,S) = ((A P Aᵀ + W)⁻¹ + C_Sᵀ V_S⁻¹ C_S)⁻¹.
CovarianceMatrix CovarianceUpdate(const SystemModel& model,
                                  const CovarianceMatrix& p,
                                  const SensorSubset& s);

/// Same recursion with a precomputed information matrix.
Eigen::MatrixXd CovarianceUpdate(const SystemModel& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& p,
                                 const Eigen::Ref<const Eigen::MatrixXd>& info);

SchurReport SchurStabilityReport(const SystemModel& model);

/// Iterates P ← f(P,S) from P = 0 until the max-abs change drops below `tol`.
/// Throws DivergenceError after `max_iter` iterations or if the iterate stops
/// being finite.
CovarianceMatrix FixedSensorSteadyState(const SystemModel& model,
                                        const SensorSubset& s, double tol = 1e-12,
                                        int max_iter = 100000);

struct PerturbationBoundEvaluation {
  Eigen::MatrixXd delta_f;
  bool holds_psd = false;
  bool trace_ok = false;
};

/// Perturbation bound for the recursion:
///   f(P + dP, S) ⪯ f(P, S) + Δf,  Tr Δf ≤ Tr dP,
/// with Δf = (M⁻¹+N)⁻¹ M⁻¹ A dP Aᵀ M⁻¹ (M⁻¹+N)⁻¹, M = A P Aᵀ + W,
/// N = C_Sᵀ V_S⁻¹ C_S.
PerturbationBoundEvaluation EvaluatePerturbationBound(const SystemModel& model,
                                const CovarianceMatrix& p,
                                const CovarianceMatrix& dp,
                                const SensorSubset& s, double tol = 1e-8);

}  // namespace sensorsched
