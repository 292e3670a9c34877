#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sensorsched {

/// Relative tolerance used by PSD and Loewner-order checks. Scaled by
/// max(1, trace) so that checks are independent of the magnitude of the
/// matrices involved.
inline constexpr double kPsdTol = 1e-9;

/// Reciprocal condition number below which an inversion is refused.
inline constexpr double kMinReciprocalCondition = 1e-13;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (M + Mᵀ) / 2.
Eigen::MatrixXd Symmetrize(const Eigen::Ref<const Eigen::MatrixXd>& m);

/// Smallest eigenvalue of the symmetric part of `m`.
double MinEigenvalue(const Eigen::Ref<const Eigen::MatrixXd>& m);

/// True iff `m` is symmetric within `tol` and its smallest eigenvalue is at
/// least -tol * max(1, trace(m)). Throws DimensionError for non-square input.
bool CheckPsd(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol = kPsdTol);

/// Inverse of a symmetric positive-definite matrix by LDLT solve against the
/// identity. Throws ConditioningError when the matrix is singular, indefinite,
/// or its estimated reciprocal condition number is below
/// kMinReciprocalCondition.
Eigen::MatrixXd InverseSpd(const Eigen::Ref<const Eigen::MatrixXd>& m);

/// Symmetric positive-semidefinite matrix. Symmetry is exact: the constructor
/// symmetrizes its input, so entries(i, j) == entries(j, i) bit for bit.
class CovarianceMatrix {
 public:
  /// Throws DimensionError for non-square input and std::invalid_argument when
  /// the input fails CheckPsd(tol).
  explicit CovarianceMatrix(const Eigen::Ref<const Eigen::MatrixXd>& m,
                            double tol = kPsdTol);

  static CovarianceMatrix Zero(int n);
  static CovarianceMatrix Identity(int n);
  static CovarianceMatrix ScaledIdentity(int n, double scale);

  int dim() const { return static_cast<int>(m_.rows()); }
  double trace() const { return m_.trace(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  struct Unchecked {};
  CovarianceMatrix(Eigen::MatrixXd m, Unchecked) : m_(std::move(m)) {}

  Eigen::MatrixXd m_;
};

enum class LoewnerOrdering { DominatedBy, Dominates, Equal, Incomparable };

std::string ToString(LoewnerOrdering ordering);

/// Relation of `p` to `q` in the Loewner order: DominatedBy when p ⪯ q
/// (q - p ⪰ 0), Dominates when p ⪰ q, Equal when both hold, Incomparable
/// otherwise. Eigenvalues are compared against -tol * max(1, Tr p, Tr q).
LoewnerOrdering LoewnerCompare(const CovarianceMatrix& p,
                               const CovarianceMatrix& q, double tol = kPsdTol);

/// Spectral radius max |λ_i(a)|.
double SpectralRadius(const Eigen::Ref<const Eigen::MatrixXd>& a);

/// Largest singular value of `a`.
double SpectralNorm(const Eigen::Ref<const Eigen::MatrixXd>& a);

struct InversionBoundEvaluation {
  Eigen::MatrixXd lhs;
  Eigen::MatrixXd rhs;
  /// Tr((M⁻¹+N)⁻¹ M⁻¹ A X Aᵀ M⁻¹ (M⁻¹+N)⁻¹).
  double correction_trace = 0.0;
  bool psd_gap_ok = false;
  /// Evaluated only when A is Schur stable.
  std::optional<bool> trace_bound_ok;
};

/// Evaluates both sides of the perturbation inequality
///   ((M + A X Aᵀ)⁻¹ + N)⁻¹ ⪯ (M⁻¹+N)⁻¹ + (M⁻¹+N)⁻¹ M⁻¹ A X Aᵀ M⁻¹ (M⁻¹+N)⁻¹
/// and the trace bound on the correction term. `tol` is relative to
/// max(1, Tr rhs) for the PSD gap and to Tr X for the trace bound.
InversionBoundEvaluation EvaluateInversionBound(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                const Eigen::Ref<const Eigen::MatrixXd>& n,
                                const CovarianceMatrix& x,
                                const Eigen::Ref<const Eigen::MatrixXd>& a,
                                double tol = 1e-8);

}  // namespace sensorsched
