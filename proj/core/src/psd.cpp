#include "sensorsched/psd.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "kernels.hpp"

namespace sensorsched {

namespace {

void RequireSquare(const Eigen::Ref<const Eigen::MatrixXd>& m,
                   const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

}  // namespace

Eigen::MatrixXd Symmetrize(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  RequireSquare(m, "Symmetrize");
  return 0.5 * (m + m.transpose());
}

double MinEigenvalue(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  RequireSquare(m, "MinEigenvalue");
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Symmetrize(m),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool CheckPsd(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol) {
  RequireSquare(m, "CheckPsd");
  if (!m.allFinite()) return false;
  if (((m - m.transpose()).cwiseAbs().array() > tol).any()) return false;
  const double scale = std::max(1.0, m.trace());
  return MinEigenvalue(m) >= -tol * scale;
}

Eigen::MatrixXd InverseSpd(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  RequireSquare(m, "InverseSpd");
  return detail::InvSpd<Eigen::Dynamic>(m);
}

CovarianceMatrix::CovarianceMatrix(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                   double tol)
    : m_(Symmetrize(m)) {
  if (!CheckPsd(m_, tol)) {
    throw std::invalid_argument(
        "CovarianceMatrix: input is not symmetric positive semidefinite");
  }
}

CovarianceMatrix CovarianceMatrix::Zero(int n) {
  return CovarianceMatrix(Eigen::MatrixXd::Zero(n, n), Unchecked{});
}

CovarianceMatrix CovarianceMatrix::Identity(int n) {
  return CovarianceMatrix(Eigen::MatrixXd::Identity(n, n), Unchecked{});
}

CovarianceMatrix CovarianceMatrix::ScaledIdentity(int n, double scale) {
  if (!(scale >= 0.0)) {
    throw std::invalid_argument("ScaledIdentity: scale must be nonnegative");
  }
  return CovarianceMatrix(scale * Eigen::MatrixXd::Identity(n, n), Unchecked{});
}

std::string ToString(LoewnerOrdering ordering) {
  switch (ordering) {
    case LoewnerOrdering::DominatedBy:
      return "DominatedBy";
    case LoewnerOrdering::Dominates:
      return "Dominates";
    case LoewnerOrdering::Equal:
      return "Equal";
    case LoewnerOrdering::Incomparable:
      return "Incomparable";
  }
  return "?";
}

LoewnerOrdering LoewnerCompare(const CovarianceMatrix& p,
                               const CovarianceMatrix& q, double tol) {
  if (p.dim() != q.dim()) {
    throw DimensionError("LoewnerCompare: dimension mismatch");
  }
  const double scale = std::max({1.0, p.trace(), q.trace()});
  const Eigen::MatrixXd diff = q.matrix() - p.matrix();
  const bool below = MinEigenvalue(diff) >= -tol * scale;
  const bool above = MinEigenvalue(-diff) >= -tol * scale;
  if (below && above) return LoewnerOrdering::Equal;
  if (below) return LoewnerOrdering::DominatedBy;
  if (above) return LoewnerOrdering::Dominates;
  return LoewnerOrdering::Incomparable;
}

double SpectralRadius(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  RequireSquare(a, "SpectralRadius");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double SpectralNorm(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

InversionBoundEvaluation EvaluateInversionBound(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                const Eigen::Ref<const Eigen::MatrixXd>& n,
                                const CovarianceMatrix& x,
                                const Eigen::Ref<const Eigen::MatrixXd>& a,
                                double tol) {
  RequireSquare(m, "EvaluateInversionBound(M)");
  RequireSquare(n, "EvaluateInversionBound(N)");
  RequireSquare(a, "EvaluateInversionBound(A)");
  const auto dim = m.rows();
  if (n.rows() != dim || a.rows() != dim || x.dim() != dim) {
    throw DimensionError("EvaluateInversionBound: dimension mismatch");
  }

  const Eigen::MatrixXd axa = Symmetrize(a * x.matrix() * a.transpose());
  const Eigen::MatrixXd m_inv = InverseSpd(m);
  const Eigen::MatrixXd inner = InverseSpd(m_inv + n);  // (M⁻¹+N)⁻¹
  const Eigen::MatrixXd correction =
      Symmetrize(inner * m_inv * axa * m_inv * inner);

  InversionBoundEvaluation out;
  out.lhs = InverseSpd(InverseSpd(m + axa) + n);
  out.rhs = Symmetrize(inner + correction);
  out.correction_trace = correction.trace();
  const double scale = std::max(1.0, out.rhs.trace());
  out.psd_gap_ok = MinEigenvalue(out.rhs - out.lhs) >= -tol * scale;
  if (SpectralRadius(a) < 1.0) {
    out.trace_bound_ok =
        out.correction_trace <= x.trace() + tol * std::max(x.trace(), 1e-300);
  }
  return out;
}

}  // namespace sensorsched
