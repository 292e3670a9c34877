#include "sensorsched/psd.hpp"

#include <gtest/gtest.h>

#include "properties.hpp"
#include "test_support.hpp"

namespace sensorsched {
namespace {

using Eigen::MatrixXd;

TEST(CheckPsd, IdentityAndRankOneBoundary) {
  EXPECT_TRUE(CheckPsd(MatrixXd::Identity(3, 3)));
  MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_FALSE(CheckPsd(indefinite));
  MatrixXd rank_one(2, 2);
  rank_one << 1, 1, 1, 1;
  EXPECT_TRUE(CheckPsd(rank_one));
}

TEST(CheckPsd, RejectsAsymmetricAndNonSquare) {
  MatrixXd m(2, 2);
  m << 1, 0.5, 0, 1;
  EXPECT_FALSE(CheckPsd(m));
  EXPECT_THROW(CheckPsd(MatrixXd::Identity(2, 3)), DimensionError);
}

TEST(CheckPsd, ToleranceScalesWithTrace) {
  // An eigenvalue of -1e-7 is within 1e-9 * trace for trace 1000.
  MatrixXd m = MatrixXd::Zero(2, 2);
  m(0, 0) = 1000.0;
  m(1, 1) = -1e-7;
  EXPECT_TRUE(CheckPsd(m));
  m(0, 0) = 1.0;
  EXPECT_FALSE(CheckPsd(m));
}

TEST(InverseSpd, MatchesDirectInverse) {
  MatrixXd m(3, 3);
  m << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
  EXPECT_LT(test::MaxAbsDiff(InverseSpd(m) * m, MatrixXd::Identity(3, 3)), 1e-14);
}

TEST(InverseSpd, RefusesSingularIndefiniteAndIllConditioned) {
  EXPECT_THROW(InverseSpd(MatrixXd::Zero(2, 2)), ConditioningError);
  MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(InverseSpd(indefinite), ConditioningError);
  MatrixXd ill = MatrixXd::Identity(2, 2);
  ill(1, 1) = 1e-15;
  EXPECT_THROW(InverseSpd(ill), ConditioningError);
  EXPECT_THROW(InverseSpd(MatrixXd::Identity(2, 3)), DimensionError);
}

TEST(CovarianceMatrix, SymmetrizesExactly) {
  MatrixXd m(2, 2);
  m << 2, 0.3, 0.3 + 1e-15, 1;
  const CovarianceMatrix p(m);
  EXPECT_EQ(p(0, 1), p(1, 0));
  EXPECT_EQ(p.dim(), 2);
  EXPECT_DOUBLE_EQ(p.trace(), 3.0);
}

TEST(CovarianceMatrix, ValidatesInput) {
  EXPECT_THROW(CovarianceMatrix(MatrixXd::Identity(2, 3)), DimensionError);
  MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(CovarianceMatrix{indefinite}, std::invalid_argument);
  MatrixXd nan = MatrixXd::Identity(2, 2);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(CovarianceMatrix{nan}, std::invalid_argument);
}

TEST(CovarianceMatrix, Factories) {
  EXPECT_EQ(CovarianceMatrix::Zero(3).matrix(), MatrixXd::Zero(3, 3));
  EXPECT_EQ(CovarianceMatrix::Identity(2).matrix(), MatrixXd::Identity(2, 2));
  EXPECT_DOUBLE_EQ(CovarianceMatrix::ScaledIdentity(3, 0.5).trace(), 1.5);
  EXPECT_THROW(CovarianceMatrix::ScaledIdentity(2, -1.0), std::invalid_argument);
}

TEST(LoewnerCompare, Cases) {
  const auto zero = CovarianceMatrix::Zero(2);
  const auto eye = CovarianceMatrix::Identity(2);
  EXPECT_EQ(LoewnerCompare(zero, eye), LoewnerOrdering::DominatedBy);
  EXPECT_EQ(LoewnerCompare(eye, zero), LoewnerOrdering::Dominates);
  EXPECT_EQ(LoewnerCompare(eye, eye), LoewnerOrdering::Equal);
  const CovarianceMatrix a(Eigen::Vector2d(2, 0).asDiagonal().toDenseMatrix());
  const CovarianceMatrix b(Eigen::Vector2d(0, 2).asDiagonal().toDenseMatrix());
  EXPECT_EQ(LoewnerCompare(a, b), LoewnerOrdering::Incomparable);
  EXPECT_EQ(ToString(LoewnerOrdering::Incomparable), "Incomparable");
  EXPECT_THROW(LoewnerCompare(eye, CovarianceMatrix::Identity(3)), DimensionError);
}

TEST(SpectralRadius, StableAndBoundary) {
  EXPECT_NEAR(SpectralRadius(0.5 * MatrixXd::Identity(3, 3)), 0.5, 1e-15);
  EXPECT_NEAR(SpectralRadius(MatrixXd::Identity(2, 2)), 1.0, 1e-15);
  MatrixXd rotation(2, 2);
  rotation << 0, -2, 2, 0;  // eigenvalues ±2i
  EXPECT_NEAR(SpectralRadius(rotation), 2.0, 1e-14);
  EXPECT_NEAR(SpectralNorm(rotation), 2.0, 1e-14);
}

TEST(MatrixInversionBound, ZeroPerturbationCollapses) {
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const auto eval = EvaluateInversionBound(eye, eye, CovarianceMatrix::Zero(2), 0.5 * eye);
  EXPECT_LT(test::MaxAbsDiff(eval.lhs, 0.5 * eye), 1e-15);
  EXPECT_LT(test::MaxAbsDiff(eval.rhs, 0.5 * eye), 1e-15);
  EXPECT_TRUE(eval.psd_gap_ok);
  ASSERT_TRUE(eval.trace_bound_ok.has_value());
  EXPECT_TRUE(*eval.trace_bound_ok);
}

TEST(MatrixInversionBound, IdentityPerturbationByHand) {
  // M = N = X = I, A = I/2: AXAᵀ = I/4, lhs = ((5/4 I)⁻¹ + I)⁻¹ = 5/9 I,
  // (M⁻¹+N)⁻¹ = I/2, correction = (1/2)(1/4)(1/2) I = I/16, rhs = 9/16 I.
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const auto eval = EvaluateInversionBound(eye, eye, CovarianceMatrix::Identity(2), 0.5 * eye);
  EXPECT_LT(test::MaxAbsDiff(eval.lhs, 5.0 / 9.0 * eye), 1e-15);
  EXPECT_LT(test::MaxAbsDiff(eval.rhs, 9.0 / 16.0 * eye), 1e-15);
  EXPECT_NEAR(eval.correction_trace, 2.0 / 16.0, 1e-15);
  EXPECT_TRUE(eval.psd_gap_ok);
  EXPECT_TRUE(eval.trace_bound_ok.value_or(false));
}

TEST(MatrixInversionBound, TraceBoundSkippedForUnstableA) {
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const auto eval = EvaluateInversionBound(eye, eye, CovarianceMatrix::Identity(2), 2.0 * eye);
  EXPECT_FALSE(eval.trace_bound_ok.has_value());
  EXPECT_TRUE(eval.psd_gap_ok);
}

TEST(MatrixInversionBound, PsdGapOnRandomDraws) {
  tools::Sampler s(17);
  for (int i = 0; i < 1000; ++i) {
    const int n = s.Dim();
    const MatrixXd m = s.Pd(n), nn = s.Pd(n);
    const CovarianceMatrix x(s.Psd(n));
    const MatrixXd a = s.WithSpectralNorm(n, s.Uniform(0.05, 1.5));
    const auto eval = EvaluateInversionBound(m, nn, x, a);
    EXPECT_TRUE(eval.psd_gap_ok) << "draw " << i;
    EXPECT_GE(test::MinEig(eval.rhs - eval.lhs),
              -1e-8 * std::max(1.0, eval.rhs.trace()));
  }
}

// The trace bound on the correction term does not hold in general, even for
// ‖A‖ < 1: the gain (M⁻¹+N)⁻¹M⁻¹ = (I + M N)⁻¹ has eigenvalues in (0, 1]
// but is not normal, so its spectral norm can exceed one. Here ‖(I+MN)⁻¹A‖
// is about 1.068 and X is rank one along the top right singular vector.
TEST(MatrixInversionBound, TraceBoundFailsForNonNormalGain) {
  MatrixXd m(2, 2), n(2, 2), a(2, 2);
  m << 0.2097, 0.0935, 0.0935, 1.1161;
  n << 2.4246, 2.3237, 2.3237, 2.3239;
  a << -0.9411, 0.1843, 0.2725, 0.5795;
  ASSERT_LT(SpectralNorm(a), 0.99);
  const Eigen::Vector2d v(1.0, 0.016);
  const CovarianceMatrix x(v * v.transpose());
  const auto eval = EvaluateInversionBound(m, n, x, a);
  EXPECT_TRUE(eval.psd_gap_ok);
  ASSERT_TRUE(eval.trace_bound_ok.has_value());
  EXPECT_FALSE(*eval.trace_bound_ok);
  EXPECT_NEAR(eval.correction_trace, 1.14178, 1e-4);
  EXPECT_NEAR(x.trace(), 1.000256, 1e-12);
}

}  // namespace
}  // namespace sensorsched
