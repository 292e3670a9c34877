// Fixed-size numeric kernels shared by the public API (instantiated with
// Eigen::Dynamic) and the value-iteration hot loop (instantiated for small n).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "sensorsched/psd.hpp"

namespace sensorsched::detail {

template <int N>
using Mat = Eigen::Matrix<double, N, N>;
template <int N>
using IMat = Eigen::Matrix<std::int64_t, N, N>;

template <int N>
Mat<N> Sym(const Mat<N>& m) {
  return 0.5 * (m + m.transpose());
}

template <int N>
double MinEig(const Mat<N>& m) {
  if (m.rows() == 0) return 0.0;
  if constexpr (N == 1) {
    return m(0, 0);
  } else if constexpr (N == 2 || N == 3) {
    Eigen::SelfAdjointEigenSolver<Mat<N>> es;
    es.computeDirect(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  } else {
    Eigen::SelfAdjointEigenSolver<Mat<N>> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
}

template <int N>
Mat<N> InvSpd(const Mat<N>& m) {
  const auto n = m.rows();
  if (n == 0) return m;
  Eigen::LDLT<Mat<N>> ldlt(Sym<N>(m));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 0.0).any()) {
    throw ConditioningError("InverseSpd: matrix is not positive definite");
  }
  const double rcond = ldlt.rcond();
  if (!(rcond >= kMinReciprocalCondition)) {
    throw ConditioningError("InverseSpd: reciprocal condition number " +
                            std::to_string(rcond) + " below threshold");
  }
  Mat<N> id = Mat<N>::Identity(n, n);
  return Sym<N>(ldlt.solve(id));
}

/// ((A P Aᵀ + W)⁻¹ + info)⁻¹ given the precomputed prior inverse.
template <int N>
Mat<N> PosteriorFromPriorInverse(const Mat<N>& prior_inv, const Mat<N>& info) {
  return InvSpd<N>(prior_inv + info);
}

template <int N>
IMat<N> RoundScaled(const Mat<N>& p, double epsilon) {
  return (p / epsilon)
      .unaryExpr([](double x) { return std::round(x); })
      .template cast<std::int64_t>();
}

/// q ⪰ p within the module PSD tolerance.
template <int N>
bool GridDominates(const IMat<N>& r, double epsilon, const Mat<N>& p) {
  const Mat<N> q = epsilon * r.template cast<double>();
  const double scale = std::max(1.0, q.trace());
  return MinEig<N>(Sym<N>(q - p)) >= -kPsdTol * scale;
}

template <int N>
IMat<N> ThetaGrid(const Mat<N>& p, double epsilon) {
  IMat<N> r = RoundScaled<N>(p, epsilon);
  const auto n = p.rows();
  r.diagonal().array() += n;
  return r;
}

template <int N>
IMat<N> ThetaPPGrid(const Mat<N>& p, double epsilon) {
  const int n = static_cast<int>(p.rows());
  const Mat<N> scaled = p / epsilon;
  IMat<N> r = RoundScaled<N>(p, epsilon);
  if (GridDominates<N>(r, epsilon, p)) return r;

  // Diagonal i gains one unit each time scaled(i,i) + t crosses a
  // half-integer; n crossings per diagonal take t from 0 to n.
  std::vector<std::pair<double, int>> events;
  events.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double first =
        static_cast<double>(r(i, i)) + 0.5 - scaled(i, i);
    for (int k = 0; k < n; ++k) events.emplace_back(first + k, i);
  }
  std::sort(events.begin(), events.end());
  for (std::size_t e = 0; e < events.size();) {
    const double t = events[e].first;
    while (e < events.size() && events[e].first == t) {
      r(events[e].second, events[e].second) += 1;
      ++e;
    }
    if (GridDominates<N>(r, epsilon, p)) return r;
  }
  // Unreachable in exact arithmetic: round(P/ε) + nI dominates P.
  return r;
}

/// Calls f(std::integral_constant<int, N>{}) with N = n for n <= 4 and
/// N = Eigen::Dynamic otherwise.
template <typename F>
decltype(auto) DispatchDim(int n, F&& f) {
  switch (n) {
    case 1:
      return f(std::integral_constant<int, 1>{});
    case 2:
      return f(std::integral_constant<int, 2>{});
    case 3:
      return f(std::integral_constant<int, 3>{});
    case 4:
      return f(std::integral_constant<int, 4>{});
    default:
      return f(std::integral_constant<int, Eigen::Dynamic>{});
  }
}

template <int N>
Mat<N> Fixed(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return Mat<N>(m);
}

/// f(P,S) = ((A P Aᵀ + W)⁻¹ + info)⁻¹; the prior itself when info is zero.
template <int N>
Mat<N> Update(const Mat<N>& a, const Mat<N>& w, const Mat<N>& p,
              const Mat<N>& info, bool has_info) {
  const Mat<N> prior = Sym<N>(a * p * a.transpose() + w);
  if (!has_info) return prior;
  return InvSpd<N>(InvSpd<N>(prior) + info);
}

}  // namespace sensorsched::detail
