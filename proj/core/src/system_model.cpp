#include "sensorsched/system_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "kernels.hpp"

namespace sensorsched {

SensorSubset::SensorSubset(std::vector<int> indices)
    : indices_(std::move(indices)) {
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 1) {
      throw std::invalid_argument("SensorSubset: sensor indices are 1-based");
    }
    if (i > 0 && indices_[i] <= indices_[i - 1]) {
      throw std::invalid_argument(
          "SensorSubset: indices must be strictly increasing");
    }
  }
}

SensorSubset SensorSubset::FromMask(std::uint64_t mask) {
  std::vector<int> idx;
  for (int bit = 0; bit < 64; ++bit) {
    if (mask & (std::uint64_t{1} << bit)) idx.push_back(bit + 1);
  }
  return SensorSubset(std::move(idx));
}

bool SensorSubset::contains(int sensor) const {
  return std::binary_search(indices_.begin(), indices_.end(), sensor);
}

bool SensorSubset::IsSubsetOf(const SensorSubset& other) const {
  return std::includes(other.indices_.begin(), other.indices_.end(),
                       indices_.begin(), indices_.end());
}

std::uint64_t SensorSubset::mask() const {
  std::uint64_t m = 0;
  for (int i : indices_) {
    if (i > 64) throw std::out_of_range("SensorSubset::mask: index above 64");
    m |= std::uint64_t{1} << (i - 1);
  }
  return m;
}

std::string SensorSubset::ToString() const {
  std::string out = "{";
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(indices_[i]);
  }
  return out + "}";
}

bool operator<(const SensorSubset& a, const SensorSubset& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a.indices_ < b.indices_;
}

SystemModel::SystemModel(Eigen::MatrixXd a, Eigen::MatrixXd w,
                         Eigen::MatrixXd c, Eigen::MatrixXd v)
    : a_(std::move(a)), w_(std::move(w)), c_(std::move(c)), v_(std::move(v)) {
  const auto n = a_.rows();
  if (n == 0 || a_.cols() != n) {
    throw DimensionError("SystemModel: A must be a nonempty square matrix");
  }
  if (w_.rows() != n || w_.cols() != n) {
    throw DimensionError("SystemModel: W must be n x n");
  }
  if (c_.rows() == 0 || c_.cols() != n) {
    throw DimensionError("SystemModel: C must be m x n with m >= 1");
  }
  const auto m = c_.rows();
  if (v_.rows() != m || v_.cols() != m) {
    throw DimensionError("SystemModel: V must be m x m");
  }
  if (!a_.allFinite() || !w_.allFinite() || !c_.allFinite() ||
      !v_.allFinite()) {
    throw std::invalid_argument("SystemModel: non-finite entries");
  }
  if (!CheckPsd(w_) || MinEigenvalue(w_) <= 0.0) {
    throw std::invalid_argument("SystemModel: W must be positive definite");
  }
  if (((v_ - v_.transpose()).cwiseAbs().array() > kPsdTol).any()) {
    throw std::invalid_argument("SystemModel: V must be symmetric");
  }
  if ((v_.diagonal().array() <= 0.0).any()) {
    throw std::invalid_argument("SystemModel: V must have a positive diagonal");
  }
  w_ = Symmetrize(w_);
  v_ = Symmetrize(v_);
}

void SystemModel::Validate(const SensorSubset& s) const {
  for (int i : s.indices()) {
    if (i > m()) {
      throw std::out_of_range("sensor index " + std::to_string(i) +
                              " exceeds m = " + std::to_string(m()));
    }
  }
}

Submodel ExtractSubmodel(const SystemModel& model, const SensorSubset& s) {
  model.Validate(s);
  const auto k = static_cast<Eigen::Index>(s.size());
  Submodel out{Eigen::MatrixXd(k, model.n()), Eigen::MatrixXd(k, k)};
  for (Eigen::Index r = 0; r < k; ++r) {
    const int row = s.indices()[r] - 1;
    out.c.row(r) = model.c().row(row);
    for (Eigen::Index q = 0; q < k; ++q) {
      out.v(r, q) = model.v()(row, s.indices()[q] - 1);
    }
  }
  if (k > 0 && MinEigenvalue(out.v) <= 0.0) {
    throw ConditioningError("V_S is not positive definite for " +
                            s.ToString());
  }
  return out;
}

Eigen::MatrixXd InformationMatrix(const SystemModel& model,
                                  const SensorSubset& s) {
  const auto sub = ExtractSubmodel(model, s);
  if (s.empty()) return Eigen::MatrixXd::Zero(model.n(), model.n());
  return Symmetrize(sub.c.transpose() * InverseSpd(sub.v) * sub.c);
}

Eigen::MatrixXd CovarianceUpdate(const SystemModel& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& p,
                                 const Eigen::Ref<const Eigen::MatrixXd>& info) {
  const bool has_info = !info.isZero(0.0);
  return detail::DispatchDim(model.n(), [&](auto dim) -> Eigen::MatrixXd {
    constexpr int N = decltype(dim)::value;
    return detail::Update<N>(detail::Fixed<N>(model.a()),
                             detail::Fixed<N>(model.w()), detail::Fixed<N>(p),
                             detail::Fixed<N>(info), has_info);
  });
}

CovarianceMatrix CovarianceUpdate(const SystemModel& model,
                                  const CovarianceMatrix& p,
                                  const SensorSubset& s) {
  if (p.dim() != model.n()) {
    throw DimensionError("CovarianceUpdate: P has the wrong dimension");
  }
  return CovarianceMatrix(
      CovarianceUpdate(model, p.matrix(), InformationMatrix(model, s)));
}

SchurReport SchurStabilityReport(const SystemModel& model) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(model.a(), false);
  SchurReport report;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    report.eigen_moduli.push_back(std::abs(es.eigenvalues()(i)));
  }
  std::sort(report.eigen_moduli.begin(), report.eigen_moduli.end(),
            std::greater<>());
  report.spectral_radius = report.eigen_moduli.front();
  report.stable = report.spectral_radius < 1.0;
  return report;
}

CovarianceMatrix FixedSensorSteadyState(const SystemModel& model,
                                        const SensorSubset& s, double tol,
                                        int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const Eigen::MatrixXd info = InformationMatrix(model, s);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(model.n(), model.n());
  for (int k = 0; k < max_iter; ++k) {
    Eigen::MatrixXd next = CovarianceUpdate(model, p, info);
    if (!next.allFinite()) break;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (change < tol) return CovarianceMatrix(p);
  }
  throw DivergenceError("fixed-sensor iteration for " + s.ToString() +
                        " did not converge");
}

PerturbationBoundEvaluation EvaluatePerturbationBound(const SystemModel& model,
                                const CovarianceMatrix& p,
                                const CovarianceMatrix& dp,
                                const SensorSubset& s, double tol) {
  if (p.dim() != model.n() || dp.dim() != model.n()) {
    throw DimensionError("EvaluatePerturbationBound: dimension mismatch");
  }
  const Eigen::MatrixXd& a = model.a();
  const Eigen::MatrixXd info = InformationMatrix(model, s);
  const Eigen::MatrixXd m_inv =
      InverseSpd(a * p.matrix() * a.transpose() + model.w());
  const Eigen::MatrixXd inner = InverseSpd(m_inv + info);

  PerturbationBoundEvaluation out;
  out.delta_f = Symmetrize(inner * m_inv * a * dp.matrix() * a.transpose() *
                           m_inv * inner);
  const Eigen::MatrixXd f_p = CovarianceUpdate(model, p.matrix(), info);
  const Eigen::MatrixXd f_pdp =
      CovarianceUpdate(model, p.matrix() + dp.matrix(), info);
  const double scale = std::max(1.0, f_p.trace() + out.delta_f.trace());
  out.holds_psd = MinEigenvalue(f_p + out.delta_f - f_pdp) >= -tol * scale;
  out.trace_ok =
      out.delta_f.trace() <= dp.trace() + tol * std::max(1.0, dp.trace());
  return out;
}

}  // namespace sensorsched
