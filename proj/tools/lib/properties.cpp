#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sensorsched/mesh.hpp"
#include "sensorsched/psd.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched::tools {

namespace {

double MinEig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

PropertyResult Named(std::string name) {
  PropertyResult r;
  r.name = std::move(name);
  return r;
}

// Records a violation of size `excess` (> 0 means violated).
void Record(PropertyResult& r, double excess, const std::string& what) {
  ++r.cases;
  if (excess > 0.0) {
    if (r.failures == 0) r.first_failure = what;
    ++r.failures;
    r.worst = std::max(r.worst, excess);
  }
}

std::string Describe(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) os << "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
  }
  os << "]";
  return os.str();
}

}  // namespace

int Sampler::Dim(int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng_);
}

double Sampler::Uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng_);
}

Eigen::MatrixXd Sampler::Gaussian(int rows, int cols) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng_);
  }
  return m;
}

Eigen::MatrixXd Sampler::Psd(int n, double scale) {
  const int rank = Dim(0, n);
  if (rank == 0) return Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd b = Gaussian(n, rank);
  Eigen::MatrixXd p = b * b.transpose();
  p *= Uniform(0.1, 1.0) * scale / std::max(p.trace(), 1e-12);
  return 0.5 * (p + p.transpose());
}

Eigen::MatrixXd Sampler::Pd(int n, double floor, double scale) {
  return Psd(n, scale) + floor * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd Sampler::WithSpectralNorm(int n, double norm) {
  const Eigen::MatrixXd a = Gaussian(n, n);
  return a * (norm / std::max(SpectralNorm(a), 1e-12));
}

SystemModel Sampler::Model(int n, double a_norm) {
  const int m = Dim(1, 4);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) v(i, i) = Uniform(0.1, 2.0);
  return SystemModel(WithSpectralNorm(n, Uniform(0.1, a_norm)), Pd(n, 0.2, 2.0),
                     Gaussian(m, n), v);
}

SensorSubset Sampler::Subset(int m) {
  const auto mask = std::uniform_int_distribution<std::uint64_t>(
      0, (std::uint64_t{1} << m) - 1)(rng_);
  return SensorSubset::FromMask(mask);
}

Eigen::MatrixXd GainFormUpdate(const SystemModel& model, const Eigen::MatrixXd& p,
                               const SensorSubset& s) {
  const Eigen::MatrixXd& a = model.a();
  const Eigen::MatrixXd prior = a * p * a.transpose() + model.w();
  if (s.empty()) return prior;
  const auto k = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd c(k, model.n()), v(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    c.row(r) = model.c().row(s.indices()[r] - 1);
    for (Eigen::Index q = 0; q < k; ++q) {
      v(r, q) = model.v()(s.indices()[r] - 1, s.indices()[q] - 1);
    }
  }
  const Eigen::MatrixXd innovation = c * prior * c.transpose() + v;
  const Eigen::MatrixXd gain =
      innovation.llt().solve(c * prior).transpose();  // prior Cᵀ innovation⁻¹
  const Eigen::MatrixXd i_kc =
      Eigen::MatrixXd::Identity(model.n(), model.n()) - gain * c;
  const Eigen::MatrixXd post =
      i_kc * prior * i_kc.transpose() + gain * v * gain.transpose();
  return 0.5 * (post + post.transpose());
}

PropertyResult CheckQuantizerOrdering(std::uint64_t seed, int cases) {
  PropertyResult r = Named("quantizer ordering P < Theta(P) < Omega(P), P <= Theta''(P) <= Theta(P)");
  Sampler s(seed);
  for (int c = 0; c < cases; ++c) {
    const int n = s.Dim();
    const MeshConfig mesh{n, s.Uniform(0.05, 2.0), 1e6};
    const CovarianceMatrix p(s.Psd(n, s.Uniform(0.1, 40.0)));
    const auto theta = QuantizeTheta(p, mesh);
    const auto theta_pp = QuantizeThetaPP(p, mesh);
    const auto omega = InflateOmega(p, mesh);
    // Strict orderings: the gaps are at least εn/2 in exact arithmetic.
    const double floor = 0.25 * mesh.epsilon * n;
    const double strict = std::max(
        floor - MinEig(theta.matrix() - p.matrix()),
        floor - MinEig(omega.matrix() - theta.matrix()));
    const double scale = 1e-9 * std::max(1.0, theta.trace());
    const double weak = std::max(-MinEig(theta_pp.matrix() - p.matrix()),
                                 -MinEig(theta.matrix() - theta_pp.matrix())) -
                        scale;
    Record(r, std::max(strict, weak),
           "eps=" + std::to_string(mesh.epsilon) + " P=" + Describe(p.matrix()));
  }
  return r;
}

PropertyResult CheckMatrixInversionBound(std::uint64_t seed, int cases) {
  PropertyResult r = Named("matrix-inversion bound: PSD gap and trace bound");
  Sampler s(seed);
  for (int c = 0; c < cases; ++c) {
    const int n = s.Dim();
    const Eigen::MatrixXd m = s.Pd(n);
    const Eigen::MatrixXd nn = s.Pd(n, 0.05);
    const CovarianceMatrix x(s.Psd(n));
    const Eigen::MatrixXd a = s.WithSpectralNorm(n, s.Uniform(0.05, 0.99));
    const auto eval = EvaluateInversionBound(m, nn, x, a);
    const bool ok = eval.psd_gap_ok && eval.trace_bound_ok.value_or(false);
    Record(r, ok ? 0.0 : std::max(eval.correction_trace - x.trace(), 1e-300),
           "M=" + Describe(m) + " N=" + Describe(nn) + " A=" + Describe(a));
  }
  return r;
}

PropertyResult CheckPerturbationBound(std::uint64_t seed, int cases) {
  PropertyResult r = Named("perturbation bound: f(P+dP) <= f(P)+df, df >= 0, Tr df <= Tr dP");
  Sampler s(seed);
  for (int c = 0; c < cases; ++c) {
    const int n = s.Dim();
    const SystemModel model = s.Model(n, 0.99);
    const CovarianceMatrix p(s.Psd(n));
    const CovarianceMatrix dp(s.Psd(n));
    const SensorSubset subset = s.Subset(model.m());
    const auto eval = EvaluatePerturbationBound(model, p, dp, subset);
    const double df_neg =
        -MinEig(eval.delta_f) - 1e-9 * std::max(1.0, eval.delta_f.trace());
    double excess = std::max(df_neg, 0.0);
    if (!eval.holds_psd || !eval.trace_ok) {
      excess = std::max(excess, std::max(eval.delta_f.trace() - dp.trace(), 1e-300));
    }
    Record(r, excess, "A=" + Describe(model.a()) + " S=" + subset.ToString());
  }
  return r;
}

PropertyResult CheckMonotoneInCovariance(std::uint64_t seed, int cases) {
  PropertyResult r = Named("update monotone in P: P <= Q implies f(P,S) <= f(Q,S)");
  Sampler s(seed);
  for (int c = 0; c < cases; ++c) {
    const int n = s.Dim();
    const SystemModel model = s.Model(n, 1.5);
    const CovarianceMatrix p(s.Psd(n));
    const CovarianceMatrix q(p.matrix() + s.Psd(n));
    const SensorSubset subset = s.Subset(model.m());
    const auto fp = CovarianceUpdate(model, p, subset);
    const auto fq = CovarianceUpdate(model, q, subset);
    const double excess =
        -MinEig(fq.matrix() - fp.matrix()) - 1e-9 * std::max(1.0, fq.trace());
    Record(r, excess, "S=" + subset.ToString() + " P=" + Describe(p.matrix()));
  }
  return r;
}

PropertyResult CheckMonotoneInSensors(std::uint64_t seed, int cases) {
  PropertyResult r = Named("update monotone in S: S subset of S' implies f(P,S') <= f(P,S)");
  Sampler s(seed);
  for (int c = 0; c < cases; ++c) {
    const int n = s.Dim();
    const SystemModel model = s.Model(n, 1.5);
    const CovarianceMatrix p(s.Psd(n));
    const SensorSubset small = s.Subset(model.m());
    const SensorSubset extra = s.Subset(model.m());
    const SensorSubset large = SensorSubset::FromMask(small.mask() | extra.mask());
    const auto f_small = CovarianceUpdate(model, p, small);
    const auto f_large = CovarianceUpdate(model, p, large);
    const double excess = -MinEig(f_small.matrix() - f_large.matrix()) -
                          1e-9 * std::max(1.0, f_small.trace());
    Record(r, excess, small.ToString() + " vs " + large.ToString());
  }
  return r;
}

PropertyResult CheckContraction(std::uint64_t seed, int pairs) {
  PropertyResult r = Named("mesh Bellman operator is a beta-contraction in sup norm");
  Sampler s(seed);
  for (int c = 0; c < pairs; ++c) {
    const int n = s.Dim(1, 2);
    const SystemModel model = s.Model(n, 0.9);
    SynthesisConfig config;
    config.beta = s.Uniform(0.1, 0.99);
    config.mesh = {n, s.Uniform(0.25, 1.0), s.Uniform(3.0, 6.0)};
    config.cost = SensorCostSpec::Cardinality();
    const Mesh mesh = Mesh::Enumerate(config.mesh);
    const auto transitions = TransitionTable::Build(model, mesh, config);
    const std::size_t size = mesh.size();
    std::vector<double> j1(size), j2(size), t1(size), t2(size);
    for (std::size_t i = 0; i < size; ++i) {
      j1[i] = s.Uniform(0.0, 100.0);
      j2[i] = s.Uniform(0.0, 100.0);
    }
    std::vector<std::int32_t> arg(size);
    ApplyBellmanOperator(transitions, config.beta, j1, t1, arg);
    ApplyBellmanOperator(transitions, config.beta, j2, t2, arg);
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      in = std::max(in, std::abs(j1[i] - j2[i]));
      if (std::isinf(t1[i]) != std::isinf(t2[i])) {
        out = std::numeric_limits<double>::infinity();
      } else if (!std::isinf(t1[i])) {
        out = std::max(out, std::abs(t1[i] - t2[i]));
      }
    }
    Record(r, out - config.beta * in - 1e-12 * in,
           "pair " + std::to_string(c) + ": |TJ1-TJ2|=" + std::to_string(out) +
               " beta|J1-J2|=" + std::to_string(config.beta * in));
  }
  return r;
}

PropertyResult CheckDualFormula(std::uint64_t seed, int cases) {
  PropertyResult r = Named("information form equals gain form to 1e-10");
  Sampler s(seed);
  for (int c = 0; c < cases; ++c) {
    const int n = s.Dim();
    const SystemModel model = s.Model(n, 1.5);
    const Eigen::MatrixXd p = s.Psd(n);
    const SensorSubset subset = s.Subset(model.m());
    const Eigen::MatrixXd info =
        CovarianceUpdate(model, CovarianceMatrix(p), subset).matrix();
    const Eigen::MatrixXd gain = GainFormUpdate(model, p, subset);
    const double diff = (info - gain).cwiseAbs().maxCoeff();
    Record(r, diff - 1e-10 * std::max(1.0, gain.cwiseAbs().maxCoeff()),
           "S=" + subset.ToString() + " diff=" + std::to_string(diff));
  }
  return r;
}

PropertyResult CheckScalarOracle(const ScalarInstance& inst) {
  PropertyResult r = Named("scalar pipeline matches brute-force oracle");
  const int m = static_cast<int>(inst.c.size());
  Eigen::MatrixXd c(m, 1), v = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    c(i, 0) = inst.c[i];
    v(i, i) = inst.v[i];
  }
  const SystemModel model(Eigen::MatrixXd::Constant(1, 1, inst.a),
                          Eigen::MatrixXd::Constant(1, 1, inst.w), c, v);
  SynthesisConfig config;
  config.beta = inst.beta;
  config.mesh = {1, inst.epsilon, inst.gamma};
  config.cost = inst.cardinality_cost ? SensorCostSpec::Cardinality()
                                      : SensorCostSpec::ExactlyOne();
  config.quantizer =
      inst.tight_quantizer ? Quantizer::ThetaDoublePrime : Quantizer::Theta;
  config.convergence_tol = inst.tol;
  config.max_iterations = inst.max_iterations;
  auto mesh = std::make_shared<const Mesh>(Mesh::Enumerate(config.mesh));
  const ValueTable table = Synthesize(config, model, mesh);
  const ScalarSolution oracle = SolveScalar(inst);
  if (oracle.values.size() != mesh->size()) {
    Record(r, 1.0, "mesh size " + std::to_string(mesh->size()) + " vs oracle " +
                       std::to_string(oracle.values.size()));
    return r;
  }
  if (oracle.iterations != table.iterations_run) {
    Record(r, std::abs(oracle.iterations - table.iterations_run),
           "iterations " + std::to_string(table.iterations_run) + " vs oracle " +
               std::to_string(oracle.iterations));
  }
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    const auto k = static_cast<std::size_t>(mesh->IntegerPoint(i)(0, 0));
    const double mine = table.values[i];
    const double theirs = oracle.values[k];
    double excess;
    if (std::isinf(mine) || std::isinf(theirs)) {
      excess = std::isinf(mine) == std::isinf(theirs) ? 0.0 : 1.0;
    } else {
      excess = std::abs(mine - theirs) - 1e-8;
    }
    const auto action = table.Action(i);
    const long mask = action ? static_cast<long>(action->mask()) : -1;
    if (mask != oracle.action_mask[k]) excess = std::max(excess, 1.0);
    Record(r, excess,
           "k=" + std::to_string(k) + " value " + std::to_string(mine) +
               " vs " + std::to_string(theirs) + ", action " +
               std::to_string(mask) + " vs " + std::to_string(oracle.action_mask[k]));
  }
  return r;
}

std::vector<PropertyResult> RunAllSuites(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  out.push_back(CheckQuantizerOrdering(seed));
  out.push_back(CheckMatrixInversionBound(seed + 1));
  out.push_back(CheckPerturbationBound(seed + 2));
  out.push_back(CheckMonotoneInCovariance(seed + 3));
  out.push_back(CheckMonotoneInSensors(seed + 4));
  out.push_back(CheckContraction(seed + 5));
  out.push_back(CheckDualFormula(seed + 6));
  out.push_back(CheckScalarOracle(ScalarInstance{}));
  return out;
}

}  // namespace sensorsched::tools
