// Quantized one-step lookahead shared by synthesis, value recovery and the
// policy. Every path that maps a covariance to a mesh successor goes through
// the same fixed-size kernel so that on-mesh and off-mesh evaluations agree
// bit for bit.
#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "kernels.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched::detail {

template <int N>
struct ActionKernel {
  int n = 0;
  Mat<N> a, w;
  std::vector<Mat<N>> info;
  std::vector<char> has_info;
  bool any_info = false;
  double epsilon = 1.0;
  Quantizer quantizer = Quantizer::ThetaDoublePrime;
  KeyCodec codec;

  ActionKernel(const SystemModel& model,
               const std::vector<SensorSubset>& actions,
               const SynthesisConfig& config)
      : n(model.n()),
        a(Fixed<N>(model.a())),
        w(Fixed<N>(model.w())),
        epsilon(config.mesh.epsilon),
        quantizer(config.quantizer),
        codec(config.mesh.n, config.mesh.TraceBudget()) {
    for (const auto& s : actions) {
      info.push_back(Fixed<N>(InformationMatrix(model, s)));
      has_info.push_back(!s.empty());
      any_info = any_info || !s.empty();
    }
  }

  /// f(P,S) for every action; nullopt where an inversion is ill-conditioned.
  void Posteriors(const Mat<N>& p, std::vector<std::optional<Mat<N>>>& out) const {
    out.assign(info.size(), std::nullopt);
    const Mat<N> prior = Sym<N>(a * p * a.transpose() + w);
    std::optional<Mat<N>> prior_inv;
    if (any_info) {
      try {
        prior_inv = InvSpd<N>(prior);
      } catch (const ConditioningError&) {
      }
    }
    for (std::size_t k = 0; k < info.size(); ++k) {
      if (!has_info[k]) {
        out[k] = prior;
        continue;
      }
      if (!prior_inv) continue;
      try {
        out[k] = InvSpd<N>(*prior_inv + info[k]);
      } catch (const ConditioningError&) {
      }
    }
  }

  IMat<N> QuantizeGrid(const Mat<N>& q) const {
    return quantizer == Quantizer::Theta ? ThetaGrid<N>(q, epsilon)
                                         : ThetaPPGrid<N>(q, epsilon);
  }

  std::optional<std::size_t> Locate(const Mesh& mesh, const IMat<N>& z) const {
    const std::int64_t budget = codec.budget();
    if (z.trace() > budget) return std::nullopt;
    const int bits = codec.bits_per_entry();
    std::uint64_t key = 0;
    for (int i = 0; i < n; ++i) {
      if (z(i, i) < 0) return std::nullopt;
      for (int j = i; j < n; ++j) {
        const std::int64_t v = z(i, j);
        if (v < -budget || v > budget) return std::nullopt;
        key = (key << bits) | static_cast<std::uint64_t>(v + budget);
      }
    }
    return mesh.Find(key);
  }

  Mat<N> Decode(std::uint64_t key) const {
    Mat<N> p(n, n);
    const int bits = codec.bits_per_entry();
    const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
    const std::int64_t budget = codec.budget();
    for (int i = n - 1; i >= 0; --i) {
      for (int j = n - 1; j >= i; --j) {
        const double v =
            static_cast<double>(static_cast<std::int64_t>(key & mask) - budget);
        p(i, j) = epsilon * v;
        p(j, i) = epsilon * v;
        key >>= bits;
      }
    }
    return p;
  }
};

class LookaheadEvaluator {
 public:
  LookaheadEvaluator(const SystemModel& model,
                     const std::vector<SensorSubset>& actions,
                     const SynthesisConfig& config)
      : kernel_(MakeKernel(model, actions, config)),
        cost_(config.cost),
        beta_(config.beta) {
    for (const auto& s : actions) {
      action_cost_.push_back(SensorCost(config.cost, s).value());
    }
  }

  double action_cost(std::size_t a) const { return action_cost_[a]; }

  /// Fills trace costs and successor indices for mesh points [begin, end).
  /// Returns the number of ill-conditioned (point, action) updates.
  std::size_t BuildRange(const Mesh& mesh, std::size_t begin, std::size_t end,
                         std::vector<double>& trace_cost,
                         std::vector<std::uint32_t>& successors) const {
    return std::visit(
        [&](const auto& k) {
          constexpr int N = KernelDim<std::decay_t<decltype(k)>>::value;
          const std::size_t num_actions = action_cost_.size();
          std::vector<std::optional<Mat<N>>> posts;
          std::size_t failures = 0;
          const auto keys = mesh.keys();
          for (std::size_t i = begin; i < end; ++i) {
            const Mat<N> p = k.Decode(keys[i]);
            trace_cost[i] = WeightedTrace(cost_, p);
            k.Posteriors(p, posts);
            for (std::size_t a = 0; a < num_actions; ++a) {
              if (!posts[a]) {
                ++failures;
                continue;
              }
              const auto idx = k.Locate(mesh, k.QuantizeGrid(*posts[a]));
              if (idx) {
                successors[i * num_actions + a] =
                    static_cast<std::uint32_t>(*idx);
              }
            }
          }
          return failures;
        },
        kernel_);
  }

  BackupResult Backup(const Eigen::Ref<const Eigen::MatrixXd>& p,
                      const ValueTable& table) const {
    return std::visit(
        [&](const auto& k) {
          constexpr int N = KernelDim<std::decay_t<decltype(k)>>::value;
          const Mat<N> pf = Fixed<N>(p);
          std::vector<std::optional<Mat<N>>> posts;
          k.Posteriors(pf, posts);
          const double trace = WeightedTrace(cost_, pf);
          BackupResult result;
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t a = 0; a < posts.size(); ++a) {
            if (!posts[a]) continue;
            const auto idx = k.Locate(*table.mesh, k.QuantizeGrid(*posts[a]));
            if (!idx) continue;
            const double v = table.values[*idx];
            if (std::isinf(v)) continue;
            const double candidate = trace + action_cost_[a] + beta_ * v;
            if (candidate < best) {
              best = candidate;
              result.action = table.actions[a];
            }
          }
          if (result.action) result.value = ExtendedReal(best);
          return result;
        },
        kernel_);
  }

  std::vector<std::optional<Eigen::MatrixXd>> Posteriors(
      const Eigen::Ref<const Eigen::MatrixXd>& p) const {
    return std::visit(
        [&](const auto& k) {
          constexpr int N = KernelDim<std::decay_t<decltype(k)>>::value;
          std::vector<std::optional<Mat<N>>> posts;
          k.Posteriors(Fixed<N>(p), posts);
          std::vector<std::optional<Eigen::MatrixXd>> out(posts.size());
          for (std::size_t a = 0; a < posts.size(); ++a) {
            if (posts[a]) out[a] = Eigen::MatrixXd(*posts[a]);
          }
          return out;
        },
        kernel_);
  }

 private:
  using Variant = std::variant<ActionKernel<1>, ActionKernel<2>, ActionKernel<3>,
                               ActionKernel<4>, ActionKernel<Eigen::Dynamic>>;

  template <typename K>
  struct KernelDim;
  template <int N>
  struct KernelDim<ActionKernel<N>> : std::integral_constant<int, N> {};

  static Variant MakeKernel(const SystemModel& model,
                            const std::vector<SensorSubset>& actions,
                            const SynthesisConfig& config) {
    return DispatchDim(model.n(), [&](auto dim) -> Variant {
      constexpr int N = decltype(dim)::value;
      return ActionKernel<N>(model, actions, config);
    });
  }

  Variant kernel_;
  SensorCostSpec cost_;
  double beta_;
  std::vector<double> action_cost_;
};

}  // namespace sensorsched::detail
