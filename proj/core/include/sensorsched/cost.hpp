#pragma once

#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sensorsched/psd.hpp"
#include "sensorsched/system_model.hpp"

namespace sensorsched {

class SpecificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A nonnegative cost that may be infeasible (+∞). Infeasibility is a flag,
/// never a large sentinel, so sums and minima stay exact.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  /// Throws std::invalid_argument for NaN; +inf maps to Infeasible().
  explicit ExtendedReal(double value);
  static constexpr ExtendedReal Infeasible() {
    ExtendedReal r;
    r.finite_ = false;
    return r;
  }

  bool finite() const { return finite_; }
  /// Throws std::logic_error when infeasible.
  double value() const;
  /// value() or +inf.
  double ToDouble() const {
    return finite_ ? value_ : std::numeric_limits<double>::infinity();
  }

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (!a.finite_ || !b.finite_) return Infeasible();
    return ExtendedReal(a.value_ + b.value_);
  }
  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.finite_ == b.finite_ && (!a.finite_ || a.value_ == b.value_);
  }
  friend bool operator<(const ExtendedReal& a, const ExtendedReal& b) {
    if (!a.finite_) return false;
    if (!b.finite_) return true;
    return a.value_ < b.value_;
  }

 private:
  double value_ = 0.0;
  bool finite_ = true;
};

std::string ToString(const ExtendedReal& r);

/// The sensor-set cost g together with an optional trace weight Φ.
struct SensorCostSpec {
  enum class Kind { Cardinality, ExactlyOne, AtMostK, Custom };

  Kind kind = Kind::ExactlyOne;
  /// Used by AtMostK.
  int k = 0;
  /// Used by Custom; +inf entries mark subsets that are not allowed.
  std::map<SensorSubset, double> table;
  /// Φ; identity when absent.
  std::optional<Eigen::MatrixXd> weight;

  static SensorCostSpec Cardinality() { return Make(Kind::Cardinality); }
  static SensorCostSpec ExactlyOne() { return Make(Kind::ExactlyOne); }
  static SensorCostSpec AtMostK(int k) {
    SensorCostSpec spec = Make(Kind::AtMostK);
    spec.k = k;
    return spec;
  }
  static SensorCostSpec Custom(std::map<SensorSubset, double> table) {
    SensorCostSpec spec = Make(Kind::Custom);
    spec.table = std::move(table);
    return spec;
  }

  /// Throws SpecificationError for k < 0, negative or NaN table entries, or
  /// a Φ that is not positive definite.
  void Validate() const;
  std::string Describe() const;

 private:
  static SensorCostSpec Make(Kind kind) {
    SensorCostSpec spec;
    spec.kind = kind;
    return spec;
  }
};

/// g(S).
ExtendedReal SensorCost(const SensorCostSpec& spec, const SensorSubset& s);

/// Tr(Φ P), Φ = I by default.
double WeightedTrace(const SensorCostSpec& spec,
                     const Eigen::Ref<const Eigen::MatrixXd>& p);

/// c(P,S) = Tr(Φ P) + g(S).
ExtendedReal StageCost(const SensorCostSpec& spec, const CovarianceMatrix& p,
                       const SensorSubset& s);

/// Every subset of {1..m} with finite g, by cardinality then
/// lexicographically. Throws SpecificationError if there is none.
std::vector<SensorSubset> AdmissibleActions(const SensorCostSpec& spec, int m);

}  // namespace sensorsched
