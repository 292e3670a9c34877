#include "sensorsched/cost.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sensorsched {

ExtendedReal::ExtendedReal(double value) {
  if (std::isnan(value)) throw std::invalid_argument("ExtendedReal: NaN");
  if (std::isinf(value)) {
    if (value < 0) throw std::invalid_argument("ExtendedReal: -inf");
    finite_ = false;
    return;
  }
  value_ = value;
}

double ExtendedReal::value() const {
  if (!finite_) throw std::logic_error("ExtendedReal: value of infeasible cost");
  return value_;
}

std::string ToString(const ExtendedReal& r) {
  if (!r.finite()) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << r.value();
  return os.str();
}

void SensorCostSpec::Validate() const {
  if (kind == Kind::AtMostK && k < 0) {
    throw SpecificationError("AtMostK requires k >= 0");
  }
  if (kind == Kind::Custom) {
    for (const auto& [subset, cost] : table) {
      if (std::isnan(cost) || cost < 0.0) {
        throw SpecificationError("custom cost for " + subset.ToString() +
                                 " must be nonnegative");
      }
    }
  }
  if (weight) {
    if (weight->rows() != weight->cols()) {
      throw SpecificationError("cost weight must be square");
    }
    if (!CheckPsd(*weight) || MinEigenvalue(*weight) <= 0.0) {
      throw SpecificationError("cost weight must be positive definite");
    }
  }
}

std::string SensorCostSpec::Describe() const {
  std::string base;
  switch (kind) {
    case Kind::Cardinality:
      base = "cardinality";
      break;
    case Kind::ExactlyOne:
      base = "exactly_one";
      break;
    case Kind::AtMostK:
      base = "at_most_k(" + std::to_string(k) + ")";
      break;
    case Kind::Custom: {
      base = "custom{";
      bool first = true;
      for (const auto& [subset, cost] : table) {
        if (!first) base += ";";
        first = false;
        base += subset.ToString() + ":" + ToString(ExtendedReal(cost));
      }
      base += "}";
      break;
    }
  }
  if (weight) {
    std::ostringstream os;
    os.precision(17);
    os << ",weight=[";
    for (Eigen::Index i = 0; i < weight->size(); ++i) {
      if (i) os << ",";
      os << weight->data()[i];
    }
    os << "]";
    base += os.str();
  }
  return base;
}

ExtendedReal SensorCost(const SensorCostSpec& spec, const SensorSubset& s) {
  switch (spec.kind) {
    case SensorCostSpec::Kind::Cardinality:
      return ExtendedReal(static_cast<double>(s.size()));
    case SensorCostSpec::Kind::ExactlyOne:
      return s.size() == 1 ? ExtendedReal(0.0) : ExtendedReal::Infeasible();
    case SensorCostSpec::Kind::AtMostK:
      return static_cast<int>(s.size()) <= spec.k ? ExtendedReal(0.0)
                                                  : ExtendedReal::Infeasible();
    case SensorCostSpec::Kind::Custom: {
      const auto it = spec.table.find(s);
      if (it == spec.table.end()) {
        throw SpecificationError("custom cost table has no entry for " +
                                 s.ToString());
      }
      return ExtendedReal(it->second);
    }
  }
  throw SpecificationError("unknown cost kind");
}

double WeightedTrace(const SensorCostSpec& spec,
                     const Eigen::Ref<const Eigen::MatrixXd>& p) {
  if (!spec.weight) return p.trace();
  if (spec.weight->rows() != p.rows()) {
    throw DimensionError("cost weight dimension does not match P");
  }
  return (*spec.weight * p).trace();
}

ExtendedReal StageCost(const SensorCostSpec& spec, const CovarianceMatrix& p,
                       const SensorSubset& s) {
  return ExtendedReal(WeightedTrace(spec, p.matrix())) + SensorCost(spec, s);
}

std::vector<SensorSubset> AdmissibleActions(const SensorCostSpec& spec, int m) {
  if (m < 1) throw SpecificationError("AdmissibleActions: m must be >= 1");
  std::vector<SensorSubset> out;
  if (spec.kind == SensorCostSpec::Kind::Custom) {
    for (const auto& [subset, cost] : spec.table) {
      if (!subset.empty() && subset.indices().back() > m) {
        throw SpecificationError("custom cost table references sensor " +
                                 std::to_string(subset.indices().back()) +
                                 " > m");
      }
      if (std::isfinite(cost)) out.push_back(subset);
    }
  } else {
    if (m > 30) {
      throw SpecificationError("AdmissibleActions: too many sensors to enumerate");
    }
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      SensorSubset s = SensorSubset::FromMask(mask);
      if (SensorCost(spec, s).finite()) out.push_back(std::move(s));
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) {
    throw SpecificationError("no admissible sensor subset: every g(S) is +inf");
  }
  return out;
}

}  // namespace sensorsched
