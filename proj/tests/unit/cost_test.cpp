#include "sensorsched/cost.hpp"

#include <limits>

#include <gtest/gtest.h>

namespace sensorsched {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(ExtendedReal, ArithmeticAndOrder) {
  const ExtendedReal a(1.5), b(2.0);
  EXPECT_EQ((a + b).value(), 3.5);
  EXPECT_FALSE((a + ExtendedReal::Infeasible()).finite());
  EXPECT_TRUE(a < b);
  EXPECT_TRUE(b < ExtendedReal::Infeasible());
  EXPECT_FALSE(ExtendedReal::Infeasible() < ExtendedReal::Infeasible());
  EXPECT_EQ(ExtendedReal(kInf), ExtendedReal::Infeasible());
  EXPECT_EQ(ExtendedReal::Infeasible().ToDouble(), kInf);
  EXPECT_THROW(ExtendedReal::Infeasible().value(), std::logic_error);
  EXPECT_THROW(ExtendedReal(std::nan("")), std::invalid_argument);
  EXPECT_THROW(ExtendedReal(-kInf), std::invalid_argument);
  EXPECT_EQ(ToString(ExtendedReal::Infeasible()), "inf");
  EXPECT_EQ(ToString(ExtendedReal(0.25)), "0.25");
}

TEST(SensorCost, Cardinality) {
  const auto spec = SensorCostSpec::Cardinality();
  EXPECT_EQ(SensorCost(spec, {}).value(), 0.0);
  EXPECT_EQ(SensorCost(spec, {1, 3, 4}).value(), 3.0);
}

TEST(SensorCost, ExactlyOne) {
  const auto spec = SensorCostSpec::ExactlyOne();
  EXPECT_EQ(SensorCost(spec, {2}).value(), 0.0);
  EXPECT_FALSE(SensorCost(spec, {}).finite());
  EXPECT_FALSE(SensorCost(spec, {1, 2}).finite());
}

TEST(SensorCost, AtMostK) {
  const auto spec = SensorCostSpec::AtMostK(2);
  EXPECT_EQ(SensorCost(spec, {}).value(), 0.0);
  EXPECT_EQ(SensorCost(spec, {1, 4}).value(), 0.0);
  EXPECT_FALSE(SensorCost(spec, {1, 2, 3}).finite());
  EXPECT_THROW(SensorCostSpec::AtMostK(-1).Validate(), SpecificationError);
}

TEST(SensorCost, CustomTable) {
  const auto spec = SensorCostSpec::Custom({{{1}, 0.5}, {{2}, kInf}, {{1, 2}, 2.0}});
  EXPECT_EQ(SensorCost(spec, {1}).value(), 0.5);
  EXPECT_FALSE(SensorCost(spec, {2}).finite());
  EXPECT_THROW(SensorCost(spec, {}), SpecificationError);
  EXPECT_THROW(SensorCostSpec::Custom({{{1}, -1.0}}).Validate(), SpecificationError);
}

TEST(StageCost, WeightedTrace) {
  auto spec = SensorCostSpec::Cardinality();
  spec.weight = Eigen::Vector2d(2.0, 1.0).asDiagonal().toDenseMatrix();
  spec.Validate();
  const CovarianceMatrix p(Eigen::Vector2d(3.0, 1.0).asDiagonal().toDenseMatrix());
  EXPECT_EQ(WeightedTrace(spec, p.matrix()), 7.0);
  EXPECT_EQ(StageCost(spec, p, {1, 2}).value(), 9.0);
  EXPECT_THROW(WeightedTrace(spec, Eigen::MatrixXd::Identity(3, 3)), DimensionError);
}

TEST(StageCost, InfeasibleSubsetPropagates) {
  const auto spec = SensorCostSpec::ExactlyOne();
  EXPECT_FALSE(StageCost(spec, CovarianceMatrix::Identity(2), {}).finite());
  EXPECT_EQ(StageCost(spec, CovarianceMatrix::Identity(2), {1}).value(), 2.0);
}

TEST(SensorCostSpec, RejectsBadWeight) {
  auto spec = SensorCostSpec::ExactlyOne();
  spec.weight = Eigen::Vector2d(1.0, 0.0).asDiagonal().toDenseMatrix();
  EXPECT_THROW(spec.Validate(), SpecificationError);
  spec.weight = Eigen::MatrixXd::Identity(2, 3);
  EXPECT_THROW(spec.Validate(), SpecificationError);
}

TEST(SensorCostSpec, Describe) {
  EXPECT_EQ(SensorCostSpec::Cardinality().Describe(), "cardinality");
  EXPECT_EQ(SensorCostSpec::AtMostK(2).Describe(), "at_most_k(2)");
  EXPECT_EQ(SensorCostSpec::Custom({{{1}, 0.5}, {{2}, kInf}}).Describe(),
            "custom{{1}:0.5;{2}:inf}");
}

TEST(AdmissibleActions, ExactlyOneIsSingletons) {
  const auto actions = AdmissibleActions(SensorCostSpec::ExactlyOne(), 4);
  const std::vector<SensorSubset> expected = {{1}, {2}, {3}, {4}};
  EXPECT_EQ(actions, expected);
}

TEST(AdmissibleActions, CardinalityOrdersBySizeThenLex) {
  const auto actions = AdmissibleActions(SensorCostSpec::Cardinality(), 3);
  const std::vector<SensorSubset> expected = {{},     {1},    {2},   {3},
                                              {1, 2}, {1, 3}, {2, 3}, {1, 2, 3}};
  EXPECT_EQ(actions, expected);
}

TEST(AdmissibleActions, AtMostKAndCustom) {
  EXPECT_EQ(AdmissibleActions(SensorCostSpec::AtMostK(1), 2).size(), 3u);
  const auto custom = SensorCostSpec::Custom({{{2}, 1.0}, {{1}, kInf}, {{1, 2}, 0.0}});
  const std::vector<SensorSubset> expected = {{2}, {1, 2}};
  EXPECT_EQ(AdmissibleActions(custom, 2), expected);
  EXPECT_THROW(AdmissibleActions(custom, 1), SpecificationError);
}

TEST(AdmissibleActions, NoneAdmissible) {
  EXPECT_THROW(AdmissibleActions(SensorCostSpec::Custom({{{1}, kInf}}), 1),
               SpecificationError);
  EXPECT_THROW(AdmissibleActions(SensorCostSpec::ExactlyOne(), 0), SpecificationError);
}

}  // namespace
}  // namespace sensorsched
