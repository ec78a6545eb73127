#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "moelab/check/oracles.hpp"
#include "moelab/errors.hpp"
#include "moelab/moe_layer.hpp"

namespace {

using namespace moelab;

TEST(Route, ZeroRouterIsUniformWithIndexTieBreak) {
  const Matrix w(4, 3);
  const Vector x{0.3, -1.0, 2.0};
  const auto r = route(w, x, 2);
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.weights, (Vector{0.25, 0.25}));
}

TEST(Route, SoftmaxValueOfTopExpert) {
  Matrix w(3, 1);
  w(0, 0) = 1.0;
  w(1, 0) = 3.0;
  w(2, 0) = 2.0;
  const auto r = route(w, Vector{1.0}, 1);
  ASSERT_EQ(r.indices, (std::vector<std::size_t>{1}));
  EXPECT_NEAR(r.weights[0], 0.6652409557748219, 1e-15);
}

TEST(Route, WeightsAreUnrenormalisedUnlessAsked) {
  Matrix w(3, 1);
  w(0, 0) = 1.0;
  w(1, 0) = 3.0;
  w(2, 0) = 2.0;
  const auto literal = route(w, Vector{1.0}, 2);
  EXPECT_LT(literal.weights[0] + literal.weights[1], 1.0);
  const auto renorm = route(w, Vector{1.0}, 2, true);
  EXPECT_NEAR(renorm.weights[0] + renorm.weights[1], 1.0, 1e-15);
  EXPECT_NEAR(renorm.weights[0] / renorm.weights[1], literal.weights[0] / literal.weights[1], 1e-14);
}

TEST(Route, Errors) {
  Matrix w(2, 2, 1.0);
  EXPECT_THROW(route(w, Vector{1.0, 2.0}, 3), ShapeError);
  EXPECT_THROW(route(w, Vector{1.0}, 1), ShapeError);
  EXPECT_THROW(route(w, Vector{NAN, 1.0}, 1), NumericError);
  Matrix huge(2, 1, 1e308);
  EXPECT_THROW(route(huge, Vector{10.0}, 1), NumericError);
}

TEST(Route, MatchesFullSortOracleOnSeededInputs) {
  std::mt19937_64 gen(64);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix w(64, 32);
    Vector x(32);
    for (double& v : w.flat()) v = normal(gen);
    for (double& v : x) v = normal(gen);
    const auto r = route(w, x, 6);
    EXPECT_EQ(r.indices, oracle::full_sort_topk(oracle::naive_router_probabilities(w, x), 6));
  }
}

TEST(Route, PropertiesOverSeeds) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + gen() % 40, d = 1 + gen() % 10, k = 1 + gen() % n;
    Matrix w(n, d);
    Vector x(d);
    for (double& v : w.flat()) v = u(gen);
    for (double& v : x) v = u(gen);
    const auto r = route(w, x, k);

    double total = 0.0;
    for (double p : r.probabilities) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);

    std::vector<std::size_t> sorted = r.indices;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_LT(r.indices[i], n);
      EXPECT_EQ(r.weights[i], r.probabilities[r.indices[i]]);
      EXPECT_GT(r.weights[i], 0.0);
      if (n > 1) {
        EXPECT_LT(r.weights[i], 1.0);
      }
    }

    // Positive scaling of the router keeps the selected set.
    const double c = 0.1 + 5.0 * std::abs(u(gen));
    Matrix scaled = w;
    for (double& v : scaled.flat()) v *= c;
    auto a = r.indices, b = route(scaled, x, k).indices;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

}  // namespace
