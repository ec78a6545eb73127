#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "moelab/check/invariant_suite.hpp"
#include "moelab/check/oracles.hpp"
#include "moelab/errors.hpp"
#include "moelab/golden.hpp"
#include "moelab/moe_layer.hpp"

namespace {

using namespace moelab;

double max_rel_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a.flat()[i]), std::abs(b.flat()[i]), 1e-300});
    worst = std::max(worst, std::abs(a.flat()[i] - b.flat()[i]) / scale);
  }
  return worst;
}

ExpertWeights scalar_expert(Activation act) {
  ExpertWeights e;
  e.in_dim = 1;
  e.fc1 = Matrix(1, 1, 1.0);
  if (act == Activation::swiglu) e.gate = Matrix(1, 1, 1.0);
  e.fc2 = Matrix(1, 1, 1.0);
  return e;
}

TEST(ExpertForward, ZeroInputGivesZero) {
  for (Activation act : {Activation::swiglu, Activation::squared_relu}) {
    MoEConfig c{1, 6, 6, 1, 1, 0, 4, act, Variant::standard};
    const auto w = init_weights(c, 1);
    EXPECT_EQ(expert_forward(w.routed[0], Vector(6, 0.0), act), Vector(6, 0.0));
  }
}

TEST(ExpertForward, ScalarSquaredRelu) {
  const auto e = scalar_expert(Activation::squared_relu);
  EXPECT_EQ(expert_forward(e, Vector{2.0}, Activation::squared_relu), Vector{4.0});
  EXPECT_EQ(expert_forward(e, Vector{-2.0}, Activation::squared_relu), Vector{0.0});
}

TEST(ExpertForward, ScalarSwiglu) {
  const auto e = scalar_expert(Activation::swiglu);
  // silu(2) * 2 = 2 * sigmoid(2) * 2
  EXPECT_NEAR(expert_forward(e, Vector{2.0}, Activation::swiglu)[0], 4.0 / (1.0 + std::exp(-2.0)),
              1e-15);
}

TEST(ExpertForward, MatchesNaiveLoops) {
  for (Activation act : {Activation::swiglu, Activation::squared_relu}) {
    // in_dim 4, m 8
    MoEConfig c{1, 4, 4, 1, 1, 0, 8, act, Variant::standard};
    const auto w = init_weights(c, 17);
    const Matrix z = seeded_tokens(23, 1, 4);
    const Vector zv(z.row(0).begin(), z.row(0).end());
    const Vector fast = expert_forward(w.routed[0], zv, act);
    const Vector slow = oracle::naive_expert_forward(w.routed[0], zv, act);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-14 * (1 + std::abs(slow[i])));
  }
}

TEST(ExpertForward, ShapeErrors) {
  const auto e = scalar_expert(Activation::swiglu);
  EXPECT_THROW(expert_forward(e, Vector{1.0, 2.0}, Activation::swiglu), ShapeError);
  EXPECT_THROW(expert_forward(e, Vector{1.0}, Activation::squared_relu), ShapeError);
  EXPECT_THROW(expert_forward(ExpertWeights{}, Vector{}, Activation::swiglu), ShapeError);
}

TEST(LayerForward, ZeroDownProjectionLeavesSharedExpertsOnly) {
  MoEConfig c{1, 8, 4, 3, 2, 2, 5, Activation::swiglu, Variant::latent_eff};
  auto w = init_weights(c, 4);
  w.down = Matrix(4, 8);
  const Matrix x = seeded_tokens(4, 3, 8);
  const Matrix y = moe_layer_forward(w, c, x).output;
  for (std::size_t t = 0; t < 3; ++t) {
    const Vector xt(x.row(t).begin(), x.row(t).end());
    Vector expected(8, 0.0);
    for (const auto& s : w.shared) {
      const auto o = expert_forward(s, xt, c.activation);
      for (std::size_t i = 0; i < 8; ++i) expected[i] += o[i];
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(y(t, i), expected[i]);
  }
}

TEST(LayerForward, IdentityProjectionsCollapseToStandard) {
  for (Activation act : {Activation::swiglu, Activation::squared_relu})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MoEConfig standard{1, 10, 10, 6, 2, 1, 7, act, Variant::standard};
      MoEConfig latent = standard;
      latent.variant = Variant::latent_eff;
      const Matrix x = seeded_tokens(seed, 5, 10);
      const Matrix a = moe_layer_forward(init_weights(standard, seed), standard, x).output;
      auto wl = init_weights(latent, seed);
      set_identity_projections(wl, latent);
      const Matrix b = moe_layer_forward(wl, latent, x).output;
      EXPECT_EQ(a, b) << "seed " << seed;
    }
}

TEST(LayerForward, MatchesNaiveOracleForAllVariants) {
  for (Variant v : {Variant::standard, Variant::latent_eff, Variant::latent_acc})
    for (Activation act : {Activation::swiglu, Activation::squared_relu})
      for (bool renorm : {false, true}) {
        MoEConfig c{1, 12, v == Variant::standard ? 12 : 4, 5, 2, 2, 9, act, v};
        c.renormalize_gates = renorm;
        const auto w = init_weights(c, 31);
        const Matrix x = seeded_tokens(32, 4, 12);
        EXPECT_LE(max_rel_diff(moe_layer_forward(w, c, x).output, oracle::naive_layer_forward(w, c, x)),
                  1e-12);
      }
}

TEST(LayerForward, ExpertPermutationEquivariance) {
  MoEConfig c{1, 8, 4, 5, 3, 1, 6, Activation::squared_relu, Variant::latent_acc};
  const auto w = init_weights(c, 12);
  const Matrix x = seeded_tokens(13, 6, 8);
  const Matrix y = moe_layer_forward(w, c, x).output;

  const std::size_t n = w.routed.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 3, perm.end());
  LayerWeights p = w;
  for (std::size_t i = 0; i < n; ++i) {
    p.routed[i] = w.routed[perm[i]];
    std::copy(w.router.row(perm[i]).begin(), w.router.row(perm[i]).end(), p.router.row(i).begin());
  }
  const Matrix yp = moe_layer_forward(p, c, x).output;
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(yp.flat()[i], y.flat()[i], 1e-12);
}

TEST(LayerForward, DeterministicAcrossCalls) {
  MoEConfig c{1, 8, 2, 3, 1, 1, 4, Activation::swiglu, Variant::latent_acc};
  EXPECT_EQ(seeded_forward(c, 77, 5), seeded_forward(c, 77, 5));
}

TEST(LayerForward, TraceRecordsIntermediates) {
  MoEConfig c{1, 8, 4, 3, 2, 1, 5, Activation::swiglu, Variant::latent_eff};
  const auto w = init_weights(c, 2);
  const auto r = moe_layer_forward(w, c, seeded_tokens(2, 2, 8));
  ASSERT_EQ(r.trace.tokens.size(), 2u);
  const auto& t = r.trace.tokens[0];
  EXPECT_EQ(t.latent.size(), 4u);
  EXPECT_EQ(t.routing.probabilities.size(), 6u);
  EXPECT_EQ(t.routed.size(), 2u);
  EXPECT_TRUE(std::is_sorted(t.summation_order.begin(), t.summation_order.end()));
  EXPECT_EQ(t.shared.size(), 1u);
}

TEST(LayerForward, Errors) {
  MoEConfig c{1, 8, 4, 3, 2, 1, 5, Activation::swiglu, Variant::latent_eff};
  auto w = init_weights(c, 2);
  EXPECT_THROW(moe_layer_forward(w, c, Matrix(1, 7)), ShapeError);
  Matrix bad(1, 8);
  bad(0, 3) = INFINITY;
  EXPECT_THROW(moe_layer_forward(w, c, bad), NumericError);
  auto wrong = w;
  wrong.up = Matrix(8, 3);
  EXPECT_THROW(moe_layer_forward(wrong, c, Matrix(1, 8)), ShapeError);
  auto missing = w;
  missing.routed.pop_back();
  EXPECT_THROW(moe_layer_forward(missing, c, Matrix(1, 8)), ShapeError);

  const auto sparse = init_weights(c, 2, std::span<const std::size_t>{});
  EXPECT_THROW(moe_layer_forward(sparse, c, seeded_tokens(1, 1, 8)), ShapeError);
  EXPECT_THROW(set_identity_projections(w, c), ConfigError);
}

TEST(LayerForward, FixtureGoldenMatchesNaiveOracleAndCheckedInFile) {
  const auto c = model_fixture("16BT-2BA");
  const Matrix x = seeded_tokens(check::kGoldenSeed, check::kGoldenTokens, 2048);
  const auto w = init_weights_for_tokens(c, check::kGoldenSeed, x);
  const Matrix fast = moe_layer_forward(w, c, x).output;
  const Matrix slow = oracle::naive_layer_forward(w, c, x);
  EXPECT_LE(max_rel_diff(fast, slow), 1e-12);

  const auto golden = read_golden(std::string(MOELAB_TEST_FIXTURES_DIR) + "/" + check::kGoldenFile);
  ASSERT_EQ(golden.size(), fast.size());
  EXPECT_TRUE(std::equal(golden.begin(), golden.end(), fast.flat().begin()));
}

}  // namespace
