#include <gtest/gtest.h>

#include "moelab/check/oracles.hpp"
#include "moelab/errors.hpp"
#include "moelab/moe_layer.hpp"

namespace {

using namespace moelab;

bool all_zero(const Matrix& m) {
  for (double v : m.flat())
    if (v != 0.0) return false;
  return true;
}

TEST(Backward, ZeroUpstreamGradientGivesZeroGradients) {
  MoEConfig c{1, 8, 4, 4, 2, 1, 6, Activation::swiglu, Variant::latent_acc};
  const auto w = init_weights(c, 3);
  const Matrix x = seeded_tokens(3, 2, 8);
  const auto fwd = moe_layer_forward(w, c, x);
  const auto g = moe_layer_backward(fwd.trace, w, c, Matrix(2, 8));
  EXPECT_TRUE(all_zero(g.weights.router));
  EXPECT_TRUE(all_zero(g.weights.down));
  EXPECT_TRUE(all_zero(g.weights.up));
  for (const auto& e : g.weights.routed) {
    EXPECT_TRUE(all_zero(e.fc1));
    EXPECT_TRUE(all_zero(e.gate));
    EXPECT_TRUE(all_zero(e.fc2));
  }
  EXPECT_TRUE(all_zero(g.input));
}

TEST(Backward, SingleExpertRouterGradientVanishes) {
  for (Activation act : {Activation::swiglu, Activation::squared_relu}) {
    MoEConfig c{1, 6, 6, 1, 1, 0, 4, act, Variant::standard};
    const auto w = init_weights(c, 8);
    const Matrix x = seeded_tokens(8, 3, 6);
    const auto fwd = moe_layer_forward(w, c, x);
    for (const auto& t : fwd.trace.tokens) EXPECT_EQ(t.gates[0], 1.0);
    const auto g = moe_layer_backward(fwd.trace, w, c, seeded_tokens(9, 3, 6));
    EXPECT_TRUE(all_zero(g.weights.router));
    EXPECT_FALSE(all_zero(g.weights.routed[0].fc1));
  }
}

struct GradCase {
  Variant variant;
  Activation activation;
  bool renormalize;
};

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto p = GetParam();
  MoEConfig c{1, 8, p.variant == Variant::standard ? 8 : 4, 4, 2, 1, 6, p.activation, p.variant};
  c.renormalize_gates = p.renormalize;
  int checked = 0;
  for (std::uint64_t seed = 100; checked < 5 && seed < 200; ++seed) {
    const auto r = oracle::gradient_check(c, seed);
    if (r.margin <= 1e-3) continue;
    ++checked;
    EXPECT_LT(r.max_rel_error, 1e-5) << "seed " << seed;
    EXPECT_GT(r.components, 100u);
  }
  EXPECT_EQ(checked, 5);
}

INSTANTIATE_TEST_SUITE_P(
    AllLayers, GradientCheck,
    ::testing::Values(GradCase{Variant::standard, Activation::swiglu, false},
                      GradCase{Variant::standard, Activation::squared_relu, false},
                      GradCase{Variant::latent_eff, Activation::swiglu, false},
                      GradCase{Variant::latent_eff, Activation::squared_relu, false},
                      GradCase{Variant::latent_acc, Activation::swiglu, false},
                      GradCase{Variant::latent_acc, Activation::squared_relu, false},
                      GradCase{Variant::latent_eff, Activation::swiglu, true},
                      GradCase{Variant::standard, Activation::squared_relu, true}),
    [](const ::testing::TestParamInfo<GradCase>& info) {
      std::string name = std::string(to_string(info.param.variant)) + "_" +
                         std::string(to_string(info.param.activation));
      return info.param.renormalize ? name + "_renorm" : name;
    });

TEST(Backward, RejectsMismatchedTrace) {
  MoEConfig c{1, 8, 4, 4, 2, 1, 6, Activation::swiglu, Variant::latent_eff};
  const auto w = init_weights(c, 1);
  const auto fwd = moe_layer_forward(w, c, seeded_tokens(1, 2, 8));
  EXPECT_THROW(moe_layer_backward(fwd.trace, w, c, Matrix(3, 8)), ShapeError);

  MoEConfig other = c;
  other.variant = Variant::latent_acc;
  EXPECT_THROW(moe_layer_backward(fwd.trace, init_weights(other, 1), other, Matrix(2, 8)),
               ShapeError);
}

}  // namespace
