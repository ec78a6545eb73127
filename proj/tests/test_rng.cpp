#include <cmath>

#include <gtest/gtest.h>

#include "moelab/moe_layer.hpp"
#include "moelab/rng.hpp"

namespace {

using namespace moelab;

// Values produced by an independent implementation of the stream (Python,
// arbitrary-precision integers masked to 64 bits).
TEST(CounterRng, MatchesReferenceBits) {
  const std::uint64_t key = rng::stream_key(0, rng::streams::routed(0, rng::streams::kFc1));
  EXPECT_EQ(rng::bits(key, 0), 0x0e1fdf3fa37b90c8ULL);
  EXPECT_EQ(rng::bits(key, 1), 0xea7454881a45f164ULL);
  EXPECT_EQ(rng::bits(key, 2), 0x1e0023bc5354d209ULL);
  EXPECT_EQ(rng::bits(key, 3), 0x3f214ef95dc5cc75ULL);
  EXPECT_EQ(rng::stream_key(42, 1), 0xa9cb101be2f6824fULL);
  EXPECT_EQ(rng::bits(rng::stream_key(42, 1), 0), 0x33aa906d7b87bf0eULL);
}

TEST(CounterRng, UnitIntervalUsesTop53Bits) {
  EXPECT_EQ(rng::to_unit(0), 0.0);
  EXPECT_LT(rng::to_unit(~0ULL), 1.0);
  EXPECT_EQ(rng::to_unit(0x7FFULL), 0.0);  // low 11 bits are discarded
  EXPECT_EQ(rng::to_unit(1ULL << 63), 0.5);
}

TEST(InitWeights, FirstFc1ValuesOfFixtureMatchGolden) {
  // Only the first routed expert is materialised; the stream is keyed by
  // (seed, matrix id, flat index) so the values are the same as a full init.
  const auto config = model_fixture("16BT-2BA");
  const std::size_t first[] = {0};
  const auto w = init_weights(config, 0, first);
  const auto fc1 = w.routed[0].fc1.flat();
  EXPECT_EQ(fc1[0], -0x1.4216ab5d89388p-6);
  EXPECT_EQ(fc1[1], 0x1.2d193ade58161p-6);
  EXPECT_EQ(fc1[2], -0x1.152f2f54375f6p-6);
  EXPECT_EQ(fc1[3], -0x1.6ef5a2281429bp-7);
  EXPECT_FALSE(w.routed[1].materialized());
}

TEST(InitWeights, DeterministicAndSeedSensitive) {
  MoEConfig c{1, 16, 8, 4, 2, 1, 12, Activation::swiglu, Variant::latent_acc};
  EXPECT_EQ(init_weights(c, 42), init_weights(c, 42));
  EXPECT_NE(init_weights(c, 42), init_weights(c, 43));
}

TEST(InitWeights, EntriesWithinFanInBound) {
  MoEConfig c{1, 16, 4, 3, 1, 1, 9, Activation::squared_relu, Variant::latent_eff};
  const auto w = init_weights(c, 5);
  auto within = [](const Matrix& m) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (double v : m.flat())
      if (!(v >= -bound && v < bound)) return false;
    return true;
  };
  EXPECT_TRUE(within(w.router));
  EXPECT_TRUE(within(w.down));
  EXPECT_TRUE(within(w.up));
  for (const auto& e : w.routed) {
    EXPECT_TRUE(within(e.fc1));
    EXPECT_TRUE(within(e.fc2));
    EXPECT_TRUE(e.gate.empty());
  }
}

TEST(InitWeights, PartialMaterialisationAgreesWithFullInit) {
  MoEConfig c{1, 12, 4, 2, 1, 0, 5, Activation::swiglu, Variant::latent_eff};
  const auto full = init_weights(c, 9);
  const std::size_t some[] = {4};
  const auto part = init_weights(c, 9, some);
  EXPECT_EQ(part.routed[4], full.routed[4]);
  EXPECT_EQ(part.router, full.router);
  EXPECT_FALSE(part.routed[0].materialized());
}

}  // namespace
