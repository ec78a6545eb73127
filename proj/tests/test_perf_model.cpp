#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "moelab/check/oracles.hpp"
#include "moelab/errors.hpp"
#include "moelab/perf_model.hpp"

namespace {

using namespace moelab;

const HardwareSpec kGB200 = hardware_fixture("GB200-NVL72-EP64");

TEST(ArithmeticIntensity, ReferencePoints) {
  EXPECT_NEAR(arithmetic_intensity(1418.8, 4096, 1536), 1250.0, 0.5);
  EXPECT_NEAR(arithmetic_intensity(1.0, 4096, 1536), 1.9982112366859095, 1e-12);
  EXPECT_NEAR(arithmetic_intensity(1e15, 4096, 1536), 2234.181818181818, 1e-6);
  EXPECT_THROW(arithmetic_intensity(0.0, 4096, 1536), DomainError);
  EXPECT_THROW(arithmetic_intensity(1.0, -1.0, 1536), DomainError);
}

TEST(ArithmeticIntensity, MonotoneAndBounded) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double d = 1 + gen() % 8192, m = 1 + gen() % 8192;
    const double bound = 2.0 * d * m / (d + m);
    double prev = 0.0;
    for (double t = 0.5; t < 1e7; t *= 1.7) {
      const double i = arithmetic_intensity(t, d, m);
      EXPECT_GT(i, prev);
      EXPECT_LT(i, bound);
      prev = i;
    }
  }
}

TEST(ComputeBoundIntensity, Values) {
  EXPECT_EQ(compute_bound_intensity(kGB200), 1250.0);
  HardwareSpec hw = kGB200;
  hw.peak_flops = hw.bw_hbm;
  EXPECT_EQ(compute_bound_intensity(hw), 1.0);
  hw.peak_flops = 2e15;
  hw.bw_hbm = 4e12;
  EXPECT_EQ(compute_bound_intensity(hw), 500.0);
}

TEST(Threshold, MatchesReferenceAndBisection) {
  const auto t = solve_t_exp_threshold(kGB200, 4096, 1536);
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 1418.8, 0.1);
  EXPECT_NEAR(arithmetic_intensity(*t, 4096, 1536), 1250.0, 1250.0 * 1e-9);
  const auto b = oracle::bisect_t_exp_threshold(kGB200, 4096, 1536, 1e-13);
  ASSERT_TRUE(b);
  EXPECT_NEAR(*t, *b, 1e-9 * *t);
}

TEST(Threshold, InfeasibleAtAsymptote) {
  HardwareSpec hw = kGB200;
  const double d = 4096, m = 1536;
  hw.bw_hbm = 1.0;
  hw.peak_flops = 2.0 * d * m / (d + m);
  EXPECT_FALSE(solve_t_exp_threshold(hw, d, m));
  hw.peak_flops *= 2;
  EXPECT_FALSE(solve_t_exp_threshold(hw, d, m));
  EXPECT_FALSE(oracle::bisect_t_exp_threshold(hw, d, m));
}

TEST(Threshold, HalfAsymptoteIsSelfConsistent) {
  // theta = dm/(d+m) gives t* = theta exactly.
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    const double d = 1 + gen() % 5000, m = 1 + gen() % 5000;
    HardwareSpec hw = kGB200;
    hw.bw_hbm = 1.0;
    hw.peak_flops = d * m / (d + m);
    const auto t = solve_t_exp_threshold(hw, d, m);
    ASSERT_TRUE(t);
    EXPECT_NEAR(*t, hw.peak_flops, 1e-9 * hw.peak_flops);
    const auto b = oracle::bisect_t_exp_threshold(hw, d, m, 1e-12);
    EXPECT_NEAR(*t, *b, 1e-9 * *t);
  }
}

TEST(Roofline, AttainableAndKnee) {
  EXPECT_EQ(roofline_attainable(kGB200, 0.0), 0.0);
  EXPECT_EQ(roofline_attainable(kGB200, 1250.0), 10e15);
  EXPECT_EQ(roofline_attainable(kGB200, 625.0), 5e15);
  EXPECT_EQ(roofline_attainable(kGB200, compute_bound_intensity(kGB200)), kGB200.peak_flops);
  EXPECT_THROW(roofline_attainable(kGB200, -1.0), DomainError);
  EXPECT_EQ(classify(kGB200, 1249.9), Regime::memory_bound);
  EXPECT_EQ(classify(kGB200, 1250.0), Regime::compute_bound);
}

TEST(CommVolume, Values) {
  EXPECT_EQ(comm_volume(128, 64, 100, 4096, kGB200), 2'048'000.0);
  EXPECT_EQ(comm_volume(128, 64, 0, 4096, kGB200), 0.0);
  // alpha N experts of width d / alpha move the same bytes.
  EXPECT_EQ(comm_volume(4 * 128, 64, 100, 4096 / 4, kGB200), comm_volume(128, 64, 100, 4096, kGB200));
}

TEST(CommComputeRatio, ReferenceValue) {
  const double r = comm_compute_ratio(kGB200, 1536);
  EXPECT_NEAR(r, 9.04, 0.01 * 9.04);
  EXPECT_NEAR(r, 5.0 * kGB200.peak_flops / (4.0 * 1536 * kGB200.bw_nvl), 1e-12);
  EXPECT_LT(comm_compute_ratio(kGB200, 1e12), 1e-7);
}

TEST(CommComputeRatio, EqualsComponentwiseTimes) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(1.0, 1e5);
  for (int trial = 0; trial < 500; ++trial) {
    const double t = u(gen), d = std::floor(u(gen)), m = std::floor(u(gen));
    const double t_comm = comm_volume(128, 64, t, d, kGB200) / kGB200.bw_nvl;
    const double t_comp = expert_compute_flops(128, 64, t, d, m) / kGB200.peak_flops;
    EXPECT_NEAR(t_comm / t_comp, comm_compute_ratio(kGB200, m), 1e-12 * comm_compute_ratio(kGB200, m));
  }
}

TEST(CostTable, QwenLikeMemoryBound) {
  MoEConfig c = model_fixture("Qwen3-235B-A22B");
  const auto rows = cost_table(c, kGB200, 256);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].regime, Regime::memory_bound);
  EXPECT_NEAR(rows[0].ratio, comm_compute_ratio(kGB200, 1536), 1e-12);
}

TEST(CostTable, AlphaFourRows) {
  const MoEConfig c = model_fixture("Qwen3-235B-A22B").as_variant(Variant::latent_acc, 4);
  const auto rows = cost_table(c, kGB200, 256);
  const auto& s = rows[0];
  const auto& eff = rows[1];
  const auto& acc = rows[2];
  EXPECT_EQ(eff.comm_bytes * 4, s.comm_bytes);
  EXPECT_EQ(eff.weight_bytes_per_expert * 4, s.weight_bytes_per_expert);
  EXPECT_EQ(eff.active_weight_bytes * 4, s.active_weight_bytes);
  EXPECT_EQ(acc.comm_bytes, s.comm_bytes);
  EXPECT_EQ(acc.active_weight_bytes, s.active_weight_bytes);
  EXPECT_EQ(eff.t_exp, 64.0);
  EXPECT_EQ(acc.t_exp, 256.0);
  EXPECT_EQ(acc.routed_experts, 512.0);
  EXPECT_EQ(acc.active_experts, 32.0);
}

TEST(CostTable, ExactParityOverRandomConfigs) {
  std::mt19937_64 gen(2718);
  auto pick = [&gen](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen);
  };
  for (int trial = 0; trial < 300; ++trial) {
    MoEConfig c;
    const std::int64_t alpha = pick(1, 8);
    c.latent_dim = pick(1, 300);
    c.hidden_dim = alpha * c.latent_dim;
    c.routed_experts = pick(1, 200);
    c.active_experts = pick(1, c.routed_experts);
    c.intermediate_dim = pick(1, 3000);
    c.variant = pick(0, 1) ? Variant::latent_eff : Variant::latent_acc;
    const auto rows = element_cost_table(c, pick(1, 100), Rational(pick(0, 4000), pick(1, 7)));
    EXPECT_EQ(rows[1].comm_elements, rows[0].comm_elements / alpha);
    EXPECT_EQ(rows[1].weight_elements_per_expert, rows[0].weight_elements_per_expert / alpha);
    EXPECT_EQ(rows[1].active_weight_elements, rows[0].active_weight_elements / alpha);
    EXPECT_EQ(rows[2].comm_elements, rows[0].comm_elements);
    EXPECT_EQ(rows[2].active_weight_elements, rows[0].active_weight_elements);
    EXPECT_EQ(rows[2].t_exp, rows[0].t_exp);
  }
}

TEST(CostTable, AlphaOneRowsEqual) {
  const auto rows = cost_table(model_fixture("95BT-8BA"), kGB200, 300);
  EXPECT_EQ(rows[1].comm_bytes, rows[0].comm_bytes);
  EXPECT_EQ(rows[2].comm_bytes, rows[0].comm_bytes);
  EXPECT_EQ(rows[1].weight_bytes_per_expert, rows[0].weight_bytes_per_expert);
}

TEST(CostTable, CostBreakdownJsonRoundTrip) {
  const auto rows = cost_table(model_fixture("16BT-2BA").as_variant(Variant::latent_eff, 4), kGB200, 77.5);
  for (const auto& r : rows) {
    const nlohmann::json j = r;
    EXPECT_EQ(nlohmann::json::parse(j.dump()).get<CostBreakdown>(), r);
  }
}

TEST(TokensPerExpert, UniformRouting) {
  EXPECT_EQ(tokens_per_expert(1600, 8, 128), 100.0);
  EXPECT_THROW(tokens_per_expert(-1, 8, 128), DomainError);
}

}  // namespace
