#include "moelab/check/invariant_suite.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include "moelab/accounting.hpp"
#include "moelab/check/oracles.hpp"
#include "moelab/expressivity.hpp"
#include "moelab/golden.hpp"
#include "moelab/moe_layer.hpp"
#include "moelab/perf_model.hpp"
#include "moelab/scaling_epm.hpp"

namespace moelab::check {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

CheckResult compute_bound_threshold() {
  const double v = compute_bound_intensity(hardware_fixture("GB200-NVL72-EP64"));
  return {"compute-bound intensity", v == 1250.0, "F/BW_hbm = " + fmt(v)};
}

CheckResult token_threshold() {
  const auto hw = hardware_fixture("GB200-NVL72-EP64");
  const auto t = solve_t_exp_threshold(hw, 4096, 1536);
  const auto b = oracle::bisect_t_exp_threshold(hw, 4096, 1536, 1e-12);
  if (!t || !b) return {"t_exp threshold", false, "threshold reported infeasible"};
  const bool ok = std::abs(*t - 1418.8) <= 0.1 && std::abs(*t - *b) <= 1e-9 * *t;
  return {"t_exp threshold", ok, "closed form " + fmt(*t) + ", bisection " + fmt(*b)};
}

CheckResult ratio() {
  const double r = comm_compute_ratio(hardware_fixture("GB200-NVL72-EP64"), 1536);
  return {"comm/compute ratio", std::abs(r - 9.04) <= 0.01 * 9.04, "ratio " + fmt(r)};
}

CheckResult table_parity() {
  std::mt19937_64 gen(20240601);
  auto pick = [&gen](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen);
  };
  for (int trial = 0; trial < 100; ++trial) {
    MoEConfig c;
    const std::int64_t alpha = pick(1, 8);
    c.latent_dim = pick(1, 512);
    c.hidden_dim = alpha * c.latent_dim;
    c.routed_experts = pick(1, 256);
    c.active_experts = pick(1, c.routed_experts);
    c.intermediate_dim = pick(1, 4096);
    c.variant = Variant::latent_acc;
    const auto rows = element_cost_table(c, pick(1, 128), Rational(pick(0, 5000)));
    const auto& s = rows[0];
    const auto& eff = rows[1];
    const auto& acc = rows[2];
    const bool ok = eff.comm_elements * alpha == s.comm_elements &&
                    eff.weight_elements_per_expert * alpha == s.weight_elements_per_expert &&
                    acc.comm_elements == s.comm_elements &&
                    acc.active_weight_elements == s.active_weight_elements;
    if (!ok) return {"cost-table parity", false, "mismatch on trial " + std::to_string(trial)};
  }
  return {"cost-table parity", true, "100 random integer-alpha configs"};
}

CheckResult diversity() {
  std::mt19937_64 gen(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t n = std::uniform_int_distribution<std::int64_t>(1, 200)(gen);
    const std::int64_t k = std::uniform_int_distribution<std::int64_t>(1, n)(gen);
    const std::int64_t a = std::uniform_int_distribution<std::int64_t>(1, 8)(gen);
    worst = std::min(worst, diversity_gain(n, k, a).log_gain);
  }
  const double spot = diversity_gain(8, 2, 2).log_gain;
  const bool ok = worst >= -1e-9 && std::abs(spot - std::log(1820.0 / 784.0)) <= 1e-9;
  return {"diversity inequality", ok, "min log gain " + fmt(worst) + ", (8,2,2) " + fmt(spot)};
}

CheckResult param_parity() {
  for (const char* name : {"16BT-2BA", "95BT-8BA"}) {
    const auto base = model_fixture(name);
    const auto p_std = count_params(base);
    const auto p_eff = count_params(base.as_variant(Variant::latent_eff, 4));
    const auto p_acc = count_params(base.as_variant(Variant::latent_acc, 4));
    const auto f_std = count_flops(base);
    const auto f_acc = count_flops(base.as_variant(Variant::latent_acc, 4));
    if (p_std.routed_total != p_eff.routed_total || p_std.routed_total != p_acc.routed_total ||
        f_std.routed != f_acc.routed)
      return {"routed parameter parity", false, std::string("mismatch for ") + name};
  }
  return {"routed parameter parity", true,
          "16BT-2BA routed/layer " + std::to_string(count_params(model_fixture("16BT-2BA")).routed_total)};
}

std::vector<MoEConfig> small_layers() {
  std::vector<MoEConfig> out;
  for (Activation act : {Activation::swiglu, Activation::squared_relu})
    for (Variant v : {Variant::standard, Variant::latent_eff, Variant::latent_acc}) {
      MoEConfig c{1, 8, v == Variant::standard ? 8 : 4, 4, 2, 1, 6, act, v};
      out.push_back(c);
    }
  return out;
}

CheckResult gradcheck(std::optional<std::uint64_t> seed) {
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& c : small_layers()) {
    std::vector<std::uint64_t> seeds;
    if (seed)
      seeds = {*seed};
    else
      seeds = {1, 2, 3};
    for (std::uint64_t s : seeds) {
      const auto r = oracle::gradient_check(c, s);
      if (r.margin <= 1e-3) continue;
      worst = std::max(worst, r.max_rel_error);
      ++checked;
    }
  }
  if (checked == 0) return {"gradient check", false, "no seed cleared the top-k margin"};
  return {"gradient check", worst < 1e-5,
          std::to_string(checked) + " layers, max relative error " + fmt(worst)};
}

CheckResult routing() {
  std::mt19937_64 gen(99);
  for (int call = 0; call < 1000; ++call) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 64)(gen);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 16)(gen);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(gen);
    // Coarse integer entries force frequent ties.
    std::uniform_int_distribution<int> coarse(-2, 2);
    Matrix w(n, d);
    Vector x(d);
    for (double& v : w.flat()) v = coarse(gen);
    for (double& v : x) v = coarse(gen);
    const auto r = route(w, x, k);
    if (r.indices != oracle::full_sort_topk(oracle::naive_router_probabilities(w, x), k))
      return {"routing oracle", false, "mismatch on call " + std::to_string(call)};
  }
  return {"routing oracle", true, "1000 calls"};
}

CheckResult identity_collapse() {
  MoEConfig standard{1, 16, 16, 8, 2, 1, 12, Activation::swiglu, Variant::standard};
  MoEConfig latent = standard;
  latent.variant = Variant::latent_eff;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = seeded_forward(standard, seed, 4);
    const Matrix b = seeded_forward(latent, seed, 4, true);
    if (a != b) return {"identity collapse", false, "seed " + std::to_string(seed) + " differs"};
  }
  return {"identity collapse", true, "10 seeds bit-identical"};
}

CheckResult epm() {
  const double lambda = epm_lambda(1.35e12, 1e12);
  const auto iso = iso_accuracy_size(1.35, 1e12);
  const AccuracyPoint pts[] = {{10.0, 1.0}, {100.0, 2.0}};
  const auto fit = fit_log_linear(pts);
  const double back = invert_scaling_law(fit, predict_score(fit, 37.0));
  const bool ok = std::abs(lambda - 1.35) <= 1e-12 && std::abs(iso.delta - 3.5e11) <= 1e-3 &&
                  std::abs(back - 37.0) <= 1e-9 * 37.0;
  return {"EPM arithmetic", ok, "lambda " + fmt(lambda) + ", delta " + fmt(iso.delta)};
}

CheckResult golden(const std::string& fixtures_dir) {
  const std::string path = (std::filesystem::path(fixtures_dir) / kGoldenFile).string();
  std::vector<double> expected;
  try {
    expected = read_golden(path);
  } catch (const std::exception& e) {
    return {"golden vector", false, e.what()};
  }
  const Matrix out = seeded_forward(model_fixture("16BT-2BA"), kGoldenSeed, kGoldenTokens);
  const std::vector<double> actual(out.flat().begin(), out.flat().end());
  if (actual != expected) {
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < std::min(actual.size(), expected.size()); ++i)
      mismatches += actual[i] != expected[i];
    return {"golden vector", false,
            path + " disagrees with the forward pass (" + std::to_string(mismatches) +
                " differing values, sizes " + std::to_string(expected.size()) + " vs " +
                std::to_string(actual.size()) + ")"};
  }
  return {"golden vector", true, "sha256 " + sha256_hex(encode_golden(actual))};
}

}  // namespace

std::string default_fixtures_dir() {
  if (const char* env = std::getenv("MOELAB_FIXTURES_DIR"); env && *env) return env;
  return MOELAB_DEFAULT_FIXTURES_DIR;
}

std::vector<CheckResult> run_invariant_suite(const SuiteOptions& options) {
  std::vector<CheckResult> results;
  auto guarded = [&results](const char* name, auto&& fn) {
    try {
      results.push_back(fn());
    } catch (const std::exception& e) {
      results.push_back({name, false, e.what()});
    }
  };
  guarded("compute-bound intensity", compute_bound_threshold);
  guarded("t_exp threshold", token_threshold);
  guarded("comm/compute ratio", ratio);
  guarded("cost-table parity", table_parity);
  guarded("diversity inequality", diversity);
  guarded("routed parameter parity", param_parity);
  guarded("gradient check", [&] { return gradcheck(options.gradcheck_seed); });
  guarded("routing oracle", routing);
  guarded("identity collapse", identity_collapse);
  guarded("EPM arithmetic", epm);
  guarded("golden vector", [&] {
    return golden(options.fixtures_dir.empty() ? default_fixtures_dir() : options.fixtures_dir);
  });
  return results;
}

}  // namespace moelab::check
