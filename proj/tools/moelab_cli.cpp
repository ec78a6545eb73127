/*
 * moelab_cli.cpp
 *
 * Command-line front end: analyze, roofline, compare, forward, epm, check.
 * Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
 */
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moelab/check/invariant_suite.hpp"
#include "moelab/config.hpp"
#include "moelab/errors.hpp"
#include "moelab/expressivity.hpp"
#include "moelab/golden.hpp"
#include "moelab/moe_layer.hpp"
#include "moelab/perf_model.hpp"
#include "moelab/report.hpp"
#include "moelab/scaling_epm.hpp"

namespace fs = std::filesystem;
using namespace moelab;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

std::string num17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// A file path, or the name of a fixture looked up in $MOELAB_FIXTURES_DIR/<sub>/
// and then among the built-ins.
template <typename LoadFn, typename BuiltinFn>
auto resolve(const std::string& ref, const char* sub, LoadFn load, BuiltinFn builtin) {
  if (ref.empty()) throw UsageError(std::string("missing --") + (sub[0] == 'm' ? "model" : "hw"));
  if (fs::exists(ref)) return load(ref);
  if (const char* dir = std::getenv("MOELAB_FIXTURES_DIR"); dir && *dir) {
    const auto candidate = fs::path(dir) / sub / (ref + ".json");
    if (fs::exists(candidate)) return load(candidate.string());
  }
  try {
    return builtin(ref);
  } catch (const ConfigError&) {
    throw IoError("'" + ref + "' is neither a readable file nor a known fixture");
  }
}

MoEConfig resolve_model(const std::string& ref) {
  return resolve(ref, "models", load_model_config,
                 [](const std::string& n) { return model_fixture(n); });
}

HardwareSpec resolve_hw(const std::string& ref) {
  return resolve(ref, "hardware", load_hardware_config,
                 [](const std::string& n) { return hardware_fixture(n); });
}

std::string fraction(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// Arrows are one column wide but three bytes, so pad them here rather than
// through printf widths.
std::string arrow(int direction, int width) {
  std::string s = direction > 0 ? "↑" : (direction == 0 ? "→" : "↓");
  return s + std::string(width - 1, ' ');
}

struct Options {
  std::string model;
  std::string hw;
  std::vector<double> t_exp;
  std::optional<double> t_total;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t tokens = 1;
  bool json = false;
  bool renormalize = false;
  bool identity = false;
  std::string out = "forward.bin";
  std::string data;
  std::optional<double> score;
  double arg_a = 0.0;
  double arg_b = 0.0;
};

int cmd_analyze(const Options& o) {
  const auto model = resolve_model(o.model);
  const auto hw = resolve_hw(o.hw);
  if (!o.t_total && o.t_exp.size() != 1) throw UsageError("analyze needs one --t-exp or --t-total");
  std::optional<double> t_exp;
  if (!o.t_exp.empty()) t_exp = o.t_exp.front();
  const auto report = analyze(model, hw, t_exp, o.t_total);
  if (o.json)
    std::cout << nlohmann::json(report).dump(2) << "\n";
  else
    std::cout << format_human(report);
  return kOk;
}

int cmd_roofline(const Options& o) {
  const auto hw = resolve_hw(o.hw);
  const auto model = resolve_model(o.model);
  if (o.t_exp.empty()) throw UsageError("roofline needs at least one --t-exp value");
  const double d = static_cast<double>(model.routed_dim());
  const double m = static_cast<double>(model.intermediate_dim);
  std::cout << "t_exp,intensity,attainable_flops,regime\n";
  for (double t : o.t_exp) {
    if (!(t > 0.0)) throw UsageError("t_exp values must be positive");
    const double intensity = arithmetic_intensity(t, d, m);
    std::cout << num17(t) << "," << num17(intensity) << ","
              << num17(roofline_attainable(hw, intensity)) << ","
              << to_string(classify(hw, intensity)) << "\n";
  }
  return kOk;
}

int cmd_compare(const Options& o) {
  const auto model = resolve_model(o.model);
  const auto hw = resolve_hw(o.hw);
  const double t_exp = o.t_exp.empty() ? 1.0 : o.t_exp.front();
  const auto rows = cost_table(model, hw, t_exp);
  // Exact ratios do not depend on t_exp.
  const auto exact = element_cost_table(model, hw.ep, Rational(1));
  const auto& base = exact[0];
  const auto diversity = diversity_gain(model.routed_experts, model.active_experts, model.alpha());

  if (o.json) {
    nlohmann::json j;
    j["alpha"] = model.alpha();
    j["t_exp"] = t_exp;
    j["rows"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      nlohmann::json r = rows[i];
      r["comm_ratio"] = fraction(exact[i].comm_elements / base.comm_elements);
      r["weight_per_expert_ratio"] =
          fraction(exact[i].weight_elements_per_expert / base.weight_elements_per_expert);
      r["active_weight_ratio"] =
          fraction(exact[i].active_weight_elements / base.active_weight_elements);
      j["rows"].push_back(r);
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
  }

  std::printf("alpha = %lld, t_exp = %s (standard layer), EP = %lld\n",
              static_cast<long long>(model.alpha()), num4(t_exp).c_str(),
              static_cast<long long>(hw.ep));
  std::printf("%-12s %-22s %-22s %-14s %-10s %-10s\n", "architecture", "comm B/GPU/layer",
              "weight B/expert", "active wt", "accuracy", "efficiency");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Rational comm = exact[i].comm_elements / base.comm_elements;
    const Rational wexp = exact[i].weight_elements_per_expert / base.weight_elements_per_expert;
    const Rational active = exact[i].active_weight_elements / base.active_weight_elements;
    std::string accuracy = "--        ", efficiency = "--";
    if (i > 0) {
      // Cheaper traffic is an efficiency gain; more selected experts is an
      // accuracy gain.
      const Rational one(1);
      const int eff_dir = (comm < one || active < one) ? 1 : (comm == one && active == one ? 0 : -1);
      const bool more_diverse =
          rows[i].active_experts > rows[0].active_experts && diversity.log_gain > 0.0;
      efficiency = arrow(eff_dir, 1);
      accuracy = arrow(more_diverse ? 1 : 0, 10);
    }
    const std::string comm_cell = num4(rows[i].comm_bytes) + " (x" + fraction(comm) + ")";
    const std::string w_cell = num4(rows[i].weight_bytes_per_expert) + " (x" + fraction(wexp) + ")";
    std::printf("%-12s %-22s %-22s %-14s %s %s\n", std::string(to_string(rows[i].variant)).c_str(),
                comm_cell.c_str(), w_cell.c_str(), ("x" + fraction(active)).c_str(),
                accuracy.c_str(), efficiency.c_str());
  }
  return kOk;
}

int cmd_forward(Options o) {
  auto model = resolve_model(o.model);
  model.renormalize_gates = o.renormalize;
  if (o.tokens == 0) throw UsageError("--tokens must be positive");
  const Matrix out = seeded_forward(model, o.seed, o.tokens, o.identity);
  write_golden(o.out, out.flat());
  const std::string digest = sha256_hex(encode_golden(out.flat()));
  if (o.json) {
    std::cout << nlohmann::json{{"sha256", digest}, {"values", out.size()}, {"path", o.out}}.dump()
              << "\n";
  } else {
    std::cout << "sha256 " << digest << " values " << out.size() << " " << o.out << "\n";
  }
  return kOk;
}

int cmd_epm_fit(const Options& o) {
  if (o.data.empty()) throw UsageError("epm fit needs --data CSV");
  const auto points = load_accuracy_csv(o.data);
  const auto fit = fit_log_linear(points);
  if (o.json) {
    nlohmann::json j{{"a", fit.a}, {"b", fit.b}, {"residual_rms", fit.residual_rms},
                     {"n_points", fit.n_points}};
    if (o.score) j["n_eff"] = invert_scaling_law(fit, *o.score);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "a " << num4(fit.a) << "\nb " << num4(fit.b) << "\nresidual_rms "
              << num4(fit.residual_rms) << "\nn_points " << fit.n_points << "\n";
    if (o.score) std::cout << "n_eff " << num4(invert_scaling_law(fit, *o.score)) << "\n";
  }
  return kOk;
}

int cmd_epm_lambda(const Options& o) {
  const double lambda = epm_lambda(o.arg_a, o.arg_b);
  if (o.json)
    std::cout << nlohmann::json{{"lambda", lambda}}.dump() << "\n";
  else
    std::cout << "lambda " << num4(lambda) << "\n";
  return kOk;
}

int cmd_epm_iso(const Options& o) {
  const auto iso = iso_accuracy_size(o.arg_a, o.arg_b);
  if (o.json)
    std::cout << nlohmann::json{{"n_iso", iso.n_iso}, {"delta", iso.delta}}.dump() << "\n";
  else
    std::cout << "n_iso " << num4(iso.n_iso) << "\ndelta +" << num4(iso.delta) << "\n";
  return kOk;
}

int cmd_check(const Options& o) {
  check::SuiteOptions options;
  options.fixtures_dir = check::default_fixtures_dir();
  if (o.seed_given) options.gradcheck_seed = o.seed;
  const auto results = check::run_invariant_suite(options);
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  std::cout << (all ? "all checks passed" : "check failed") << "\n";
  return all ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moelab: MoE / LatentMoE layer and serving-cost analysis"};
  app.require_subcommand(1);
  Options o;

  auto add_model = [&o](CLI::App* c) { c->add_option("--model", o.model, "model config JSON or fixture name"); };
  auto add_hw = [&o](CLI::App* c) { c->add_option("--hw", o.hw, "hardware config JSON or fixture name"); };
  auto add_json = [&o](CLI::App* c) { c->add_flag("--json", o.json, "machine-readable output"); };

  auto* analyze_cmd = app.add_subcommand("analyze", "roofline, communication and cost report");
  add_model(analyze_cmd);
  add_hw(analyze_cmd);
  analyze_cmd->add_option("--t-exp", o.t_exp, "tokens per expert");
  analyze_cmd->add_option("--t-total", o.t_total, "tokens across the EP group");
  add_json(analyze_cmd);

  auto* roofline_cmd = app.add_subcommand("roofline", "CSV roofline sweep over t_exp");
  add_model(roofline_cmd);
  add_hw(roofline_cmd);
  roofline_cmd->add_option("--t-exp", o.t_exp, "tokens per expert (repeatable or comma separated)")
      ->delimiter(',');

  auto* compare_cmd = app.add_subcommand("compare", "standard vs LatentMoE cost table");
  add_model(compare_cmd);
  add_hw(compare_cmd);
  compare_cmd->add_option("--t-exp", o.t_exp, "tokens per expert of the standard layer");
  add_json(compare_cmd);

  auto* forward_cmd = app.add_subcommand("forward", "seeded forward pass to a golden-vector file");
  add_model(forward_cmd);
  forward_cmd->add_option("--seed", o.seed, "weight and token seed");
  forward_cmd->add_option("--tokens", o.tokens, "number of seeded tokens");
  forward_cmd->add_option("--out", o.out, "output file");
  forward_cmd->add_flag("--renormalize-gates", o.renormalize, "renormalize selected gates");
  forward_cmd->add_flag("--identity-projections", o.identity, "use identity W_down/W_up (alpha = 1)");
  add_json(forward_cmd);

  auto* epm_cmd = app.add_subcommand("epm", "effective parameter multiplier");
  epm_cmd->require_subcommand(1);
  auto* fit_cmd = epm_cmd->add_subcommand("fit", "fit score = a ln N + b to CSV data");
  fit_cmd->add_option("--data", o.data, "CSV with header n_params,score");
  fit_cmd->add_option("--score", o.score, "invert the fit at this score");
  add_json(fit_cmd);
  auto* lambda_cmd = epm_cmd->add_subcommand("lambda", "lambda = N_eff / N_treat");
  lambda_cmd->add_option("n_eff", o.arg_a)->required();
  lambda_cmd->add_option("n_treat", o.arg_b)->required();
  add_json(lambda_cmd);
  auto* iso_cmd = epm_cmd->add_subcommand("iso", "iso-accuracy size lambda * N_treat");
  iso_cmd->add_option("lambda", o.arg_a)->required();
  iso_cmd->add_option("n_treat", o.arg_b)->required();
  add_json(iso_cmd);

  auto* check_cmd = app.add_subcommand("check", "run the invariant suite");
  auto* seed_opt = check_cmd->add_option("--seed", o.seed, "rerun the gradient check on this seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  o.seed_given = seed_opt->count() > 0;

  try {
    if (*analyze_cmd) return cmd_analyze(o);
    if (*roofline_cmd) return cmd_roofline(o);
    if (*compare_cmd) return cmd_compare(o);
    if (*forward_cmd) return cmd_forward(o);
    if (*fit_cmd) return cmd_epm_fit(o);
    if (*lambda_cmd) return cmd_epm_lambda(o);
    if (*iso_cmd) return cmd_epm_iso(o);
    if (*check_cmd) return cmd_check(o);
  } catch (const std::exception& e) {
    std::cerr << "moelab: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
