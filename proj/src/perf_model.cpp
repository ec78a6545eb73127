#include "moelab/perf_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "moelab/errors.hpp"

namespace moelab {

void HardwareSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(peak_flops, "peak_flops");
  positive(bw_hbm, "bw_hbm");
  positive(bw_nvl, "bw_nvl");
  positive(bytes_dispatch, "bytes_dispatch");
  positive(bytes_aggregate, "bytes_aggregate");
  positive(bytes_weight, "bytes_weight");
  if (ep < 1) throw ConfigError("ep must be at least 1");
}

void to_json(nlohmann::json& j, const HardwareSpec& hw) {
  j = nlohmann::json{{"peak_flops", hw.peak_flops},         {"bw_hbm", hw.bw_hbm},
                     {"bw_nvl", hw.bw_nvl},                 {"ep", hw.ep},
                     {"bytes_dispatch", hw.bytes_dispatch}, {"bytes_aggregate", hw.bytes_aggregate},
                     {"bytes_weight", hw.bytes_weight}};
}

void from_json(const nlohmann::json& j, HardwareSpec& hw) {
  if (!j.is_object()) throw ConfigError("hardware config must be a JSON object");
  static const char* const kRequired[] = {"peak_flops", "bw_hbm", "bw_nvl", "ep"};
  static const char* const kOptional[] = {"bytes_dispatch", "bytes_aggregate", "bytes_weight"};
  for (const char* key : kRequired)
    if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kRequired) known = known || key == k;
    for (const char* k : kOptional) known = known || key == k;
    if (!known) throw ConfigError("unknown key '" + key + "'");
  }
  auto number = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return v.get<double>();
  };
  hw = HardwareSpec{};
  hw.peak_flops = number("peak_flops", 0.0);
  hw.bw_hbm = number("bw_hbm", 0.0);
  hw.bw_nvl = number("bw_nvl", 0.0);
  if (!j.at("ep").is_number_integer()) throw ConfigError("'ep' must be an integer");
  hw.ep = j.at("ep").get<std::int64_t>();
  hw.bytes_dispatch = number("bytes_dispatch", hw.bytes_dispatch);
  hw.bytes_aggregate = number("bytes_aggregate", hw.bytes_aggregate);
  hw.bytes_weight = number("bytes_weight", hw.bytes_weight);
}

HardwareSpec parse_hardware_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  auto hw = j.get<HardwareSpec>();
  hw.validate();
  return hw;
}

HardwareSpec load_hardware_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hardware_config(ss.str());
}

std::vector<std::string> hardware_fixture_names() { return {"GB200-NVL72-EP64"}; }

HardwareSpec hardware_fixture(std::string_view name) {
  if (name == "GB200-NVL72-EP64") return HardwareSpec{10e15, 8e12, 900e9, 64, 0.5, 2.0, 0.5};
  throw ConfigError("unknown hardware fixture '" + std::string(name) + "'");
}

std::string_view to_string(Regime r) noexcept {
  return r == Regime::compute_bound ? "compute_bound" : "memory_bound";
}

double arithmetic_intensity(double t_exp, double d, double m) {
  if (!(t_exp > 0.0) || !(d > 0.0) || !(m > 0.0))
    throw DomainError("arithmetic_intensity needs positive t_exp, d and m");
  return 2.0 * t_exp * d * m / (d * m + t_exp * (d + m));
}

double compute_bound_intensity(const HardwareSpec& hw) noexcept {
  return hw.peak_flops / hw.bw_hbm;
}

std::optional<double> solve_t_exp_threshold(const HardwareSpec& hw, double d, double m) {
  if (!(d > 0.0) || !(m > 0.0)) throw DomainError("threshold needs positive d and m");
  const double theta = compute_bound_intensity(hw);
  const double denom = 2.0 * d * m - theta * (d + m);
  if (!(denom > 0.0)) return std::nullopt;
  return theta * d * m / denom;
}

double roofline_attainable(const HardwareSpec& hw, double intensity) {
  if (!(intensity >= 0.0)) throw DomainError("intensity must be non-negative");
  return std::min(hw.peak_flops, intensity * hw.bw_hbm);
}

Regime classify(const HardwareSpec& hw, double intensity) noexcept {
  return intensity >= compute_bound_intensity(hw) ? Regime::compute_bound : Regime::memory_bound;
}

double comm_volume(double routed_experts, std::int64_t ep, double t_exp, double routed_dim,
                   const HardwareSpec& hw) {
  return (hw.bytes_dispatch + hw.bytes_aggregate) * (routed_experts / static_cast<double>(ep)) *
         t_exp * routed_dim;
}

double expert_compute_flops(double routed_experts, std::int64_t ep, double t_exp,
                            double routed_dim, double m) {
  return 2.0 * (routed_experts / static_cast<double>(ep)) * t_exp * routed_dim * m;
}

double comm_compute_ratio(const HardwareSpec& hw, double m) {
  if (!(m > 0.0)) throw DomainError("m must be positive");
  return (hw.bytes_dispatch + hw.bytes_aggregate) * hw.peak_flops / (2.0 * m * hw.bw_nvl);
}

double tokens_per_expert(double t_total, double active, double routed) {
  if (t_total < 0.0 || !(active > 0.0) || !(routed > 0.0))
    throw DomainError("tokens_per_expert needs t_total >= 0 and positive K, N");
  return t_total * active / routed;
}

namespace {

struct RowShape {
  Variant variant;
  std::int64_t routed;
  std::int64_t active;
  std::int64_t dim;
};

std::vector<RowShape> row_shapes(const MoEConfig& config) {
  config.validate();
  const std::int64_t a = config.alpha();
  const std::int64_t n = config.routed_experts;
  const std::int64_t k = config.active_experts;
  const std::int64_t l = config.routed_dim();
  return {{Variant::standard, n, k, config.hidden_dim},
          {Variant::latent_eff, a * n, k, l},
          {Variant::latent_acc, a * n, a * k, l}};
}

}  // namespace

std::vector<ElementCosts> element_cost_table(const MoEConfig& config, std::int64_t ep,
                                             Rational t_exp) {
  if (ep < 1) throw ConfigError("ep must be at least 1");
  if (t_exp < 0) throw DomainError("t_exp must be non-negative");
  const auto shapes = row_shapes(config);
  // Uniform routing: t_total = t_exp * N / K is shared by all three rows.
  const Rational t_total = t_exp * Rational(shapes[0].routed, shapes[0].active);
  std::vector<ElementCosts> rows;
  for (const auto& s : shapes) {
    ElementCosts r;
    r.variant = s.variant;
    r.t_exp = t_total * Rational(s.active, s.routed);
    r.comm_elements = Rational(s.routed, ep) * r.t_exp * s.dim;
    r.weight_elements_per_expert = Rational(s.dim * config.intermediate_dim);
    r.active_weight_elements = r.weight_elements_per_expert * s.active;
    rows.push_back(r);
  }
  return rows;
}

std::vector<CostBreakdown> cost_table(const MoEConfig& config, const HardwareSpec& hw,
                                      double t_exp) {
  hw.validate();
  if (!(t_exp >= 0.0)) throw DomainError("t_exp must be non-negative");
  const auto shapes = row_shapes(config);
  const double m = static_cast<double>(config.intermediate_dim);
  const double t_total = t_exp * static_cast<double>(shapes[0].routed) /
                         static_cast<double>(shapes[0].active);
  std::vector<CostBreakdown> rows;
  for (const auto& s : shapes) {
    CostBreakdown c;
    c.variant = s.variant;
    c.routed_experts = static_cast<double>(s.routed);
    c.active_experts = static_cast<double>(s.active);
    c.routed_dim = static_cast<double>(s.dim);
    c.t_exp = s.variant == Variant::standard
                  ? t_exp
                  : tokens_per_expert(t_total, c.active_experts, c.routed_experts);
    c.comm_bytes = comm_volume(c.routed_experts, hw.ep, c.t_exp, c.routed_dim, hw);
    c.compute_flops = expert_compute_flops(c.routed_experts, hw.ep, c.t_exp, c.routed_dim, m);
    c.weight_bytes_per_expert = c.routed_dim * m * hw.bytes_weight;
    c.active_weight_bytes = c.active_experts * c.weight_bytes_per_expert;
    c.t_comm = c.comm_bytes / hw.bw_nvl;
    c.t_comp = c.compute_flops / hw.peak_flops;
    c.ratio = c.t_comp > 0.0 ? c.t_comm / c.t_comp : 0.0;
    c.intensity = c.t_exp > 0.0 ? arithmetic_intensity(c.t_exp, c.routed_dim, m) : 0.0;
    c.regime = classify(hw, c.intensity);
    rows.push_back(c);
  }
  return rows;
}

void to_json(nlohmann::json& j, const CostBreakdown& c) {
  j = nlohmann::json{{"variant", std::string(to_string(c.variant))},
                     {"routed_experts", c.routed_experts},
                     {"active_experts", c.active_experts},
                     {"routed_dim", c.routed_dim},
                     {"t_exp", c.t_exp},
                     {"comm_bytes", c.comm_bytes},
                     {"compute_flops", c.compute_flops},
                     {"weight_bytes_per_expert", c.weight_bytes_per_expert},
                     {"active_weight_bytes", c.active_weight_bytes},
                     {"intensity", c.intensity},
                     {"t_comm", c.t_comm},
                     {"t_comp", c.t_comp},
                     {"ratio", c.ratio},
                     {"regime", std::string(to_string(c.regime))}};
}

void from_json(const nlohmann::json& j, CostBreakdown& c) {
  c.variant = parse_variant(j.at("variant").get<std::string>());
  j.at("routed_experts").get_to(c.routed_experts);
  j.at("active_experts").get_to(c.active_experts);
  j.at("routed_dim").get_to(c.routed_dim);
  j.at("t_exp").get_to(c.t_exp);
  j.at("comm_bytes").get_to(c.comm_bytes);
  j.at("compute_flops").get_to(c.compute_flops);
  j.at("weight_bytes_per_expert").get_to(c.weight_bytes_per_expert);
  j.at("active_weight_bytes").get_to(c.active_weight_bytes);
  j.at("intensity").get_to(c.intensity);
  j.at("t_comm").get_to(c.t_comm);
  j.at("t_comp").get_to(c.t_comp);
  j.at("ratio").get_to(c.ratio);
  const auto regime = j.at("regime").get<std::string>();
  if (regime == "compute_bound")
    c.regime = Regime::compute_bound;
  else if (regime == "memory_bound")
    c.regime = Regime::memory_bound;
  else
    throw ConfigError("unknown regime '" + regime + "'");
}

}  // namespace moelab
