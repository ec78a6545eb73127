#include "moelab/report.hpp"

#include <cstdio>
#include <sstream>

#include "moelab/errors.hpp"

namespace moelab {

namespace {

std::string g4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Regime parse_regime(const std::string& s) {
  if (s == "compute_bound") return Regime::compute_bound;
  if (s == "memory_bound") return Regime::memory_bound;
  throw ConfigError("unknown regime '" + s + "'");
}

}  // namespace

AnalysisReport analyze(const MoEConfig& model, const HardwareSpec& hw, std::optional<double> t_exp,
                       std::optional<double> t_total) {
  model.validate();
  hw.validate();
  AnalysisReport r;
  r.model = model;
  r.hardware = hw;
  if (t_total) {
    r.t_total = *t_total;
    r.t_exp = tokens_per_expert(*t_total, static_cast<double>(model.active_effective()),
                                static_cast<double>(model.routed_effective()));
  } else if (t_exp) {
    if (*t_exp < 0.0) throw DomainError("t_exp must be non-negative");
    r.t_exp = *t_exp;
  } else {
    throw ConfigError("either t_exp or t_total is required");
  }
  const double dim = static_cast<double>(model.routed_dim());
  const double m = static_cast<double>(model.intermediate_dim);
  r.intensity = r.t_exp > 0.0 ? arithmetic_intensity(r.t_exp, dim, m) : 0.0;
  r.compute_bound_intensity = compute_bound_intensity(hw);
  r.regime = classify(hw, r.intensity);
  r.t_exp_threshold = solve_t_exp_threshold(hw, dim, m);
  r.comm_compute_ratio = comm_compute_ratio(hw, m);

  // Cost-table rows are expressed relative to the standard layer at the same
  // t_total, so convert back to the standard t_exp.
  const double t_exp_standard =
      r.t_exp * static_cast<double>(model.routed_effective()) /
      static_cast<double>(model.active_effective()) * static_cast<double>(model.active_experts) /
      static_cast<double>(model.routed_experts);
  r.cost_rows = cost_table(model, hw, t_exp_standard);
  r.params = count_params(model);
  r.flops = count_flops(model);
  r.diversity = diversity_gain(model.routed_experts, model.active_experts, model.alpha(),
                               model.intermediate_dim);
  return r;
}

void to_json(nlohmann::json& j, const AnalysisReport& r) {
  j = nlohmann::json::object();
  j["model"] = r.model;
  j["hardware"] = r.hardware;
  j["t_total"] = r.t_total ? nlohmann::json(*r.t_total) : nlohmann::json(nullptr);
  j["t_exp"] = r.t_exp;
  j["intensity"] = r.intensity;
  j["compute_bound_intensity"] = r.compute_bound_intensity;
  j["regime"] = std::string(to_string(r.regime));
  j["t_exp_threshold"] =
      r.t_exp_threshold ? nlohmann::json(*r.t_exp_threshold) : nlohmann::json(nullptr);
  j["comm_compute_ratio"] = r.comm_compute_ratio;
  j["cost_rows"] = r.cost_rows;
  j["params"] = {{"routed_total", r.params.routed_total},
                 {"shared_total", r.params.shared_total},
                 {"router_total", r.params.router_total},
                 {"projection_total", r.params.projection_total},
                 {"layer_total", r.params.layer_total},
                 {"model_total", r.params.model_total},
                 {"active_per_token", r.params.active_per_token}};
  j["flops"] = {{"routed", r.flops.routed},
                {"shared", r.flops.shared},
                {"router", r.flops.router},
                {"projection", r.flops.projection},
                {"total", r.flops.total}};
  j["diversity"] = {{"log_binom_base", r.diversity.log_binom_base},
                    {"log_binom_scaled", r.diversity.log_binom_scaled},
                    {"log_gain", r.diversity.log_gain},
                    {"u_eff", r.diversity.u_eff}};
}

void from_json(const nlohmann::json& j, AnalysisReport& r) {
  r.model = j.at("model").get<MoEConfig>();
  r.hardware = j.at("hardware").get<HardwareSpec>();
  r.t_total = j.at("t_total").is_null() ? std::nullopt
                                        : std::optional<double>(j.at("t_total").get<double>());
  j.at("t_exp").get_to(r.t_exp);
  j.at("intensity").get_to(r.intensity);
  j.at("compute_bound_intensity").get_to(r.compute_bound_intensity);
  r.regime = parse_regime(j.at("regime").get<std::string>());
  r.t_exp_threshold = j.at("t_exp_threshold").is_null()
                          ? std::nullopt
                          : std::optional<double>(j.at("t_exp_threshold").get<double>());
  j.at("comm_compute_ratio").get_to(r.comm_compute_ratio);
  r.cost_rows = j.at("cost_rows").get<std::vector<CostBreakdown>>();
  const auto& p = j.at("params");
  p.at("routed_total").get_to(r.params.routed_total);
  p.at("shared_total").get_to(r.params.shared_total);
  p.at("router_total").get_to(r.params.router_total);
  p.at("projection_total").get_to(r.params.projection_total);
  p.at("layer_total").get_to(r.params.layer_total);
  p.at("model_total").get_to(r.params.model_total);
  p.at("active_per_token").get_to(r.params.active_per_token);
  const auto& f = j.at("flops");
  f.at("routed").get_to(r.flops.routed);
  f.at("shared").get_to(r.flops.shared);
  f.at("router").get_to(r.flops.router);
  f.at("projection").get_to(r.flops.projection);
  f.at("total").get_to(r.flops.total);
  const auto& d = j.at("diversity");
  d.at("log_binom_base").get_to(r.diversity.log_binom_base);
  d.at("log_binom_scaled").get_to(r.diversity.log_binom_scaled);
  d.at("log_gain").get_to(r.diversity.log_gain);
  d.at("u_eff").get_to(r.diversity.u_eff);
}

std::string format_human(const AnalysisReport& r) {
  std::ostringstream os;
  const auto& c = r.model;
  os << "model: d=" << c.hidden_dim << " l=" << c.effective_latent_dim() << " N=" << c.routed_experts
     << " K=" << c.active_experts << " S=" << c.shared_experts << " m=" << c.intermediate_dim
     << " L=" << c.layers << " " << to_string(c.activation) << " " << to_string(c.variant)
     << " (alpha=" << c.alpha() << ")\n";
  os << "hardware: F=" << g4(r.hardware.peak_flops) << " FLOP/s  HBM=" << g4(r.hardware.bw_hbm)
     << " B/s  NVL=" << g4(r.hardware.bw_nvl) << " B/s  EP=" << r.hardware.ep << "\n";
  if (r.t_total) os << "t_total: " << g4(*r.t_total) << "\n";
  os << "t_exp: " << g4(r.t_exp) << "\n";
  os << "arithmetic intensity: " << g4(r.intensity) << " FLOPs/byte\n";
  os << "compute-bound intensity: " << g4(r.compute_bound_intensity) << " FLOPs/byte\n";
  os << "regime: " << to_string(r.regime) << "\n";
  os << "t_exp threshold: "
     << (r.t_exp_threshold ? g4(*r.t_exp_threshold) : std::string("never compute-bound")) << "\n";
  os << "comm/compute ratio: " << g4(r.comm_compute_ratio) << "\n";
  os << "cost rows:\n";
  for (const auto& row : r.cost_rows)
    os << "  " << to_string(row.variant) << ": t_exp=" << g4(row.t_exp)
       << " comm=" << g4(row.comm_bytes) << " B  weight/expert=" << g4(row.weight_bytes_per_expert)
       << " B  active weight=" << g4(row.active_weight_bytes) << " B  " << to_string(row.regime)
       << "\n";
  os << "params/layer: routed=" << r.params.routed_total << " shared=" << r.params.shared_total
     << " router=" << r.params.router_total << " projection=" << r.params.projection_total
     << " active/token=" << r.params.active_per_token << "\n";
  os << "params/model: " << r.params.model_total << "\n";
  os << "flops/token/layer: routed=" << r.flops.routed << " shared=" << r.flops.shared
     << " router=" << r.flops.router << " projection=" << r.flops.projection
     << " total=" << r.flops.total << "\n";
  os << "diversity: ln C(N,K)=" << g4(r.diversity.log_binom_base)
     << " ln C(aN,aK)=" << g4(r.diversity.log_binom_scaled)
     << " log gain=" << g4(r.diversity.log_gain) << " U_eff=" << r.diversity.u_eff << "\n";
  return os.str();
}

}  // namespace moelab
