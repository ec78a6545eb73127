/*
 * perf_model.hpp
 *
 * Closed-form serving-cost model for expert-parallel MoE inference:
 * roofline arithmetic intensity of a single expert, the token count at which
 * experts become compute-bound, and the all-to-all communication volume
 * relative to expert compute. Tokens are assumed to spread uniformly over
 * experts.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>
#include <json.hpp>

#include "moelab/config.hpp"

namespace moelab {

struct HardwareSpec {
  double peak_flops = 0.0;  // FLOP/s
  double bw_hbm = 0.0;      // bytes/s
  double bw_nvl = 0.0;      // bytes/s, one direction
  std::int64_t ep = 1;      // expert-parallel degree
  double bytes_dispatch = 0.5;
  double bytes_aggregate = 2.0;
  double bytes_weight = 0.5;

  void validate() const;
  bool operator==(const HardwareSpec&) const = default;
};

void to_json(nlohmann::json& j, const HardwareSpec& hw);
void from_json(const nlohmann::json& j, HardwareSpec& hw);

HardwareSpec parse_hardware_config(const std::string& json_text);
HardwareSpec load_hardware_config(const std::string& path);

std::vector<std::string> hardware_fixture_names();
HardwareSpec hardware_fixture(std::string_view name);

enum class Regime { memory_bound, compute_bound };
std::string_view to_string(Regime r) noexcept;

/// I = 2 t d m / (d m + t (d + m)).
double arithmetic_intensity(double t_exp, double d, double m);

/// F / BW_hbm.
double compute_bound_intensity(const HardwareSpec& hw) noexcept;

/// Smallest t_exp with arithmetic_intensity >= F / BW_hbm, or nullopt when
/// the asymptote 2dm/(d+m) never reaches it.
std::optional<double> solve_t_exp_threshold(const HardwareSpec& hw, double d, double m);

/// min(F, I * BW_hbm).
double roofline_attainable(const HardwareSpec& hw, double intensity);

Regime classify(const HardwareSpec& hw, double intensity) noexcept;

/// All-to-all bytes per GPU per layer:
/// (bytes_dispatch + bytes_aggregate) * (N_eff / ep) * t_exp * routed_dim.
double comm_volume(double routed_experts, std::int64_t ep, double t_exp, double routed_dim,
                   const HardwareSpec& hw);

/// Expert FLOPs per GPU per layer, one d x m GEMM per expert:
/// 2 * (N_eff / ep) * t_exp * routed_dim * m.
double expert_compute_flops(double routed_experts, std::int64_t ep, double t_exp,
                            double routed_dim, double m);

/// t_comm / t_comp = (bytes_dispatch + bytes_aggregate) * F / (2 m BW_nvl).
double comm_compute_ratio(const HardwareSpec& hw, double m);

/// t_exp = t_total * K / N.
double tokens_per_expert(double t_total, double active, double routed);

struct CostBreakdown {
  Variant variant = Variant::standard;
  double routed_experts = 0.0;  // N_eff
  double active_experts = 0.0;  // K_eff
  double routed_dim = 0.0;
  double t_exp = 0.0;
  double comm_bytes = 0.0;              // per GPU per layer
  double compute_flops = 0.0;           // per GPU per layer
  double weight_bytes_per_expert = 0.0;  // routed_dim * m * bytes_weight
  double active_weight_bytes = 0.0;      // K_eff * weight_bytes_per_expert, per token
  double intensity = 0.0;
  double t_comm = 0.0;
  double t_comp = 0.0;
  double ratio = 0.0;
  Regime regime = Regime::memory_bound;

  bool operator==(const CostBreakdown&) const = default;
};

void to_json(nlohmann::json& j, const CostBreakdown& c);
void from_json(const nlohmann::json& j, CostBreakdown& c);

using Rational = boost::rational<std::int64_t>;

/// Cost-table terms in elements (normalised by hardware constants), exact
/// for integer inputs.
struct ElementCosts {
  Variant variant = Variant::standard;
  Rational t_exp;
  Rational comm_elements;               // (N_eff / ep) * t_exp * routed_dim
  Rational weight_elements_per_expert;  // routed_dim * m
  Rational active_weight_elements;      // K_eff * routed_dim * m
};

/// Exact counterpart of cost_table for the three variants.
std::vector<ElementCosts> element_cost_table(const MoEConfig& config, std::int64_t ep,
                                             Rational t_exp);

/// Rows for standard, latent_eff and latent_acc built from the base (N, K, d,
/// m) of `config` and alpha = d / latent_dim. `t_exp` is the standard
/// layer's tokens per expert; latent_eff sees t_exp / alpha.
std::vector<CostBreakdown> cost_table(const MoEConfig& config, const HardwareSpec& hw,
                                      double t_exp);

}  // namespace moelab
