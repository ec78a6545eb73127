/*
 * config.hpp
 *
 * Architectural hyperparameters of one MoE sublayer and the built-in model
 * fixtures.
 */
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace moelab {

enum class Activation { swiglu, squared_relu };
enum class Variant { standard, latent_eff, latent_acc };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Variant v) noexcept;
Activation parse_activation(std::string_view s);
Variant parse_variant(std::string_view s);

/// Weight matrices per expert: 3 for gated activations, 2 otherwise.
int matrices_per_expert(Activation a) noexcept;

/**
 * Hyperparameters of an MoE layer. `routed_experts` and `active_experts` are
 * always the base values N and K; latent variants derive N' = alpha*N and
 * (for latent_acc) K' = alpha*K from alpha = hidden_dim / latent_dim.
 */
struct MoEConfig {
  std::int64_t layers = 1;
  std::int64_t hidden_dim = 0;
  std::int64_t latent_dim = 0;
  std::int64_t routed_experts = 0;
  std::int64_t active_experts = 0;
  std::int64_t shared_experts = 0;
  std::int64_t intermediate_dim = 0;
  Activation activation = Activation::swiglu;
  Variant variant = Variant::standard;

  /// Renormalize the selected gating weights to sum to one. Not part of the
  /// JSON document; off by default.
  bool renormalize_gates = false;

  /// Throws ConfigError when any invariant is violated.
  void validate() const;

  bool is_latent() const noexcept { return variant != Variant::standard; }
  /// Latent width actually used: hidden_dim for the standard variant.
  std::int64_t effective_latent_dim() const noexcept;
  /// Compression ratio d / l (1 for the standard variant).
  std::int64_t alpha() const noexcept;
  /// Input width of routed experts.
  std::int64_t routed_dim() const noexcept { return effective_latent_dim(); }
  /// N for standard, alpha * N for latent variants.
  std::int64_t routed_effective() const noexcept;
  /// Experts selected per token: K, or alpha * K for latent_acc.
  std::int64_t active_effective() const noexcept;

  /// Same architecture re-expressed as another variant at compression ratio alpha.
  MoEConfig as_variant(Variant v, std::int64_t alpha) const;

  bool operator==(const MoEConfig&) const = default;
};

void to_json(nlohmann::json& j, const MoEConfig& c);
void from_json(const nlohmann::json& j, MoEConfig& c);

MoEConfig parse_model_config(const std::string& json_text);
MoEConfig load_model_config(const std::string& path);

/// Names of the built-in model fixtures.
std::vector<std::string> model_fixture_names();
/// Built-in model fixture by name; ConfigError if unknown.
MoEConfig model_fixture(std::string_view name);

}  // namespace moelab
