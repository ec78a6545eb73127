/*
 * moe_layer.hpp
 *
 * Standard MoE and LatentMoE sublayers in 64-bit floating point: routing,
 * latent projections, routed and shared experts, and the analytic backward
 * pass.
 *
 * Per token x the layer computes
 *
 *   standard:   y = sum_{i in top-K}  p_i E_i(x)        + sum_j S_j(x)
 *   latent_*:   y = W_up sum_{i in top-K'} p_i E_i(W_down x) + sum_j S_j(x)
 *
 * with p = softmax(W_r x) over all routed experts and no renormalisation of
 * the selected p_i unless MoEConfig::renormalize_gates is set. Routed
 * contributions are accumulated in ascending expert index, then projected,
 * then shared experts are added in order.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "moelab/config.hpp"
#include "moelab/matrix.hpp"

namespace moelab {

/// One feed-forward expert. `gate` is empty for non-gated activations.
struct ExpertWeights {
  std::size_t in_dim = 0;
  Matrix fc1;   // m x in_dim
  Matrix gate;  // m x in_dim, swiglu only
  Matrix fc2;   // in_dim x m

  bool materialized() const noexcept { return !fc1.empty(); }
  bool gated() const noexcept { return !gate.empty(); }
  bool operator==(const ExpertWeights&) const = default;
};

struct LayerWeights {
  Matrix router;  // N_eff x d
  Matrix down;    // l x d, latent variants only
  Matrix up;      // d x l, latent variants only
  std::vector<ExpertWeights> routed;
  std::vector<ExpertWeights> shared;

  bool operator==(const LayerWeights&) const = default;
};

/// Selected experts in rank order (highest probability first, ties to the
/// lower index) together with the full softmax they were drawn from.
struct RoutingDecision {
  std::vector<std::size_t> indices;
  Vector weights;        // gating value used for each selected expert
  Vector logits;         // W_r x, all experts
  Vector probabilities;  // softmax(logits), all experts
};

struct ExpertTrace {
  Vector input;
  Vector fc1_out;   // W_fc1 z
  Vector gate_out;  // W_gate z (swiglu)
  Vector hidden;    // activation output fed to W_fc2
  Vector output;
};

struct TokenTrace {
  Vector input;
  Vector latent;  // W_down x (latent variants)
  RoutingDecision routing;
  std::vector<std::size_t> summation_order;  // selected experts, ascending id
  Vector gates;                              // gate per entry of summation_order
  std::vector<ExpertTrace> routed;           // per entry of summation_order
  Vector routed_sum;                         // sum_i g_i E_i, before W_up
  std::vector<ExpertTrace> shared;
};

struct ForwardTrace {
  std::size_t hidden_dim = 0;
  std::size_t routed_experts = 0;
  std::size_t shared_experts = 0;
  Variant variant = Variant::standard;
  Activation activation = Activation::swiglu;
  bool renormalized = false;
  std::vector<TokenTrace> tokens;
};

struct ForwardResult {
  Matrix output;  // tokens x d
  ForwardTrace trace;
};

/// Gradients mirror the weight layout; routed experts that were never
/// materialised stay empty.
struct LayerGradients {
  LayerWeights weights;
  Matrix input;  // tokens x d
};

/// Deterministic uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation of
/// every matrix from the counter-based stream in rng.hpp.
LayerWeights init_weights(const MoEConfig& config, std::uint64_t seed);

/// Same values as init_weights, but only the listed routed experts are
/// materialised. Used for fixture-scale layers that do not fit in memory.
LayerWeights init_weights(const MoEConfig& config, std::uint64_t seed,
                          std::span<const std::size_t> routed_subset);

/// Materialise routed expert `expert` in place (no-op if already present).
void materialize_routed(LayerWeights& weights, const MoEConfig& config, std::uint64_t seed,
                        std::size_t expert);

/// Replace W_down and W_up with identities. Requires latent_dim == hidden_dim.
void set_identity_projections(LayerWeights& weights, const MoEConfig& config);

/// Seeded tokens drawn uniformly from [-1, 1).
Matrix seeded_tokens(std::uint64_t seed, std::size_t count, std::size_t hidden_dim);

/// Throws ShapeError if any matrix disagrees with the configuration.
void check_consistent(const LayerWeights& weights, const MoEConfig& config);

RoutingDecision route(const Matrix& router, std::span<const double> x, std::size_t active,
                      bool renormalize = false);

Vector expert_forward(const ExpertWeights& w, std::span<const double> z, Activation activation);

ExpertTrace expert_forward_traced(const ExpertWeights& w, std::span<const double> z,
                                  Activation activation);

/// Experts selected by any token of `tokens`, ascending.
std::vector<std::size_t> selected_experts(const LayerWeights& weights, const MoEConfig& config,
                                          const Matrix& tokens);

ForwardResult moe_layer_forward(const LayerWeights& weights, const MoEConfig& config,
                                const Matrix& tokens);

/// Weights for `config` from `seed` with only the routed experts that
/// `tokens` select materialised. Optionally swaps in identity projections.
LayerWeights init_weights_for_tokens(const MoEConfig& config, std::uint64_t seed,
                                     const Matrix& tokens, bool identity_projections = false);

/// Forward pass of `token_count` seeded tokens through a layer initialised
/// from the same seed. Memory scales with the selected experts only.
Matrix seeded_forward(const MoEConfig& config, std::uint64_t seed, std::size_t token_count,
                      bool identity_projections = false);

LayerGradients moe_layer_backward(const ForwardTrace& trace, const LayerWeights& weights,
                                  const MoEConfig& config, const Matrix& output_grad);

}  // namespace moelab
