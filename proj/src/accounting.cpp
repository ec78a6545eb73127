#include "moelab/accounting.hpp"

namespace moelab {

ParamReport count_params(const MoEConfig& c) {
  c.validate();
  const std::int64_t g = matrices_per_expert(c.activation);
  const std::int64_t m = c.intermediate_dim;
  const std::int64_t d = c.hidden_dim;
  const std::int64_t per_routed = g * c.routed_dim() * m;
  const std::int64_t per_shared = g * d * m;

  ParamReport r;
  r.routed_total = c.routed_effective() * per_routed;
  r.shared_total = c.shared_experts * per_shared;
  r.router_total = c.routed_effective() * d;
  r.projection_total = c.is_latent() ? 2 * d * c.latent_dim : 0;
  r.layer_total = r.routed_total + r.shared_total + r.router_total + r.projection_total;
  r.model_total = r.layer_total * c.layers;
  r.active_per_token =
      c.active_effective() * per_routed + r.shared_total + r.router_total + r.projection_total;
  return r;
}

FlopReport count_flops(const MoEConfig& c) {
  c.validate();
  const std::int64_t g = matrices_per_expert(c.activation);
  const std::int64_t m = c.intermediate_dim;
  const std::int64_t d = c.hidden_dim;

  FlopReport f;
  f.routed = c.active_effective() * g * 2 * c.routed_dim() * m;
  f.shared = c.shared_experts * g * 2 * d * m;
  f.router = 2 * c.routed_effective() * d;
  f.projection = c.is_latent() ? 2 * (2 * d * c.latent_dim) : 0;
  f.total = f.routed + f.shared + f.router + f.projection;
  return f;
}

}  // namespace moelab
