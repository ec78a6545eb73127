/*
 * accounting.hpp
 *
 * Exact parameter and forward-FLOP counts of an MoE sublayer. A
 * multiply-accumulate counts as 2 FLOPs; no biases.
 */
#pragma once

#include <cstdint>

#include "moelab/config.hpp"

namespace moelab {

/// Counts are per layer except model_total, which multiplies by layers.
struct ParamReport {
  std::int64_t routed_total = 0;
  std::int64_t shared_total = 0;
  std::int64_t router_total = 0;
  std::int64_t projection_total = 0;
  std::int64_t layer_total = 0;
  std::int64_t model_total = 0;
  std::int64_t active_per_token = 0;  // per layer

  bool operator==(const ParamReport&) const = default;
};

/// Forward FLOPs for one token through one layer.
struct FlopReport {
  std::int64_t routed = 0;
  std::int64_t shared = 0;
  std::int64_t router = 0;
  std::int64_t projection = 0;
  std::int64_t total = 0;

  bool operator==(const FlopReport&) const = default;
};

ParamReport count_params(const MoEConfig& config);
FlopReport count_flops(const MoEConfig& config);

}  // namespace moelab
