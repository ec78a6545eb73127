/*
 * oracles.hpp
 *
 * Independent reference computations used to verify the library: they share
 * no code path with the routines they check beyond the weight containers.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "moelab/config.hpp"
#include "moelab/matrix.hpp"
#include "moelab/moe_layer.hpp"
#include "moelab/perf_model.hpp"

namespace moelab::oracle {

/// Softmax of W_r x with scalar loops.
Vector naive_router_probabilities(const Matrix& router, const Vector& x);

/// Full stable sort of all probabilities (descending, lower index first on
/// ties); returns the first `active` indices.
std::vector<std::size_t> full_sort_topk(const Vector& probabilities, std::size_t active);

/// Scalar-loop re-evaluation of the whole layer. Summation order matches the
/// documented order of moe_layer_forward so results are bit-comparable.
Matrix naive_layer_forward(const LayerWeights& weights, const MoEConfig& config,
                           const Matrix& tokens);

/// Scalar-loop expert evaluation.
Vector naive_expert_forward(const ExpertWeights& w, const Vector& z, Activation activation);

/// Gap between the K-th and (K+1)-th largest router logit, minimised over
/// tokens. Infinite when every expert is selected.
double topk_margin(const LayerWeights& weights, const MoEConfig& config, const Matrix& tokens);

struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-4;  // denominator floor of the relative error
  std::size_t tokens = 3;
};

struct GradCheckResult {
  std::uint64_t seed = 0;
  double margin = 0.0;
  double max_rel_error = 0.0;
  std::size_t components = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central finite differences of L = sum(dY * Y) against moe_layer_backward,
/// over every weight and input component of a layer built from `seed`.
GradCheckResult gradient_check(const MoEConfig& config, std::uint64_t seed,
                               const GradCheckOptions& options = {});

/// Smallest t with arithmetic_intensity(t) >= F / BW_hbm by bisection.
std::optional<double> bisect_t_exp_threshold(const HardwareSpec& hw, double d, double m,
                                             double tolerance = 1e-9);

/// Exact C(n, k) from Pascal's triangle (n <= 125).
unsigned __int128 pascal_binomial(int n, int k);

}  // namespace moelab::oracle
