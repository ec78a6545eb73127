/*
 * scaling_epm.hpp
 *
 * Effective parameter multiplier: fit a baseline family's accuracy as
 * f(N) = a ln N + b, invert it at a treated model's score to get the
 * equivalent baseline size N_eff, and express that as a multiple of the
 * treated model's physical size.
 */
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace moelab {

struct AccuracyPoint {
  double n_params = 0.0;
  double score = 0.0;
};

struct ScalingLawFit {
  double a = 0.0;  // score per nat of parameters
  double b = 0.0;
  double residual_rms = 0.0;
  std::size_t n_points = 0;
};

/// Ordinary least squares of score on ln(n_params).
ScalingLawFit fit_log_linear(std::span<const AccuracyPoint> points);

double predict_score(const ScalingLawFit& fit, double n_params);

/// exp((score - b) / a).
double invert_scaling_law(const ScalingLawFit& fit, double score);

double epm_lambda(double n_eff, double n_treat);

struct IsoAccuracy {
  double n_iso = 0.0;
  double delta = 0.0;
};

IsoAccuracy iso_accuracy_size(double lambda, double n_treat);

/// Reads CSV with header `n_params,score`.
std::vector<AccuracyPoint> parse_accuracy_csv(const std::string& text);
std::vector<AccuracyPoint> load_accuracy_csv(const std::string& path);

}  // namespace moelab
