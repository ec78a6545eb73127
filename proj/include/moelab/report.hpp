/*
 * report.hpp
 *
 * Aggregated analysis of one model on one hardware configuration.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moelab/accounting.hpp"
#include "moelab/config.hpp"
#include "moelab/expressivity.hpp"
#include "moelab/perf_model.hpp"

namespace moelab {

struct AnalysisReport {
  MoEConfig model;
  HardwareSpec hardware;
  std::optional<double> t_total;
  double t_exp = 0.0;
  double intensity = 0.0;
  double compute_bound_intensity = 0.0;
  Regime regime = Regime::memory_bound;
  std::optional<double> t_exp_threshold;  // empty: never compute-bound
  double comm_compute_ratio = 0.0;
  std::vector<CostBreakdown> cost_rows;
  ParamReport params;
  FlopReport flops;
  DiversityReport diversity;

  bool operator==(const AnalysisReport&) const = default;
};

/// Exactly one of t_exp / t_total is used; t_total wins when both are set.
AnalysisReport analyze(const MoEConfig& model, const HardwareSpec& hw, std::optional<double> t_exp,
                       std::optional<double> t_total);

void to_json(nlohmann::json& j, const AnalysisReport& r);
void from_json(const nlohmann::json& j, AnalysisReport& r);

/// Four significant digits, for terminal output.
std::string format_human(const AnalysisReport& r);

}  // namespace moelab
