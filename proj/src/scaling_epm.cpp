#include "moelab/scaling_epm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "moelab/errors.hpp"

namespace moelab {

ScalingLawFit fit_log_linear(std::span<const AccuracyPoint> points) {
  std::vector<double> xs;
  for (const auto& p : points) {
    if (!(p.n_params > 0.0) || !std::isfinite(p.n_params))
      throw DomainError("n_params must be positive");
    if (!std::isfinite(p.score)) throw DomainError("score must be finite");
    xs.push_back(std::log(p.n_params));
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw DegenerateFitError("need at least 2 distinct parameter counts");

  const double n = static_cast<double>(points.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    mean_x += xs[i];
    mean_y += points[i].score;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dx = xs[i] - mean_x;
    sxx += dx * dx;
    sxy += dx * (points[i].score - mean_y);
  }

  ScalingLawFit fit;
  fit.a = sxy / sxx;
  fit.b = mean_y - fit.a * mean_x;
  fit.n_points = points.size();
  double ss = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = points[i].score - (fit.a * xs[i] + fit.b);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

double predict_score(const ScalingLawFit& fit, double n_params) {
  if (!(n_params > 0.0)) throw DomainError("n_params must be positive");
  return fit.a * std::log(n_params) + fit.b;
}

double invert_scaling_law(const ScalingLawFit& fit, double score) {
  if (fit.a == 0.0) throw NonInvertibleError("scaling law has zero slope");
  return std::exp((score - fit.b) / fit.a);
}

double epm_lambda(double n_eff, double n_treat) {
  if (!(n_treat > 0.0)) throw DomainError("n_treat must be positive");
  if (!(n_eff >= 0.0)) throw DomainError("n_eff must be non-negative");
  return n_eff / n_treat;
}

IsoAccuracy iso_accuracy_size(double lambda, double n_treat) {
  if (!(lambda > 0.0) || !(n_treat > 0.0))
    throw DomainError("iso_accuracy_size needs positive lambda and n_treat");
  IsoAccuracy r;
  r.n_iso = lambda * n_treat;
  r.delta = r.n_iso - n_treat;
  return r;
}

std::vector<AccuracyPoint> parse_accuracy_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("accuracy CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "n_params,score")
    throw ConfigError("accuracy CSV header must be 'n_params,score', got '" + line + "'");
  std::vector<AccuracyPoint> points;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected two columns");
    const std::string n_field = line.substr(0, comma);
    const std::string s_field = line.substr(comma + 1);
    if (s_field.find_first_not_of(" \t") == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": score is blank (fill in the dataset)");
    AccuracyPoint p;
    try {
      std::size_t used = 0;
      p.n_params = std::stod(n_field, &used);
      if (used != n_field.size()) throw std::invalid_argument(n_field);
      p.score = std::stod(s_field, &used);
      if (used != s_field.size()) throw std::invalid_argument(s_field);
    } catch (const std::logic_error&) {
      throw ConfigError("line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
    if (!(p.n_params > 0.0))
      throw ConfigError("line " + std::to_string(lineno) + ": n_params must be positive");
    points.push_back(p);
  }
  return points;
}

std::vector<AccuracyPoint> load_accuracy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_accuracy_csv(ss.str());
}

}  // namespace moelab
