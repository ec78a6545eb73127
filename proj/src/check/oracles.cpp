#include "moelab/check/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "moelab/errors.hpp"
#include "moelab/rng.hpp"

namespace moelab::oracle {

namespace {

// Every parameter of the layer as a flat list of mutable references.
std::vector<double*> parameters(LayerWeights& w) {
  std::vector<double*> out;
  auto add = [&out](Matrix& m) {
    for (double& v : m.flat()) out.push_back(&v);
  };
  auto add_expert = [&add](ExpertWeights& e) {
    add(e.fc1);
    add(e.gate);
    add(e.fc2);
  };
  add(w.router);
  add(w.down);
  add(w.up);
  for (auto& e : w.routed) add_expert(e);
  for (auto& e : w.shared) add_expert(e);
  return out;
}

double weighted_sum(const Matrix& y, const Matrix& dy) {
  double acc = 0.0;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) acc += y(r, c) * dy(r, c);
  return acc;
}

Matrix seeded_output_grad(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Matrix g(rows, cols);
  for (std::size_t i = 0; i < g.size(); ++i)
    g.flat()[i] = rng::uniform_symmetric(seed, rng::streams::kUpstreamGrad, i, 1.0);
  return g;
}

}  // namespace

Vector naive_router_probabilities(const Matrix& router, const Vector& x) {
  const std::size_t n = router.rows();
  Vector logits(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += router(i, j) * x[j];
    logits[i] = acc;
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (double l : logits) peak = l > peak ? l : peak;
  Vector p(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (std::size_t i = 0; i < n; ++i) p[i] = p[i] / total;
  return p;
}

std::vector<std::size_t> full_sort_topk(const Vector& probabilities, std::size_t active) {
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probabilities[a] > probabilities[b];
  });
  order.resize(active);
  return order;
}

Vector naive_expert_forward(const ExpertWeights& w, const Vector& z, Activation activation) {
  const std::size_t m = w.fc1.rows();
  Vector hidden(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double a = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) a += w.fc1(k, j) * z[j];
    if (activation == Activation::swiglu) {
      double b = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) b += w.gate(k, j) * z[j];
      const double sig = 1.0 / (1.0 + std::exp(-b));
      hidden[k] = b * sig * a;
    } else {
      const double r = a > 0.0 ? a : 0.0;
      hidden[k] = r * r;
    }
  }
  Vector out(w.fc2.rows(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) acc += w.fc2(i, k) * hidden[k];
    out[i] = acc;
  }
  return out;
}

Matrix naive_layer_forward(const LayerWeights& weights, const MoEConfig& config,
                           const Matrix& tokens) {
  const std::size_t d = tokens.cols();
  const auto active = static_cast<std::size_t>(config.active_effective());
  Matrix out(tokens.rows(), d);
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    Vector x(tokens.row(t).begin(), tokens.row(t).end());
    const Vector p = naive_router_probabilities(weights.router, x);
    std::vector<std::size_t> chosen = full_sort_topk(p, active);
    double mass = 0.0;
    for (std::size_t e : chosen) mass += p[e];
    std::sort(chosen.begin(), chosen.end());

    Vector z = x;
    if (config.is_latent()) {
      z.assign(weights.down.rows(), 0.0);
      for (std::size_t r = 0; r < z.size(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += weights.down(r, c) * x[c];
        z[r] = acc;
      }
    }
    Vector routed(z.size(), 0.0);
    for (std::size_t e : chosen) {
      const double gate = config.renormalize_gates ? p[e] / mass : p[e];
      const Vector y = naive_expert_forward(weights.routed[e], z, config.activation);
      for (std::size_t i = 0; i < routed.size(); ++i) routed[i] += gate * y[i];
    }
    Vector y = routed;
    if (config.is_latent()) {
      y.assign(d, 0.0);
      for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < routed.size(); ++c) acc += weights.up(r, c) * routed[c];
        y[r] = acc;
      }
    }
    for (const auto& s : weights.shared) {
      const Vector ys = naive_expert_forward(s, x, config.activation);
      for (std::size_t i = 0; i < d; ++i) y[i] += ys[i];
    }
    for (std::size_t i = 0; i < d; ++i) out(t, i) = y[i];
  }
  return out;
}

double topk_margin(const LayerWeights& weights, const MoEConfig& config, const Matrix& tokens) {
  const auto active = static_cast<std::size_t>(config.active_effective());
  double margin = std::numeric_limits<double>::infinity();
  if (active >= weights.router.rows()) return margin;
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    Vector logits(weights.router.rows(), 0.0);
    for (std::size_t i = 0; i < logits.size(); ++i)
      for (std::size_t j = 0; j < tokens.cols(); ++j) logits[i] += weights.router(i, j) * tokens(t, j);
    std::sort(logits.begin(), logits.end(), std::greater<>());
    margin = std::min(margin, logits[active - 1] - logits[active]);
  }
  return margin;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult gradient_check(const MoEConfig& config, std::uint64_t seed,
                               const GradCheckOptions& options) {
  LayerWeights weights = init_weights(config, seed);
  Matrix tokens = seeded_tokens(seed, options.tokens, static_cast<std::size_t>(config.hidden_dim));
  const Matrix dy = seeded_output_grad(seed, tokens.rows(), tokens.cols());

  GradCheckResult result;
  result.seed = seed;
  result.margin = topk_margin(weights, config, tokens);

  const auto forward = moe_layer_forward(weights, config, tokens);
  LayerGradients grads = moe_layer_backward(forward.trace, weights, config, dy);

  auto loss = [&]() { return weighted_sum(moe_layer_forward(weights, config, tokens).output, dy); };
  auto probe = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + options.step;
    const double up = loss();
    *slot = saved - options.step;
    const double down = loss();
    *slot = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    result.max_rel_error =
        std::max(result.max_rel_error, relative_error(analytic, numeric, options.floor));
    ++result.components;
  };

  auto params = parameters(weights);
  auto analytic = parameters(grads.weights);
  if (params.size() != analytic.size()) throw ShapeError("gradient layout mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) probe(params[i], *analytic[i]);
  for (std::size_t i = 0; i < tokens.size(); ++i) probe(&tokens.flat()[i], grads.input.flat()[i]);
  return result;
}

std::optional<double> bisect_t_exp_threshold(const HardwareSpec& hw, double d, double m,
                                             double tolerance) {
  const double theta = hw.peak_flops / hw.bw_hbm;
  if (!(2.0 * d * m / (d + m) > theta)) return std::nullopt;
  double lo = 0.0, hi = 1.0;
  while (arithmetic_intensity(hi, d, m) < theta) hi *= 2.0;
  while (hi - lo > tolerance * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (arithmetic_intensity(mid, d, m) < theta)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

unsigned __int128 pascal_binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n || n > 125) throw DomainError("pascal_binomial out of range");
  std::vector<unsigned __int128> row(static_cast<std::size_t>(n) + 1, 0);
  row[0] = 1;
  for (int i = 1; i <= n; ++i)
    for (int j = i; j > 0; --j) row[j] += row[j - 1];
  return row[k];
}

}  // namespace moelab::oracle
