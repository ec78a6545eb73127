#include "moelab/moe_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moelab/errors.hpp"
#include "moelab/rng.hpp"

namespace moelab {

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                     std::uint64_t stream) {
  Matrix m(rows, cols);
  const std::uint64_t key = rng::stream_key(seed, stream);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  auto flat = m.flat();
  for (std::size_t i = 0; i < flat.size(); ++i)
    flat[i] = (2.0 * rng::to_unit(rng::bits(key, i)) - 1.0) * bound;
  return m;
}

template <typename StreamFn>
ExpertWeights random_expert(std::size_t in_dim, std::size_t m, Activation act,
                            std::uint64_t seed, StreamFn stream) {
  ExpertWeights e;
  e.in_dim = in_dim;
  e.fc1 = random_matrix(m, in_dim, seed, stream(rng::streams::kFc1));
  if (act == Activation::swiglu) e.gate = random_matrix(m, in_dim, seed, stream(rng::streams::kGate));
  e.fc2 = random_matrix(in_dim, m, seed, stream(rng::streams::kFc2));
  return e;
}

ExpertWeights zeros_like(const ExpertWeights& w) {
  ExpertWeights g;
  g.in_dim = w.in_dim;
  g.fc1 = Matrix(w.fc1.rows(), w.fc1.cols());
  g.gate = Matrix(w.gate.rows(), w.gate.cols());
  g.fc2 = Matrix(w.fc2.rows(), w.fc2.cols());
  return g;
}

double sigmoid(double v) noexcept { return 1.0 / (1.0 + std::exp(-v)); }

void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw NumericError(std::string("non-finite ") + what);
}

void check_expert(const ExpertWeights& e, std::size_t in_dim, std::size_t m, Activation act,
                  const std::string& name) {
  if (!e.materialized()) return;
  const bool ok = e.in_dim == in_dim && e.fc1.rows() == m && e.fc1.cols() == in_dim &&
                  e.fc2.rows() == in_dim && e.fc2.cols() == m &&
                  (act == Activation::swiglu
                       ? (e.gate.rows() == m && e.gate.cols() == in_dim)
                       : e.gate.empty());
  if (!ok) throw ShapeError(name + " does not match the configuration");
}

// Gradient of the expert output w.r.t. its parameters (accumulated into
// `grad`) and its input (returned).
Vector expert_backward(const ExpertWeights& w, const ExpertTrace& t, Activation act,
                       std::span<const double> dout, ExpertWeights& grad) {
  add_outer(grad.fc2, dout, t.hidden);
  Vector dhidden = matvec_transposed(w.fc2, dout);
  const std::size_t m = dhidden.size();
  Vector dfc1(m);
  Vector dz;
  if (act == Activation::swiglu) {
    Vector dgate(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double b = t.gate_out[k];
      const double s = sigmoid(b);
      const double silu = b * s;
      dfc1[k] = dhidden[k] * silu;
      dgate[k] = dhidden[k] * t.fc1_out[k] * (s * (1.0 + b * (1.0 - s)));
    }
    add_outer(grad.fc1, dfc1, t.input);
    add_outer(grad.gate, dgate, t.input);
    dz = matvec_transposed(w.fc1, dfc1);
    add_to(dz, matvec_transposed(w.gate, dgate));
  } else {
    for (std::size_t k = 0; k < m; ++k) {
      const double a = t.fc1_out[k];
      dfc1[k] = a > 0.0 ? dhidden[k] * 2.0 * a : 0.0;
    }
    add_outer(grad.fc1, dfc1, t.input);
    dz = matvec_transposed(w.fc1, dfc1);
  }
  return dz;
}

}  // namespace

LayerWeights init_weights(const MoEConfig& config, std::uint64_t seed) {
  std::vector<std::size_t> all(static_cast<std::size_t>(config.routed_effective()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return init_weights(config, seed, all);
}

LayerWeights init_weights(const MoEConfig& config, std::uint64_t seed,
                          std::span<const std::size_t> routed_subset) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto m = static_cast<std::size_t>(config.intermediate_dim);
  const auto n_routed = static_cast<std::size_t>(config.routed_effective());

  LayerWeights w;
  w.router = random_matrix(n_routed, d, seed, rng::streams::kRouter);
  if (config.is_latent()) {
    const auto l = static_cast<std::size_t>(config.latent_dim);
    w.down = random_matrix(l, d, seed, rng::streams::kDown);
    w.up = random_matrix(d, l, seed, rng::streams::kUp);
  }
  w.routed.resize(n_routed);
  for (std::size_t e : routed_subset) materialize_routed(w, config, seed, e);
  for (std::size_t j = 0; j < static_cast<std::size_t>(config.shared_experts); ++j)
    w.shared.push_back(random_expert(d, m, config.activation, seed, [j](std::uint64_t which) {
      return rng::streams::shared(j, which);
    }));
  return w;
}

void materialize_routed(LayerWeights& weights, const MoEConfig& config, std::uint64_t seed,
                        std::size_t expert) {
  if (expert >= weights.routed.size())
    throw ShapeError("routed expert " + std::to_string(expert) + " out of range");
  if (weights.routed[expert].materialized()) return;
  weights.routed[expert] =
      random_expert(static_cast<std::size_t>(config.routed_dim()),
                    static_cast<std::size_t>(config.intermediate_dim), config.activation, seed,
                    [expert](std::uint64_t which) { return rng::streams::routed(expert, which); });
}

void set_identity_projections(LayerWeights& weights, const MoEConfig& config) {
  if (!config.is_latent()) throw ConfigError("identity projections need a latent variant");
  if (config.latent_dim != config.hidden_dim)
    throw ConfigError("identity projections need latent_dim == hidden_dim (alpha = 1)");
  weights.down = Matrix::identity(static_cast<std::size_t>(config.hidden_dim));
  weights.up = Matrix::identity(static_cast<std::size_t>(config.hidden_dim));
}

Matrix seeded_tokens(std::uint64_t seed, std::size_t count, std::size_t hidden_dim) {
  Matrix x(count, hidden_dim);
  const std::uint64_t key = rng::stream_key(seed, rng::streams::kTokens);
  auto flat = x.flat();
  for (std::size_t i = 0; i < flat.size(); ++i)
    flat[i] = 2.0 * rng::to_unit(rng::bits(key, i)) - 1.0;
  return x;
}

void check_consistent(const LayerWeights& w, const MoEConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto m = static_cast<std::size_t>(config.intermediate_dim);
  const auto n_routed = static_cast<std::size_t>(config.routed_effective());
  const auto l = static_cast<std::size_t>(config.routed_dim());
  if (w.router.rows() != n_routed || w.router.cols() != d)
    throw ShapeError("router must be " + std::to_string(n_routed) + " x " + std::to_string(d));
  if (config.is_latent()) {
    if (w.down.rows() != l || w.down.cols() != d) throw ShapeError("W_down must be l x d");
    if (w.up.rows() != d || w.up.cols() != l) throw ShapeError("W_up must be d x l");
  } else if (!w.down.empty() || !w.up.empty()) {
    throw ShapeError("standard layer carries latent projections");
  }
  if (w.routed.size() != n_routed)
    throw ShapeError("expected " + std::to_string(n_routed) + " routed experts, got " +
                     std::to_string(w.routed.size()));
  if (w.shared.size() != static_cast<std::size_t>(config.shared_experts))
    throw ShapeError("expected " + std::to_string(config.shared_experts) +
                     " shared experts, got " + std::to_string(w.shared.size()));
  for (std::size_t i = 0; i < w.routed.size(); ++i)
    check_expert(w.routed[i], l, m, config.activation, "routed expert " + std::to_string(i));
  for (std::size_t j = 0; j < w.shared.size(); ++j) {
    if (!w.shared[j].materialized()) throw ShapeError("shared expert not materialised");
    check_expert(w.shared[j], d, m, config.activation, "shared expert " + std::to_string(j));
  }
}

RoutingDecision route(const Matrix& router, std::span<const double> x, std::size_t active,
                      bool renormalize) {
  const std::size_t n = router.rows();
  if (active == 0 || active > n)
    throw ShapeError("cannot select " + std::to_string(active) + " of " + std::to_string(n) +
                     " experts");
  RoutingDecision r;
  r.logits = matvec(router, x);
  require_finite(r.logits, "router logits");

  const double peak = *std::max_element(r.logits.begin(), r.logits.end());
  r.probabilities.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.probabilities[i] = std::exp(r.logits[i] - peak);
    total += r.probabilities[i];
  }
  for (double& p : r.probabilities) p /= total;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& p = r.probabilities;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(active), order.end(),
                    [&p](std::size_t a, std::size_t b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
  r.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(active));

  r.weights.resize(active);
  double selected_mass = 0.0;
  for (std::size_t k = 0; k < active; ++k) {
    r.weights[k] = p[r.indices[k]];
    selected_mass += r.weights[k];
  }
  if (renormalize)
    for (double& w : r.weights) w /= selected_mass;
  return r;
}

ExpertTrace expert_forward_traced(const ExpertWeights& w, std::span<const double> z,
                                  Activation activation) {
  if (!w.materialized()) throw ShapeError("expert is not materialised");
  if (z.size() != w.in_dim)
    throw ShapeError("expert expects input of " + std::to_string(w.in_dim) + ", got " +
                     std::to_string(z.size()));
  if ((activation == Activation::swiglu) != w.gated())
    throw ShapeError("gate matrix presence does not match the activation");
  ExpertTrace t;
  t.input.assign(z.begin(), z.end());
  t.fc1_out = matvec(w.fc1, z);
  t.hidden.resize(t.fc1_out.size());
  if (activation == Activation::swiglu) {
    t.gate_out = matvec(w.gate, z);
    for (std::size_t k = 0; k < t.hidden.size(); ++k) {
      const double b = t.gate_out[k];
      t.hidden[k] = b * sigmoid(b) * t.fc1_out[k];
    }
  } else {
    for (std::size_t k = 0; k < t.hidden.size(); ++k) {
      const double a = std::max(t.fc1_out[k], 0.0);
      t.hidden[k] = a * a;
    }
  }
  t.output = matvec(w.fc2, t.hidden);
  return t;
}

Vector expert_forward(const ExpertWeights& w, std::span<const double> z, Activation activation) {
  return expert_forward_traced(w, z, activation).output;
}

std::vector<std::size_t> selected_experts(const LayerWeights& weights, const MoEConfig& config,
                                          const Matrix& tokens) {
  if (tokens.cols() != static_cast<std::size_t>(config.hidden_dim))
    throw ShapeError("tokens must have hidden_dim columns");
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    const auto r = route(weights.router, tokens.row(t),
                         static_cast<std::size_t>(config.active_effective()));
    out.insert(out.end(), r.indices.begin(), r.indices.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ForwardResult moe_layer_forward(const LayerWeights& weights, const MoEConfig& config,
                                const Matrix& tokens) {
  check_consistent(weights, config);
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  if (tokens.cols() != d)
    throw ShapeError("tokens have " + std::to_string(tokens.cols()) + " features, expected " +
                     std::to_string(d));
  const auto active = static_cast<std::size_t>(config.active_effective());

  ForwardResult result;
  result.output = Matrix(tokens.rows(), d);
  auto& trace = result.trace;
  trace.hidden_dim = d;
  trace.routed_experts = weights.routed.size();
  trace.shared_experts = weights.shared.size();
  trace.variant = config.variant;
  trace.activation = config.activation;
  trace.renormalized = config.renormalize_gates;
  trace.tokens.reserve(tokens.rows());

  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    auto x = tokens.row(t);
    require_finite(x, "input token");
    TokenTrace tt;
    tt.input.assign(x.begin(), x.end());
    tt.routing = route(weights.router, x, active, config.renormalize_gates);

    std::vector<std::size_t> slots(active);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    std::sort(slots.begin(), slots.end(), [&](std::size_t a, std::size_t b) {
      return tt.routing.indices[a] < tt.routing.indices[b];
    });

    std::span<const double> expert_in = x;
    if (config.is_latent()) {
      tt.latent = matvec(weights.down, x);
      expert_in = tt.latent;
    }
    tt.routed_sum.assign(expert_in.size(), 0.0);
    for (std::size_t s : slots) {
      const std::size_t e = tt.routing.indices[s];
      if (!weights.routed[e].materialized())
        throw ShapeError("routed expert " + std::to_string(e) + " selected but not materialised");
      tt.summation_order.push_back(e);
      tt.gates.push_back(tt.routing.weights[s]);
      tt.routed.push_back(expert_forward_traced(weights.routed[e], expert_in, config.activation));
      axpy(tt.routing.weights[s], tt.routed.back().output, tt.routed_sum);
    }

    Vector y = config.is_latent() ? matvec(weights.up, tt.routed_sum) : tt.routed_sum;
    for (const auto& se : weights.shared) {
      tt.shared.push_back(expert_forward_traced(se, x, config.activation));
      add_to(y, tt.shared.back().output);
    }
    require_finite(y, "layer output");
    std::copy(y.begin(), y.end(), result.output.row(t).begin());
    trace.tokens.push_back(std::move(tt));
  }
  return result;
}

LayerGradients moe_layer_backward(const ForwardTrace& trace, const LayerWeights& weights,
                                  const MoEConfig& config, const Matrix& output_grad) {
  check_consistent(weights, config);
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  if (trace.hidden_dim != d || trace.routed_experts != weights.routed.size() ||
      trace.shared_experts != weights.shared.size() || trace.variant != config.variant ||
      trace.activation != config.activation || trace.renormalized != config.renormalize_gates)
    throw ShapeError("trace was produced by a different layer");
  if (output_grad.rows() != trace.tokens.size() || output_grad.cols() != d)
    throw ShapeError("output gradient must be tokens x hidden_dim");

  LayerGradients g;
  g.weights.router = Matrix(weights.router.rows(), weights.router.cols());
  g.weights.down = Matrix(weights.down.rows(), weights.down.cols());
  g.weights.up = Matrix(weights.up.rows(), weights.up.cols());
  for (const auto& e : weights.routed) g.weights.routed.push_back(zeros_like(e));
  for (const auto& e : weights.shared) g.weights.shared.push_back(zeros_like(e));
  g.input = Matrix(trace.tokens.size(), d);

  for (std::size_t t = 0; t < trace.tokens.size(); ++t) {
    const TokenTrace& tt = trace.tokens[t];
    auto dy = output_grad.row(t);
    Vector dx(d, 0.0);

    for (std::size_t j = 0; j < weights.shared.size(); ++j)
      add_to(dx, expert_backward(weights.shared[j], tt.shared[j], config.activation, dy,
                                 g.weights.shared[j]));

    Vector dsum;
    if (config.is_latent()) {
      add_outer(g.weights.up, dy, tt.routed_sum);
      dsum = matvec_transposed(weights.up, dy);
    } else {
      dsum.assign(dy.begin(), dy.end());
    }

    Vector dexpert_in(dsum.size(), 0.0);
    Vector dprob(weights.router.rows(), 0.0);
    Vector dgate(tt.summation_order.size());
    for (std::size_t s = 0; s < tt.summation_order.size(); ++s) {
      const std::size_t e = tt.summation_order[s];
      const ExpertTrace& et = tt.routed[s];
      dgate[s] = dot(dsum, et.output);
      Vector dout(dsum.size());
      for (std::size_t i = 0; i < dsum.size(); ++i) dout[i] = tt.gates[s] * dsum[i];
      add_to(dexpert_in, expert_backward(weights.routed[e], et, config.activation, dout,
                                         g.weights.routed[e]));
    }

    if (config.renormalize_gates) {
      double mass = 0.0, weighted = 0.0;
      for (std::size_t s = 0; s < dgate.size(); ++s) {
        mass += tt.routing.probabilities[tt.summation_order[s]];
        weighted += dgate[s] * tt.gates[s];
      }
      for (std::size_t s = 0; s < dgate.size(); ++s)
        dprob[tt.summation_order[s]] = (dgate[s] - weighted) / mass;
    } else {
      for (std::size_t s = 0; s < dgate.size(); ++s) dprob[tt.summation_order[s]] = dgate[s];
    }

    const Vector& p = tt.routing.probabilities;
    const double mean = dot(p, dprob);
    Vector dlogits(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) dlogits[k] = p[k] * (dprob[k] - mean);
    add_outer(g.weights.router, dlogits, tt.input);
    add_to(dx, matvec_transposed(weights.router, dlogits));

    if (config.is_latent()) {
      add_outer(g.weights.down, dexpert_in, tt.input);
      add_to(dx, matvec_transposed(weights.down, dexpert_in));
    } else {
      add_to(dx, dexpert_in);
    }
    std::copy(dx.begin(), dx.end(), g.input.row(t).begin());
  }
  return g;
}

}  // namespace moelab

namespace moelab {

LayerWeights init_weights_for_tokens(const MoEConfig& config, std::uint64_t seed,
                                     const Matrix& tokens, bool identity_projections) {
  LayerWeights w = init_weights(config, seed, std::span<const std::size_t>{});
  if (identity_projections) set_identity_projections(w, config);
  for (std::size_t e : selected_experts(w, config, tokens)) materialize_routed(w, config, seed, e);
  return w;
}

Matrix seeded_forward(const MoEConfig& config, std::uint64_t seed, std::size_t token_count,
                      bool identity_projections) {
  config.validate();
  const Matrix tokens =
      seeded_tokens(seed, token_count, static_cast<std::size_t>(config.hidden_dim));
  const LayerWeights w = init_weights_for_tokens(config, seed, tokens, identity_projections);
  return moe_layer_forward(w, config, tokens).output;
}

}  // namespace moelab
