/*
 * expressivity.hpp
 *
 * Combinatorial diversity of top-k routing and the per-token nonlinear
 * budget, in log space so expert counts in the thousands do not overflow.
 */
#pragma once

#include <cstdint>

namespace moelab {

/// ln C(n, k). Exact integer evaluation for n <= 60, log-gamma otherwise.
double log_binomial(std::int64_t n, std::int64_t k);

/// ln C(n, k) through log-gamma for every n.
double log_binomial_lgamma(std::int64_t n, std::int64_t k);

struct DiversityReport {
  double log_binom_base = 0.0;    // ln C(N, K)
  double log_binom_scaled = 0.0;  // ln C(alpha N, alpha K)
  double log_gain = 0.0;          // log_binom_scaled - alpha * log_binom_base
  std::int64_t u_eff = 0;         // K * m when m is known, else K

  bool operator==(const DiversityReport&) const = default;
};

/// Gain in expert-mixture diversity from scaling N and K by alpha. `m` is
/// the expert intermediate width used for u_eff.
DiversityReport diversity_gain(std::int64_t n, std::int64_t k, std::int64_t alpha,
                               std::int64_t m = 1);

/// K * m.
std::int64_t effective_nonlinear_budget(std::int64_t active, std::int64_t m);

}  // namespace moelab
