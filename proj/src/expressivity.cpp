#include "moelab/expressivity.hpp"

#include <cmath>
#include <string>

#include "moelab/errors.hpp"

namespace moelab {

namespace {

void check_domain(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n)
    throw DomainError("binomial needs 0 <= k <= n, got n=" + std::to_string(n) +
                      " k=" + std::to_string(k));
}

// C(60, 30) < 2^63; intermediate products stay within 128 bits.
unsigned __int128 exact_binomial(std::int64_t n, std::int64_t k) {
  if (k > n - k) k = n - k;
  unsigned __int128 c = 1;
  for (std::int64_t i = 1; i <= k; ++i)
    c = c * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
  return c;
}

}  // namespace

double log_binomial_lgamma(std::int64_t n, std::int64_t k) {
  check_domain(n, k);
  if (k == 0 || k == n) return 0.0;
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0);
}

double log_binomial(std::int64_t n, std::int64_t k) {
  check_domain(n, k);
  if (k == 0 || k == n) return 0.0;
  if (n <= 60) return std::log(static_cast<double>(exact_binomial(n, k)));
  return log_binomial_lgamma(n, k);
}

DiversityReport diversity_gain(std::int64_t n, std::int64_t k, std::int64_t alpha,
                               std::int64_t m) {
  if (alpha < 1) throw DomainError("alpha must be an integer >= 1");
  if (k < 1 || k > n) throw DomainError("diversity_gain needs 1 <= K <= N");
  DiversityReport r;
  r.log_binom_base = log_binomial(n, k);
  r.log_binom_scaled = log_binomial(alpha * n, alpha * k);
  r.log_gain = r.log_binom_scaled - static_cast<double>(alpha) * r.log_binom_base;
  r.u_eff = effective_nonlinear_budget(k, m);
  return r;
}

std::int64_t effective_nonlinear_budget(std::int64_t active, std::int64_t m) {
  if (active < 1 || m < 1) throw DomainError("effective_nonlinear_budget needs positive K and m");
  return active * m;
}

}  // namespace moelab
