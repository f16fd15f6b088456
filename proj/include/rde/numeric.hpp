#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <system_error>

#include "rde/errors.hpp"

namespace rde {

// max-shifted log(sum(exp(v))); exact for singletons, -inf for empty input
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// alpha + beta . x, accumulated left to right so every caller that feeds the
// same inputs gets the same bits back
inline double linear_utility(double alpha, std::span<const double> beta, const double* x) {
  double u = alpha;
  for (std::size_t i = 0; i < beta.size(); ++i) u += beta[i] * x[i];
  return u;
}

// softmax over a utility vector via the shared log_sum_exp kernel
inline void softmax_from_utilities(std::span<const double> u, std::span<double> out) {
  const double lse = log_sum_exp(u);
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::exp(u[i] - lse);
}

// two-sided standard normal tail probability 2 * (1 - Phi(|z|))
inline double two_sided_normal_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

// nearest integer, halves away from zero
inline std::int64_t round_half_away(double x) {
  if (!std::isfinite(x)) throw NumericError("cannot round non-finite value");
  return std::llround(x);
}

// shortest decimal string that round-trips to the same double
inline std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw NumericError("failed to format floating-point value");
  return std::string(buf, p);
}

// fixed four-decimal rendering used by the human-readable reports
inline std::string format_fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return std::string(buf);
}

}  // namespace rde
