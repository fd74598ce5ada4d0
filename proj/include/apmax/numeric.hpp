#pragma once

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace apmax {

// Neumaier compensated accumulator. Summation order still matters for
// bit-stable results, so callers add terms in a fixed order.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }

  double value() const { return sum + comp; }
};

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double inf_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

// Norm-based relative error with a guard for the all-zero case.
inline double relative_error(std::span<const double> a,
                             std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    diff += d * d;
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  diff = std::sqrt(diff);
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < 1e-10) return diff;
  return diff / denom;
}

// Shortest decimal rendering that round-trips a double (17 significant
// digits).
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

}  // namespace apmax
