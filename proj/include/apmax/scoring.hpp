#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "apmax/data_io.hpp"

namespace apmax {

// Linear model scored through a sigmoid; lambda is the l2 coefficient of the
// objective, not part of the score itself.
struct ScoreModel {
  std::vector<double> w;
  double lambda = 0.0;
};

enum class SurrogateFamily { squared_hinge, logistic };

struct SurrogateSpec {
  SurrogateFamily family = SurrogateFamily::squared_hinge;
  double gamma = 1.0;  // margin (squared hinge) or scale (logistic)
};

// Bounds implied by sigmoid scores in (0,1): max_pair_loss caps every pair
// loss, min_self_loss floors the loss of a point against itself.
struct BoxConstants {
  double max_pair_loss;
  double min_self_loss;
};

namespace detail {

inline double clamp_open_unit(double s) {
  constexpr double hi = 0x1.fffffffffffffp-1;  // largest double below 1
  if (s > hi) return hi;
  if (s < std::numeric_limits<double>::min())
    return std::numeric_limits<double>::min();
  return s;
}

}  // namespace detail

// Overflow-safe sigmoid, clamped into the open interval (0,1).
inline double stable_sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return detail::clamp_open_unit(1.0 / (1.0 + e));
  }
  const double e = std::exp(z);
  return detail::clamp_open_unit(e / (1.0 + e));
}

// d(sigmoid)/dz expressed through the sigmoid value itself.
inline double sigmoid_slope(double s) { return s * (1.0 - s); }

inline double score(const ScoreModel& model, std::span<const std::uint32_t> cols,
                    std::span<const double> vals) {
  double z = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] >= model.w.size())
      throw std::invalid_argument("score: feature index exceeds model dimension");
    z += model.w[cols[k]] * vals[k];
  }
  return stable_sigmoid(z);
}

inline double score(const ScoreModel& model, const Dataset& data,
                    std::size_t row) {
  return score(model, data.row_cols(row), data.row_vals(row));
}

inline void validate(const SurrogateSpec& spec) {
  if (!(spec.gamma > 0.0))
    throw std::invalid_argument("surrogate gamma must be > 0");
}

inline double surrogate_value(const SurrogateSpec& spec, double s_j,
                              double s_i) {
  if (spec.family == SurrogateFamily::squared_hinge) {
    const double h = s_j - s_i + spec.gamma;
    return h > 0.0 ? h * h : 0.0;
  }
  return stable_sigmoid(spec.gamma * (s_j - s_i));
}

// Scalar derivative of the surrogate in delta = s_j - s_i.
inline double surrogate_slope(const SurrogateSpec& spec, double delta) {
  if (spec.family == SurrogateFamily::squared_hinge) {
    const double h = delta + spec.gamma;
    return h > 0.0 ? 2.0 * h : 0.0;
  }
  const double p = stable_sigmoid(spec.gamma * delta);
  return spec.gamma * p * (1.0 - p);
}

// Gradient in w of the pair loss, chained through both sigmoids.
inline std::vector<double> surrogate_grad_w(const SurrogateSpec& spec,
                                            const ScoreModel& model,
                                            const Dataset& data, std::size_t j,
                                            std::size_t i) {
  const double s_j = score(model, data, j);
  const double s_i = score(model, data, i);
  const double slope = surrogate_slope(spec, s_j - s_i);
  std::vector<double> grad(model.w.size(), 0.0);
  const double cj = slope * sigmoid_slope(s_j);
  const double ci = -slope * sigmoid_slope(s_i);
  {
    const auto cols = data.row_cols(j);
    const auto vals = data.row_vals(j);
    for (std::size_t k = 0; k < cols.size(); ++k) grad[cols[k]] += cj * vals[k];
  }
  {
    const auto cols = data.row_cols(i);
    const auto vals = data.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) grad[cols[k]] += ci * vals[k];
  }
  return grad;
}

inline BoxConstants box_constants(const SurrogateSpec& spec) {
  validate(spec);
  if (spec.family == SurrogateFamily::squared_hinge) {
    // scores live in (0,1), so delta in (-1,1)
    return {(1.0 + spec.gamma) * (1.0 + spec.gamma), spec.gamma * spec.gamma};
  }
  return {1.0, 0.5};
}

}  // namespace apmax
