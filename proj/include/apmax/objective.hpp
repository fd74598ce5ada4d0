#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "apmax/numeric.hpp"
#include "apmax/scoring.hpp"

namespace apmax {

// Value of the inner map for one positive: (surrogate positive-rank mass,
// surrogate total-rank mass).
struct InnerPair {
  double pos_mass = 0.0;
  double all_mass = 0.0;

  bool operator==(const InnerPair&) const = default;
};

// Axis-aligned feasible box for tracker rows; keeps the outer ratio and its
// gradient Lipschitz on everything the tracker can hold.
struct OmegaBox {
  double pos_lo = 0.0;
  double pos_hi = 0.0;
  double all_lo = 0.0;
  double all_hi = 0.0;
};

inline OmegaBox tracker_box(const BoxConstants& bc, std::size_t num_pos,
                            std::size_t num_all) {
  return {0.0, bc.max_pair_loss * static_cast<double>(num_pos),
          bc.min_self_loss, bc.max_pair_loss * static_cast<double>(num_all)};
}

// Euclidean projection onto the box is a per-coordinate clamp.
inline InnerPair project_box(const OmegaBox& box, InnerPair u) {
  return {std::clamp(u.pos_mass, box.pos_lo, box.pos_hi),
          std::clamp(u.all_mass, box.all_lo, box.all_hi)};
}

inline double outer_value(InnerPair u) {
  if (!(u.all_mass > 0.0))
    throw std::domain_error("outer_value: total mass must be positive");
  return -u.pos_mass / u.all_mass;
}

inline std::array<double, 2> outer_grad(InnerPair u) {
  if (!(u.all_mass > 0.0))
    throw std::domain_error("outer_grad: total mass must be positive");
  return {-1.0 / u.all_mass, u.pos_mass / (u.all_mass * u.all_mass)};
}

inline std::vector<double> all_scores(const ScoreModel& model,
                                      const Dataset& data) {
  std::vector<double> s(data.num_examples());
  for (std::size_t i = 0; i < data.num_examples(); ++i)
    s[i] = score(model, data, i);
  return s;
}

namespace detail {

inline InnerPair inner_term_scored(const SurrogateSpec& spec, double s_j,
                                   bool j_positive, double s_i) {
  const double l = surrogate_value(spec, s_j, s_i);
  return {j_positive ? l : 0.0, l};
}

// Exact inner map from precomputed scores; ascending index order with
// compensated accumulation so results are bit-stable.
inline InnerPair inner_exact_scored(const SurrogateSpec& spec,
                                    const Dataset& data,
                                    std::span<const double> scores,
                                    std::size_t i) {
  CompensatedSum pos_mass, all_mass;
  const double s_i = scores[i];
  for (std::size_t j = 0; j < data.num_examples(); ++j) {
    const double l = surrogate_value(spec, scores[j], s_i);
    if (data.labels[j] > 0) pos_mass.add(l);
    all_mass.add(l);
  }
  return {pos_mass.value(), all_mass.value()};
}

}  // namespace detail

// One summand of the inner map: [indicator(y_j = +1) * loss, loss].
inline InnerPair inner_term(const SurrogateSpec& spec, const ScoreModel& model,
                            const Dataset& data, std::size_t j, std::size_t i) {
  return detail::inner_term_scored(spec, score(model, data, j),
                                   data.labels[j] > 0, score(model, data, i));
}

inline InnerPair inner_exact(const SurrogateSpec& spec, const ScoreModel& model,
                             const Dataset& data, std::size_t i) {
  data.pos_ordinal(i);  // enforce: i must be a positive example
  return detail::inner_exact_scored(spec, data, all_scores(model, data), i);
}

// Exact objective: mean of the outer ratio over positives plus the l2 term.
inline double objective_exact(const SurrogateSpec& spec,
                              const ScoreModel& model, const Dataset& data) {
  const std::size_t m = data.num_pos();
  if (m == 0)
    throw std::invalid_argument("objective_exact: needs at least one positive");
  const auto scores = all_scores(model, data);
  CompensatedSum acc;
  for (std::size_t i : data.pos_indices)
    acc.add(outer_value(detail::inner_exact_scored(spec, data, scores, i)));
  return acc.value() / static_cast<double>(m) +
         model.lambda * squared_norm(model.w);
}

// Exact surrogate average precision: the negated objective without the
// regularization term.
inline double surrogate_ap(const SurrogateSpec& spec, const ScoreModel& model,
                           const Dataset& data) {
  ScoreModel plain{model.w, 0.0};
  return -objective_exact(spec, plain, data);
}

inline std::vector<double> objective_grad_exact(const SurrogateSpec& spec,
                                                const ScoreModel& model,
                                                const Dataset& data) {
  const std::size_t n = data.num_examples();
  const std::size_t m = data.num_pos();
  if (m == 0)
    throw std::invalid_argument(
        "objective_grad_exact: needs at least one positive");
  const auto scores = all_scores(model, data);

  // Per-example multiplier: every pair (j,i) contributes
  // slope(delta) * (df_pos * indicator + df_all) to j and subtracts the same
  // amount from i; features enter once per example at the end.
  std::vector<double> coef(n, 0.0);
  for (std::size_t i : data.pos_indices) {
    const InnerPair u = detail::inner_exact_scored(spec, data, scores, i);
    const auto df = outer_grad(u);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double slope = surrogate_slope(spec, scores[j] - scores[i]);
      const double q = slope * (df[1] + (data.labels[j] > 0 ? df[0] : 0.0));
      coef[j] += q;
      total += q;
    }
    coef[i] -= total;
  }

  std::vector<double> grad(model.w.size(), 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t e = 0; e < n; ++e) {
    if (coef[e] == 0.0) continue;
    const double c = coef[e] * sigmoid_slope(scores[e]) * inv_m;
    const auto cols = data.row_cols(e);
    const auto vals = data.row_vals(e);
    for (std::size_t k = 0; k < cols.size(); ++k) grad[cols[k]] += c * vals[k];
  }
  for (std::size_t k = 0; k < model.w.size(); ++k)
    grad[k] += 2.0 * model.lambda * model.w[k];
  return grad;
}

}  // namespace apmax
