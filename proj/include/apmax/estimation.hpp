#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "apmax/objective.hpp"
#include "apmax/rng.hpp"

namespace apmax {

// Moving-average estimates of the inner map, one row per positive example.
// Rows stay inside the box after the projected update rules; the unprojected
// baseline rule can drift, which stochastic_grad guards against.
struct TrackerState {
  std::vector<InnerPair> rows;
  OmegaBox box;
};

inline TrackerState make_tracker(const OmegaBox& box, std::size_t num_pos) {
  TrackerState tr;
  tr.box = box;
  tr.rows.assign(num_pos, project_box(box, InnerPair{0.0, 0.0}));
  return tr;
}

struct BatchPlan {
  std::size_t positive_batch = 20;  // B
  std::size_t inner_batch = 20;     // |S1| = |S2|
  bool share_inner = false;         // reuse S1 as S2 (off-theory shortcut)
  bool replacement = false;
  std::uint64_t seed = 0;
};

// B rows drawn from the positives; pure function of (plan.seed, round).
inline std::vector<std::size_t> sample_positive_batch(const Dataset& data,
                                                      const BatchPlan& plan,
                                                      std::uint64_t round) {
  const std::size_t m = data.num_pos();
  if (plan.positive_batch < 1 || plan.positive_batch > m)
    throw std::invalid_argument(
        "sample_positive_batch: batch size must be in [1, num_pos]");
  auto rng = make_rng(plan.seed, Stream::positive_batch, round);
  std::vector<std::size_t> batch;
  if (plan.positive_batch == 1 || plan.replacement) {
    batch = sample_with_replacement(rng, plan.positive_batch, m);
  } else {
    batch = sample_without_replacement(rng, plan.positive_batch, m);
  }
  for (std::size_t& b : batch) b = data.pos_indices[b];
  return batch;
}

// One inner sample of size plan.inner_batch from all examples, consuming the
// supplied generator.
inline std::vector<std::size_t> sample_inner_batch(const Dataset& data,
                                                   const BatchPlan& plan,
                                                   std::mt19937_64& rng) {
  const std::size_t n = data.num_examples();
  if (plan.inner_batch < 1 || plan.inner_batch > n)
    throw std::invalid_argument(
        "sample_inner_batch: batch size must be in [1, n]");
  if (plan.replacement) return sample_with_replacement(rng, plan.inner_batch, n);
  return sample_without_replacement(rng, plan.inner_batch, n);
}

// Unbiased estimate of the inner map: (n/|S|) * sum over the sample, in
// sample order with compensated accumulation so a full ascending sample
// reproduces inner_exact bit for bit.
inline InnerPair inner_estimate(const SurrogateSpec& spec,
                                const ScoreModel& model, const Dataset& data,
                                std::size_t i,
                                std::span<const std::size_t> sample) {
  if (sample.empty())
    throw std::invalid_argument("inner_estimate: empty sample");
  const double s_i = score(model, data, i);
  CompensatedSum pos_mass, all_mass;
  for (std::size_t j : sample) {
    const double l = surrogate_value(spec, score(model, data, j), s_i);
    if (data.labels[j] > 0) pos_mass.add(l);
    all_mass.add(l);
  }
  const double scale = static_cast<double>(data.num_examples()) /
                       static_cast<double>(sample.size());
  return {scale * pos_mass.value(), scale * all_mass.value()};
}

// Jacobian of the inner map, rows d(pos_mass)/dw and d(all_mass)/dw.
struct InnerJacobian {
  std::vector<double> pos_grad;
  std::vector<double> all_grad;
};

// Unbiased estimate of the inner-map Jacobian on a sample from all examples.
inline InnerJacobian inner_jacobian_estimate(const SurrogateSpec& spec,
                                             const ScoreModel& model,
                                             const Dataset& data, std::size_t i,
                                             std::span<const std::size_t> sample) {
  if (sample.empty())
    throw std::invalid_argument("inner_jacobian_estimate: empty sample");
  const std::size_t d = model.w.size();
  InnerJacobian jac{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  const double s_i = score(model, data, i);
  const double scale = static_cast<double>(data.num_examples()) /
                       static_cast<double>(sample.size());
  double slope_all = 0.0, slope_pos = 0.0;
  for (std::size_t j : sample) {
    const double s_j = score(model, data, j);
    const double slope = surrogate_slope(spec, s_j - s_i);
    if (slope == 0.0) continue;
    const double cj = scale * slope * sigmoid_slope(s_j);
    const auto cols = data.row_cols(j);
    const auto vals = data.row_vals(j);
    for (std::size_t k = 0; k < cols.size(); ++k)
      jac.all_grad[cols[k]] += cj * vals[k];
    slope_all += slope;
    if (data.labels[j] > 0) {
      for (std::size_t k = 0; k < cols.size(); ++k)
        jac.pos_grad[cols[k]] += cj * vals[k];
      slope_pos += slope;
    }
  }
  const double ci = -scale * sigmoid_slope(s_i);
  const auto cols = data.row_cols(i);
  const auto vals = data.row_vals(i);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    jac.all_grad[cols[k]] += ci * slope_all * vals[k];
    jac.pos_grad[cols[k]] += ci * slope_pos * vals[k];
  }
  return jac;
}

// Fresh inner-map estimate for one tracker row (ord indexes pos_indices).
struct FreshRow {
  std::size_t ord;
  InnerPair estimate;
};

// Sampled rows move toward the fresh estimate and are projected; the rest
// stay untouched.
inline void tracker_update_moap_v1(TrackerState& tr,
                                   std::span<const FreshRow> fresh,
                                   double beta0) {
  if (!(beta0 > 0.0 && beta0 <= 1.0))
    throw std::invalid_argument("tracker update: beta0 must be in (0,1]");
  for (const FreshRow& f : fresh) {
    InnerPair& r = tr.rows.at(f.ord);
    r = project_box(tr.box,
                    {(1.0 - beta0) * r.pos_mass + beta0 * f.estimate.pos_mass,
                     (1.0 - beta0) * r.all_mass + beta0 * f.estimate.all_mass});
  }
}

// Randomized coordinate update: sampled rows mix in the estimate scaled by
// m/B, every other row decays by (1 - beta0); all rows are projected.
inline void tracker_update_moap_v2(TrackerState& tr,
                                   std::span<const FreshRow> fresh,
                                   double beta0, std::size_t batch_size) {
  if (!(beta0 > 0.0 && beta0 <= 1.0))
    throw std::invalid_argument("tracker update: beta0 must be in (0,1]");
  if (batch_size < 1)
    throw std::invalid_argument("tracker update: batch size must be >= 1");
  const std::size_t m = tr.rows.size();
  const double scale =
      static_cast<double>(m) / static_cast<double>(batch_size);
  std::vector<InnerPair> mixed(m, InnerPair{0.0, 0.0});
  std::vector<char> sampled(m, 0);
  for (const FreshRow& f : fresh) {
    mixed.at(f.ord).pos_mass += scale * f.estimate.pos_mass;
    mixed.at(f.ord).all_mass += scale * f.estimate.all_mass;
    sampled.at(f.ord) = 1;
  }
  for (std::size_t r = 0; r < m; ++r) {
    InnerPair& u = tr.rows[r];
    if (sampled[r]) {
      u = project_box(tr.box,
                      {(1.0 - beta0) * u.pos_mass + beta0 * mixed[r].pos_mass,
                       (1.0 - beta0) * u.all_mass + beta0 * mixed[r].all_mass});
    } else {
      u = project_box(tr.box, {(1.0 - beta0) * u.pos_mass,
                               (1.0 - beta0) * u.all_mass});
    }
  }
}

// Baseline moving average: like the v1 rule but deliberately unprojected.
inline void tracker_update_soap(TrackerState& tr,
                                std::span<const FreshRow> fresh, double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("tracker update: beta must be in (0,1]");
  for (const FreshRow& f : fresh) {
    InnerPair& r = tr.rows.at(f.ord);
    r = {(1.0 - beta) * r.pos_mass + beta * f.estimate.pos_mass,
         (1.0 - beta) * r.all_mass + beta * f.estimate.all_mass};
  }
}

// Stochastic gradient assembled from tracker rows and Jacobian estimates:
// (1/B) sum over the batch of J_i^T outer_grad(U_i), plus the l2 term.
inline std::vector<double> stochastic_grad(
    const SurrogateSpec& spec, const ScoreModel& model, const Dataset& data,
    std::span<const std::size_t> batch_rows, const TrackerState& tracker,
    std::span<const std::vector<std::size_t>> inner_samples) {
  if (batch_rows.size() != inner_samples.size())
    throw std::invalid_argument(
        "stochastic_grad: batch and inner samples must align");
  if (batch_rows.empty())
    throw std::invalid_argument("stochastic_grad: empty batch");
  const std::size_t d = model.w.size();
  std::vector<double> grad(d, 0.0);
  for (std::size_t b = 0; b < batch_rows.size(); ++b) {
    const std::size_t ord = data.pos_ordinal(batch_rows[b]);
    const InnerPair& u = tracker.rows.at(ord);
    if (!(u.all_mass > 0.0))
      throw std::domain_error(
          "stochastic_grad: tracker row has non-positive total mass");
    const auto df = outer_grad(u);
    const InnerJacobian jac = inner_jacobian_estimate(
        spec, model, data, batch_rows[b], inner_samples[b]);
    for (std::size_t k = 0; k < d; ++k)
      grad[k] += df[0] * jac.pos_grad[k] + df[1] * jac.all_grad[k];
  }
  const double inv_b = 1.0 / static_cast<double>(batch_rows.size());
  for (std::size_t k = 0; k < d; ++k)
    grad[k] = grad[k] * inv_b + 2.0 * model.lambda * model.w[k];
  return grad;
}

}  // namespace apmax
