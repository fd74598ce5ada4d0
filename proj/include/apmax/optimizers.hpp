#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "apmax/estimation.hpp"
#include "apmax/metrics.hpp"
#include "apmax/objective.hpp"

namespace apmax {

enum class Algo { soap, moap_v1, moap_v2, adap };
enum class AdaptiveStyle { adam, adagrad, amsgrad, adabound };
enum class DecaySchedule { fixed, inv_sqrt };

struct HyperParams {
  double eta = 1.0;
  double beta0 = 0.9;       // tracker rate
  double beta1 = 0.9;       // momentum rate
  double beta_prime = 0.1;  // second-moment rate
  double delta = 1e-8;      // adaptive damping
  double bound_lo = 0.1;    // adabound c_l
  double bound_hi = 10.0;   // adabound c_u
  DecaySchedule decay = DecaySchedule::fixed;
};

inline void validate(const HyperParams& h) {
  if (!(h.eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(h.beta0 > 0.0 && h.beta0 <= 1.0))
    throw std::invalid_argument("beta0 must be in (0,1]");
  if (!(h.beta1 > 0.0 && h.beta1 <= 1.0))
    throw std::invalid_argument("beta1 must be in (0,1]");
  if (!(h.beta_prime > 0.0 && h.beta_prime <= 1.0))
    throw std::invalid_argument("beta_prime must be in (0,1]");
  if (!(h.delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  if (!(h.bound_lo > 0.0 && h.bound_lo < h.bound_hi))
    throw std::invalid_argument("need 0 < bound_lo < bound_hi");
}

struct StepSizes {
  double eta_t;
  double beta0_t;
  double beta1_t;
};

// Fixed, or the 1/sqrt(t) decay used by the momentum and adaptive runs.
inline StepSizes schedule(const HyperParams& h, std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("schedule: t must be >= 1");
  if (h.decay == DecaySchedule::fixed) return {h.eta, h.beta0, h.beta1};
  const double root = std::sqrt(static_cast<double>(t));
  return {h.eta / root, std::min(1.0, h.beta0 / root),
          std::min(1.0, h.beta1 / root)};
}

inline void momentum_update(std::vector<double>& momentum,
                            std::span<const double> grad, double beta1) {
  if (!(beta1 > 0.0 && beta1 <= 1.0))
    throw std::invalid_argument("momentum_update: beta1 must be in (0,1]");
  for (std::size_t k = 0; k < momentum.size(); ++k)
    momentum[k] = (1.0 - beta1) * momentum[k] + beta1 * grad[k];
}

// Second-moment update. v_aux carries the style's side state: the running
// square sum (adagrad) or the pre-clip moving average (amsgrad, adabound).
inline void v_update(AdaptiveStyle style, std::vector<double>& v,
                     std::vector<double>& v_aux, std::span<const double> grad,
                     double beta_prime, std::uint64_t t, double bound_lo,
                     double bound_hi) {
  const std::size_t d = v.size();
  switch (style) {
    case AdaptiveStyle::adam:
      for (std::size_t k = 0; k < d; ++k)
        v[k] = (1.0 - beta_prime) * v[k] + beta_prime * grad[k] * grad[k];
      break;
    case AdaptiveStyle::adagrad:
      // sum of t squared gradients divided by t + 1
      for (std::size_t k = 0; k < d; ++k) {
        v_aux[k] += grad[k] * grad[k];
        v[k] = v_aux[k] / static_cast<double>(t + 1);
      }
      break;
    case AdaptiveStyle::amsgrad:
      for (std::size_t k = 0; k < d; ++k) {
        v_aux[k] = (1.0 - beta_prime) * v_aux[k] + beta_prime * grad[k] * grad[k];
        v[k] = std::max(v[k], v_aux[k]);
      }
      break;
    case AdaptiveStyle::adabound:
      for (std::size_t k = 0; k < d; ++k) {
        v_aux[k] = (1.0 - beta_prime) * v_aux[k] + beta_prime * grad[k] * grad[k];
        v[k] = std::clamp(v_aux[k], 1.0 / (bound_hi * bound_hi),
                          1.0 / (bound_lo * bound_lo));
      }
      break;
  }
}

inline void plain_step(std::vector<double>& w, std::span<const double> momentum,
                       double eta_t) {
  for (std::size_t k = 0; k < w.size(); ++k) w[k] -= eta_t * momentum[k];
}

// Componentwise scaled step; the multiplier eta/(sqrt(v)+delta) stays in
// (0, eta/delta].
inline void adaptive_step(std::vector<double>& w,
                          std::span<const double> momentum,
                          std::span<const double> v, double eta_t,
                          double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("adaptive_step: delta <= 0");
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] -= eta_t / (std::sqrt(v[k]) + delta) * momentum[k];
}

// Full resumable state of one optimization run.
struct OptimizerState {
  ScoreModel model;
  std::vector<double> momentum;
  std::vector<double> v;
  std::vector<double> v_aux;
  TrackerState tracker;
  std::uint64_t t = 0;
};

struct TraceRow {
  std::uint64_t t;
  double eta_t;
  double beta_t;
  double train_surrogate_ap;
  std::optional<double> train_ap;
  std::optional<double> grad_norm_sq;
  double elapsed_ms;
};

struct RunRecord {
  std::vector<TraceRow> rows;
  ScoreModel final_model;
  double final_train_surrogate_ap = 0.0;
};

struct RunOptions {
  // exact train AP and ||grad F||^2 every probe_every iterations (0 = never),
  // anchored at t = 1
  std::uint64_t probe_every = 0;
  // wall-clock timing makes trace bytes nondeterministic, so it is opt-in;
  // when off the elapsed column is written as 0
  bool collect_timing = false;
  std::function<void(const OptimizerState&, std::span<const double>)> observer;
};

// One optimization run of the configured algorithm from w = 0. All sampling
// is derived from `seed`, which overrides plan.seed.
inline RunRecord run(Algo algo, AdaptiveStyle style, const Dataset& train,
                     const SurrogateSpec& spec, const HyperParams& hyper,
                     BatchPlan plan, double lambda, std::uint64_t iterations,
                     std::uint64_t seed, const RunOptions& opts = {}) {
  validate(hyper);
  validate(spec);
  if (iterations < 1) throw std::invalid_argument("run: iterations must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("run: lambda must be >= 0");
  const std::size_t n = train.num_examples();
  const std::size_t m = train.num_pos();
  if (m == 0) throw std::invalid_argument("run: no positive examples");
  plan.seed = seed;

  OptimizerState st;
  st.model.w.assign(train.dim, 0.0);
  st.model.lambda = lambda;
  st.momentum.assign(train.dim, 0.0);
  st.v.assign(train.dim, 0.0);
  st.v_aux.assign(train.dim, 0.0);
  st.tracker = make_tracker(tracker_box(box_constants(spec), m, n), m);

  // One fresh estimate per row seeds the tracker at w_1.
  {
    auto rng0 = make_rng(seed, Stream::tracker_init);
    for (std::size_t ord = 0; ord < m; ++ord) {
      const auto sample = sample_inner_batch(train, plan, rng0);
      st.tracker.rows[ord] = project_box(
          st.tracker.box, inner_estimate(spec, st.model, train,
                                         train.pos_indices[ord], sample));
    }
  }

  RunRecord rec;
  rec.rows.reserve(iterations);
  const auto start = std::chrono::steady_clock::now();
  std::vector<FreshRow> fresh;
  std::vector<std::vector<std::size_t>> inner_samples;
  for (std::uint64_t t = 1; t <= iterations; ++t) {
    const StepSizes sizes = schedule(hyper, t);
    const auto batch = sample_positive_batch(train, plan, t);

    fresh.clear();
    inner_samples.clear();
    auto rng_t = make_rng(seed, Stream::inner_batch, t);
    for (std::size_t row : batch) {
      auto s1 = sample_inner_batch(train, plan, rng_t);
      fresh.push_back({train.pos_ordinal(row),
                       inner_estimate(spec, st.model, train, row, s1)});
      inner_samples.push_back(plan.share_inner
                                  ? std::move(s1)
                                  : sample_inner_batch(train, plan, rng_t));
    }

    switch (algo) {
      case Algo::soap:
        tracker_update_soap(st.tracker, fresh, sizes.beta0_t);
        break;
      case Algo::moap_v1:
        tracker_update_moap_v1(st.tracker, fresh, sizes.beta0_t);
        break;
      case Algo::moap_v2:
      case Algo::adap:
        tracker_update_moap_v2(st.tracker, fresh, sizes.beta0_t,
                               plan.positive_batch);
        break;
    }

    const auto grad =
        stochastic_grad(spec, st.model, train, batch, st.tracker, inner_samples);

    if (algo == Algo::soap) {
      // baseline: direct step on the raw estimator, momentum never read
      plain_step(st.model.w, grad, sizes.eta_t);
    } else {
      momentum_update(st.momentum, grad, sizes.beta1_t);
      if (algo == Algo::adap) {
        v_update(style, st.v, st.v_aux, grad, hyper.beta_prime, t,
                 hyper.bound_lo, hyper.bound_hi);
        adaptive_step(st.model.w, st.momentum, st.v, sizes.eta_t, hyper.delta);
      } else {
        plain_step(st.model.w, st.momentum, sizes.eta_t);
      }
    }
    st.t = t;

    TraceRow row;
    row.t = t;
    row.eta_t = sizes.eta_t;
    row.beta_t = sizes.beta0_t;
    row.train_surrogate_ap = surrogate_ap(spec, st.model, train);
    if (opts.probe_every > 0 && (t - 1) % opts.probe_every == 0) {
      row.train_ap =
          average_precision({all_scores(st.model, train), train.labels});
      row.grad_norm_sq =
          squared_norm(objective_grad_exact(spec, st.model, train));
    }
    row.elapsed_ms =
        opts.collect_timing
            ? std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - start)
                  .count()
            : 0.0;
    rec.rows.push_back(row);
    if (opts.observer) opts.observer(st, grad);
  }

  rec.final_model = st.model;
  rec.final_train_surrogate_ap = rec.rows.back().train_surrogate_ap;
  return rec;
}

}  // namespace apmax
