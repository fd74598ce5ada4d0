#pragma once

#include <cmath>
#include <cstring>
#include <ostream>
#include <vector>

#include "apmax/estimation.hpp"
#include "apmax/metrics.hpp"
#include "apmax/objective.hpp"

namespace apmax {

// Self-contained verification suites behind the `oracles` CLI subcommand.
// Each one checks an algebraic identity or statistical contract of the
// estimators against an independent route.

struct OracleReport {
  bool unbiasedness = false;
  bool matrix_form = false;
  bool full_batch = false;
  bool ap_sweep = false;
  bool all() const { return unbiasedness && matrix_form && full_batch && ap_sweep; }
};

namespace detail {

struct RunningMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_mean() const {
    return std::sqrt(variance() / static_cast<double>(n));
  }
};

inline bool within_3se(const RunningMoments& mom, double exact) {
  return std::abs(mom.mean - exact) <= 3.0 * mom.stderr_mean() + 1e-12;
}

inline bool bitwise_equal(const InnerPair& a, const InnerPair& b) {
  return std::memcmp(&a.pos_mass, &b.pos_mass, sizeof(double)) == 0 &&
         std::memcmp(&a.all_mass, &b.all_mass, sizeof(double)) == 0;
}

inline std::vector<std::size_t> ascending(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace detail

// Monte-Carlo means of the inner estimate (|S1| = 5) and of the randomized
// coordinate estimate (B = 1) against the exact inner maps, componentwise
// within three standard errors.
inline bool oracle_unbiasedness(std::uint64_t seed, std::size_t draws,
                                std::ostream& log) {
  const Dataset data = make_synthetic({50, 8, 0.2, 0.3, seed});
  const std::size_t n = data.num_examples();
  const std::size_t m = data.num_pos();
  SurrogateSpec spec{SurrogateFamily::squared_hinge, 1.0};
  ScoreModel model;
  model.w.resize(data.dim);
  {
    auto rng = make_rng(seed, Stream::oracle, 1);
    for (double& x : model.w) x = 0.8 * draw_normal(rng);
  }

  std::vector<InnerPair> exact(m);
  for (std::size_t ord = 0; ord < m; ++ord)
    exact[ord] = inner_exact(spec, model, data, data.pos_indices[ord]);

  bool pass = true;
  const std::size_t sample_size = 5;

  {  // plain inner estimate on the first positive
    const std::size_t i = data.pos_indices[0];
    detail::RunningMoments pos_mom, all_mom;
    auto rng = make_rng(seed, Stream::oracle, 2);
    for (std::size_t k = 0; k < draws; ++k) {
      const auto sample = sample_without_replacement(rng, sample_size, n);
      const InnerPair est = inner_estimate(spec, model, data, i, sample);
      pos_mom.add(est.pos_mass);
      all_mom.add(est.all_mass);
    }
    pass = pass && detail::within_3se(pos_mom, exact[0].pos_mass) &&
           detail::within_3se(all_mom, exact[0].all_mass);
    log << "  inner estimate mean (" << pos_mom.mean << ", " << all_mom.mean
        << ") vs exact (" << exact[0].pos_mass << ", " << exact[0].all_mass
        << ")\n";
  }

  {  // randomized coordinate estimate, one positive per draw, scaled by m
    std::vector<detail::RunningMoments> pos_mom(m), all_mom(m);
    auto rng = make_rng(seed, Stream::oracle, 3);
    const double scale = static_cast<double>(m);
    for (std::size_t k = 0; k < draws; ++k) {
      const std::size_t ord = static_cast<std::size_t>(draw_below(rng, m));
      const auto sample = sample_without_replacement(rng, sample_size, n);
      const InnerPair est = inner_estimate(spec, model, data,
                                           data.pos_indices[ord], sample);
      for (std::size_t r = 0; r < m; ++r) {
        pos_mom[r].add(r == ord ? scale * est.pos_mass : 0.0);
        all_mom[r].add(r == ord ? scale * est.all_mass : 0.0);
      }
    }
    std::size_t bad = 0;
    for (std::size_t r = 0; r < m; ++r) {
      if (!detail::within_3se(pos_mom[r], exact[r].pos_mass)) ++bad;
      if (!detail::within_3se(all_mom[r], exact[r].all_mass)) ++bad;
    }
    log << "  coordinate estimate: " << bad << " of " << 2 * m
        << " components outside 3 standard errors\n";
    pass = pass && bad == 0;
  }
  return pass;
}

// The per-row branch rule and the stacked matrix form of the randomized
// coordinate update must produce bitwise-identical trackers.
inline bool oracle_matrix_form_equivalence(std::uint64_t seed,
                                           std::size_t iterations,
                                           std::ostream& log) {
  const std::size_t m = 7, n = 23;
  const SurrogateSpec spec{SurrogateFamily::squared_hinge, 1.0};
  const OmegaBox box = tracker_box(box_constants(spec), m, n);

  auto rng = make_rng(seed, Stream::oracle, 4);
  auto random_pair = [&] {
    return InnerPair{draw_unit(rng) * box.pos_hi * 1.2,
                     draw_unit(rng) * box.all_hi * 1.2};
  };

  TrackerState by_rows = make_tracker(box, m);
  for (auto& r : by_rows.rows) r = project_box(box, random_pair());
  TrackerState by_matrix = by_rows;

  for (std::size_t it = 0; it < iterations; ++it) {
    const double beta0 = 0.05 + 0.9 * draw_unit(rng);
    const std::size_t batch_size = 1 + draw_below(rng, m);
    const auto ords = sample_without_replacement(rng, batch_size, m);
    std::vector<FreshRow> fresh;
    for (std::size_t ord : ords) fresh.push_back({ord, random_pair()});

    tracker_update_moap_v2(by_rows, fresh, beta0, batch_size);

    // independent route: build the full stacked estimate first, then apply
    // one uniform mix-and-project over all rows
    std::vector<InnerPair> stacked(m, InnerPair{0.0, 0.0});
    const double scale =
        static_cast<double>(m) / static_cast<double>(batch_size);
    for (const FreshRow& f : fresh) {
      stacked[f.ord].pos_mass += scale * f.estimate.pos_mass;
      stacked[f.ord].all_mass += scale * f.estimate.all_mass;
    }
    for (std::size_t r = 0; r < m; ++r) {
      by_matrix.rows[r] = project_box(
          box,
          {(1.0 - beta0) * by_matrix.rows[r].pos_mass + beta0 * stacked[r].pos_mass,
           (1.0 - beta0) * by_matrix.rows[r].all_mass + beta0 * stacked[r].all_mass});
    }

    for (std::size_t r = 0; r < m; ++r) {
      if (!detail::bitwise_equal(by_rows.rows[r], by_matrix.rows[r])) {
        log << "  mismatch at iteration " << it << ", row " << r << "\n";
        return false;
      }
    }
  }
  log << "  " << iterations << " iterations bitwise identical\n";
  return true;
}

// With the full positive batch, full inner samples, and beta0 = 1 the
// stochastic gradient must collapse to the exact objective gradient.
inline bool oracle_full_batch_degeneration(std::uint64_t seed,
                                           std::ostream& log) {
  const Dataset data = make_synthetic({30, 6, 0.2, 0.2, seed});
  const std::size_t n = data.num_examples();
  const std::size_t m = data.num_pos();
  const SurrogateSpec spec{SurrogateFamily::squared_hinge, 1.0};
  ScoreModel model;
  model.lambda = 1e-4;
  model.w.resize(data.dim);
  {
    auto rng = make_rng(seed, Stream::oracle, 5);
    for (double& x : model.w) x = 0.7 * draw_normal(rng);
  }

  TrackerState tracker = make_tracker(tracker_box(box_constants(spec), m, n), m);
  const auto everything = detail::ascending(n);
  std::vector<FreshRow> fresh;
  std::vector<std::vector<std::size_t>> inner_samples;
  for (std::size_t ord = 0; ord < m; ++ord) {
    fresh.push_back({ord, inner_estimate(spec, model, data,
                                         data.pos_indices[ord], everything)});
    inner_samples.push_back(everything);
  }
  tracker_update_moap_v2(tracker, fresh, 1.0, m);

  const auto stoch = stochastic_grad(spec, model, data, data.pos_indices,
                                     tracker, inner_samples);
  const auto exact = objective_grad_exact(spec, model, data);
  double max_diff = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k)
    max_diff = std::max(max_diff, std::abs(stoch[k] - exact[k]));
  log << "  max |stochastic - exact| = " << max_diff << "\n";
  return max_diff <= 1e-10;
}

// Rank-statistic sweep: the sorting implementation must match the quadratic
// counting oracle on every random instance, ties included.
inline bool oracle_ap_sweep(std::uint64_t seed, std::size_t instances,
                            std::ostream& log) {
  auto rng = make_rng(seed, Stream::oracle, 6);
  double max_diff = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 1 + draw_below(rng, 20);
    RankedSet rs;
    rs.scores.resize(n);
    rs.labels.resize(n);
    const bool with_ties = draw_unit(rng) < 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      rs.scores[i] = with_ties
                         ? static_cast<double>(draw_below(rng, 4)) / 4.0
                         : draw_unit(rng);
      rs.labels[i] = draw_unit(rng) < 0.4 ? 1 : -1;
    }
    rs.labels[draw_below(rng, n)] = 1;  // ensure a positive
    max_diff = std::max(max_diff, std::abs(average_precision(rs) -
                                           average_precision_bruteforce(rs)));
  }
  const RankedSet spot{{0.9, 0.8, 0.7}, {1, -1, 1}};
  const double spot_diff = std::abs(average_precision(spot) - 5.0 / 6.0);
  log << "  max |sorted - bruteforce| over " << instances
      << " instances: " << max_diff << ", spot check diff " << spot_diff
      << "\n";
  return max_diff <= 1e-12 && spot_diff <= 1e-12;
}

inline OracleReport run_oracles(std::uint64_t seed, std::ostream& log) {
  OracleReport report;
  log << "[1/4] estimator unbiasedness (1e5 draws)\n";
  report.unbiasedness = oracle_unbiasedness(seed, 100000, log);
  log << (report.unbiasedness ? "  pass" : "  FAIL") << "\n";
  log << "[2/4] randomized coordinate update: row rule vs matrix form\n";
  report.matrix_form = oracle_matrix_form_equivalence(seed, 100, log);
  log << (report.matrix_form ? "  pass" : "  FAIL") << "\n";
  log << "[3/4] full-batch degeneration to the exact gradient\n";
  report.full_batch = oracle_full_batch_degeneration(seed, log);
  log << (report.full_batch ? "  pass" : "  FAIL") << "\n";
  log << "[4/4] average precision vs bruteforce sweep\n";
  report.ap_sweep = oracle_ap_sweep(seed, 1000, log);
  log << (report.ap_sweep ? "  pass" : "  FAIL") << "\n";
  return report;
}

}  // namespace apmax
