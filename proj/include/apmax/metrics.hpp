#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "apmax/numeric.hpp"

namespace apmax {

struct RankedSet {
  std::vector<double> scores;
  std::vector<std::int8_t> labels;  // +1 / -1
};

struct PRPoint {
  double recall;
  double precision;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per positive, recall nondecreasing
};

namespace detail {

inline std::size_t checked_positives(const RankedSet& rs) {
  if (rs.scores.size() != rs.labels.size())
    throw std::invalid_argument("ranked set: scores/labels size mismatch");
  std::size_t m = 0;
  for (auto l : rs.labels)
    if (l > 0) ++m;
  if (m == 0)
    throw std::invalid_argument("ranked set: needs at least one positive");
  return m;
}

// Descending score; ties broken by ascending original index so ranking is
// deterministic.
inline std::vector<std::size_t> rank_order(const RankedSet& rs) {
  std::vector<std::size_t> order(rs.scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rs.scores[a] != rs.scores[b]) return rs.scores[a] > rs.scores[b];
    return a < b;
  });
  return order;
}

}  // namespace detail

// Mean over positives of (positives ranked at-or-above) / (all ranked
// at-or-above).
inline double average_precision(const RankedSet& rs) {
  const std::size_t m = detail::checked_positives(rs);
  const auto order = detail::rank_order(rs);
  CompensatedSum acc;
  std::size_t pos_seen = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (rs.labels[order[k]] > 0) {
      ++pos_seen;
      acc.add(static_cast<double>(pos_seen) / static_cast<double>(k + 1));
    }
  }
  return acc.value() / static_cast<double>(m);
}

inline PRCurve pr_curve(const RankedSet& rs) {
  const std::size_t m = detail::checked_positives(rs);
  const auto order = detail::rank_order(rs);
  PRCurve curve;
  std::size_t pos_seen = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (rs.labels[order[k]] > 0) {
      ++pos_seen;
      curve.points.push_back(
          {static_cast<double>(pos_seen) / static_cast<double>(m),
           static_cast<double>(pos_seen) / static_cast<double>(k + 1)});
    }
  }
  return curve;
}

// Independent O(n^2) evaluation of the same statistic under the same tie
// rule; verification oracle for average_precision.
inline double average_precision_bruteforce(const RankedSet& rs) {
  const std::size_t m = detail::checked_positives(rs);
  const std::size_t n = rs.scores.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rs.labels[i] <= 0) continue;
    std::size_t at_or_above = 0, pos_at_or_above = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool higher = rs.scores[j] > rs.scores[i] ||
                          (rs.scores[j] == rs.scores[i] && j <= i);
      if (higher) {
        ++at_or_above;
        if (rs.labels[j] > 0) ++pos_at_or_above;
      }
    }
    sum += static_cast<double>(pos_at_or_above) /
           static_cast<double>(at_or_above);
  }
  return sum / static_cast<double>(m);
}

// Central differences, one coordinate at a time.
inline std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& fn,
    std::vector<double> w, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step <= 0");
  std::vector<double> grad(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double saved = w[k];
    w[k] = saved + step;
    const double hi = fn(w);
    w[k] = saved - step;
    const double lo = fn(w);
    w[k] = saved;
    grad[k] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

}  // namespace apmax
