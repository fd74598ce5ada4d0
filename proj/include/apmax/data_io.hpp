#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apmax/numeric.hpp"
#include "apmax/rng.hpp"

namespace apmax {

// Sparse row-major dataset with {+1, -1} labels. Column indices are 0-based
// and strictly increasing within each row; absent columns are zeros.
struct Dataset {
  std::size_t dim = 0;
  std::vector<std::size_t> row_start;  // size n + 1
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  std::vector<std::int8_t> labels;
  std::vector<std::size_t> pos_indices;  // sorted rows with label +1

  std::size_t num_examples() const { return labels.size(); }
  std::size_t num_pos() const { return pos_indices.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return {cols.data() + row_start[i], row_start[i + 1] - row_start[i]};
  }
  std::span<const double> row_vals(std::size_t i) const {
    return {vals.data() + row_start[i], row_start[i + 1] - row_start[i]};
  }
  bool is_positive(std::size_t i) const { return labels[i] > 0; }

  // Position of a positive row inside pos_indices.
  std::size_t pos_ordinal(std::size_t row) const {
    const auto it =
        std::lower_bound(pos_indices.begin(), pos_indices.end(), row);
    if (it == pos_indices.end() || *it != row)
      throw std::invalid_argument("pos_ordinal: row is not a positive example");
    return static_cast<std::size_t>(it - pos_indices.begin());
  }

  void rebuild_pos_indices() {
    pos_indices.clear();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] > 0) pos_indices.push_back(i);
  }

  bool operator==(const Dataset&) const = default;
};

struct SplitSpec {
  double test_fraction = 1.0 / 3.0;
  std::optional<double> target_pos_fraction;
  std::uint64_t seed = 0;
};

struct SynthSpec {
  std::size_t n = 100;
  std::size_t d = 10;
  double pos_fraction = 0.1;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("parse_libsvm: line " + std::to_string(line_no) +
                           ": " + what);
}

// std::from_chars rejects a leading '+', which LIBSVM labels use.
inline const char* parse_double(const char* p, const char* end, double& out) {
  if (p < end && *p == '+') ++p;
  const auto res = std::from_chars(p, end, out);
  if (res.ec != std::errc()) return nullptr;
  return res.ptr;
}

}  // namespace detail

inline Dataset parse_libsvm(std::istream& in) {
  Dataset ds;
  ds.row_start.push_back(0);
  std::string line;
  std::size_t line_no = 0;
  std::uint32_t max_col = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const char* p = line.c_str();
    const char* end = p + line.size();
    auto skip_ws = [&] {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
    };
    skip_ws();
    if (p == end) continue;

    double label_value = 0.0;
    p = detail::parse_double(p, end, label_value);
    if (p == nullptr) detail::parse_fail(line_no, "cannot parse label");
    if (p < end && *p != ' ' && *p != '\t')
      detail::parse_fail(line_no, "unexpected character after label");

    long long prev_index = 0;
    while (true) {
      skip_ws();
      if (p == end) break;
      unsigned long long index = 0;
      const auto idx_res = std::from_chars(p, end, index);
      if (idx_res.ec != std::errc() || idx_res.ptr == end ||
          *idx_res.ptr != ':')
        detail::parse_fail(line_no, "expected index:value pair");
      if (index < 1) detail::parse_fail(line_no, "feature index must be >= 1");
      if (static_cast<long long>(index) <= prev_index)
        detail::parse_fail(line_no, "non-increasing feature indices");
      if (index > std::numeric_limits<std::uint32_t>::max())
        detail::parse_fail(line_no, "feature index out of range");
      p = idx_res.ptr + 1;
      double value = 0.0;
      p = detail::parse_double(p, end, value);
      if (p == nullptr) detail::parse_fail(line_no, "cannot parse feature value");
      if (p < end && *p != ' ' && *p != '\t')
        detail::parse_fail(line_no, "unexpected character after value");
      prev_index = static_cast<long long>(index);
      ds.cols.push_back(static_cast<std::uint32_t>(index - 1));
      ds.vals.push_back(value);
      max_col = std::max(max_col, static_cast<std::uint32_t>(index));
    }
    ds.labels.push_back(label_value > 0 ? std::int8_t{1} : std::int8_t{-1});
    ds.row_start.push_back(ds.cols.size());
  }
  if (ds.labels.empty()) throw std::runtime_error("parse_libsvm: empty dataset");
  ds.dim = max_col;
  ds.rebuild_pos_indices();
  return ds;
}

inline void serialize_libsvm(const Dataset& ds, std::ostream& out) {
  for (std::size_t i = 0; i < ds.num_examples(); ++i) {
    out << (ds.labels[i] > 0 ? "+1" : "-1");
    const auto cols = ds.row_cols(i);
    const auto vals = ds.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      out << ' ' << (cols[k] + 1) << ':' << format_g17(vals[k]);
    out << '\n';
  }
}

namespace detail {

// Per-column affine map v -> (v - lo) * scale; constant columns map to 0.
struct ColumnScaler {
  std::vector<double> lo;
  std::vector<double> scale;  // 0 for constant columns
  std::vector<double> fill;   // image of an implicit zero

  double apply(std::uint32_t c, double v) const {
    return (v - lo[c]) * scale[c];
  }
};

inline ColumnScaler fit_scaler(const Dataset& train) {
  const std::size_t d = train.dim;
  const std::size_t n = train.num_examples();
  std::vector<double> mn(d, std::numeric_limits<double>::infinity());
  std::vector<double> mx(d, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> count(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = train.row_cols(i);
    const auto vals = train.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      mn[cols[k]] = std::min(mn[cols[k]], vals[k]);
      mx[cols[k]] = std::max(mx[cols[k]], vals[k]);
      ++count[cols[k]];
    }
  }
  ColumnScaler sc;
  sc.lo.resize(d);
  sc.scale.resize(d);
  sc.fill.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    if (count[c] < n) {  // implicit zeros take part in the statistics
      mn[c] = std::min(mn[c], 0.0);
      mx[c] = std::max(mx[c], 0.0);
    }
    if (count[c] == 0) mn[c] = mx[c] = 0.0;
    if (mx[c] > mn[c]) {
      sc.lo[c] = mn[c];
      sc.scale[c] = 1.0 / (mx[c] - mn[c]);
    } else {
      sc.lo[c] = 0.0;
      sc.scale[c] = 0.0;
    }
    sc.fill[c] = sc.apply(static_cast<std::uint32_t>(c), 0.0);
  }
  return sc;
}

inline Dataset apply_scaler(const ColumnScaler& sc, const Dataset& ds,
                            std::size_t out_dim, bool clamp) {
  // Columns whose implicit zeros map away from zero must be materialized.
  std::vector<std::uint32_t> fill_cols;
  std::vector<double> fill_vals;
  for (std::size_t c = 0; c < out_dim; ++c) {
    double f = sc.fill[c];
    if (clamp) f = std::clamp(f, 0.0, 1.0);
    if (f != 0.0) {
      fill_cols.push_back(static_cast<std::uint32_t>(c));
      fill_vals.push_back(f);
    }
  }

  Dataset out;
  out.dim = out_dim;
  out.labels = ds.labels;
  out.pos_indices = ds.pos_indices;
  out.row_start.push_back(0);
  for (std::size_t i = 0; i < ds.num_examples(); ++i) {
    const auto cols = ds.row_cols(i);
    const auto vals = ds.row_vals(i);
    std::size_t k = 0, f = 0;
    while (k < cols.size() || f < fill_cols.size()) {
      if (f == fill_cols.size() || (k < cols.size() && cols[k] <= fill_cols[f])) {
        if (f < fill_cols.size() && cols[k] == fill_cols[f]) ++f;
        double v = sc.apply(cols[k], vals[k]);
        if (clamp) v = std::clamp(v, 0.0, 1.0);
        out.cols.push_back(cols[k]);
        out.vals.push_back(v);
        ++k;
      } else {
        out.cols.push_back(fill_cols[f]);
        out.vals.push_back(fill_vals[f]);
        ++f;
      }
    }
    out.row_start.push_back(out.cols.size());
  }
  return out;
}

}  // namespace detail

// Min-max scaling into [0,1]. Statistics come from the training split only;
// test values are clamped back into [0,1] after mapping.
inline std::pair<Dataset, Dataset> scale_features(const Dataset& train,
                                                  const Dataset& test) {
  if (train.num_examples() == 0)
    throw std::invalid_argument("scale_features: empty training set");
  if (test.dim > train.dim)
    throw std::invalid_argument(
        "scale_features: test dimension exceeds train dimension");
  const auto scaler = detail::fit_scaler(train);
  Dataset strain = detail::apply_scaler(scaler, train, train.dim, false);
  Dataset stest = detail::apply_scaler(scaler, test, train.dim, true);
  return {std::move(strain), std::move(stest)};
}

namespace detail {

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.dim = ds.dim;
  out.row_start.push_back(0);
  for (std::size_t r : rows) {
    const auto cols = ds.row_cols(r);
    const auto vals = ds.row_vals(r);
    out.cols.insert(out.cols.end(), cols.begin(), cols.end());
    out.vals.insert(out.vals.end(), vals.begin(), vals.end());
    out.labels.push_back(ds.labels[r]);
    out.row_start.push_back(out.cols.size());
  }
  out.rebuild_pos_indices();
  return out;
}

}  // namespace detail

// Seeded shuffle split, optionally preceded by a uniform drop of positives
// until the positive proportion matches target_pos_fraction.
inline std::pair<Dataset, Dataset> make_split(const Dataset& data,
                                              const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw std::invalid_argument("make_split: test_fraction must be in (0,1)");
  const std::size_t n = data.num_examples();
  const std::size_t m = data.num_pos();

  std::vector<char> keep(n, 1);
  if (spec.target_pos_fraction) {
    const double target = *spec.target_pos_fraction;
    if (!(target > 0.0 && target < 1.0))
      throw std::invalid_argument(
          "make_split: target_pos_fraction must be in (0,1)");
    const std::size_t neg = n - m;
    if (neg == 0)
      throw std::runtime_error(
          "make_split: cannot satisfy positivity constraint (no negatives)");
    const auto want = static_cast<std::size_t>(
        std::llround(target * static_cast<double>(neg) / (1.0 - target)));
    if (want < 1)
      throw std::runtime_error(
          "make_split: cannot satisfy positivity constraint (target too low)");
    if (want < m) {
      auto rng = make_rng(spec.seed, Stream::drop_positives);
      const auto kept = sample_without_replacement(rng, want, m);
      std::vector<char> keep_pos(m, 0);
      for (std::size_t k : kept) keep_pos[k] = 1;
      for (std::size_t k = 0; k < m; ++k)
        if (!keep_pos[k]) keep[data.pos_indices[k]] = 0;
    }
  }

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) rows.push_back(i);

  auto rng = make_rng(spec.seed, Stream::split_shuffle);
  shuffle_indices(rng, rows);

  const auto test_n = static_cast<std::size_t>(
      std::floor(static_cast<double>(rows.size()) * spec.test_fraction));
  const std::size_t train_n = rows.size() - test_n;
  if (test_n < 1 || train_n < 1)
    throw std::runtime_error("make_split: split produces an empty side");

  Dataset train = detail::subset(
      data, std::span<const std::size_t>(rows.data(), train_n));
  Dataset test = detail::subset(
      data, std::span<const std::size_t>(rows.data() + train_n, test_n));
  for (const Dataset* side : {&train, &test}) {
    if (side->num_pos() == 0 || side->num_pos() == side->num_examples())
      throw std::runtime_error(
          "make_split: cannot satisfy positivity constraint (a split side "
          "lacks a class)");
  }
  return {std::move(train), std::move(test)};
}

namespace detail {

struct SynthResult {
  Dataset data;
  std::vector<double> direction;  // hidden unit-norm generator
};

inline SynthResult synthesize(const SynthSpec& spec) {
  if (spec.n < 1 || spec.d < 1)
    throw std::invalid_argument("make_synthetic: n and d must be >= 1");
  if (!(spec.pos_fraction > 0.0 && spec.pos_fraction <= 1.0) ||
      spec.pos_fraction * static_cast<double>(spec.n) < 1.0)
    throw std::invalid_argument("make_synthetic: pos_fraction * n must be >= 1");
  if (spec.noise < 0.0)
    throw std::invalid_argument("make_synthetic: noise must be >= 0");

  const std::size_t n = spec.n, d = spec.d;
  std::vector<double> x(n * d);
  auto rng_x = make_rng(spec.seed, Stream::synth_features);
  for (double& v : x) v = draw_normal(rng_x);

  // rescale each column into [0,1]
  for (std::size_t c = 0; c < d; ++c) {
    double mn = x[c], mx = x[c];
    for (std::size_t i = 1; i < n; ++i) {
      mn = std::min(mn, x[i * d + c]);
      mx = std::max(mx, x[i * d + c]);
    }
    const double scale = mx > mn ? 1.0 / (mx - mn) : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      x[i * d + c] = (x[i * d + c] - mn) * scale;
  }

  std::vector<double> direction(d);
  auto rng_w = make_rng(spec.seed, Stream::synth_direction);
  for (double& v : direction) v = draw_normal(rng_w);
  const double norm = std::sqrt(squared_norm(direction));
  if (norm > 0.0)
    for (double& v : direction) v /= norm;
  else
    direction[0] = 1.0;

  std::vector<double> z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) z[i] += x[i * d + c] * direction[c];
  if (spec.noise > 0.0) {
    auto rng_e = make_rng(spec.seed, Stream::synth_noise);
    for (std::size_t i = 0; i < n; ++i) z[i] += spec.noise * draw_normal(rng_e);
  }

  // labels: exactly round(pos_fraction * n) highest z become positive
  auto want = static_cast<std::size_t>(
      std::llround(spec.pos_fraction * static_cast<double>(n)));
  want = std::clamp<std::size_t>(want, 1, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (z[a] != z[b]) return z[a] > z[b];
    return a < b;
  });

  SynthResult out;
  out.direction = std::move(direction);
  Dataset& ds = out.data;
  ds.dim = d;
  ds.labels.assign(n, -1);
  for (std::size_t k = 0; k < want; ++k) ds.labels[order[k]] = 1;
  ds.row_start.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      ds.cols.push_back(static_cast<std::uint32_t>(c));
      ds.vals.push_back(x[i * d + c]);
    }
    ds.row_start.push_back(ds.cols.size());
  }
  ds.rebuild_pos_indices();
  return out;
}

}  // namespace detail

// Seeded imbalanced dataset: features are per-column rescaled normals, labels
// threshold a hidden linear response at the quantile matching pos_fraction.
inline Dataset make_synthetic(const SynthSpec& spec) {
  return detail::synthesize(spec).data;
}

}  // namespace apmax
