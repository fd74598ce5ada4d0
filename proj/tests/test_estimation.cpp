#include <map>
#include <sstream>

#include "apmax/estimation.hpp"
#include "apmax/metrics.hpp"
#include "doctest.h"

using namespace apmax;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

const SurrogateSpec kHinge{SurrogateFamily::squared_hinge, 1.0};

std::vector<std::size_t> ascending(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("sample_positive_batch covers all positives at full batch size") {
  const Dataset ds = make_synthetic({40, 4, 0.25, 0.2, 31});
  BatchPlan plan;
  plan.positive_batch = ds.num_pos();
  plan.seed = 9;
  auto batch = sample_positive_batch(ds, plan, 1);
  std::sort(batch.begin(), batch.end());
  CHECK(batch == ds.pos_indices);
}

TEST_CASE("sample_positive_batch is a pure function of seed and round") {
  const Dataset ds = make_synthetic({40, 4, 0.25, 0.2, 31});
  BatchPlan plan;
  plan.positive_batch = 3;
  plan.seed = 11;
  CHECK(sample_positive_batch(ds, plan, 5) == sample_positive_batch(ds, plan, 5));
  CHECK(sample_positive_batch(ds, plan, 5) != sample_positive_batch(ds, plan, 6));
  plan.positive_batch = ds.num_pos() + 1;
  CHECK_THROWS_AS(sample_positive_batch(ds, plan, 1), std::invalid_argument);
}

TEST_CASE("single-draw positive batches are uniform") {
  const Dataset ds = make_synthetic({30, 3, 0.3, 0.2, 32});
  const std::size_t m = ds.num_pos();
  BatchPlan plan;
  plan.positive_batch = 1;
  plan.replacement = true;
  plan.seed = 21;
  const std::size_t draws = 100000;
  std::map<std::size_t, std::size_t> freq;
  for (std::size_t t = 1; t <= draws; ++t)
    ++freq[sample_positive_batch(ds, plan, t)[0]];
  const double p = 1.0 / static_cast<double>(m);
  const double sigma = std::sqrt(static_cast<double>(draws) * p * (1.0 - p));
  for (std::size_t row : ds.pos_indices) {
    const double expected = static_cast<double>(draws) * p;
    CHECK(std::abs(static_cast<double>(freq[row]) - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("inner_estimate over the whole set reproduces inner_exact exactly") {
  const Dataset ds = make_synthetic({25, 4, 0.2, 0.3, 33});
  auto rng = make_rng(30, Stream::oracle, 70);
  ScoreModel model;
  model.w.resize(ds.dim);
  for (double& x : model.w) x = draw_normal(rng);
  const auto everything = ascending(ds.num_examples());
  for (std::size_t i : ds.pos_indices) {
    const InnerPair full = inner_estimate(kHinge, model, ds, i, everything);
    const InnerPair exact = inner_exact(kHinge, model, ds, i);
    CHECK(full.pos_mass == exact.pos_mass);
    CHECK(full.all_mass == exact.all_mass);
  }
}

TEST_CASE("inner_estimate on the self singleton is n times the self pair") {
  const Dataset ds = parse("+1 1:0.3\n-1 1:0.8\n-1 1:0.1\n+1 1:0.6\n");
  ScoreModel model{{0.9}, 0.0};
  const std::size_t i = ds.pos_indices[0];
  const std::vector<std::size_t> self{i};
  const InnerPair est = inner_estimate(kHinge, model, ds, i, self);
  CHECK(est.pos_mass == doctest::Approx(4.0));  // n * gamma^2
  CHECK(est.all_mass == doctest::Approx(4.0));
  CHECK_THROWS_AS(inner_estimate(kHinge, model, ds, i, {}),
                  std::invalid_argument);
}

TEST_CASE("inner_estimate singleton enumeration averages to inner_exact") {
  const Dataset ds = make_synthetic({20, 3, 0.25, 0.3, 34});
  auto rng = make_rng(31, Stream::oracle, 71);
  ScoreModel model;
  model.w.resize(ds.dim);
  for (double& x : model.w) x = draw_normal(rng);
  const std::size_t n = ds.num_examples();
  for (std::size_t i : ds.pos_indices) {
    CompensatedSum pos_mass, all_mass;
    for (std::size_t j = 0; j < n; ++j) {
      const std::vector<std::size_t> single{j};
      const InnerPair est = inner_estimate(kHinge, model, ds, i, single);
      pos_mass.add(est.pos_mass);
      all_mass.add(est.all_mass);
    }
    const InnerPair exact = inner_exact(kHinge, model, ds, i);
    CHECK(pos_mass.value() / n == doctest::Approx(exact.pos_mass).epsilon(1e-12));
    CHECK(all_mass.value() / n == doctest::Approx(exact.all_mass).epsilon(1e-12));
  }
}

TEST_CASE("inner_jacobian_estimate on the whole set matches differences") {
  const Dataset ds = make_synthetic({15, 4, 0.2, 0.3, 35});
  auto rng = make_rng(32, Stream::oracle, 72);
  ScoreModel model;
  model.w.resize(ds.dim);
  for (double& x : model.w) x = 0.8 * draw_normal(rng);
  const auto everything = ascending(ds.num_examples());
  for (const auto& spec :
       {kHinge, SurrogateSpec{SurrogateFamily::logistic, 2.0}}) {
    const std::size_t i = ds.pos_indices[0];
    const InnerJacobian jac =
        inner_jacobian_estimate(spec, model, ds, i, everything);
    const auto num_pos = finite_diff_grad(
        [&](const std::vector<double>& w) {
          return inner_exact(spec, {w, 0.0}, ds, i).pos_mass;
        },
        model.w, 1e-5);
    const auto num_all = finite_diff_grad(
        [&](const std::vector<double>& w) {
          return inner_exact(spec, {w, 0.0}, ds, i).all_mass;
        },
        model.w, 1e-5);
    CHECK(relative_error(jac.pos_grad, num_pos) <= 1e-6);
    CHECK(relative_error(jac.all_grad, num_all) <= 1e-6);
  }
}

TEST_CASE("inner_jacobian_estimate is zero when every pair clamps") {
  const Dataset ds = parse("+1 1:0.9\n-1 1:0.1\n-1 1:0.2\n");
  const SurrogateSpec narrow{SurrogateFamily::squared_hinge, 0.05};
  ScoreModel model{{8.0}, 0.0};  // positive scores far above negatives
  const std::size_t i = ds.pos_indices[0];
  const std::vector<std::size_t> sample{1, 2};
  const InnerJacobian jac = inner_jacobian_estimate(narrow, model, ds, i, sample);
  for (double g : jac.pos_grad) CHECK(g == 0.0);
  for (double g : jac.all_grad) CHECK(g == 0.0);
}

TEST_CASE("tracker updates follow the three rules") {
  const OmegaBox box{0.0, 2.0, 0.25, 4.0};
  TrackerState tr = make_tracker(box, 3);

  SUBCASE("sampled-row rule projects the mix") {
    tr.rows[1] = {1.0, 1.0};
    const FreshRow fresh[] = {{1, {3.0, 3.0}}};
    tracker_update_moap_v1(tr, fresh, 0.5);
    CHECK(tr.rows[1] == InnerPair{2.0, 2.0});  // mix hits (2,2), clamp keeps it
    CHECK(tr.rows[0] == make_tracker(box, 3).rows[0]);  // untouched
  }

  SUBCASE("full replacement at beta0 = 1") {
    const FreshRow fresh[] = {{0, {9.0, 9.0}}};
    tracker_update_moap_v1(tr, fresh, 1.0);
    CHECK(tr.rows[0] == InnerPair{2.0, 4.0});  // projected fresh values
  }

  SUBCASE("coordinate rule decays unsampled rows") {
    tr.rows[0] = {1.0, 1.0};
    tr.rows[1] = {0.1, 0.3};
    tr.rows[2] = {0.5, 1.0};
    const FreshRow fresh[] = {{2, {1.0, 2.0}}};
    tracker_update_moap_v2(tr, fresh, 0.5, 1);  // scale m/B = 3
    CHECK(tr.rows[0] == InnerPair{0.5, 0.5});
    // decay drives all_mass below the floor, the clamp restores it
    CHECK(tr.rows[1] == InnerPair{0.05, 0.25});
    // sampled row mixes the estimate scaled by 3, then clamps to the box
    CHECK(tr.rows[2].pos_mass == doctest::Approx(std::min(2.0, 0.25 + 1.5)));
    CHECK(tr.rows[2].all_mass == doctest::Approx(std::min(4.0, 0.5 + 3.0)));
  }

  SUBCASE("baseline rule averages without projecting") {
    tr.rows[0] = {1.0, 1.0};
    const FreshRow fresh[] = {{0, {3.0, 3.0}}};
    tracker_update_soap(tr, fresh, 0.5);
    CHECK(tr.rows[0] == InnerPair{2.0, 2.0});
    tracker_update_soap(tr, fresh, 1.0);
    CHECK(tr.rows[0] == InnerPair{3.0, 3.0});  // escapes the box: no clamp
    CHECK_THROWS_AS(tracker_update_soap(tr, fresh, 0.0), std::invalid_argument);
  }
}

TEST_CASE("projected tracker rows always stay inside the box") {
  const SurrogateSpec spec = kHinge;
  const std::size_t m = 6, n = 19;
  const OmegaBox box = tracker_box(box_constants(spec), m, n);
  TrackerState v1 = make_tracker(box, m);
  TrackerState v2 = make_tracker(box, m);
  auto rng = make_rng(33, Stream::oracle, 73);
  for (int it = 0; it < 300; ++it) {
    const double beta0 = 0.05 + 0.9 * draw_unit(rng);
    const std::size_t batch = 1 + draw_below(rng, m);
    const auto ords = sample_without_replacement(rng, batch, m);
    std::vector<FreshRow> fresh;
    for (std::size_t ord : ords)
      fresh.push_back(
          {ord, {draw_unit(rng) * 100.0 - 10.0, draw_unit(rng) * 100.0 - 10.0}});
    tracker_update_moap_v1(v1, fresh, beta0);
    tracker_update_moap_v2(v2, fresh, beta0, batch);
    for (const TrackerState* tr : {&v1, &v2}) {
      for (const InnerPair& u : tr->rows) {
        CHECK(u.pos_mass >= box.pos_lo);
        CHECK(u.pos_mass <= box.pos_hi);
        CHECK(u.all_mass >= box.all_lo);
        CHECK(u.all_mass <= box.all_hi);
      }
    }
  }
}

TEST_CASE("stochastic_grad reduces to the regularizer when pairs clamp") {
  const Dataset ds = parse("+1 1:0.9\n-1 1:0.1\n-1 1:0.2\n");
  const SurrogateSpec narrow{SurrogateFamily::squared_hinge, 0.05};
  ScoreModel model{{8.0}, 0.25};
  TrackerState tr =
      make_tracker(tracker_box(box_constants(narrow), 1, 3), 1);
  tr.rows[0] = {0.5, 1.0};
  const std::vector<std::size_t> batch{0};
  const std::vector<std::vector<std::size_t>> inner{{1, 2}};
  const auto grad = stochastic_grad(narrow, model, ds, batch, tr, inner);
  CHECK(grad[0] == doctest::Approx(2.0 * 0.25 * 8.0).epsilon(1e-12));
}

TEST_CASE("stochastic_grad rejects a drifted tracker row") {
  const Dataset ds = parse("+1 1:0.9\n-1 1:0.1\n");
  ScoreModel model{{1.0}, 0.0};
  TrackerState tr = make_tracker(tracker_box(box_constants(kHinge), 1, 2), 1);
  tr.rows[0] = {0.5, 0.0};  // what an unprojected baseline can drift into
  const std::vector<std::size_t> batch{0};
  const std::vector<std::vector<std::size_t>> inner{{0, 1}};
  CHECK_THROWS_AS(stochastic_grad(kHinge, model, ds, batch, tr, inner),
                  std::domain_error);
}

TEST_CASE("coordinate estimate variance scales like the positive count") {
  // bimodal scores keep the pair losses dispersed, which is where the
  // variance comparison against the stacked full-batch estimate is meaningful
  const Dataset ds = [] {
    Dataset out;
    out.dim = 1;
    out.row_start.push_back(0);
    auto rng = make_rng(36, Stream::oracle, 75);
    for (int i = 0; i < 50; ++i) {
      double x;
      std::int8_t label;
      if (i < 5) {  // positives score high
        x = 0.38 + 0.04 * draw_unit(rng);
        label = 1;
      } else if (i < 8) {  // a few negatives score high too
        x = 0.33 + 0.04 * draw_unit(rng);
        label = -1;
      } else {  // bulk of the negatives scores low
        x = -0.5 + 0.4 * draw_unit(rng);
        label = -1;
      }
      out.cols.push_back(0);
      out.vals.push_back(x);
      out.labels.push_back(label);
      out.row_start.push_back(out.cols.size());
    }
    out.rebuild_pos_indices();
    return out;
  }();
  const std::size_t n = ds.num_examples();
  const std::size_t m = ds.num_pos();
  ScoreModel model{{12.0}, 0.0};

  const std::size_t sample_size = 3;
  const std::size_t draws = 100000;
  auto rng = make_rng(34, Stream::oracle, 74);

  // stacked full-batch estimate: fresh inner sample for every row
  std::vector<std::vector<double>> stacked_sums(m, std::vector<double>(2, 0.0));
  std::vector<std::vector<double>> stacked_sq(m, std::vector<double>(2, 0.0));
  std::vector<std::vector<double>> coord_sums(m, std::vector<double>(2, 0.0));
  std::vector<std::vector<double>> coord_sq(m, std::vector<double>(2, 0.0));
  for (std::size_t k = 0; k < draws; ++k) {
    for (std::size_t ord = 0; ord < m; ++ord) {
      const auto sample = sample_without_replacement(rng, sample_size, n);
      const InnerPair est =
          inner_estimate(kHinge, model, ds, ds.pos_indices[ord], sample);
      stacked_sums[ord][0] += est.pos_mass;
      stacked_sums[ord][1] += est.all_mass;
      stacked_sq[ord][0] += est.pos_mass * est.pos_mass;
      stacked_sq[ord][1] += est.all_mass * est.all_mass;
    }
    const std::size_t pick = draw_below(rng, m);
    const auto sample = sample_without_replacement(rng, sample_size, n);
    const InnerPair est =
        inner_estimate(kHinge, model, ds, ds.pos_indices[pick], sample);
    for (std::size_t ord = 0; ord < m; ++ord) {
      const double scale = ord == pick ? static_cast<double>(m) : 0.0;
      coord_sums[ord][0] += scale * est.pos_mass;
      coord_sums[ord][1] += scale * est.all_mass;
      coord_sq[ord][0] += scale * est.pos_mass * scale * est.pos_mass;
      coord_sq[ord][1] += scale * est.all_mass * scale * est.all_mass;
    }
  }
  auto trace_variance = [&](const auto& sums, const auto& sq) {
    double tv = 0.0;
    for (std::size_t ord = 0; ord < m; ++ord)
      for (int c = 0; c < 2; ++c) {
        const double mean = sums[ord][c] / static_cast<double>(draws);
        tv += sq[ord][c] / static_cast<double>(draws) - mean * mean;
      }
    return tv;
  };
  const double stacked_tv = trace_variance(stacked_sums, stacked_sq);
  const double coord_tv = trace_variance(coord_sums, coord_sq);
  REQUIRE(stacked_tv > 0.0);
  const double ratio = coord_tv / stacked_tv;
  const double dm = static_cast<double>(m);
  CHECK(ratio >= dm / 2.0);
  CHECK(ratio <= 2.0 * dm);
}
