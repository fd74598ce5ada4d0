#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "apmax/data_io.hpp"
#include "apmax/metrics.hpp"
#include "apmax/optimizers.hpp"

namespace apmax {

struct RunConfig {
  // data source: a LIBSVM file (optionally with a companion test file) or a
  // synthetic spec; file-backed sets without a test file get a seeded split
  std::string dataset_path;
  std::string test_path;
  std::optional<SynthSpec> synth;
  std::optional<double> target_pos_fraction;
  double test_fraction = 1.0 / 3.0;

  Algo algo = Algo::moap_v2;
  AdaptiveStyle style = AdaptiveStyle::adam;
  HyperParams hyper;
  BatchPlan plan;
  SurrogateSpec surrogate;
  double lambda = 1e-4;

  std::uint64_t iterations = 500;
  std::uint32_t repeats = 1;
  std::uint64_t seed = 0;
  // SIZE_MAX = auto: max(1, T/100) on desk-scale data, off on large data
  std::uint64_t probe_every = std::uint64_t(-1);
  std::string out_dir = "runs";
  bool timing = false;
};

struct ResultSummary {
  std::vector<double> test_ap;  // one per repeat
  double mean_test_ap = 0.0;
  std::optional<double> stddev_test_ap;  // unbiased, needs >= 2 repeats
  std::vector<std::string> trace_paths;
  std::string summary_path;
};

// ---- enum <-> name maps used by the CLI and the config file ----

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::soap: return "soap";
    case Algo::moap_v1: return "moap-v1";
    case Algo::moap_v2: return "moap-v2";
    case Algo::adap: return "adap";
  }
  return "?";
}

inline Algo algo_from_string(const std::string& s) {
  if (s == "soap") return Algo::soap;
  if (s == "moap-v1") return Algo::moap_v1;
  if (s == "moap-v2") return Algo::moap_v2;
  if (s == "adap") return Algo::adap;
  throw std::invalid_argument("unknown algo: " + s);
}

inline std::string to_string(AdaptiveStyle s) {
  switch (s) {
    case AdaptiveStyle::adam: return "adam";
    case AdaptiveStyle::adagrad: return "adagrad";
    case AdaptiveStyle::amsgrad: return "amsgrad";
    case AdaptiveStyle::adabound: return "adabound";
  }
  return "?";
}

inline AdaptiveStyle style_from_string(const std::string& s) {
  if (s == "adam") return AdaptiveStyle::adam;
  if (s == "adagrad") return AdaptiveStyle::adagrad;
  if (s == "amsgrad") return AdaptiveStyle::amsgrad;
  if (s == "adabound") return AdaptiveStyle::adabound;
  throw std::invalid_argument("unknown adaptive style: " + s);
}

inline std::string to_string(SurrogateFamily f) {
  return f == SurrogateFamily::squared_hinge ? "squared-hinge" : "logistic";
}

inline SurrogateFamily family_from_string(const std::string& s) {
  if (s == "squared-hinge") return SurrogateFamily::squared_hinge;
  if (s == "logistic") return SurrogateFamily::logistic;
  throw std::invalid_argument("unknown surrogate family: " + s);
}

inline std::string to_string(DecaySchedule d) {
  return d == DecaySchedule::fixed ? "fixed" : "inv-sqrt";
}

inline DecaySchedule decay_from_string(const std::string& s) {
  if (s == "fixed") return DecaySchedule::fixed;
  if (s == "inv-sqrt") return DecaySchedule::inv_sqrt;
  throw std::invalid_argument("unknown decay schedule: " + s);
}

// ---- flat key=value config files ----

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::invalid_argument("cannot parse boolean: " + v);
}

inline SynthSpec& ensure_synth(RunConfig& cfg) {
  if (!cfg.synth) cfg.synth = SynthSpec{};
  return *cfg.synth;
}

}  // namespace detail

inline void apply_config_key(RunConfig& cfg, const std::string& key,
                             const std::string& value) {
  if (key == "dataset") cfg.dataset_path = value;
  else if (key == "test_dataset") cfg.test_path = value;
  else if (key == "synth_n") detail::ensure_synth(cfg).n = std::stoull(value);
  else if (key == "synth_d") detail::ensure_synth(cfg).d = std::stoull(value);
  else if (key == "synth_pos_fraction")
    detail::ensure_synth(cfg).pos_fraction = std::stod(value);
  else if (key == "synth_noise") detail::ensure_synth(cfg).noise = std::stod(value);
  else if (key == "synth_seed") detail::ensure_synth(cfg).seed = std::stoull(value);
  else if (key == "target_pos_fraction") cfg.target_pos_fraction = std::stod(value);
  else if (key == "test_fraction") cfg.test_fraction = std::stod(value);
  else if (key == "algo") cfg.algo = algo_from_string(value);
  else if (key == "style") cfg.style = style_from_string(value);
  else if (key == "eta") cfg.hyper.eta = std::stod(value);
  else if (key == "beta0") cfg.hyper.beta0 = std::stod(value);
  else if (key == "beta1") cfg.hyper.beta1 = std::stod(value);
  else if (key == "beta_prime") cfg.hyper.beta_prime = std::stod(value);
  else if (key == "delta") cfg.hyper.delta = std::stod(value);
  else if (key == "bound_lo") cfg.hyper.bound_lo = std::stod(value);
  else if (key == "bound_hi") cfg.hyper.bound_hi = std::stod(value);
  else if (key == "decay") cfg.hyper.decay = decay_from_string(value);
  else if (key == "surrogate") cfg.surrogate.family = family_from_string(value);
  else if (key == "gamma") cfg.surrogate.gamma = std::stod(value);
  else if (key == "lambda") cfg.lambda = std::stod(value);
  else if (key == "batch_positives") cfg.plan.positive_batch = std::stoull(value);
  else if (key == "batch_inner") cfg.plan.inner_batch = std::stoull(value);
  else if (key == "share_inner") cfg.plan.share_inner = detail::parse_bool(value);
  else if (key == "replacement") cfg.plan.replacement = detail::parse_bool(value);
  else if (key == "iterations") cfg.iterations = std::stoull(value);
  else if (key == "repeats") cfg.repeats = static_cast<std::uint32_t>(std::stoul(value));
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "probe_every") cfg.probe_every = std::stoull(value);
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "timing") cfg.timing = detail::parse_bool(value);
  else throw std::invalid_argument("unknown config key: " + key);
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    try {
      apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
}

// ---- presets for the six benchmark datasets ----

struct Preset {
  std::string name;
  std::string train_file;
  std::string test_file;  // empty: drop + seeded 2:1 split
  std::optional<double> target_pos_fraction;
  // documented benchmark statistics (training/testing examples, positive
  // proportion); split-based presets land near, not exactly on, the counts
  std::size_t doc_train = 0;
  std::size_t doc_test = 0;
  double doc_pos_fraction = 0.0;
  // per-algorithm tuned (eta, beta) starting points
  double eta_soap = 0.1, beta_soap = 0.1;
  double eta_moap = 20.0, beta_moap = 0.9;
  double eta_adap = 1.0, beta_adap = 0.9;
};

// Tuned starting points come from grid search over
// eta in {20,10,1,0.1,0.01} x beta in {0.9,0.5,0.1} on synthetic proxies with
// matching size and positive fraction; rerun `apmax run --preset <name>` after
// fetching data to reproduce.
inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"mushrooms", "mushrooms", "", 0.0527, 2920, 1504, 0.0527},
      {"phishing", "phishing", "", 0.3565, 4987, 2568, 0.3565},
      {"w6a", "w6a", "w6a.t", std::nullopt, 17188, 32561, 0.0305},
      {"a9a", "a9a", "a9a.t", std::nullopt, 32561, 16281, 0.2408},
      {"w8a", "w8a", "w8a.t", std::nullopt, 49749, 14951, 0.0297},
      {"ijcnn1", "ijcnn1", "ijcnn1.t", std::nullopt, 49990, 91701, 0.0971},
  };
  return table;
}

inline const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset: " + name);
}

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  const Preset& p = find_preset(name);
  cfg.dataset_path = p.train_file;
  cfg.test_path = p.test_file;
  cfg.target_pos_fraction = p.target_pos_fraction;
  cfg.test_fraction = 1.0 / 3.0;
  cfg.iterations = 500;
  cfg.plan.positive_batch = 20;
  cfg.plan.inner_batch = 20;
  cfg.lambda = 1e-4;
  cfg.surrogate = {SurrogateFamily::squared_hinge, 1.0};
  switch (cfg.algo) {
    case Algo::soap:
      cfg.hyper.eta = p.eta_soap;
      cfg.hyper.beta0 = cfg.hyper.beta1 = p.beta_soap;
      cfg.hyper.decay = DecaySchedule::fixed;
      break;
    case Algo::moap_v1:
    case Algo::moap_v2:
      cfg.hyper.eta = p.eta_moap;
      cfg.hyper.beta0 = cfg.hyper.beta1 = p.beta_moap;
      cfg.hyper.decay = DecaySchedule::inv_sqrt;
      break;
    case Algo::adap:
      cfg.hyper.eta = p.eta_adap;
      cfg.hyper.beta0 = cfg.hyper.beta1 = p.beta_adap;
      cfg.hyper.decay = DecaySchedule::inv_sqrt;
      break;
  }
}

// ---- data loading ----

// Relative dataset paths resolve against APMAX_DATA_DIR, then ./data, then
// the path as given.
inline std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (!fs::path(path).is_absolute()) {
    if (const char* dir = std::getenv("APMAX_DATA_DIR")) {
      const auto candidate = fs::path(dir) / path;
      if (fs::exists(candidate)) return candidate.string();
    }
    const auto fallback = fs::path("data") / path;
    if (fs::exists(fallback)) return fallback.string();
  }
  return path;
}

inline Dataset load_libsvm_file(const std::string& path) {
  const std::string resolved = resolve_data_path(path);
  std::ifstream in(resolved);
  if (!in) throw std::runtime_error("cannot open dataset: " + resolved);
  return parse_libsvm(in);
}

// Produces the scaled (train, test) pair described by the config.
inline std::pair<Dataset, Dataset> load_split(const RunConfig& cfg) {
  Dataset train, test;
  if (cfg.synth) {
    const Dataset full = make_synthetic(*cfg.synth);
    std::tie(train, test) = make_split(
        full, {cfg.test_fraction, cfg.target_pos_fraction, cfg.seed});
  } else if (!cfg.dataset_path.empty()) {
    if (!cfg.test_path.empty()) {
      train = load_libsvm_file(cfg.dataset_path);
      test = load_libsvm_file(cfg.test_path);
    } else {
      const Dataset full = load_libsvm_file(cfg.dataset_path);
      std::tie(train, test) = make_split(
          full, {cfg.test_fraction, cfg.target_pos_fraction, cfg.seed});
    }
  } else {
    throw std::invalid_argument("run config names no dataset and no synth spec");
  }
  return scale_features(train, test);
}

// ---- trace and summary emission ----

inline void emit_trace(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trace file: " + path);
  out << "t,eta_t,beta_t,train_surrogate_ap,train_ap,grad_norm_sq,elapsed_ms\n";
  for (const TraceRow& r : rec.rows) {
    out << r.t << ',' << format_g17(r.eta_t) << ',' << format_g17(r.beta_t)
        << ',' << format_g17(r.train_surrogate_ap) << ',';
    if (r.train_ap) out << format_g17(*r.train_ap);
    out << ',';
    if (r.grad_norm_sq) out << format_g17(*r.grad_norm_sq);
    out << ',' << format_g17(r.elapsed_ms) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing trace file: " + path);
}

inline std::uint64_t effective_probe_every(const RunConfig& cfg,
                                           const Dataset& train) {
  if (cfg.probe_every != std::uint64_t(-1)) return cfg.probe_every;
  // exact probes cost O(n * m); keep the default off for large problems
  const double cost = static_cast<double>(train.num_examples()) *
                      static_cast<double>(train.num_pos());
  if (cost > 5e6) return 0;
  return std::max<std::uint64_t>(1, cfg.iterations / 100);
}

inline ResultSummary cli_run(const RunConfig& cfg, std::ostream& log) {
  if (cfg.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  const auto [train, test] = load_split(cfg);
  log << "train: " << train.num_examples() << " examples, " << train.num_pos()
      << " positive; test: " << test.num_examples() << " examples, "
      << test.num_pos() << " positive; dim " << train.dim << "\n";

  std::filesystem::create_directories(cfg.out_dir);
  RunOptions opts;
  opts.probe_every = effective_probe_every(cfg, train);
  opts.collect_timing = cfg.timing;

  ResultSummary summary;
  for (std::uint32_t rep = 0; rep < cfg.repeats; ++rep) {
    const RunRecord rec =
        run(cfg.algo, cfg.style, train, cfg.surrogate, cfg.hyper, cfg.plan,
            cfg.lambda, cfg.iterations, cfg.seed + rep, opts);
    const double test_ap =
        average_precision({all_scores(rec.final_model, test), test.labels});
    summary.test_ap.push_back(test_ap);
    const std::string trace_path =
        (std::filesystem::path(cfg.out_dir) /
         ("trace_rep" + std::to_string(rep) + ".csv"))
            .string();
    emit_trace(rec, trace_path);
    summary.trace_paths.push_back(trace_path);
    log << "repeat " << rep << ": final train surrogate AP "
        << rec.final_train_surrogate_ap << ", test AP " << test_ap << "\n";
  }

  double mean = 0.0;
  for (double ap : summary.test_ap) mean += ap;
  mean /= static_cast<double>(summary.test_ap.size());
  summary.mean_test_ap = mean;
  if (cfg.repeats >= 2) {
    double ss = 0.0;
    for (double ap : summary.test_ap) ss += (ap - mean) * (ap - mean);
    summary.stddev_test_ap =
        std::sqrt(ss / static_cast<double>(cfg.repeats - 1));
  }

  const std::string summary_path =
      (std::filesystem::path(cfg.out_dir) / "summary.txt").string();
  {
    std::ofstream out(summary_path, std::ios::binary);
    out << "algo=" << to_string(cfg.algo) << "\n";
    if (cfg.algo == Algo::adap) out << "style=" << to_string(cfg.style) << "\n";
    out << "surrogate=" << to_string(cfg.surrogate.family) << "\n";
    out << "gamma=" << format_g17(cfg.surrogate.gamma) << "\n";
    out << "lambda=" << format_g17(cfg.lambda) << "\n";
    out << "iterations=" << cfg.iterations << "\n";
    out << "repeats=" << cfg.repeats << "\n";
    out << "seed=" << cfg.seed << "\n";
    // test AP is the tie-broken rank statistic (descending score, ascending
    // index), not an interpolated curve area
    out << "ap_definition=tie_broken_average_precision\n";
    for (std::size_t rep = 0; rep < summary.test_ap.size(); ++rep)
      out << "test_ap_rep" << rep << "=" << format_g17(summary.test_ap[rep])
          << "\n";
    out << "test_ap_mean=" << format_g17(summary.mean_test_ap) << "\n";
    if (summary.stddev_test_ap)
      out << "test_ap_stddev=" << format_g17(*summary.stddev_test_ap) << "\n";
    for (const auto& p : summary.trace_paths) out << "trace=" << p << "\n";
  }
  summary.summary_path = summary_path;

  log << "mean test AP " << summary.mean_test_ap;
  if (summary.stddev_test_ap) log << " +/- " << *summary.stddev_test_ap;
  log << "\n";
  return summary;
}

// ---- gradcheck ----

struct GradCheckReport {
  double max_rel_err_objective = 0.0;
  double max_rel_err_outer = 0.0;
  bool pass = false;
};

// Exact objective gradient vs central differences, and the outer-gradient
// formula vs differences, on a small synthetic instance.
inline GradCheckReport gradcheck(const SurrogateSpec& spec,
                                 const SynthSpec& synth, double lambda,
                                 std::ostream& log) {
  if (synth.n > 200 || synth.d > 50)
    throw std::invalid_argument("gradcheck: instance too large (n<=200, d<=50)");
  const Dataset data = make_synthetic(synth);
  GradCheckReport report;

  auto rng = make_rng(synth.seed, Stream::synth_direction, 1);
  for (int trial = 0; trial < 3; ++trial) {
    ScoreModel model;
    model.lambda = lambda;
    model.w.resize(data.dim);
    for (double& x : model.w) x = 0.6 * draw_normal(rng);
    const auto analytic = objective_grad_exact(spec, model, data);
    const auto numeric = finite_diff_grad(
        [&](const std::vector<double>& w) {
          return objective_exact(spec, {w, lambda}, data);
        },
        model.w, 1e-5);
    report.max_rel_err_objective =
        std::max(report.max_rel_err_objective, relative_error(analytic, numeric));
  }

  const auto box = tracker_box(box_constants(spec), data.num_pos(),
                               data.num_examples());
  for (int trial = 0; trial < 20; ++trial) {
    const InnerPair u{box.pos_lo + draw_unit(rng) * (box.pos_hi - box.pos_lo),
                      box.all_lo + draw_unit(rng) * (box.all_hi - box.all_lo)};
    const auto analytic = outer_grad(u);
    const auto numeric = finite_diff_grad(
        [&](const std::vector<double>& v) {
          return outer_value({v[0], v[1]});
        },
        {u.pos_mass, u.all_mass}, 1e-5);
    report.max_rel_err_outer = std::max(
        report.max_rel_err_outer,
        relative_error(std::span<const double>(analytic),
                       std::span<const double>(numeric)));
  }

  report.pass = report.max_rel_err_objective <= 1e-5 &&
                report.max_rel_err_outer <= 1e-5;
  log << "objective gradient max relative error: "
      << report.max_rel_err_objective << "\n";
  log << "outer gradient max relative error: " << report.max_rel_err_outer
      << "\n";
  log << (report.pass ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return report;
}

}  // namespace apmax
