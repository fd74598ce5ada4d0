#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "apmax/apmax.hpp"

namespace {

struct RunFlags {
  std::string config_file;
  std::string preset;
  std::string dataset, test_dataset;
  std::uint64_t synth_n = 0, synth_d = 0, synth_seed = 0;
  double synth_pos_fraction = 0.1, synth_noise = 0.0;
  double target_pos_fraction = 0.0, test_fraction = 0.0;
  std::string algo, style, surrogate, decay;
  double eta = 0, beta0 = 0, beta1 = 0, beta_prime = 0, delta = 0;
  double bound_lo = 0, bound_hi = 0, gamma = 0, lambda = 0;
  std::uint64_t batch_positives = 0, batch_inner = 0;
  bool share_inner = false, replacement = false, timing = false;
  std::uint64_t iterations = 0, seed = 0, probe_every = 0;
  std::uint32_t repeats = 0;
  std::string out_dir;
};

void add_run_options(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_file, "key=value config file");
  cmd->add_option("--preset", f.preset,
                  "dataset preset: mushrooms, phishing, w6a, a9a, w8a, ijcnn1");
  cmd->add_option("--dataset", f.dataset, "LIBSVM training file");
  cmd->add_option("--test-dataset", f.test_dataset, "LIBSVM test file");
  cmd->add_option("--synth-n", f.synth_n, "synthetic example count");
  cmd->add_option("--synth-d", f.synth_d, "synthetic dimension");
  cmd->add_option("--synth-pos-fraction", f.synth_pos_fraction,
                  "synthetic positive fraction");
  cmd->add_option("--synth-noise", f.synth_noise, "synthetic label noise");
  cmd->add_option("--synth-seed", f.synth_seed, "synthetic generator seed");
  cmd->add_option("--target-pos-fraction", f.target_pos_fraction,
                  "drop positives until this fraction before splitting");
  cmd->add_option("--test-fraction", f.test_fraction, "test split fraction");
  cmd->add_option("--algo", f.algo, "soap | moap-v1 | moap-v2 | adap");
  cmd->add_option("--style", f.style,
                  "adap step style: adam | adagrad | amsgrad | adabound");
  cmd->add_option("--eta", f.eta, "base step size");
  cmd->add_option("--beta0", f.beta0, "tracker rate");
  cmd->add_option("--beta1", f.beta1, "momentum rate");
  cmd->add_option("--beta-prime", f.beta_prime, "second-moment rate");
  cmd->add_option("--delta", f.delta, "adaptive damping");
  cmd->add_option("--bound-lo", f.bound_lo, "adabound lower bound");
  cmd->add_option("--bound-hi", f.bound_hi, "adabound upper bound");
  cmd->add_option("--decay", f.decay, "fixed | inv-sqrt");
  cmd->add_option("--surrogate", f.surrogate, "squared-hinge | logistic");
  cmd->add_option("--gamma", f.gamma, "surrogate margin/scale");
  cmd->add_option("--lambda", f.lambda, "l2 regularization");
  cmd->add_option("--batch-positives", f.batch_positives, "positive batch size");
  cmd->add_option("--batch-inner", f.batch_inner, "inner sample size");
  cmd->add_flag("--share-inner", f.share_inner, "reuse one inner sample");
  cmd->add_flag("--replacement", f.replacement, "sample with replacement");
  cmd->add_option("--iterations,-T", f.iterations, "iteration count");
  cmd->add_option("--repeats", f.repeats, "independent repeats");
  cmd->add_option("--seed", f.seed, "base seed; repeat r uses seed + r");
  cmd->add_option("--probe-every", f.probe_every,
                  "exact AP / gradient-norm probe cadence (0 = off)");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_flag("--timing", f.timing,
                "record wall-clock times (makes traces nondeterministic)");
}

apmax::RunConfig build_config(CLI::App* cmd, const RunFlags& f) {
  apmax::RunConfig cfg;
  // precedence: preset < config file < explicit flags
  if (cmd->count("--algo")) cfg.algo = apmax::algo_from_string(f.algo);
  if (cmd->count("--style")) cfg.style = apmax::style_from_string(f.style);
  if (!f.preset.empty()) apmax::apply_preset(cfg, f.preset);
  if (!f.config_file.empty()) apmax::load_config_file(cfg, f.config_file);

  auto set = [&](const char* flag, auto fn) {
    if (cmd->count(flag)) fn();
  };
  set("--dataset", [&] { cfg.dataset_path = f.dataset; });
  set("--test-dataset", [&] { cfg.test_path = f.test_dataset; });
  set("--synth-n", [&] {
    if (!cfg.synth) cfg.synth = apmax::SynthSpec{};
    cfg.synth->n = f.synth_n;
  });
  set("--synth-d", [&] {
    if (!cfg.synth) cfg.synth = apmax::SynthSpec{};
    cfg.synth->d = f.synth_d;
  });
  set("--synth-pos-fraction", [&] {
    if (!cfg.synth) cfg.synth = apmax::SynthSpec{};
    cfg.synth->pos_fraction = f.synth_pos_fraction;
  });
  set("--synth-noise", [&] {
    if (!cfg.synth) cfg.synth = apmax::SynthSpec{};
    cfg.synth->noise = f.synth_noise;
  });
  set("--synth-seed", [&] {
    if (!cfg.synth) cfg.synth = apmax::SynthSpec{};
    cfg.synth->seed = f.synth_seed;
  });
  set("--target-pos-fraction",
      [&] { cfg.target_pos_fraction = f.target_pos_fraction; });
  set("--test-fraction", [&] { cfg.test_fraction = f.test_fraction; });
  set("--algo", [&] { cfg.algo = apmax::algo_from_string(f.algo); });
  set("--style", [&] { cfg.style = apmax::style_from_string(f.style); });
  set("--eta", [&] { cfg.hyper.eta = f.eta; });
  set("--beta0", [&] { cfg.hyper.beta0 = f.beta0; });
  set("--beta1", [&] { cfg.hyper.beta1 = f.beta1; });
  set("--beta-prime", [&] { cfg.hyper.beta_prime = f.beta_prime; });
  set("--delta", [&] { cfg.hyper.delta = f.delta; });
  set("--bound-lo", [&] { cfg.hyper.bound_lo = f.bound_lo; });
  set("--bound-hi", [&] { cfg.hyper.bound_hi = f.bound_hi; });
  set("--decay", [&] { cfg.hyper.decay = apmax::decay_from_string(f.decay); });
  set("--surrogate",
      [&] { cfg.surrogate.family = apmax::family_from_string(f.surrogate); });
  set("--gamma", [&] { cfg.surrogate.gamma = f.gamma; });
  set("--lambda", [&] { cfg.lambda = f.lambda; });
  set("--batch-positives", [&] { cfg.plan.positive_batch = f.batch_positives; });
  set("--batch-inner", [&] { cfg.plan.inner_batch = f.batch_inner; });
  set("--share-inner", [&] { cfg.plan.share_inner = f.share_inner; });
  set("--replacement", [&] { cfg.plan.replacement = f.replacement; });
  set("--iterations", [&] { cfg.iterations = f.iterations; });
  set("--repeats", [&] { cfg.repeats = f.repeats; });
  set("--seed", [&] { cfg.seed = f.seed; });
  set("--probe-every", [&] { cfg.probe_every = f.probe_every; });
  set("--out-dir", [&] { cfg.out_dir = f.out_dir; });
  set("--timing", [&] { cfg.timing = f.timing; });
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic average-precision maximization for imbalanced "
               "binary classification"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run_cmd = app.add_subcommand("run", "train and evaluate one config");
  add_run_options(run_cmd, rf);

  struct {
    std::uint64_t n = 50, d = 10, seed = 0;
    double pos_fraction = 0.2, noise = 0.3, gamma = 1.0, lambda = 1e-4;
    std::string surrogate = "squared-hinge";
  } gc;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck_cmd->add_option("--n", gc.n, "instance size (<= 200)");
  gradcheck_cmd->add_option("--d", gc.d, "dimension (<= 50)");
  gradcheck_cmd->add_option("--pos-fraction", gc.pos_fraction, "");
  gradcheck_cmd->add_option("--noise", gc.noise, "");
  gradcheck_cmd->add_option("--seed", gc.seed, "");
  gradcheck_cmd->add_option("--surrogate", gc.surrogate, "");
  gradcheck_cmd->add_option("--gamma", gc.gamma, "");
  gradcheck_cmd->add_option("--lambda", gc.lambda, "");

  std::uint64_t oracle_seed = 0;
  auto* oracles_cmd =
      app.add_subcommand("oracles", "run the estimator verification suites");
  oracles_cmd->add_option("--seed", oracle_seed, "");

  apmax::SynthSpec synth_spec;
  std::string synth_out;
  auto* synth_cmd =
      app.add_subcommand("synth", "write a synthetic LIBSVM dataset");
  synth_cmd->add_option("--n", synth_spec.n, "")->required();
  synth_cmd->add_option("--d", synth_spec.d, "")->required();
  synth_cmd->add_option("--pos-fraction", synth_spec.pos_fraction, "");
  synth_cmd->add_option("--noise", synth_spec.noise, "");
  synth_cmd->add_option("--seed", synth_spec.seed, "");
  synth_cmd->add_option("--out", synth_out, "output path")->required();

  std::string split_in, split_train_out, split_test_out;
  apmax::SplitSpec split_spec;
  double split_target = -1.0;
  auto* split_cmd =
      app.add_subcommand("split", "drop/shuffle-split a LIBSVM dataset");
  split_cmd->add_option("--input", split_in, "")->required();
  split_cmd->add_option("--test-fraction", split_spec.test_fraction, "");
  split_cmd->add_option("--target-pos-fraction", split_target, "");
  split_cmd->add_option("--seed", split_spec.seed, "");
  split_cmd->add_option("--out-train", split_train_out, "")->required();
  split_cmd->add_option("--out-test", split_test_out, "")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto cfg = build_config(run_cmd, rf);
      apmax::cli_run(cfg, std::cout);
      return 0;
    }
    if (*gradcheck_cmd) {
      apmax::SurrogateSpec spec{apmax::family_from_string(gc.surrogate),
                                gc.gamma};
      const auto report = apmax::gradcheck(
          spec, {gc.n, gc.d, gc.pos_fraction, gc.noise, gc.seed}, gc.lambda,
          std::cout);
      return report.pass ? 0 : 2;
    }
    if (*oracles_cmd) {
      const auto report = apmax::run_oracles(oracle_seed, std::cout);
      std::cout << (report.all() ? "all oracle suites passed"
                                 : "oracle suite FAILURES")
                << std::endl;
      return report.all() ? 0 : 2;
    }
    if (*synth_cmd) {
      const auto data = apmax::make_synthetic(synth_spec);
      std::ofstream out(synth_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open " + synth_out);
      apmax::serialize_libsvm(data, out);
      std::cout << "wrote " << data.num_examples() << " examples ("
                << data.num_pos() << " positive) to " << synth_out << "\n";
      return 0;
    }
    if (*split_cmd) {
      if (split_target >= 0.0) split_spec.target_pos_fraction = split_target;
      const auto data = apmax::load_libsvm_file(split_in);
      const auto [train, test] = apmax::make_split(data, split_spec);
      std::ofstream tr(split_train_out, std::ios::binary);
      std::ofstream te(split_test_out, std::ios::binary);
      if (!tr || !te) throw std::runtime_error("cannot open output files");
      apmax::serialize_libsvm(train, tr);
      apmax::serialize_libsvm(test, te);
      std::cout << "train " << train.num_examples() << " (" << train.num_pos()
                << " positive), test " << test.num_examples() << " ("
                << test.num_pos() << " positive)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
