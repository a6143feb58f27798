// Experiment driver: training runs, the label-inference attack table, the
// estimator verification report, size sweeps, and paired comparisons.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vflsim/attack.hpp"
#include "vflsim/config.hpp"
#include "vflsim/partition.hpp"
#include "vflsim/protocol.hpp"
#include "vflsim/verify.hpp"

namespace fs = std::filesystem;
using namespace vflsim;

namespace {

struct CommonOpts {
  std::string out = "./out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--out", opts.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opts.seed, "Override the config seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRecord>& metrics) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << "iteration,epoch,train_loss,train_acc,test_loss,test_acc,max_delay,"
         "wall_ms\n";
  for (const auto& m : metrics) {
    out << m.iteration << ',' << format_double(m.epoch) << ','
        << format_double(m.train_loss) << ',' << format_double(m.train_acc)
        << ',' << format_double(m.test_loss) << ','
        << format_double(m.test_acc) << ',' << m.max_delay << ','
        << format_double(m.wall_ms) << '\n';
  }
}

int run_training(const std::string& config_path, const CommonOpts& opts) {
  RunConfig cfg = parse_config(config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  auto pair = proto::build_datasets(cfg);
  if (!opts.quiet)
    std::cout << "run: framework=" << to_string(cfg.framework)
              << " clients=" << cfg.clients << " T=" << cfg.iterations
              << " seed=" << cfg.seed << "\n";
  auto result = proto::run(cfg, pair.train, pair.test);
  fs::create_directories(opts.out);
  write_metrics_csv(opts.out + "/metrics.csv", result.metrics);
  if (!opts.quiet && !result.metrics.empty()) {
    const auto& last = result.metrics.back();
    std::cout << "final: iteration=" << last.iteration
              << " train_acc=" << last.train_acc
              << " test_acc=" << last.test_acc
              << " max_delay=" << last.max_delay << "\n";
  }
  if (!opts.quiet) std::cout << "wrote " << opts.out << "/metrics.csv\n";
  return 0;
}

int run_attack_table(const std::string& config_path, const CommonOpts& opts) {
  RunConfig cfg = parse_config(config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  auto pair = proto::build_datasets(cfg);
  const int classes = pair.train.num_classes();

  fs::create_directories(opts.out);
  std::ofstream out(opts.out + "/attack.csv");
  out << "scenario,trials,success_rate,stderr\n";
  int idx = 0;
  for (auto fw : {attack::AttackFramework::kFoo, attack::AttackFramework::kZoo})
    for (auto adv :
         {attack::Adversary::kCuriousClient, attack::Adversary::kEavesdropper}) {
      attack::AttackScenario scenario;
      scenario.framework = fw;
      scenario.adversary = adv;
      scenario.num_classes = classes;
      scenario.trials = cfg.attack_trials;
      scenario.mu = cfg.mu;
      scenario.dist = cfg.dist;
      scenario.batch_size = cfg.batch_size;
      Rng rng = Rng::from_master(cfg.seed, 7000 + idx++);
      auto result = attack::run_attack(scenario, pair.train, rng);
      out << attack::scenario_name(scenario) << ',' << result.trials << ','
          << format_double(result.success_rate) << ','
          << format_double(result.standard_error) << '\n';
      if (!opts.quiet)
        std::cout << attack::scenario_name(scenario) << ": "
                  << 100 * result.success_rate << "% +- "
                  << 100 * result.standard_error << "% (" << result.trials
                  << " trials)\n";
    }
  if (!opts.quiet) std::cout << "wrote " << opts.out << "/attack.csv\n";
  return 0;
}

int run_verify(std::int64_t samples, double mu, const CommonOpts& opts) {
  std::uint64_t seed = opts.seed_set ? opts.seed : 1;
  auto reports = verify::run_lemma_suite(samples, mu, seed);
  fs::create_directories(opts.out);
  std::ofstream out(opts.out + "/verify.csv");
  out << "check,fixture,measured,bound,tolerance,pass\n";
  bool all_pass = true;
  for (const auto& r : reports) {
    out << r.check << ',' << r.fixture << ',' << format_double(r.measured)
        << ',' << format_double(r.bound) << ',' << format_double(r.tolerance)
        << ',' << (r.pass ? 1 : 0) << '\n';
    all_pass &= r.pass;
    if (!opts.quiet)
      std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.check << " / "
                << r.fixture << "  measured=" << r.measured
                << " bound=" << r.bound << " tol=" << r.tolerance << "\n";
  }
  if (!opts.quiet) std::cout << "wrote " << opts.out << "/verify.csv\n";
  if (!all_pass) {
    std::cerr << "verify: one or more checks failed\n";
    return 2;
  }
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& grid,
              double threshold, const CommonOpts& opts) {
  RunConfig cfg = parse_config(config_path);
  if (opts.seed_set) cfg.seed = opts.seed;

  auto eq = grid.find('=');
  if (eq == std::string::npos)
    throw config_error("sweep: --grid must look like key=v1,v2,...");
  std::string key = grid.substr(0, eq);
  std::vector<int> values;
  std::stringstream ss(grid.substr(eq + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) values.push_back(std::stoi(tok));
  if (values.empty()) throw config_error("sweep: empty grid");

  std::vector<verify::ScalingRow> rows;
  if (key == "server_hidden") {
    rows = verify::scaling_experiment(cfg, values, {}, threshold);
  } else if (key == "embed_dim") {
    rows = verify::scaling_experiment(cfg, {}, values, threshold);
  } else {
    throw config_error("sweep: grid key must be server_hidden or embed_dim");
  }

  fs::create_directories(opts.out);
  std::ofstream out(opts.out + "/sweep.csv");
  out << "axis,size,framework,iterations_to_threshold,final_train_loss\n";
  for (const auto& r : rows) {
    out << r.axis << ',' << r.size << ',' << r.framework << ','
        << r.iterations_to_threshold << ','
        << format_double(r.final_train_loss) << '\n';
    if (!opts.quiet)
      std::cout << r.axis << "=" << r.size << " " << r.framework
                << ": iterations_to_threshold=" << r.iterations_to_threshold
                << " final_loss=" << r.final_train_loss << "\n";
  }
  if (!opts.quiet) std::cout << "wrote " << opts.out << "/sweep.csv\n";
  return 0;
}

int run_compare(const std::string& path_a, const std::string& path_b,
                const CommonOpts& opts) {
  RunConfig a = parse_config(path_a);
  RunConfig b = parse_config(path_b);
  // Paired seeds: both runs share one seed so data, initialization, and
  // schedules line up.
  std::uint64_t seed = opts.seed_set ? opts.seed : a.seed;
  a.seed = b.seed = seed;

  auto pair_a = proto::build_datasets(a);
  auto pair_b = proto::build_datasets(b);
  auto ra = proto::run(a, pair_a.train, pair_a.test);
  auto rb = proto::run(b, pair_b.train, pair_b.test);
  if (ra.metrics.empty() || rb.metrics.empty())
    throw config_error("compare: runs produced no metrics (iterations == 0?)");
  const auto& fa = ra.metrics.back();
  const auto& fb = rb.metrics.back();

  fs::create_directories(opts.out);
  std::ofstream out(opts.out + "/compare.csv");
  out << "config,framework,iteration,train_loss,train_acc,test_loss,test_"
         "acc\n";
  out << path_a << ',' << to_string(a.framework) << ',' << fa.iteration << ','
      << format_double(fa.train_loss) << ',' << format_double(fa.train_acc)
      << ',' << format_double(fa.test_loss) << ','
      << format_double(fa.test_acc) << '\n';
  out << path_b << ',' << to_string(b.framework) << ',' << fb.iteration << ','
      << format_double(fb.train_loss) << ',' << format_double(fb.train_acc)
      << ',' << format_double(fb.test_loss) << ','
      << format_double(fb.test_acc) << '\n';

  if (!opts.quiet) {
    std::cout << "A " << to_string(a.framework) << ": test_acc=" << fa.test_acc
              << " train_loss=" << fa.train_loss << "\n";
    std::cout << "B " << to_string(b.framework) << ": test_acc=" << fb.test_acc
              << " train_loss=" << fb.train_loss << "\n";
    std::cout << "gap (A - B): test_acc=" << fa.test_acc - fb.test_acc
              << " train_loss=" << fa.train_loss - fb.train_loss << "\n";
    std::cout << "wrote " << opts.out << "/compare.csv\n";
  }
  return 0;
}

// Pixel-valued blob dataset in the CSV layout the loader expects
// (label, then integer features in [0, 255]).
int run_gen_csv(const std::string& train_path, const std::string& test_path,
                int n, int test_n, int features, int classes,
                double separation, std::uint64_t seed, bool quiet) {
  Rng rng = Rng::from_master(seed, stream::kDataset);
  auto all = data::make_pixel_synthetic(n + test_n, features, classes,
                                        separation, rng);
  data::LabeledData train, test;
  train.num_classes = test.num_classes = classes;
  train.features.rows = n;
  test.features.rows = test_n;
  train.features.cols = test.features.cols = features;
  const std::size_t split = static_cast<std::size_t>(n) * features;
  train.features.values.assign(all.features.values.begin(),
                               all.features.values.begin() + split);
  test.features.values.assign(all.features.values.begin() + split,
                              all.features.values.end());
  train.labels.assign(all.labels.begin(), all.labels.begin() + n);
  test.labels.assign(all.labels.begin() + n, all.labels.end());
  data::save_csv_dataset(train_path, train);
  data::save_csv_dataset(test_path, test);
  if (!quiet)
    std::cout << "wrote " << train_path << " (" << n << " rows) and "
              << test_path << " (" << test_n << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vflsim: deterministic asynchronous VFL simulator"};
  app.require_subcommand(1);

  CommonOpts run_opts, attack_opts, verify_opts, sweep_opts, compare_opts;
  std::string run_config, attack_config, sweep_config, compare_a, compare_b;
  std::string sweep_grid;
  double sweep_threshold = 0.5;
  std::int64_t verify_samples = 1'000'000;
  double verify_mu = 1e-3;

  auto* run_cmd = app.add_subcommand("run", "Train one framework");
  run_cmd->add_option("config", run_config, "Config file")->required();
  add_common(run_cmd, run_opts);

  auto* attack_cmd =
      app.add_subcommand("attack", "Direct label-inference attack table");
  attack_cmd->add_option("config", attack_config, "Config file")->required();
  add_common(attack_cmd, attack_opts);

  auto* verify_cmd =
      app.add_subcommand("verify", "Zeroth-order estimator lemma report");
  verify_cmd->add_option("--samples", verify_samples, "Monte-Carlo samples")
      ->capture_default_str();
  verify_cmd->add_option("--mu", verify_mu, "Smoothing radius")
      ->capture_default_str();
  add_common(verify_cmd, verify_opts);

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Paired size sweep (cascaded vs ZOO)");
  sweep_cmd->add_option("config", sweep_config, "Base config file")->required();
  sweep_cmd->add_option("--grid", sweep_grid, "key=v1,v2,... (server_hidden or embed_dim)")
      ->required();
  sweep_cmd->add_option("--threshold", sweep_threshold, "Train-loss threshold")
      ->capture_default_str();
  add_common(sweep_cmd, sweep_opts);

  auto* compare_cmd =
      app.add_subcommand("compare", "Two configs, one seed, gap summary");
  compare_cmd->add_option("config_a", compare_a, "First config")->required();
  compare_cmd->add_option("config_b", compare_b, "Second config")->required();
  add_common(compare_cmd, compare_opts);

  std::string gen_train, gen_test;
  int gen_n = 10'000, gen_test_n = 2'000, gen_features = 784, gen_classes = 10;
  double gen_separation = 3.0;
  std::uint64_t gen_seed = 1;
  bool gen_quiet = false;
  auto* gen_cmd = app.add_subcommand(
      "gen-csv", "Generate a pixel-valued synthetic dataset as CSV");
  gen_cmd->add_option("train_csv", gen_train, "Training CSV path")->required();
  gen_cmd->add_option("test_csv", gen_test, "Test CSV path")->required();
  gen_cmd->add_option("--n", gen_n, "Training rows")->capture_default_str();
  gen_cmd->add_option("--test-n", gen_test_n, "Test rows")->capture_default_str();
  gen_cmd->add_option("--features", gen_features, "Feature count")
      ->capture_default_str();
  gen_cmd->add_option("--classes", gen_classes, "Class count")
      ->capture_default_str();
  gen_cmd->add_option("--separation", gen_separation, "Blob separation")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed, "Generator seed")
      ->capture_default_str();
  gen_cmd->add_flag("--quiet", gen_quiet, "Suppress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) return run_training(run_config, run_opts);
    if (attack_cmd->parsed()) return run_attack_table(attack_config, attack_opts);
    if (verify_cmd->parsed())
      return run_verify(verify_samples, verify_mu, verify_opts);
    if (sweep_cmd->parsed())
      return run_sweep(sweep_config, sweep_grid, sweep_threshold, sweep_opts);
    if (compare_cmd->parsed())
      return run_compare(compare_a, compare_b, compare_opts);
    if (gen_cmd->parsed())
      return run_gen_csv(gen_train, gen_test, gen_n, gen_test_n, gen_features,
                         gen_classes, gen_separation, gen_seed, gen_quiet);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
