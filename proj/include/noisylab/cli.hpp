#pragma once

// Command-line parsing for the noisylab tool.
//
//   noisylab run           one experiment
//   noisylab sweep         the cross product variants x p x seeds
//   noisylab gradcheck     finite-difference checks of every backward pass
//   noisylab inspect-noise print/render a noise matrix (built or read from CSV)

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "noisylab/errors.hpp"
#include "noisylab/experiment.hpp"
#include "noisylab/train.hpp"

namespace noisylab {

struct CliConfig {
  std::string subcommand;
  std::string dataset = "mnist";
  std::filesystem::path data_dir;
  std::vector<std::string> variants{"dropout"};
  std::string noise = "uniform";
  std::vector<double> p{0.5};
  std::optional<double> keep;
  std::optional<double> lambda;
  double lr = kDefaultLearningRate;
  double head_init = kDefaultHeadInit;
  bool halve_lr = true;
  std::size_t epochs = 30;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t patience = kDefaultPatience;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "noisylab-out";
  std::string run_id;
  std::size_t jobs = 1;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  bool quiet = false;

  // inspect-noise
  std::size_t classes = 10;
  std::filesystem::path matrix_csv;
  std::filesystem::path pgm_out;
};

inline bool operator==(const CliConfig& a, const CliConfig& b) {
  return a.subcommand == b.subcommand && a.dataset == b.dataset && a.data_dir == b.data_dir &&
         a.variants == b.variants && a.noise == b.noise && a.p == b.p && a.keep == b.keep &&
         a.lambda == b.lambda && a.lr == b.lr && a.head_init == b.head_init &&
         a.halve_lr == b.halve_lr && a.epochs == b.epochs &&
         a.batch_size == b.batch_size && a.patience == b.patience && a.seeds == b.seeds &&
         a.out_dir == b.out_dir && a.run_id == b.run_id && a.jobs == b.jobs &&
         a.train_limit == b.train_limit && a.test_limit == b.test_limit && a.quiet == b.quiet &&
         a.classes == b.classes && a.matrix_csv == b.matrix_csv && a.pgm_out == b.pgm_out;
}

inline nlohmann::ordered_json cli_to_json(const CliConfig& c) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  return {{"subcommand", c.subcommand},   {"dataset", c.dataset},
          {"data_dir", c.data_dir.string()}, {"variants", c.variants},
          {"noise", c.noise},             {"p", c.p},
          {"keep", opt(c.keep)},          {"lambda", opt(c.lambda)},
          {"lr", c.lr},                   {"head_init", c.head_init},
          {"halve_lr", c.halve_lr},       {"epochs", c.epochs},
          {"batch_size", c.batch_size},   {"patience", c.patience},
          {"seeds", c.seeds},             {"out_dir", c.out_dir.string()},
          {"run_id", c.run_id},           {"jobs", c.jobs},
          {"train_limit", c.train_limit}, {"test_limit", c.test_limit},
          {"quiet", c.quiet},             {"classes", c.classes},
          {"matrix_csv", c.matrix_csv.string()}, {"pgm_out", c.pgm_out.string()}};
}

inline CliConfig cli_from_json(const nlohmann::ordered_json& j) {
  CliConfig c;
  c.subcommand = j.at("subcommand").get<std::string>();
  c.dataset = j.at("dataset").get<std::string>();
  c.data_dir = j.at("data_dir").get<std::string>();
  c.variants = j.at("variants").get<std::vector<std::string>>();
  c.noise = j.at("noise").get<std::string>();
  c.p = j.at("p").get<std::vector<double>>();
  if (!j.at("keep").is_null()) c.keep = j.at("keep").get<double>();
  if (!j.at("lambda").is_null()) c.lambda = j.at("lambda").get<double>();
  c.lr = j.at("lr").get<double>();
  c.head_init = j.at("head_init").get<double>();
  c.halve_lr = j.at("halve_lr").get<bool>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.run_id = j.at("run_id").get<std::string>();
  c.jobs = j.at("jobs").get<std::size_t>();
  c.train_limit = j.at("train_limit").get<std::size_t>();
  c.test_limit = j.at("test_limit").get<std::size_t>();
  c.quiet = j.at("quiet").get<bool>();
  c.classes = j.at("classes").get<std::size_t>();
  c.matrix_csv = j.at("matrix_csv").get<std::string>();
  c.pgm_out = j.at("pgm_out").get<std::string>();
  return c;
}

namespace detail {

inline void add_experiment_options(CLI::App& sub, CliConfig& c, bool lists) {
  sub.add_option("--dataset", c.dataset, "mnist | cifar10 | blobs")
      ->check(CLI::IsMember({"mnist", "cifar10", "blobs"}));
  sub.add_option("--data-dir", c.data_dir, "dataset root (default: $NOISYLAB_DATA_DIR)");
  const auto variant_check =
      CLI::IsMember({"base", "true", "softmax", "dropout", "trace"});
  if (lists) {
    sub.add_option("--variants,--variant", c.variants, "comma-separated variants")
        ->delimiter(',')
        ->check(variant_check);
    sub.add_option("--p", c.p, "comma-separated noise levels in [0, 1]")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1.0));
    sub.add_option("--seeds,--seed", c.seeds, "comma-separated seeds")->delimiter(',');
    sub.add_option("--jobs", c.jobs, "concurrent runs")->check(CLI::Range(1, 64));
  } else {
    sub.add_option("--variant", c.variants, "base | true | softmax | dropout | trace")
        ->expected(1)
        ->check(variant_check);
    sub.add_option("--p", c.p, "noise level in [0, 1]")->expected(1)->check(CLI::Range(0.0, 1.0));
    sub.add_option("--seed", c.seeds, "seed")->expected(1);
    sub.add_option("--run-id", c.run_id, "output subdirectory name");
  }
  sub.add_option("--noise", c.noise, "uniform | nonuniform")
      ->check(CLI::IsMember({"uniform", "nonuniform"}));
  sub.add_option("--q", c.keep, "dropout keep probability (default 0.1)")
      ->check(CLI::Range(0.0, 1.0));
  sub.add_option("--lambda", c.lambda, "trace penalty (default: validated over a grid)")
      ->check(CLI::NonNegativeNumber);
  sub.add_option("--lr", c.lr, "initial learning rate")->check(CLI::PositiveNumber);
  sub.add_option("--head-init", c.head_init, "softmax noise head starts at this multiple of I");
  sub.add_flag("!--no-lr-halving", c.halve_lr, "keep the learning rate constant");
  sub.add_option("--epochs", c.epochs, "epoch budget")->check(CLI::Range(1, 50));
  sub.add_option("--batch", c.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  sub.add_option("--patience", c.patience, "early-stopping patience in epochs");
  sub.add_option("--out", c.out_dir, "output directory");
  sub.add_option("--train-limit", c.train_limit, "keep only the first n training samples");
  sub.add_option("--test-limit", c.test_limit, "keep only the first n test samples");
  sub.add_flag("--quiet", c.quiet, "no per-epoch log");
}

inline std::string usage_text(const CLI::App& app) {
  std::ostringstream os;
  os << app.help();
  return os.str();
}

}  // namespace detail

/// Thrown for --help; carries the text to print (exit 0).
struct HelpRequested {
  std::string text;
};

/// Parses argv (argv[0] is the program name). Throws UsageError naming the
/// offending flag, or HelpRequested.
inline CliConfig parse_cli(int argc, const char* const* argv) {
  CliConfig c;
  CLI::App app{"noisylab: training under label noise", "noisylab"};
  app.require_subcommand(1, 1);
  auto* run = app.add_subcommand("run", "train and evaluate one configuration");
  auto* sweep = app.add_subcommand("sweep", "run variants x noise levels x seeds");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  auto* inspect = app.add_subcommand("inspect-noise", "print and render a noise matrix");
  detail::add_experiment_options(*run, c, false);
  detail::add_experiment_options(*sweep, c, true);
  (void)grad;
  inspect->add_option("--noise", c.noise)->check(CLI::IsMember({"uniform", "nonuniform"}));
  inspect->add_option("--p", c.p, "noise level")->expected(1)->check(CLI::Range(0.0, 1.0));
  inspect->add_option("--seed", c.seeds, "seed (nonuniform)")->expected(1);
  inspect->add_option("--classes", c.classes, "number of classes")->check(CLI::Range(1, 1000));
  inspect->add_option("--matrix", c.matrix_csv, "read the matrix from a CSV file instead")
      ->check(CLI::ExistingFile);
  inspect->add_option("--pgm", c.pgm_out, "write a heatmap here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{detail::usage_text(app)};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{detail::usage_text(app)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  c.subcommand = app.get_subcommands().front()->get_name();

  if (c.subcommand == "run" || c.subcommand == "sweep") {
    if (c.data_dir.empty() && c.dataset != "blobs") {
      if (const char* env = std::getenv("NOISYLAB_DATA_DIR"); env && *env) c.data_dir = env;
      else
        throw UsageError("--data-dir: required for dataset '" + c.dataset +
                         "' (or set NOISYLAB_DATA_DIR)");
    }
    if (c.variants.empty()) throw UsageError("--variant: at least one variant is required");
    if (c.p.empty()) throw UsageError("--p: at least one noise level is required");
    if (c.seeds.empty()) throw UsageError("--seed: at least one seed is required");
    const bool any_dropout =
        std::find(c.variants.begin(), c.variants.end(), "dropout") != c.variants.end();
    const bool any_trace =
        std::find(c.variants.begin(), c.variants.end(), "trace") != c.variants.end();
    if (c.keep && !any_dropout) throw UsageError("--q: applies only to the dropout variant");
    if (c.lambda && !any_trace) throw UsageError("--lambda: applies only to the trace variant");
    if (!c.run_id.empty() && c.run_id.find_first_of("/\\,\n") != std::string::npos)
      throw UsageError("--run-id: must not contain '/', '\\', ',' or newlines");
  }
  return c;
}

inline CliConfig parse_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"noisylab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_cli(static_cast<int>(argv.size()), argv.data());
}

struct PlannedRun {
  TrainingConfig config;
  std::string run_id;
};

/// One TrainingConfig per (variant, p, seed), in that nesting order.
inline std::vector<PlannedRun> expand_runs(const CliConfig& c) {
  std::vector<PlannedRun> runs;
  for (const auto& v : c.variants)
    for (double p : c.p)
      for (auto seed : c.seeds) {
        TrainingConfig t;
        t.variant = parse_variant(v);
        t.noise = {parse_noise_family(c.noise), p, seed};
        if (t.variant == Variant::softmax_dropout) t.keep = c.keep.value_or(kDefaultKeep);
        if (t.variant == Variant::trace) t.lambda = c.lambda;
        t.lr = c.lr;
        t.head_init = c.head_init;
        t.halve_lr_on_plateau = c.halve_lr;
        t.epochs = c.epochs;
        t.batch_size = c.batch_size;
        t.patience = c.patience;
        t.seed = seed;
        validate(t);
        const bool single = c.variants.size() == 1 && c.p.size() == 1 && c.seeds.size() == 1;
        runs.push_back({t, single && !c.run_id.empty() ? c.run_id : default_run_id(c.dataset, t)});
      }
  return runs;
}

inline DataSource data_source(const CliConfig& c) {
  DataSource src = resolve_data_source(c.dataset, c.data_dir);
  src.train_limit = c.train_limit;
  src.test_limit = c.test_limit;
  return src;
}

}  // namespace noisylab
