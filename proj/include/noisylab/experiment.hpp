#pragma once

// End-to-end experiment: load -> corrupt training labels -> train the chosen
// variant on noisy labels -> evaluate on the clean test set -> extract the
// learned noise matrix.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/data.hpp"
#include "noisylab/errors.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/noise.hpp"
#include "noisylab/train.hpp"

namespace noisylab {

/// Where an experiment's data comes from. `train_limit`/`test_limit` keep
/// only the first n samples (0 keeps all).
struct DataSource {
  std::string dataset = "mnist";  // mnist | cifar10 | blobs
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> test_files;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
};

struct DatasetInfo {
  std::string name;
  std::vector<FileDigest> sources;
  std::string preprocessing;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
};

struct ExperimentReport {
  std::string run_id;
  std::string status = "ok";  // ok | diverged
  std::string message;
  std::optional<long long> divergence_step;

  TrainingConfig config;
  std::string network;
  DatasetInfo dataset;

  std::vector<double> epoch_losses;
  std::vector<double> epoch_lrs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  long long steps = 0;
  std::size_t clamped_terms = 0;
  std::vector<LambdaTrial> lambda_trials;

  std::optional<double> test_error_percent;
  double observed_flip_rate = 0.0;
  std::optional<NoiseMatrix> true_psi;
  std::optional<NoiseMatrix> learned_noise;

  /// Not part of report.json, which must be identical across reruns.
  double wall_clock_seconds = 0.0;

  std::optional<double> learned_average_diagonal() const {
    if (!learned_noise) return std::nullopt;
    return average_diagonal(*learned_noise);
  }
  /// Average diagonal of the uniform-noise psi, (1 - p) + p / C.
  double uniform_diagonal_reference() const {
    const double c = true_psi ? static_cast<double>(true_psi->classes()) : 10.0;
    return (1.0 - config.noise.p) + config.noise.p / c;
  }
};

inline std::string describe(const NetworkSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.input);
  for (const auto& l : spec.layers) {
    os << ' ' << to_string(l.kind);
    if (l.kind == LayerKind::dense) os << '(' << l.in << "->" << l.out << ')';
    if (l.kind == LayerKind::conv2d)
      os << '(' << l.in << "->" << l.out << ",k" << l.kernel << ",s" << l.stride << ",p"
         << l.padding << ')';
    if (l.kind == LayerKind::avgpool) os << '(' << l.kernel << ')';
  }
  return os.str();
}

inline std::string default_run_id(const std::string& dataset, const TrainingConfig& c) {
  std::ostringstream os;
  os << dataset << '-' << to_string(c.variant) << '-' << to_string(c.noise.family) << "-p"
     << std::fixed << std::setprecision(2) << c.noise.p << "-s" << c.seed;
  return os.str();
}

/// Two-layer ReLU MLP used for the synthetic blob datasets.
inline NetworkSpec blobs_mlp_spec(std::size_t dims, std::size_t classes, std::size_t hidden = 32) {
  return {Shape{dims, 1, 1},
          {LayerSpec::dense(dims, hidden), LayerSpec::relu(), LayerSpec::dense(hidden, classes)}};
}

inline NetworkSpec default_network(const std::string& dataset, const Shape& input,
                                   std::size_t classes) {
  if (dataset == "mnist") return mnist_dnn_spec();
  if (dataset == "cifar10") return small_cnn_spec(classes);
  return blobs_mlp_spec(input.size(), classes);
}

/// Runs one experiment on already-loaded data. The training set's labels are
/// corrupted here (seeded from config.seed); the test set is used only for
/// the final evaluation. Divergence is reported through `status`.
inline ExperimentReport run_experiment(const TrainingConfig& raw_config, TrainSet train_set,
                                       const TestSet& test_set, const NetworkSpec& spec,
                                       std::string run_id = {}, std::ostream* log = nullptr) {
  const auto started = std::chrono::steady_clock::now();
  TrainingConfig config = with_defaults(raw_config);
  validate(config);
  const std::size_t classes = train_set.classes();
  if (test_set.classes() != classes) throw ConsistencyError("train/test class counts differ");

  ExperimentReport report;
  report.run_id = run_id.empty() ? default_run_id(train_set.meta.name, config) : run_id;
  report.network = describe(spec);
  report.dataset.name = train_set.meta.name;
  report.dataset.preprocessing = train_set.meta.preprocessing;
  report.dataset.sources = train_set.meta.sources;
  report.dataset.sources.insert(report.dataset.sources.end(), test_set.meta.sources.begin(),
                                test_set.meta.sources.end());
  report.dataset.train_size = train_set.size();
  report.dataset.test_size = test_set.size();

  const NoiseMatrix psi = build_psi(config.noise, classes);
  report.true_psi = psi;
  Rng corrupt_rng = Rng(config.seed).fork(0);
  corrupt_training_labels(train_set, psi, corrupt_rng);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < train_set.size(); ++i)
    flipped += (*train_set.noisy_labels)[i] != train_set.true_labels[i];
  report.observed_flip_rate = static_cast<double>(flipped) / static_cast<double>(train_set.size());

  const NoisyTrainingView view = noisy_view(train_set);
  try {
    if (config.variant == Variant::trace && !config.lambda) {
      report.lambda_trials = select_trace_lambda(config, view, spec, log);
      const auto best = std::min_element(
          report.lambda_trials.begin(), report.lambda_trials.end(),
          [](const auto& a, const auto& b) { return a.heldout_loss < b.heldout_loss; });
      config.lambda = best->lambda;
    }
    report.config = config;
    TrainResult result = train(config, view, spec, log);
    report.epoch_losses = result.epoch_losses;
    report.epoch_lrs = result.epoch_lrs;
    report.best_epoch = result.best_epoch;
    report.early_stopped = result.early_stopped;
    report.steps = result.steps;
    report.clamped_terms = result.clamped_terms;
    report.test_error_percent = evaluate(result.params, test_set);
    if (result.head) {
      report.learned_noise = config.variant == Variant::trace
                                 ? NoiseMatrix(project_columns_to_simplex(*result.head))
                                 : extract_equivalent_noise(*result.head);
    }
  } catch (const DivergenceError& e) {
    report.config = config;
    report.status = "diverged";
    report.message = e.what();
    report.divergence_step = e.step();
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------
// Dataset resolution

namespace detail {
inline std::filesystem::path first_existing(const std::vector<std::filesystem::path>& candidates) {
  for (const auto& p : candidates)
    if (std::filesystem::exists(p)) return p;
  return candidates.front();
}
}  // namespace detail

/// Standard file names under a data root. MNIST files may live in the root
/// or in root/mnist; CIFAR-10 binaries in root/cifar-10-batches-bin or root.
inline DataSource resolve_data_source(const std::string& dataset,
                                      const std::filesystem::path& root) {
  DataSource src;
  src.dataset = dataset;
  if (dataset == "mnist") {
    const auto dir = detail::first_existing({root / "train-images-idx3-ubyte", root / "mnist" / "train-images-idx3-ubyte"}).parent_path();
    src.train_files = {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"};
    src.test_files = {dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
  } else if (dataset == "cifar10") {
    const auto dir = detail::first_existing({root / "cifar-10-batches-bin" / "test_batch.bin", root / "test_batch.bin"}).parent_path();
    for (int i = 1; i <= 5; ++i)
      src.train_files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    src.test_files = {dir / "test_batch.bin"};
  } else if (dataset != "blobs") {
    throw InvalidInputError("unknown dataset '" + dataset + "'");
  }
  return src;
}

/// Fixed synthetic stand-in: 10 blobs in 20 dimensions.
inline std::pair<TrainSet, TestSet> make_blob_split(std::uint64_t seed, std::size_t n_train,
                                                    std::size_t n_test) {
  Rng rng = Rng(seed).fork(7);
  auto train = as_train(make_synthetic_blobs(rng, n_train, 10, 20, 3.0));
  auto test = as_test(make_synthetic_blobs(rng, n_test, 10, 20, 3.0));
  return {std::move(train), std::move(test)};
}

/// Loads (and mean-normalizes) the train/test pair a DataSource names.
inline std::pair<TrainSet, TestSet> load_data(const DataSource& src, std::uint64_t blob_seed = 0) {
  std::pair<TrainSet, TestSet> sets;
  if (src.dataset == "mnist") {
    if (src.train_files.size() != 2 || src.test_files.size() != 2)
      throw InvalidInputError("MNIST needs image and label files for train and test");
    sets = {as_train(load_mnist_idx(src.train_files[0], src.train_files[1])),
            as_test(load_mnist_idx(src.test_files[0], src.test_files[1]))};
  } else if (src.dataset == "cifar10") {
    sets = {as_train(load_cifar10_bin(src.train_files)), as_test(load_cifar10_bin(src.test_files))};
  } else if (src.dataset == "blobs") {
    sets = make_blob_split(blob_seed, src.train_limit ? src.train_limit : 2000,
                           src.test_limit ? src.test_limit : 1000);
  } else {
    throw InvalidInputError("unknown dataset '" + src.dataset + "'");
  }
  if (src.train_limit) sets.first = take_first(std::move(sets.first), src.train_limit);
  if (src.test_limit) sets.second = take_first(std::move(sets.second), src.test_limit);
  if (src.dataset == "blobs") return sets;
  return normalize_mean_image(std::move(sets.first), std::move(sets.second));
}

inline ExperimentReport run_experiment(const TrainingConfig& config, const DataSource& src,
                                       std::string run_id = {}, std::ostream* log = nullptr) {
  auto [train_set, test_set] = load_data(src, config.seed);
  const NetworkSpec spec = default_network(src.dataset, train_set.shape, train_set.classes());
  auto report = run_experiment(config, std::move(train_set), test_set, spec,
                               run_id.empty() ? default_run_id(src.dataset, config) : run_id, log);
  report.dataset.train_limit = src.train_limit;
  report.dataset.test_limit = src.test_limit;
  return report;
}

}  // namespace noisylab
