#pragma once

// Joint training of a base model and its noise head on noisy labels, with
// early stopping driven by the noisy-label training loss, and evaluation of
// the base model alone.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisylab/data.hpp"
#include "noisylab/errors.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/math.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/noise.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

enum class Variant { base, true_noise, softmax_plain, softmax_dropout, trace };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::true_noise: return "true";
    case Variant::softmax_plain: return "softmax";
    case Variant::softmax_dropout: return "dropout";
    case Variant::trace: return "trace";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "true" || s == "true-noise" || s == "truenoise") return Variant::true_noise;
  if (s == "softmax" || s == "softmax-plain") return Variant::softmax_plain;
  if (s == "dropout" || s == "softmax-dropout") return Variant::softmax_dropout;
  if (s == "trace" || s == "trace-reg") return Variant::trace;
  throw InvalidInputError("unknown variant '" + s + "'");
}

inline bool has_noise_head(Variant v) { return v != Variant::base; }
inline bool learns_noise(Variant v) {
  return v == Variant::softmax_plain || v == Variant::softmax_dropout || v == Variant::trace;
}

inline constexpr double kDefaultKeep = 0.1;
inline constexpr std::size_t kDefaultBatchSize = 100;
inline constexpr std::size_t kDefaultPatience = 3;
inline constexpr double kDefaultLearningRate = 0.01;
inline constexpr double kDefaultHeadInit = 1.0;

/// `keep` is set exactly for the dropout variant and `lambda` only for the
/// trace variant (an unset lambda there means: choose it by validation).
struct TrainingConfig {
  Variant variant = Variant::base;
  NoiseSpec noise;
  std::optional<double> keep;
  std::optional<double> lambda;
  double lr = kDefaultLearningRate;
  bool halve_lr_on_plateau = true;
  /// Softmax heads start at head_init * I. A zero start is a symmetric
  /// saddle: the base classes come out permuted against the labels.
  double head_init = kDefaultHeadInit;
  std::size_t epochs = 30;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t patience = kDefaultPatience;
  std::uint64_t seed = 0;
};

/// Fills variant-dependent defaults (keep = 0.1 for dropout).
inline TrainingConfig with_defaults(TrainingConfig c) {
  if (c.variant == Variant::softmax_dropout && !c.keep) c.keep = kDefaultKeep;
  return c;
}

inline void validate(const TrainingConfig& c) {
  if (c.batch_size == 0) throw InvalidInputError("batch size must be >= 1");
  if (c.epochs == 0) throw InvalidInputError("epoch budget must be >= 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw InvalidInputError("learning rate must be > 0");
  if (!(c.noise.p >= 0.0 && c.noise.p <= 1.0))
    throw InvalidInputError("noise level p must lie in [0, 1]");
  if (c.keep.has_value() != (c.variant == Variant::softmax_dropout))
    throw InvalidInputError("keep probability is set exactly for the dropout variant");
  if (c.keep && !(*c.keep >= 0.0 && *c.keep <= 1.0))
    throw InvalidInputError("keep probability must lie in [0, 1]");
  if (c.lambda && c.variant != Variant::trace)
    throw InvalidInputError("lambda applies only to the trace variant");
  if (c.lambda && !(*c.lambda >= 0.0)) throw InvalidInputError("lambda must be >= 0");
  if (!std::isfinite(c.head_init)) throw InvalidInputError("head init must be finite");
}

/// Stops once the observed loss has exceeded the best value seen for
/// `patience` consecutive observations.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  struct Decision {
    bool improved = false;
    bool stop = false;
  };

  Decision observe(double loss) {
    ++count_;
    Decision d;
    if (count_ == 1 || loss < best_) {
      best_ = loss;
      best_index_ = count_;
      strikes_ = 0;
      d.improved = true;
    } else if (loss > best_) {
      ++strikes_;
    }
    d.stop = patience_ > 0 && strikes_ >= patience_;
    return d;
  }

  double best() const noexcept { return best_; }
  /// 1-based index of the best observation.
  std::size_t best_index() const noexcept { return best_index_; }

 private:
  std::size_t patience_;
  std::size_t count_ = 0;
  std::size_t strikes_ = 0;
  std::size_t best_index_ = 0;
  double best_ = 0.0;
};

struct TrainResult {
  NetworkParams params;
  /// W for the softmax variants, psi_hat for trace; absent otherwise.
  std::optional<Matrix> head;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_lrs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  long long steps = 0;
  std::size_t clamped_terms = 0;
};

namespace detail {

inline LossResult variant_loss(const TrainingConfig& c, const Matrix& h,
                               std::span<const Label> y, const std::optional<NoiseMatrix>& psi,
                               const Matrix& head, Rng& mask_rng) {
  switch (c.variant) {
    case Variant::base: return loss_base(h, y);
    case Variant::true_noise: return loss_true_noise(h, *psi, y);
    case Variant::trace: return loss_trace(h, head, y, *c.lambda);
    case Variant::softmax_plain:
      return loss_softmax_dropout(h, head, y, Vector::Ones(h.cols()));
    case Variant::softmax_dropout:
      return loss_softmax_dropout(h, head, y,
                                  bernoulli_mask(mask_rng, static_cast<std::size_t>(h.cols()),
                                                 *c.keep));
  }
  throw InvalidInputError("unknown variant");
}

}  // namespace detail

/// Mini-batch SGD on the variant's loss. Only noisy labels are visible. The
/// learning rate is halved after any epoch that fails to improve the best
/// epoch loss; training stops early per EarlyStopper and the best-epoch
/// parameters are returned.
inline TrainResult train(TrainingConfig config, const NoisyTrainingView& data,
                         const NetworkSpec& spec, std::ostream* log = nullptr) {
  config = with_defaults(config);
  validate(config);
  if (config.variant == Variant::trace && !config.lambda)
    throw InvalidInputError("trace variant needs lambda (or run lambda selection first)");
  if (data.images == nullptr || data.size() == 0) throw InvalidInputError("empty training set");
  if (static_cast<std::size_t>(data.images->cols()) != spec.input.size())
    throw ShapeError("training images do not match the network input");
  const std::size_t classes = output_size(spec);
  if (classes != data.classes) throw ShapeError("network output width != class count");

  Rng master(config.seed);
  Rng init_rng = master.fork(1);
  Rng order_rng = master.fork(2);
  Rng mask_rng = master.fork(3);

  TrainResult result;
  result.params = init_network(spec, init_rng);
  std::optional<NoiseMatrix> psi;
  Matrix head;
  const auto c = static_cast<Eigen::Index>(classes);
  switch (config.variant) {
    case Variant::true_noise: psi = build_psi(config.noise, classes); break;
    case Variant::trace: head = Matrix::Identity(c, c); break;
    case Variant::softmax_plain:
    case Variant::softmax_dropout:
      head = config.head_init * Matrix::Identity(c, c);
      break;
    case Variant::base: break;
  }

  EarlyStopper stopper(config.patience);
  NetworkParams best_params = result.params;
  Matrix best_head = head;
  double lr = config.lr;
  long long step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& idx : batches(data.size(), config.batch_size, order_rng)) {
      const Matrix x = gather_rows(*data.images, idx);
      std::vector<Label> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) y[i] = data.labels[idx[i]];

      auto fr = forward(result.params, x);
      if (!fr.logits.allFinite()) throw DivergenceError("non-finite logits", step);
      LossResult loss = detail::variant_loss(config, fr.logits, y, psi, head, mask_rng);
      if (!std::isfinite(loss.value)) throw DivergenceError("non-finite training loss", step);
      result.clamped_terms += loss.clamped;
      const auto grads = backward(result.params, fr.cache, loss.dlogits);
      apply_sgd(result.params, grads, lr, step);
      if (loss.dhead.size() != 0) {
        if (!loss.dhead.allFinite()) throw DivergenceError("non-finite noise-head gradient", step);
        head -= lr * loss.dhead;
        if (config.variant == Variant::trace) head = project_columns_to_simplex(head);
      }
      total += loss.value * static_cast<double>(idx.size());
      count += idx.size();
      ++step;
    }
    const double epoch_loss = total / static_cast<double>(count);
    result.epoch_losses.push_back(epoch_loss);
    result.epoch_lrs.push_back(lr);
    const auto decision = stopper.observe(epoch_loss);
    if (log)
      *log << "  epoch " << epoch << "  noisy loss " << epoch_loss << "  lr " << lr
           << (decision.improved ? "" : "  (no improvement)") << '\n';
    if (decision.improved) {
      best_params = result.params;
      best_head = head;
    } else if (config.halve_lr_on_plateau) {
      lr *= 0.5;
    }
    if (decision.stop) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.clamped_terms > 0 && log)
    *log << "  warning: " << result.clamped_terms
         << " log-likelihood terms were clamped at 1e-12\n";
  result.steps = step;
  result.best_epoch = stopper.best_index();
  result.params = std::move(best_params);
  if (config.variant != Variant::base && config.variant != Variant::true_noise)
    result.head = std::move(best_head);
  return result;
}

/// Percentage of samples whose predicted class differs from `labels`.
inline double error_rate(const NetworkParams& params, const Matrix& images,
                         std::span<const Label> labels) {
  if (labels.empty()) throw InvalidInputError("error rate of an empty set");
  if (static_cast<std::size_t>(images.rows()) != labels.size())
    throw ShapeError("image and label counts differ");
  const auto predicted = predict_batch(params, images);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predicted[i] != labels[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(labels.size());
}

/// Test error (%) of the base model alone; no noise head is involved.
inline double evaluate(const NetworkParams& params, const TestSet& test) {
  return error_rate(params, test.images, test.true_labels);
}

/// Mean noisy-label negative log-likelihood of a trained base model seen
/// through a linear head (no penalty term). Used for lambda selection.
inline double noisy_nll(const NetworkParams& params, const Matrix& head, const Matrix& images,
                        std::span<const Label> labels) {
  const Matrix h = logits(params, images);
  return detail::linear_head_loss(h, head, labels, false).value;
}

struct LambdaTrial {
  double lambda = 0.0;
  double heldout_loss = 0.0;
};

inline const std::vector<double>& trace_lambda_grid() {
  static const std::vector<double> grid{0.01, 0.05, 0.1, 0.5};
  return grid;
}

/// Picks lambda for the trace variant from the fixed grid by the noisy-label
/// loss on a seeded 10% hold-out of the training data.
inline std::vector<LambdaTrial> select_trace_lambda(const TrainingConfig& config,
                                                    const NoisyTrainingView& data,
                                                    const NetworkSpec& spec,
                                                    std::ostream* log = nullptr) {
  Rng split_rng = Rng(config.seed).fork(4);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  split_rng.shuffle(std::span<std::size_t>(order));
  const std::size_t held = std::max<std::size_t>(1, data.size() / 10);
  if (held >= data.size()) throw InvalidInputError("training set too small for lambda selection");
  std::span<const std::size_t> held_idx(order.data(), held);
  std::span<const std::size_t> fit_idx(order.data() + held, order.size() - held);

  const Matrix fit_x = gather_rows(*data.images, fit_idx);
  const Matrix held_x = gather_rows(*data.images, held_idx);
  std::vector<Label> fit_y, held_y;
  for (auto i : fit_idx) fit_y.push_back(data.labels[i]);
  for (auto i : held_idx) held_y.push_back(data.labels[i]);
  const NoisyTrainingView fit_view{data.shape, &fit_x, fit_y, data.classes};

  std::vector<LambdaTrial> trials;
  for (double lambda : trace_lambda_grid()) {
    TrainingConfig c = config;
    c.lambda = lambda;
    if (log) *log << " lambda " << lambda << '\n';
    const auto r = train(c, fit_view, spec, log);
    trials.push_back({lambda, noisy_nll(r.params, *r.head, held_x, held_y)});
  }
  return trials;
}

}  // namespace noisylab
