#include <gtest/gtest.h>

#include "noisylab/experiment.hpp"
#include "noisylab/train.hpp"
#include "oracles.hpp"

using namespace noisylab;

namespace {

struct Blobs {
  TrainSet train;
  TestSet test;
};

Blobs blobs(std::uint64_t seed, std::size_t n_train = 1000, std::size_t n_test = 500) {
  Rng rng(seed);
  Blobs b{as_train(make_synthetic_blobs(rng, n_train, 4, 5, 4.0)),
          as_test(make_synthetic_blobs(rng, n_test, 4, 5, 4.0))};
  return b;
}

TrainingConfig config(Variant v, double p = 0.0) {
  TrainingConfig c;
  c.variant = v;
  c.noise = {NoiseFamily::uniform, p, 0};
  c.lr = 0.1;
  c.epochs = 20;
  c.seed = 3;
  return c;
}

NetworkSpec mlp() { return blobs_mlp_spec(5, 4, 16); }

}  // namespace

TEST(EarlyStopper, RuleTrace) {
  EarlyStopper s(2);
  EXPECT_TRUE(s.observe(2.0).improved);
  EXPECT_TRUE(s.observe(1.5).improved);
  auto d3 = s.observe(1.6);
  EXPECT_FALSE(d3.improved);
  EXPECT_FALSE(d3.stop);
  EXPECT_TRUE(s.observe(1.7).stop);
  EXPECT_EQ(s.best_index(), 2u);
  EXPECT_EQ(s.best(), 1.5);
}

TEST(EarlyStopper, ImprovementResetsStrikes) {
  EarlyStopper s(2);
  s.observe(1.0);
  EXPECT_FALSE(s.observe(1.1).stop);
  EXPECT_TRUE(s.observe(0.9).improved);
  EXPECT_FALSE(s.observe(1.2).stop);
  EXPECT_TRUE(s.observe(1.3).stop);
}

TEST(Train, CleanBlobsBaseFitsTrainingSet) {
  auto b = blobs(1);
  Rng nrng(0);
  corrupt_training_labels(b.train, NoiseMatrix::identity(4), nrng);
  const Eigen::MatrixXd tr = b.train.images;
  ASSERT_LT(oracle::nearest_centroid_error(tr, b.train.true_labels, tr, b.train.true_labels, 4), 5.0);
  const auto r = train(config(Variant::base), noisy_view(b.train), mlp());
  EXPECT_LE(r.epoch_losses.size(), 20u);
  EXPECT_LT(error_rate(r.params, b.train.images, b.train.true_labels), 5.0);
}

TEST(Train, EarlyStopRestoresBestEpoch) {
  auto b = blobs(1);
  Rng nrng(0);
  corrupt_training_labels(b.train, build_uniform_psi(4, 0.9), nrng);
  auto c = config(Variant::base);
  c.lr = 3.0;
  c.halve_lr_on_plateau = false;
  c.epochs = 40;
  c.patience = 1;
  const auto r = train(c, noisy_view(b.train), mlp());
  ASSERT_GE(r.best_epoch, 1u);
  const double best = *std::min_element(r.epoch_losses.begin(), r.epoch_losses.end());
  EXPECT_EQ(r.epoch_losses[r.best_epoch - 1], best);
  if (r.early_stopped) {
    EXPECT_LT(r.best_epoch, r.epoch_losses.size());
  }
}

TEST(Train, SameSeedSameParams) {
  auto b = blobs(2);
  Rng nrng(5);
  corrupt_training_labels(b.train, build_uniform_psi(4, 0.3), nrng);
  auto c = config(Variant::softmax_dropout, 0.3);
  c.epochs = 3;
  const auto r1 = train(c, noisy_view(b.train), mlp());
  const auto r2 = train(c, noisy_view(b.train), mlp());
  EXPECT_EQ(r1.params.values.flatten(), r2.params.values.flatten());
  EXPECT_EQ(*r1.head, *r2.head);
  EXPECT_EQ(r1.epoch_losses, r2.epoch_losses);
  c.seed = 4;
  EXPECT_NE(train(c, noisy_view(b.train), mlp()).epoch_losses, r1.epoch_losses);
}

TEST(Train, LearningRateHalvesOnPlateau) {
  auto b = blobs(3, 200, 50);
  Rng nrng(1);
  corrupt_training_labels(b.train, build_uniform_psi(4, 1.0), nrng);
  auto c = config(Variant::base, 1.0);
  c.lr = 2.0;
  c.epochs = 10;
  c.patience = 0;
  const auto r = train(c, noisy_view(b.train), mlp());
  double best = r.epoch_losses[0];
  for (std::size_t e = 1; e < r.epoch_lrs.size(); ++e) {
    const bool improved = e == 1 ? true : r.epoch_losses[e - 1] < best;
    if (e > 1) best = std::min(best, r.epoch_losses[e - 1]);
    EXPECT_EQ(r.epoch_lrs[e], improved ? r.epoch_lrs[e - 1] : 0.5 * r.epoch_lrs[e - 1]) << e;
  }
}

TEST(Train, HeadsByVariant) {
  auto b = blobs(4, 300, 50);
  Rng nrng(1);
  corrupt_training_labels(b.train, build_uniform_psi(4, 0.2), nrng);
  auto c = config(Variant::trace, 0.2);
  c.epochs = 2;
  c.lambda = 0.01;
  const auto tr = train(c, noisy_view(b.train), mlp());
  ASSERT_TRUE(tr.head);
  EXPECT_NO_THROW(NoiseMatrix(*tr.head));
  c = config(Variant::true_noise, 0.2);
  c.epochs = 2;
  EXPECT_FALSE(train(c, noisy_view(b.train), mlp()).head);
  c = config(Variant::softmax_plain, 0.2);
  c.epochs = 2;
  EXPECT_TRUE(train(c, noisy_view(b.train), mlp()).head);
}

TEST(Train, ValidatesConfig) {
  auto b = blobs(5, 100, 20);
  Rng nrng(1);
  corrupt_training_labels(b.train, NoiseMatrix::identity(4), nrng);
  auto c = config(Variant::base);
  c.keep = 0.5;
  EXPECT_THROW(train(c, noisy_view(b.train), mlp()), InvalidInputError);
  c = config(Variant::trace);
  EXPECT_THROW(train(c, noisy_view(b.train), mlp()), InvalidInputError);
  c = config(Variant::base);
  c.batch_size = 0;
  EXPECT_THROW(train(c, noisy_view(b.train), mlp()), InvalidInputError);
  c = config(Variant::base);
  EXPECT_THROW(train(c, noisy_view(b.train), blobs_mlp_spec(5, 3)), ShapeError);
  EXPECT_EQ(with_defaults(config(Variant::softmax_dropout)).keep, std::optional<double>(0.1));
}

TEST(Train, DivergenceIsReportedWithStep) {
  auto b = blobs(6, 200, 50);
  Rng nrng(1);
  corrupt_training_labels(b.train, NoiseMatrix::identity(4), nrng);
  auto c = config(Variant::base);
  c.lr = 1e200;
  try {
    train(c, noisy_view(b.train), mlp());
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 0);
  }
  const auto report = run_experiment(c, b.train, b.test, mlp(), "diverge");
  EXPECT_EQ(report.status, "diverged");
  EXPECT_TRUE(report.divergence_step.has_value());
}

TEST(Evaluate, OracleAndConstantPredictors) {
  Rng rng(7);
  auto test = as_test(make_synthetic_blobs(rng, 1000, 10, 3, 1.0));
  auto params = init_network(blobs_mlp_spec(3, 10, 8), rng);
  const auto predicted = predict_batch(params, test.images);
  EXPECT_EQ(error_rate(params, test.images, predicted), 0.0);
  for (auto& l : params.values.layers) l.weight.setZero();
  params.values.layers.back().bias[3] = 1.0;
  params.touch();
  EXPECT_DOUBLE_EQ(evaluate(params, test), 90.0);
  TestSet empty;
  empty.shape = test.shape;
  empty.images.resize(0, 3);
  EXPECT_THROW(evaluate(params, empty), InvalidInputError);
}

TEST(Experiment, KnownIdentityNoiseTrainsExactlyLikeBase) {
  auto b = blobs(8);
  auto c = config(Variant::base, 0.0);
  c.epochs = 10;
  const auto base = run_experiment(c, b.train, b.test, mlp());
  c.variant = Variant::true_noise;
  const auto truth = run_experiment(c, b.train, b.test, mlp());
  EXPECT_EQ(truth.epoch_losses.size(), base.epoch_losses.size());
  for (std::size_t e = 0; e < base.epoch_losses.size(); ++e)
    EXPECT_NEAR(truth.epoch_losses[e], base.epoch_losses[e], 1e-9) << e;
  EXPECT_EQ(*truth.test_error_percent, *base.test_error_percent);
}

TEST(Experiment, CorruptsOnlyTrainingLabels) {
  auto b = blobs(9, 2000, 500);
  const auto test_labels = b.test.true_labels;
  const auto r = run_experiment(config(Variant::base, 0.5), b.train, b.test, mlp());
  EXPECT_NEAR(r.observed_flip_rate, 0.5 * 0.75, 0.04);
  EXPECT_EQ(b.test.true_labels, test_labels);
}

TEST(Experiment, TraceSelectsLambdaOnHeldOutNoisyLoss) {
  auto b = blobs(10, 600, 100);
  auto c = config(Variant::trace, 0.3);
  c.epochs = 3;
  const auto r = run_experiment(c, b.train, b.test, mlp());
  ASSERT_EQ(r.lambda_trials.size(), trace_lambda_grid().size());
  ASSERT_TRUE(r.config.lambda);
  double best = 1e300;
  for (const auto& t : r.lambda_trials) best = std::min(best, t.heldout_loss);
  for (const auto& t : r.lambda_trials)
    if (t.heldout_loss == best) {
      EXPECT_EQ(*r.config.lambda, t.lambda);
    }
  ASSERT_TRUE(r.learned_noise);
}

TEST(Experiment, KnownNoiseBeatsBaseUnderHeavyNoiseOnBlobs) {
  auto [train_set, test_set] = make_blob_split(1, 5000, 1000);
  auto c = config(Variant::base, 0.6);
  c.epochs = 30;
  const auto spec = blobs_mlp_spec(20, 10);
  const double base = *run_experiment(c, train_set, test_set, spec).test_error_percent;
  c.variant = Variant::true_noise;
  const double truth = *run_experiment(c, train_set, test_set, spec).test_error_percent;
  EXPECT_LT(truth, base);
}
