#pragma once

// Central finite-difference checks of every analytic gradient in the
// library, on toy shapes. Each check reports the worst relative error
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
// over all coordinates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "noisylab/losses.hpp"
#include "noisylab/math.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/noise.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

inline constexpr double kGradcheckTolerance = 1e-4;
inline constexpr double kGradcheckStep = 1e-5;

struct GradCheckResult {
  std::string component;
  double worst_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

struct GradCheck {
  std::string component;
  std::function<GradCheckResult()> run;
};

/// Compares `analytic` against central differences of `f` around `x`.
inline double worst_relative_error(const std::function<double(const Vector&)>& f, Vector x,
                                   const Vector& analytic, double step = kGradcheckStep) {
  if (analytic.size() != x.size()) throw ShapeError("gradient check: size mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

inline GradCheckResult make_result(std::string component, double worst, std::size_t n) {
  return {std::move(component), worst, n, worst < kGradcheckTolerance};
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline Vector flat(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unflat(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Hook applied to an analytic gradient before comparison; lets tests inject
/// a faulty backward pass.
using GradientHook = std::function<void(Vector&)>;

/// Network parameter gradient under the loss L = sum(R .* h) for a fixed
/// random R, so dL/dh = R exercises every layer's backward pass directly.
inline GradCheck network_gradcheck(std::string component, NetworkSpec spec, std::uint64_t seed,
                                   Eigen::Index batch = 3, GradientHook hook = {}) {
  return {component, [=]() {
            Rng rng(seed);
            NetworkParams params = init_network(spec, rng);
            for (auto& l : params.values.layers)
              for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.1 * rng.normal();
            params.touch();
            const Matrix x = random_matrix(rng, batch, static_cast<Eigen::Index>(spec.input.size()));
            const Matrix r = random_matrix(rng, batch, static_cast<Eigen::Index>(output_size(spec)));
            auto fr = forward(params, x);
            Vector analytic = backward(params, fr.cache, r).flatten();
            if (hook) hook(analytic);
            auto f = [&](const Vector& theta) {
              NetworkParams p = params;
              p.values.assign(theta);
              p.touch();
              return forward(p, x).logits.cwiseProduct(r).sum();
            };
            const double worst = worst_relative_error(f, params.values.flatten(), analytic);
            return make_result(component, worst, static_cast<std::size_t>(analytic.size()));
          }};
}

namespace detail {

inline std::vector<Label> random_labels(Rng& rng, std::size_t n, std::size_t c) {
  std::vector<Label> y(n);
  for (auto& v : y) v = static_cast<Label>(rng.below(c));
  return y;
}

inline Matrix random_stochastic(Rng& rng, std::size_t c) {
  Matrix m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) = sample_simplex(rng, c);
  return m;
}

}  // namespace detail

/// Loss gradients with respect to the logits (and the head, where the loss
/// has one) on a random batch.
inline std::vector<GradCheck> loss_gradchecks(std::uint64_t seed = 11, Eigen::Index n = 4,
                                              std::size_t c = 5) {
  const auto ci = static_cast<Eigen::Index>(c);
  std::vector<GradCheck> checks;
  checks.push_back({"loss_base", [=]() {
                      Rng rng(seed);
                      const Matrix h = random_matrix(rng, n, ci);
                      const auto y = detail::random_labels(rng, static_cast<std::size_t>(n), c);
                      const Vector a = flat(loss_base(h, y).dlogits);
                      const double w = worst_relative_error(
                          [&](const Vector& v) { return loss_base(unflat(v, n, ci), y).value; },
                          flat(h), a);
                      return make_result("loss_base", w, static_cast<std::size_t>(a.size()));
                    }});
  checks.push_back({"loss_true_noise", [=]() {
                      Rng rng(seed + 1);
                      const Matrix h = random_matrix(rng, n, ci);
                      const auto y = detail::random_labels(rng, static_cast<std::size_t>(n), c);
                      const NoiseMatrix psi(detail::random_stochastic(rng, c));
                      const Vector a = flat(loss_true_noise(h, psi, y).dlogits);
                      const double w = worst_relative_error(
                          [&](const Vector& v) {
                            return loss_true_noise(unflat(v, n, ci), psi, y).value;
                          },
                          flat(h), a);
                      return make_result("loss_true_noise", w, static_cast<std::size_t>(a.size()));
                    }});
  checks.push_back({"loss_trace", [=]() {
                      Rng rng(seed + 2);
                      const Matrix h = random_matrix(rng, n, ci);
                      const auto y = detail::random_labels(rng, static_cast<std::size_t>(n), c);
                      const Matrix psi = detail::random_stochastic(rng, c);
                      const double lambda = 0.3;
                      const auto r = loss_trace(h, psi, y, lambda);
                      const double wh = worst_relative_error(
                          [&](const Vector& v) {
                            return loss_trace(unflat(v, n, ci), psi, y, lambda).value;
                          },
                          flat(h), flat(r.dlogits));
                      const double wp = worst_relative_error(
                          [&](const Vector& v) {
                            return loss_trace(h, unflat(v, ci, ci), y, lambda).value;
                          },
                          flat(psi), flat(r.dhead));
                      return make_result("loss_trace", std::max(wh, wp),
                                         static_cast<std::size_t>(h.size() + psi.size()));
                    }});
  checks.push_back({"loss_softmax_dropout", [=]() {
                      Rng rng(seed + 3);
                      const Matrix h = random_matrix(rng, n, ci);
                      const auto y = detail::random_labels(rng, static_cast<std::size_t>(n), c);
                      const Matrix w = random_matrix(rng, ci, ci, 2.0);
                      Vector mask = bernoulli_mask(rng, c, 0.6);
                      mask[0] = 1.0;
                      const auto r = loss_softmax_dropout(h, w, y, mask);
                      const double wh = worst_relative_error(
                          [&](const Vector& v) {
                            return loss_softmax_dropout(unflat(v, n, ci), w, y, mask).value;
                          },
                          flat(h), flat(r.dlogits));
                      const double ww = worst_relative_error(
                          [&](const Vector& v) {
                            return loss_softmax_dropout(h, unflat(v, ci, ci), y, mask).value;
                          },
                          flat(w), flat(r.dhead));
                      return make_result("loss_softmax_dropout", std::max(wh, ww),
                                         static_cast<std::size_t>(h.size() + w.size()));
                    }});
  checks.push_back({"noise_head", [=]() {
                      Rng rng(seed + 4);
                      SoftmaxNoiseHead head{random_matrix(rng, ci, ci, 2.0), 0.5};
                      const Vector p = sample_simplex(rng, c);
                      Vector mask = bernoulli_mask(rng, c, 0.5);
                      mask[1] = 1.0;
                      const Vector coeff = Eigen::VectorXd::NullaryExpr(ci, [&] { return rng.normal(); });
                      const auto g = noise_head_backward(head, p, mask, coeff);
                      const double ww = worst_relative_error(
                          [&](const Vector& v) {
                            SoftmaxNoiseHead hd{unflat(v, ci, ci), head.keep};
                            return coeff.dot(noise_head_forward(hd, p, mask));
                          },
                          flat(head.w), flat(g.dw));
                      const double wp = worst_relative_error(
                          [&](const Vector& v) { return coeff.dot(noise_head_forward(head, v, mask)); },
                          p, g.dprobs);
                      return make_result("noise_head", std::max(ww, wp),
                                         static_cast<std::size_t>(head.w.size() + p.size()));
                    }});
  return checks;
}

/// Every layer kind plus every loss.
inline std::vector<GradCheck> standard_gradchecks() {
  std::vector<GradCheck> checks;
  checks.push_back(network_gradcheck(
      "dense+relu (6-12-5)",
      {Shape{6, 1, 1}, {LayerSpec::dense(6, 12), LayerSpec::relu(), LayerSpec::dense(12, 5)}}, 1));
  checks.push_back(network_gradcheck(
      "conv2d (pad 1, stride 1)",
      {Shape{2, 5, 5},
       {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::flatten(), LayerSpec::dense(75, 4)}},
      2));
  checks.push_back(network_gradcheck(
      "conv2d (stride 2)",
      {Shape{2, 7, 7},
       {LayerSpec::conv2d(2, 3, 3, 2, 0), LayerSpec::relu(), LayerSpec::flatten(),
        LayerSpec::dense(27, 4)}},
      3));
  checks.push_back(network_gradcheck(
      "maxpool2x2",
      {Shape{2, 6, 6},
       {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::maxpool2x2(), LayerSpec::flatten(),
        LayerSpec::dense(27, 4)}},
      4));
  checks.push_back(network_gradcheck(
      "avgpool",
      {Shape{2, 6, 6},
       {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::relu(), LayerSpec::avgpool(3),
        LayerSpec::flatten(), LayerSpec::dense(12, 4)}},
      5));
  checks.push_back(network_gradcheck(
      "small cnn stack",
      {Shape{3, 8, 8},
       {LayerSpec::conv2d(3, 4, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2x2(),
        LayerSpec::conv2d(4, 4, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2x2(),
        LayerSpec::flatten(), LayerSpec::dense(16, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)}},
      6));
  for (auto& c : loss_gradchecks()) checks.push_back(std::move(c));
  return checks;
}

struct GradCheckSummary {
  std::vector<GradCheckResult> results;
  double seconds = 0.0;
  bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& r : results) w = std::max(w, r.worst_relative_error);
    return w;
  }
};

inline GradCheckSummary run_gradchecks(const std::vector<GradCheck>& checks,
                                       std::ostream* out = nullptr) {
  GradCheckSummary summary;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& check : checks) {
    GradCheckResult r = check.run();
    r.component = check.component;
    if (out)
      *out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(28) << r.component
           << " worst rel. error " << std::scientific << std::setprecision(3)
           << r.worst_relative_error << std::defaultfloat << "  (" << r.coordinates
           << " coords)\n";
    summary.results.push_back(std::move(r));
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

}  // namespace noisylab
