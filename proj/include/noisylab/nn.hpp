#pragma once

// Base-model machinery: a sequential layer stack, forward pass to the
// final-layer logits h, exact backpropagation and plain mini-batch SGD.
//
// Activations are batches stored one sample per row. Image tensors are
// flattened channel-planar (C, H, W), so a conv layer sees each row as
// C contiguous H*W planes.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noisylab/errors.hpp"
#include "noisylab/math.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  bool flat() const noexcept { return height == 1 && width == 1; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

enum class LayerKind { dense, relu, conv2d, maxpool2x2, avgpool, flatten };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

/// One layer of a stack. `in`/`out` are fan-in/fan-out for dense layers and
/// channel counts for conv2d; `kernel` is the conv kernel or avgpool window.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, in, out, 0, 1, 0};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0) {
    return {LayerKind::conv2d, in_channels, out_channels, kernel, stride, padding};
  }
  static LayerSpec maxpool2x2() { return {LayerKind::maxpool2x2, 0, 0, 2, 2, 0}; }
  static LayerSpec avgpool(std::size_t window) {
    return {LayerKind::avgpool, 0, 0, window, window, 0};
  }
  static LayerSpec flatten() { return {LayerKind::flatten}; }

  bool has_params() const noexcept {
    return kind == LayerKind::dense || kind == LayerKind::conv2d;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Output shape of every layer; throws ShapeError if the stack does not
/// compose or does not end in a flat vector.
inline std::vector<Shape> layer_shapes(const NetworkSpec& spec) {
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  Shape cur = spec.input;
  if (cur.size() == 0) throw ShapeError("network input shape is empty");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
    switch (l.kind) {
      case LayerKind::dense:
        if (l.in != cur.size() || l.out == 0)
          throw ShapeError(where + "expects fan-in " + std::to_string(l.in) + ", got " +
                           to_string(cur));
        cur = Shape{l.out, 1, 1};
        break;
      case LayerKind::relu:
      case LayerKind::flatten:
        if (l.kind == LayerKind::flatten) cur = Shape{cur.size(), 1, 1};
        break;
      case LayerKind::conv2d: {
        if (l.in != cur.channels || l.out == 0 || l.kernel == 0 || l.stride == 0)
          throw ShapeError(where + "channel/kernel mismatch with input " + to_string(cur));
        const std::size_t ph = cur.height + 2 * l.padding;
        const std::size_t pw = cur.width + 2 * l.padding;
        if (ph < l.kernel || pw < l.kernel)
          throw ShapeError(where + "kernel larger than padded input " + to_string(cur));
        cur = Shape{l.out, (ph - l.kernel) / l.stride + 1, (pw - l.kernel) / l.stride + 1};
        break;
      }
      case LayerKind::maxpool2x2:
      case LayerKind::avgpool: {
        const std::size_t k = l.kind == LayerKind::maxpool2x2 ? 2 : l.kernel;
        if (k == 0 || cur.height < k || cur.width < k)
          throw ShapeError(where + "pool window larger than input " + to_string(cur));
        cur = Shape{cur.channels, cur.height / k, cur.width / k};
        break;
      }
    }
    shapes.push_back(cur);
  }
  if (!cur.flat()) throw ShapeError("network output " + to_string(cur) + " is not a flat vector");
  return shapes;
}

inline std::size_t output_size(const NetworkSpec& spec) {
  const auto shapes = layer_shapes(spec);
  return shapes.empty() ? spec.input.size() : shapes.back().size();
}

/// 784-500-300-10 fully connected ReLU network.
inline NetworkSpec mnist_dnn_spec() {
  return {Shape{1, 28, 28},
          {LayerSpec::dense(784, 500), LayerSpec::relu(), LayerSpec::dense(500, 300),
           LayerSpec::relu(), LayerSpec::dense(300, 10)}};
}

/// Small generic CNN for 32x32x3 inputs: (conv-relu-maxpool) x2, dense, dense.
inline NetworkSpec small_cnn_spec(std::size_t classes = 10) {
  return {Shape{3, 32, 32},
          {LayerSpec::conv2d(3, 16, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2x2(),
           LayerSpec::conv2d(16, 32, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2x2(),
           LayerSpec::flatten(), LayerSpec::dense(32 * 8 * 8, 64), LayerSpec::relu(),
           LayerSpec::dense(64, classes)}};
}

/// Weight and bias of one layer. Dense: weight is out x in. Conv2d: weight
/// is out_channels x (in_channels * k * k). Parameterless layers hold empty
/// tensors.
struct LayerParams {
  Matrix weight;
  Vector bias;
};

/// Per-layer tensors with the layout of NetworkParams; used for gradients.
struct ParamSet {
  std::vector<LayerParams> layers;

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  ParamSet& operator+=(const ParamSet& other) {
    if (other.layers.size() != layers.size()) throw ShapeError("parameter layout mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
    return *this;
  }

  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& l : layers)
      z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                          Vector::Zero(l.bias.size())});
    return z;
  }

  /// All entries in layer order, weights (row-major) before biases.
  Vector flatten() const {
    Vector out(static_cast<Eigen::Index>(size()));
    Eigen::Index k = 0;
    for (const auto& l : layers) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) out[k++] = l.weight.data()[i];
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) out[k++] = l.bias[i];
    }
    return out;
  }

  void assign(const Vector& flat) {
    if (static_cast<std::size_t>(flat.size()) != size())
      throw ShapeError("flat parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (auto& l : layers) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = flat[k++];
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = flat[k++];
    }
  }
};

namespace detail {
inline std::uint64_t next_param_stamp() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

/// All base-model weights and biases. `stamp` identifies a parameter state:
/// it is refreshed by every SGD update so that backward() can reject a
/// forward cache taken from different parameters. Code that edits `values`
/// directly must call touch().
struct NetworkParams {
  NetworkSpec spec;
  ParamSet values;
  std::uint64_t stamp = 0;

  void touch() { stamp = detail::next_param_stamp(); }
};

using NetworkGradients = ParamSet;

/// Per-layer intermediate state of one forward call.
struct LayerCache {
  Matrix input;
  std::vector<Matrix> columns;          // conv2d: im2col per sample
  std::vector<std::uint32_t> argmax;    // maxpool2x2: winning input offset per output
};

struct ForwardCache {
  std::uint64_t stamp = 0;
  Eigen::Index batch = 0;
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

/// He-initialized parameters: weights ~ N(0, 2 / fan_in), zero biases.
inline NetworkParams init_network(const NetworkSpec& spec, Rng& rng) {
  layer_shapes(spec);
  NetworkParams params{spec, {}, 0};
  for (const auto& l : spec.layers) {
    LayerParams lp;
    std::size_t fan_in = 0;
    if (l.kind == LayerKind::dense) {
      fan_in = l.in;
      lp.weight.resize(static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
      lp.bias = Vector::Zero(static_cast<Eigen::Index>(l.out));
    } else if (l.kind == LayerKind::conv2d) {
      fan_in = l.in * l.kernel * l.kernel;
      lp.weight.resize(static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(fan_in));
      lp.bias = Vector::Zero(static_cast<Eigen::Index>(l.out));
    }
    if (fan_in > 0) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < lp.weight.size(); ++i)
        lp.weight.data()[i] = stddev * rng.normal();
    }
    params.values.layers.push_back(std::move(lp));
  }
  params.touch();
  return params;
}

namespace detail {

struct ConvGeometry {
  std::size_t in_c, in_h, in_w, k, stride, pad, out_h, out_w;
  std::size_t patch() const { return in_c * k * k; }
  std::size_t positions() const { return out_h * out_w; }
};

inline ConvGeometry conv_geometry(const LayerSpec& l, const Shape& in, const Shape& out) {
  return {in.channels, in.height, in.width, l.kernel, l.stride, l.padding, out.height, out.width};
}

inline void im2col(const double* x, const ConvGeometry& g, Matrix& col) {
  col.resize(static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.positions()));
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t ki = 0; ki < g.k; ++ki)
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* dst = col.row(static_cast<Eigen::Index>((c * g.k + ki) * g.k + kj)).data();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.in_h) &&
                                ix < static_cast<std::ptrdiff_t>(g.in_w);
            dst[oy * g.out_w + ox] =
                inside ? x[(c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                           static_cast<std::size_t>(ix)]
                       : 0.0;
          }
        }
      }
}

inline void col2im_add(const Matrix& dcol, const ConvGeometry& g, double* dx) {
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t ki = 0; ki < g.k; ++ki)
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* src = dcol.row(static_cast<Eigen::Index>((c * g.k + ki) * g.k + kj)).data();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            dx[(c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
               static_cast<std::size_t>(ix)] += src[oy * g.out_w + ox];
          }
        }
      }
}

using RowMap = Eigen::Map<Matrix>;
using ConstRowMap = Eigen::Map<const Matrix>;

}  // namespace detail

/// Runs the stack on a batch (one flattened sample per row) and returns the
/// final-layer logits h together with the cache backward() needs. No softmax
/// is applied.
inline ForwardResult forward(const NetworkParams& params, const Matrix& batch) {
  const auto shapes = layer_shapes(params.spec);
  if (static_cast<std::size_t>(batch.cols()) != params.spec.input.size())
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " features, network expects " + std::to_string(params.spec.input.size()));
  if (params.values.layers.size() != params.spec.layers.size())
    throw ShapeError("forward: parameters do not match the layer spec");

  const Eigen::Index n = batch.rows();
  ForwardResult result;
  result.cache.stamp = params.stamp;
  result.cache.batch = n;
  result.cache.layers.resize(params.spec.layers.size());

  Matrix cur = batch;
  Shape in_shape = params.spec.input;
  for (std::size_t li = 0; li < params.spec.layers.size(); ++li) {
    const auto& l = params.spec.layers[li];
    const auto& p = params.values.layers[li];
    const Shape out_shape = shapes[li];
    auto& lc = result.cache.layers[li];
    Matrix next;
    switch (l.kind) {
      case LayerKind::dense:
        next.noalias() = cur * p.weight.transpose();
        next.rowwise() += p.bias.transpose();
        break;
      case LayerKind::relu:
        next = cur.cwiseMax(0.0);
        break;
      case LayerKind::flatten:
        next = cur;
        break;
      case LayerKind::conv2d: {
        const auto g = detail::conv_geometry(l, in_shape, out_shape);
        next.resize(n, static_cast<Eigen::Index>(out_shape.size()));
        lc.columns.resize(static_cast<std::size_t>(n));
        for (Eigen::Index s = 0; s < n; ++s) {
          auto& col = lc.columns[static_cast<std::size_t>(s)];
          detail::im2col(cur.row(s).data(), g, col);
          detail::RowMap out(next.row(s).data(), static_cast<Eigen::Index>(l.out),
                             static_cast<Eigen::Index>(g.positions()));
          out.noalias() = p.weight * col;
          out.colwise() += p.bias;
        }
        break;
      }
      case LayerKind::maxpool2x2: {
        next.resize(n, static_cast<Eigen::Index>(out_shape.size()));
        lc.argmax.resize(static_cast<std::size_t>(n) * out_shape.size());
        for (Eigen::Index s = 0; s < n; ++s) {
          const double* x = cur.row(s).data();
          double* y = next.row(s).data();
          for (std::size_t c = 0; c < out_shape.channels; ++c)
            for (std::size_t oy = 0; oy < out_shape.height; ++oy)
              for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
                std::size_t best = (c * in_shape.height + 2 * oy) * in_shape.width + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy)
                  for (std::size_t dx = 0; dx < 2; ++dx) {
                    const std::size_t at =
                        (c * in_shape.height + 2 * oy + dy) * in_shape.width + 2 * ox + dx;
                    if (x[at] > x[best]) best = at;
                  }
                const std::size_t o = (c * out_shape.height + oy) * out_shape.width + ox;
                y[o] = x[best];
                lc.argmax[static_cast<std::size_t>(s) * out_shape.size() + o] =
                    static_cast<std::uint32_t>(best);
              }
        }
        break;
      }
      case LayerKind::avgpool: {
        const std::size_t k = l.kernel;
        const double inv = 1.0 / static_cast<double>(k * k);
        next = Matrix::Zero(n, static_cast<Eigen::Index>(out_shape.size()));
        for (Eigen::Index s = 0; s < n; ++s) {
          const double* x = cur.row(s).data();
          double* y = next.row(s).data();
          for (std::size_t c = 0; c < out_shape.channels; ++c)
            for (std::size_t oy = 0; oy < out_shape.height; ++oy)
              for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < k; ++dy)
                  for (std::size_t dx = 0; dx < k; ++dx)
                    acc += x[(c * in_shape.height + k * oy + dy) * in_shape.width + k * ox + dx];
                y[(c * out_shape.height + oy) * out_shape.width + ox] = acc * inv;
              }
        }
        break;
      }
    }
    lc.input = std::move(cur);
    cur = std::move(next);
    in_shape = out_shape;
  }
  result.logits = std::move(cur);
  return result;
}

/// Exact gradient of a loss with respect to every parameter, given the
/// loss gradient with respect to the logits of the cached forward call.
inline NetworkGradients backward(const NetworkParams& params, const ForwardCache& cache,
                                 const Matrix& dlogits) {
  if (cache.stamp != params.stamp)
    throw ContractError("backward: forward cache was taken from different parameters");
  if (cache.layers.size() != params.spec.layers.size() || dlogits.rows() != cache.batch)
    throw ContractError("backward: cache does not match this network or batch");
  const auto shapes = layer_shapes(params.spec);
  const std::size_t classes = shapes.empty() ? params.spec.input.size() : shapes.back().size();
  if (static_cast<std::size_t>(dlogits.cols()) != classes)
    throw ShapeError("backward: logit gradient has the wrong width");

  NetworkGradients grads = params.values.zeros_like();
  const Eigen::Index n = cache.batch;
  Matrix delta = dlogits;
  for (std::size_t li = params.spec.layers.size(); li-- > 0;) {
    const auto& l = params.spec.layers[li];
    const auto& p = params.values.layers[li];
    const auto& lc = cache.layers[li];
    const Shape in_shape = li == 0 ? params.spec.input : shapes[li - 1];
    const Shape out_shape = shapes[li];
    auto& g = grads.layers[li];
    Matrix prev;
    switch (l.kind) {
      case LayerKind::dense:
        g.weight.noalias() = delta.transpose() * lc.input;
        g.bias = delta.colwise().sum().transpose();
        if (li > 0) prev.noalias() = delta * p.weight;
        break;
      case LayerKind::relu:
        prev = (lc.input.array() > 0.0).select(delta, 0.0);
        break;
      case LayerKind::flatten:
        prev = std::move(delta);
        break;
      case LayerKind::conv2d: {
        const auto geo = detail::conv_geometry(l, in_shape, out_shape);
        if (li > 0) prev = Matrix::Zero(n, static_cast<Eigen::Index>(in_shape.size()));
        Matrix dcol;
        for (Eigen::Index s = 0; s < n; ++s) {
          detail::ConstRowMap dout(delta.row(s).data(), static_cast<Eigen::Index>(l.out),
                                   static_cast<Eigen::Index>(geo.positions()));
          const auto& col = lc.columns[static_cast<std::size_t>(s)];
          g.weight.noalias() += dout * col.transpose();
          g.bias += dout.rowwise().sum();
          if (li > 0) {
            dcol.noalias() = p.weight.transpose() * dout;
            detail::col2im_add(dcol, geo, prev.row(s).data());
          }
        }
        break;
      }
      case LayerKind::maxpool2x2: {
        prev = Matrix::Zero(n, static_cast<Eigen::Index>(in_shape.size()));
        for (Eigen::Index s = 0; s < n; ++s)
          for (std::size_t o = 0; o < out_shape.size(); ++o)
            prev(s, lc.argmax[static_cast<std::size_t>(s) * out_shape.size() + o]) +=
                delta(s, static_cast<Eigen::Index>(o));
        break;
      }
      case LayerKind::avgpool: {
        const std::size_t k = l.kernel;
        const double inv = 1.0 / static_cast<double>(k * k);
        prev = Matrix::Zero(n, static_cast<Eigen::Index>(in_shape.size()));
        for (Eigen::Index s = 0; s < n; ++s) {
          const double* dy = delta.row(s).data();
          double* dx = prev.row(s).data();
          for (std::size_t c = 0; c < out_shape.channels; ++c)
            for (std::size_t oy = 0; oy < out_shape.height; ++oy)
              for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
                const double v = dy[(c * out_shape.height + oy) * out_shape.width + ox] * inv;
                for (std::size_t ddy = 0; ddy < k; ++ddy)
                  for (std::size_t ddx = 0; ddx < k; ++ddx)
                    dx[(c * in_shape.height + k * oy + ddy) * in_shape.width + k * ox + ddx] += v;
              }
        }
        break;
      }
    }
    if (li == 0) break;
    delta = std::move(prev);
  }
  return grads;
}

/// In-place update params <- params - lr * grads. Throws DivergenceError
/// (tagged with `step`) on a non-finite gradient, leaving params untouched.
inline void apply_sgd(NetworkParams& params, const NetworkGradients& grads, double lr,
                      long long step = -1) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInputError("learning rate must be >= 0");
  if (grads.layers.size() != params.values.layers.size())
    throw ShapeError("sgd_step: gradient layout does not match parameters");
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    const auto& p = params.values.layers[i];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size())
      throw ShapeError("sgd_step: gradient layout does not match parameters");
  }
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient", step);
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    params.values.layers[i].weight -= lr * grads.layers[i].weight;
    params.values.layers[i].bias -= lr * grads.layers[i].bias;
  }
  params.touch();
}

inline NetworkParams sgd_step(NetworkParams params, const NetworkGradients& grads, double lr,
                              long long step = -1) {
  apply_sgd(params, grads, lr, step);
  return params;
}

/// Logits for a batch, evaluated in chunks to bound memory.
inline Matrix logits(const NetworkParams& params, const Matrix& batch,
                     Eigen::Index chunk = 1000) {
  Matrix out(batch.rows(), static_cast<Eigen::Index>(output_size(params.spec)));
  for (Eigen::Index start = 0; start < batch.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, batch.rows() - start);
    out.middleRows(start, len) = forward(params, batch.middleRows(start, len)).logits;
  }
  return out;
}

/// Class with the largest base-model probability; lowest index wins ties.
inline Label predict(const NetworkParams& params, const Eigen::Ref<const Vector>& image) {
  Matrix batch = image.transpose();
  const Matrix h = forward(params, batch).logits;
  return static_cast<Label>(argmax(h.row(0).transpose()));
}

inline std::vector<Label> predict_batch(const NetworkParams& params, const Matrix& batch) {
  const Matrix h = logits(params, batch);
  std::vector<Label> out(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index r = 0; r < h.rows(); ++r)
    out[static_cast<std::size_t>(r)] = static_cast<Label>(argmax(h.row(r).transpose()));
  return out;
}

}  // namespace noisylab
