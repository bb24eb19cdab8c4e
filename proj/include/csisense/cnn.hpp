#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "csisense/error.hpp"
#include "csisense/features.hpp"
#include "csisense/rng.hpp"

namespace csisense::cnn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

/// Layer sizes. The default is the CSI network:
/// (9,30,5) -conv3x3-> (32,30,5) -pool2x1-> (32,15,5) -conv3x3-> (64,15,5)
/// -pool2x1-> (64,7,5) -> 2240 -> 128 -> 3.
struct CnnArch {
  std::size_t in_channels = kAntennaPairs;
  std::size_t height = kSubcarriers;  // pooled axis
  std::size_t width = kTimeSlots;
  std::size_t conv1_channels = 32;
  std::size_t conv2_channels = 64;
  std::size_t hidden = 128;
  std::size_t classes = kNumClasses;

  std::size_t input_size() const noexcept { return in_channels * height * width; }
  std::size_t pool1_height() const noexcept { return height / 2; }
  std::size_t pool2_height() const noexcept { return pool1_height() / 2; }
  std::size_t flat_size() const noexcept { return conv2_channels * pool2_height() * width; }

  void validate() const {
    if (in_channels == 0 || width == 0 || conv1_channels == 0 || conv2_channels == 0 || hidden == 0 || classes < 2)
      throw PreconditionError("CNN layer sizes must be positive");
    if (pool2_height() == 0) throw PreconditionError("input height too small for two 2x1 pooling stages");
  }

  friend bool operator==(const CnnArch&, const CnnArch&) = default;
};

// ---------------------------------------------------------------------------
// Feature maps: a batch of (channels, height, width) tensors stored
// channel-major across the batch, i.e. [c][n][y][x]. A conv layer is then a
// single GEMM over all samples.
// ---------------------------------------------------------------------------

struct FeatureMaps {
  std::size_t batch = 0, channels = 0, height = 0, width = 0;
  Vector data;

  FeatureMaps() = default;
  FeatureMaps(std::size_t n, std::size_t c, std::size_t h, std::size_t w)
      : batch(n), channels(c), height(h), width(w), data(n * c * h * w, 0.0) {}

  std::size_t pixels() const noexcept { return batch * height * width; }
  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((c * batch + n) * height + y) * width + x;
  }
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept { return data[offset(n, c, y, x)]; }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept { return data[offset(n, c, y, x)]; }

  MatMap matrix() { return MatMap(data.data(), static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(pixels())); }
  ConstMatMap matrix() const {
    return ConstMatMap(data.data(), static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(pixels()));
  }
};

/// Packs inputs laid out [channel][y][x] per sample into a FeatureMaps batch.
inline FeatureMaps pack_batch(std::span<const Vector* const> inputs, const CnnArch& a) {
  FeatureMaps m(inputs.size(), a.in_channels, a.height, a.width);
  const std::size_t plane = a.height * a.width;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const Vector& in = *inputs[n];
    if (in.size() != a.input_size()) throw DimensionError("CNN input has wrong size");
    for (std::size_t c = 0; c < a.in_channels; ++c)
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, m.data.begin() + static_cast<std::ptrdiff_t>(m.offset(n, c, 0, 0)));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

/// 3x3 convolution, stride 1, zero padding 1. Weights [out][in][ky][kx].
/// Implemented as cross-correlation:
///   F(y, x) = sum_{i,j in -1..1} I(y + i, x + j) K(i, j) + b
/// which is the printed convolution with a flipped kernel; since kernels
/// are learned the two are interchangeable.
struct ConvLayer {
  std::size_t in_channels = 0, out_channels = 0;
  Vector weight;
  Vector bias;

  ConvLayer() = default;
  ConvLayer(std::size_t in, std::size_t out) : in_channels(in), out_channels(out), weight(out * in * 9, 0.0), bias(out, 0.0) {}

  double& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) { return weight[((o * in_channels + i) * 3 + ky) * 3 + kx]; }

  ConstMatMap weight_matrix() const {
    return ConstMatMap(weight.data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(in_channels * 9));
  }

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct DenseLayer {
  std::size_t in = 0, out = 0;
  Vector weight;  // [out][in]
  Vector bias;

  DenseLayer() = default;
  DenseLayer(std::size_t i, std::size_t o) : in(i), out(o), weight(o * i, 0.0), bias(o, 0.0) {}

  ConstMatMap weight_matrix() const {
    return ConstMatMap(weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// im2col for 3x3/pad 1: row (ci, ky, kx), column (n, y, x).
inline RowMat im2col(const FeatureMaps& in) {
  const std::size_t H = in.height, W = in.width, N = in.batch;
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(in.channels * 9), static_cast<Eigen::Index>(in.pixels()));
  for (std::size_t c = 0; c < in.channels; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = cols.data() + static_cast<std::ptrdiff_t>((c * 9 + ky * 3 + kx) * in.pixels());
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            const double* src = in.data.data() + in.offset(n, c, static_cast<std::size_t>(sy), 0);
            double* dst = row + (n * H + y) * W;
            for (std::size_t x = 0; x < W; ++x) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
              if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(W)) dst[x] = src[sx];
            }
          }
      }
  return cols;
}

/// Adjoint of im2col: scatters column gradients back onto the input grid.
inline void col2im(const RowMat& cols, FeatureMaps& out) {
  const std::size_t H = out.height, W = out.width, N = out.batch;
  std::fill(out.data.begin(), out.data.end(), 0.0);
  for (std::size_t c = 0; c < out.channels; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = cols.data() + static_cast<std::ptrdiff_t>((c * 9 + ky * 3 + kx) * out.pixels());
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            double* dst = out.data.data() + out.offset(n, c, static_cast<std::size_t>(sy), 0);
            const double* src = row + (n * H + y) * W;
            for (std::size_t x = 0; x < W; ++x) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
              if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(W)) dst[sx] += src[x];
            }
          }
      }
}

inline FeatureMaps conv_forward_cols(const ConvLayer& layer, const RowMat& cols, std::size_t batch, std::size_t h, std::size_t w) {
  FeatureMaps out(batch, layer.out_channels, h, w);
  auto o = out.matrix();
  o.noalias() = layer.weight_matrix() * cols;
  for (std::size_t c = 0; c < layer.out_channels; ++c) o.row(static_cast<Eigen::Index>(c)).array() += layer.bias[c];
  return out;
}

inline FeatureMaps conv_forward(const ConvLayer& layer, const FeatureMaps& in) {
  if (in.channels != layer.in_channels)
    throw DimensionError("conv expects " + std::to_string(layer.in_channels) + " input channels, got " + std::to_string(in.channels));
  return conv_forward_cols(layer, im2col(in), in.batch, in.height, in.width);
}

struct Pooled {
  FeatureMaps maps;
  std::vector<std::uint32_t> argmax;  // flat offset into the input per output cell
};

/// Non-overlapping 2x1 max pooling along the height axis. An odd trailing
/// row is dropped; ties keep the first (upper) element.
inline Pooled maxpool_forward(const FeatureMaps& in) {
  Pooled p{FeatureMaps(in.batch, in.channels, in.height / 2, in.width), {}};
  p.argmax.resize(p.maps.data.size());
  for (std::size_t c = 0; c < in.channels; ++c)
    for (std::size_t n = 0; n < in.batch; ++n)
      for (std::size_t y = 0; y < p.maps.height; ++y)
        for (std::size_t x = 0; x < in.width; ++x) {
          const std::size_t a = in.offset(n, c, 2 * y, x), b = in.offset(n, c, 2 * y + 1, x);
          const std::size_t pick = in.data[b] > in.data[a] ? b : a;
          const std::size_t o = p.maps.offset(n, c, y, x);
          p.maps.data[o] = in.data[pick];
          p.argmax[o] = static_cast<std::uint32_t>(pick);
        }
  return p;
}

inline void relu_in_place(FeatureMaps& m) {
  for (auto& v : m.data) v = v > 0.0 ? v : 0.0;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct CnnModel {
  CnnArch arch;
  ConvLayer conv1, conv2;
  DenseLayer fc1, fc2;

  static CnnModel zeros(const CnnArch& a) {
    a.validate();
    return {a, ConvLayer(a.in_channels, a.conv1_channels), ConvLayer(a.conv1_channels, a.conv2_channels),
            DenseLayer(a.flat_size(), a.hidden), DenseLayer(a.hidden, a.classes)};
  }

  /// He-normal weights (std = gain * sqrt(2 / fan_in)), zero biases.
  static CnnModel he_init(const CnnArch& a, std::uint64_t seed, double gain = 1.0) {
    CnnModel m = zeros(a);
    Rng rng(seed);
    auto fill = [&](Vector& w, std::size_t fan_in) {
      const double sd = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
      for (auto& v : w) v = rng.normal(0.0, sd);
    };
    fill(m.conv1.weight, a.in_channels * 9);
    fill(m.conv2.weight, a.conv1_channels * 9);
    fill(m.fc1.weight, a.flat_size());
    fill(m.fc2.weight, a.hidden);
    return m;
  }

  /// Every parameter array, in a fixed order (conv1 w/b, conv2 w/b, fc1 w/b, fc2 w/b).
  std::array<Vector*, 8> parameters() {
    return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias, &fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
  }
  std::array<const Vector*, 8> parameters() const {
    return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias, &fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

/// Everything the backward pass needs from a forward pass.
struct ForwardCache {
  std::size_t batch = 0;
  RowMat cols1, cols2;
  FeatureMaps a1, a2;        // post-ReLU conv outputs
  Pooled p1, p2;
  Eigen::MatrixXd flat;      // (flat_size, batch), one column per sample
  Eigen::MatrixXd hidden;    // post-ReLU fc1 output
  Eigen::MatrixXd probs;     // softmax output (classes, batch)
};

/// Column-wise softmax with max shift.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    const double mx = logits.col(n).maxCoeff();
    p.col(n) = (logits.col(n).array() - mx).exp();
    p.col(n) /= p.col(n).sum();
  }
  return p;
}

namespace detail {

inline void check_stage(const FeatureMaps& m, std::size_t c, std::size_t h, std::size_t w, const char* stage) {
  if (m.channels != c || m.height != h || m.width != w)
    throw DimensionError(std::string("shape chain broken at ") + stage);
}

}  // namespace detail

inline ForwardCache forward_cached(const CnnModel& m, const FeatureMaps& input) {
  const auto& a = m.arch;
  detail::check_stage(input, a.in_channels, a.height, a.width, "input");
  ForwardCache fc;
  fc.batch = input.batch;
  const std::size_t N = input.batch;

  fc.cols1 = im2col(input);
  fc.a1 = conv_forward_cols(m.conv1, fc.cols1, N, a.height, a.width);
  relu_in_place(fc.a1);
  detail::check_stage(fc.a1, a.conv1_channels, a.height, a.width, "conv1");
  fc.p1 = maxpool_forward(fc.a1);
  detail::check_stage(fc.p1.maps, a.conv1_channels, a.pool1_height(), a.width, "pool1");

  fc.cols2 = im2col(fc.p1.maps);
  fc.a2 = conv_forward_cols(m.conv2, fc.cols2, N, a.pool1_height(), a.width);
  relu_in_place(fc.a2);
  detail::check_stage(fc.a2, a.conv2_channels, a.pool1_height(), a.width, "conv2");
  fc.p2 = maxpool_forward(fc.a2);
  detail::check_stage(fc.p2.maps, a.conv2_channels, a.pool2_height(), a.width, "pool2");

  // Flatten each sample in (channel, y, x) order.
  const std::size_t plane = a.pool2_height() * a.width;
  fc.flat.resize(static_cast<Eigen::Index>(a.flat_size()), static_cast<Eigen::Index>(N));
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < a.conv2_channels; ++c)
      std::copy_n(fc.p2.maps.data.begin() + static_cast<std::ptrdiff_t>(fc.p2.maps.offset(n, c, 0, 0)), plane,
                  fc.flat.col(static_cast<Eigen::Index>(n)).data() + static_cast<std::ptrdiff_t>(c * plane));

  fc.hidden = (m.fc1.weight_matrix() * fc.flat).colwise() +
              Eigen::Map<const Eigen::VectorXd>(m.fc1.bias.data(), static_cast<Eigen::Index>(a.hidden));
  fc.hidden = fc.hidden.cwiseMax(0.0);
  Eigen::MatrixXd logits = (m.fc2.weight_matrix() * fc.hidden).colwise() +
                           Eigen::Map<const Eigen::VectorXd>(m.fc2.bias.data(), static_cast<Eigen::Index>(a.classes));
  fc.probs = softmax_columns(logits);
  return fc;
}

/// Class probabilities, one row per input.
inline std::vector<Vector> forward(const CnnModel& m, std::span<const Vector> batch) {
  std::vector<const Vector*> ptrs;
  for (const auto& v : batch) ptrs.push_back(&v);
  const auto fc = forward_cached(m, pack_batch(ptrs, m.arch));
  std::vector<Vector> out(batch.size(), Vector(m.arch.classes));
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (std::size_t k = 0; k < m.arch.classes; ++k) out[n][k] = fc.probs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  return out;
}

/// Mean cross-entropy of cached probabilities against integer labels.
inline double cross_entropy(const ForwardCache& fc, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n)
    loss -= std::log(std::max(fc.probs(labels[n], static_cast<Eigen::Index>(n)), std::numeric_limits<double>::min()));
  return loss / static_cast<double>(labels.size());
}

namespace detail {

inline void unpool(const Pooled& p, const FeatureMaps& grad_pooled, FeatureMaps& grad_in) {
  std::fill(grad_in.data.begin(), grad_in.data.end(), 0.0);
  for (std::size_t o = 0; o < grad_pooled.data.size(); ++o) grad_in.data[p.argmax[o]] += grad_pooled.data[o];
}

inline void relu_mask(const FeatureMaps& activated, FeatureMaps& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (activated.data[i] <= 0.0) grad.data[i] = 0.0;
}

inline void conv_param_grads(const FeatureMaps& grad_out, const RowMat& cols, ConvLayer& g) {
  MatMap(g.weight.data(), static_cast<Eigen::Index>(g.out_channels), static_cast<Eigen::Index>(g.in_channels * 9)).noalias() =
      grad_out.matrix() * cols.transpose();
  // Plain loop: Eigen's vectorized sum peels by address alignment, which
  // would make the rounding depend on where the heap put the buffer.
  const std::size_t px = grad_out.pixels();
  for (std::size_t c = 0; c < g.out_channels; ++c) {
    const double* row = grad_out.data.data() + c * px;
    double s = 0.0;
    for (std::size_t i = 0; i < px; ++i) s += row[i];
    g.bias[c] = s;
  }
}

}  // namespace detail

/// Exact gradient of loss_scale * mean cross-entropy with respect to every
/// parameter. Returned as a model-shaped container.
inline CnnModel backward(const CnnModel& m, const ForwardCache& fc, std::span<const int> labels, double loss_scale = 1.0) {
  const auto& a = m.arch;
  const std::size_t N = fc.batch;
  if (labels.size() != N) throw DimensionError("label count does not match batch");
  CnnModel g = CnnModel::zeros(a);

  Eigen::MatrixXd d_logits = fc.probs;
  for (std::size_t n = 0; n < N; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= a.classes) throw PreconditionError("label out of range");
    d_logits(labels[n], static_cast<Eigen::Index>(n)) -= 1.0;
  }
  d_logits *= loss_scale / static_cast<double>(N);

  MatMap(g.fc2.weight.data(), static_cast<Eigen::Index>(a.classes), static_cast<Eigen::Index>(a.hidden)).noalias() =
      d_logits * fc.hidden.transpose();
  Eigen::Map<Eigen::VectorXd>(g.fc2.bias.data(), static_cast<Eigen::Index>(a.classes)) = d_logits.rowwise().sum();

  Eigen::MatrixXd d_hidden = m.fc2.weight_matrix().transpose() * d_logits;
  d_hidden = (fc.hidden.array() > 0.0).select(d_hidden, 0.0);
  MatMap(g.fc1.weight.data(), static_cast<Eigen::Index>(a.hidden), static_cast<Eigen::Index>(a.flat_size())).noalias() =
      d_hidden * fc.flat.transpose();
  Eigen::Map<Eigen::VectorXd>(g.fc1.bias.data(), static_cast<Eigen::Index>(a.hidden)) = d_hidden.rowwise().sum();

  const Eigen::MatrixXd d_flat = m.fc1.weight_matrix().transpose() * d_hidden;
  FeatureMaps d_p2(N, a.conv2_channels, a.pool2_height(), a.width);
  const std::size_t plane = a.pool2_height() * a.width;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < a.conv2_channels; ++c)
      std::copy_n(d_flat.col(static_cast<Eigen::Index>(n)).data() + static_cast<std::ptrdiff_t>(c * plane), plane,
                  d_p2.data.begin() + static_cast<std::ptrdiff_t>(d_p2.offset(n, c, 0, 0)));

  FeatureMaps d_a2(N, a.conv2_channels, a.pool1_height(), a.width);
  detail::unpool(fc.p2, d_p2, d_a2);
  detail::relu_mask(fc.a2, d_a2);
  detail::conv_param_grads(d_a2, fc.cols2, g.conv2);

  const RowMat d_cols2 = m.conv2.weight_matrix().transpose() * d_a2.matrix();
  FeatureMaps d_p1(N, a.conv1_channels, a.pool1_height(), a.width);
  col2im(d_cols2, d_p1);

  FeatureMaps d_a1(N, a.conv1_channels, a.height, a.width);
  detail::unpool(fc.p1, d_p1, d_a1);
  detail::relu_mask(fc.a1, d_a1);
  detail::conv_param_grads(d_a1, fc.cols1, g.conv1);
  return g;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 42;
  double init_gain = 1.0;  // multiplies the He standard deviation
};

struct TrainHistory {
  double initial_loss = 0.0;       // mean loss over the training set before any update
  std::vector<double> epoch_loss;  // mean minibatch loss during each epoch
};

inline double dataset_loss(const CnnModel& m, std::span<const Vector> inputs, std::span<const int> labels,
                           std::size_t chunk = 256) {
  double total = 0.0;
  for (std::size_t s = 0; s < inputs.size(); s += chunk) {
    const std::size_t e = std::min(inputs.size(), s + chunk);
    std::vector<const Vector*> ptrs;
    for (std::size_t i = s; i < e; ++i) ptrs.push_back(&inputs[i]);
    const auto fc = forward_cached(m, pack_batch(ptrs, m.arch));
    total += cross_entropy(fc, labels.subspan(s, e - s)) * static_cast<double>(e - s);
  }
  return total / static_cast<double>(inputs.size());
}

/// Mini-batch SGD with classical momentum: v <- mu v - lr g; w <- w + v.
/// Shuffling for epoch e uses derive_seed(seed, e), so runs are bitwise
/// reproducible.
inline TrainHistory train(CnnModel& m, std::span<const Vector> inputs, std::span<const int> labels, const TrainConfig& cfg) {
  if (inputs.size() != labels.size()) throw DimensionError("input/label count mismatch");
  if (inputs.empty()) throw PreconditionError("cannot train on an empty set");
  if (cfg.batch_size == 0) throw PreconditionError("batch size must be positive");
  if (!(cfg.learning_rate >= 0.0) || !(cfg.momentum >= 0.0)) throw PreconditionError("learning rate and momentum must be >= 0");

  TrainHistory h;
  h.initial_loss = dataset_loss(m, inputs, labels);
  CnnModel velocity = CnnModel::zeros(m.arch);
  auto params = m.parameters();
  auto vel = velocity.parameters();

  std::vector<std::size_t> order(inputs.size());
  std::vector<const Vector*> ptrs;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, epoch + 1));
    shuffle(std::span<std::size_t>(order), rng);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      ptrs.clear();
      batch_labels.clear();
      for (std::size_t i = s; i < e; ++i) {
        ptrs.push_back(&inputs[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const auto fc = forward_cached(m, pack_batch(ptrs, m.arch));
      loss_sum += cross_entropy(fc, batch_labels) * static_cast<double>(e - s);
      const CnnModel g = backward(m, fc, batch_labels);
      const auto grads = g.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        Vector& w = *params[p];
        Vector& v = *vel[p];
        const Vector& gr = *grads[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = cfg.momentum * v[i] - cfg.learning_rate * gr[i];
          w[i] += v[i];
        }
      }
    }
    h.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return h;
}

inline int predict(const CnnModel& m, const Vector& input) {
  const auto p = forward(m, std::span<const Vector>(&input, 1)).front();
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
  std::size_t worst_parameter = 0;  // index in parameters() flattening order
  bool all_finite = true;

  bool passes(double tolerance) const noexcept { return all_finite && max_relative_error < tolerance; }
};

using GradientFn = std::function<CnnModel(const CnnModel&, const FeatureMaps&, std::span<const int>)>;

inline CnnModel analytic_gradient(const CnnModel& m, const FeatureMaps& x, std::span<const int> labels) {
  return backward(m, forward_cached(m, x), labels);
}

/// Compares `gradient` against central differences (step h) on every
/// parameter. Relative error is |a - n| / max(|a|, |n|, 1e-6).
inline GradCheckReport grad_check(const CnnModel& model, const FeatureMaps& x, std::span<const int> labels, double h = 1e-5,
                                  const GradientFn& gradient = analytic_gradient) {
  GradCheckReport r;
  const CnnModel g = gradient(model, x, labels);
  CnnModel probe = model;
  auto params = probe.parameters();
  const auto grads = g.parameters();
  std::size_t flat = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Vector& w = *params[p];
    for (std::size_t i = 0; i < w.size(); ++i, ++flat) {
      const double keep = w[i];
      w[i] = keep + h;
      const double up = cross_entropy(forward_cached(probe, x), labels);
      w[i] = keep - h;
      const double down = cross_entropy(forward_cached(probe, x), labels);
      w[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = (*grads[p])[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) r.all_finite = false;
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      if (rel > r.max_relative_error) {
        r.max_relative_error = rel;
        r.worst_parameter = flat;
      }
      ++r.parameters_checked;
    }
  }
  return r;
}

/// The miniature network used for gradient checks: 2 channels, 6x3 input.
inline CnnArch miniature_arch() { return CnnArch{2, 6, 3, 3, 4, 5, 3}; }

}  // namespace csisense::cnn
