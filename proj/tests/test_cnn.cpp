#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace csisense;
using namespace csisense::cnn;
using namespace testing_support;

namespace {

FeatureMaps random_maps(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  FeatureMaps m(n, c, h, w);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

// Direct nested-loop cross-correlation with zero padding.
FeatureMaps naive_conv(ConvLayer& layer, const FeatureMaps& in) {
  FeatureMaps out(in.batch, layer.out_channels, in.height, in.width);
  for (std::size_t n = 0; n < in.batch; ++n)
    for (std::size_t o = 0; o < layer.out_channels; ++o)
      for (std::size_t y = 0; y < in.height; ++y)
        for (std::size_t x = 0; x < in.width; ++x) {
          double s = layer.bias[o];
          for (std::size_t c = 0; c < layer.in_channels; ++c)
            for (int i = -1; i <= 1; ++i)
              for (int j = -1; j <= 1; ++j) {
                const long yy = static_cast<long>(y) + i, xx = static_cast<long>(x) + j;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(in.height) || xx >= static_cast<long>(in.width)) continue;
                s += in.at(n, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) *
                     layer.w(o, c, static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
              }
          out.at(n, o, y, x) = s;
        }
  return out;
}

// Three classes that differ by which input row band is bright.
void banded_classes(const CnnArch& a, std::size_t per_class, std::uint64_t seed, std::vector<Vector>& xs, std::vector<int>& ys) {
  Rng rng(seed);
  for (std::size_t i = 0; i < per_class; ++i)
    for (int c = 0; c < 3; ++c) {
      Vector v(a.input_size());
      for (std::size_t ch = 0; ch < a.in_channels; ++ch)
        for (std::size_t y = 0; y < a.height; ++y)
          for (std::size_t x = 0; x < a.width; ++x) {
            const bool lit = y / 2 == static_cast<std::size_t>(c);
            v[(ch * a.height + y) * a.width + x] = (lit ? 2.0 : 0.0) + rng.normal(0.0, 0.3);
          }
      xs.push_back(std::move(v));
      ys.push_back(c);
    }
}

}  // namespace

TEST(Conv, MatchesNaiveReference) {
  Rng rng(1);
  ConvLayer layer(3, 4);
  for (auto& w : layer.weight) w = rng.normal();
  for (auto& b : layer.bias) b = rng.normal();
  const auto in = random_maps(rng, 2, 3, 4, 5);
  const auto fast = conv_forward(layer, in);
  const auto slow = naive_conv(layer, in);
  ASSERT_EQ(fast.data.size(), slow.data.size());
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 5; ++x) EXPECT_NEAR(fast.at(n, o, y, x), slow.at(n, o, y, x), 1e-12);
}

TEST(Conv, IdentityAndOnesKernels) {
  Rng rng(2);
  const auto in = random_maps(rng, 1, 1, 5, 4);
  ConvLayer id(1, 1);
  id.w(0, 0, 1, 1) = 1.0;
  EXPECT_EQ(conv_forward(id, in).data, in.data);

  FeatureMaps flat(1, 1, 5, 4);
  std::fill(flat.data.begin(), flat.data.end(), 1.5);
  ConvLayer ones(1, 1);
  std::fill(ones.weight.begin(), ones.weight.end(), 1.0);
  ones.bias[0] = 0.25;
  const auto out = conv_forward(ones, flat);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 2, 1), 9.0 * 1.5 + 0.25);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 4.0 * 1.5 + 0.25);  // corner sees 4 pixels
  EXPECT_EQ(out.height, 5u);
  EXPECT_EQ(out.width, 4u);
  EXPECT_THROW(conv_forward(ConvLayer(2, 1), flat), DimensionError);
}

TEST(Pool, ValuesTiesAndFloor) {
  FeatureMaps in(1, 1, 4, 1);
  in.data = {1.0, 3.0, 2.0, 8.0};
  const auto p = maxpool_forward(in);
  EXPECT_EQ(p.maps.data, (Vector{3.0, 8.0}));
  EXPECT_EQ(p.argmax, (std::vector<std::uint32_t>{1, 3}));

  FeatureMaps flat(1, 1, 4, 1);
  flat.data = {2.0, 2.0, 2.0, 2.0};
  const auto q = maxpool_forward(flat);
  EXPECT_EQ(q.maps.data, (Vector{2.0, 2.0}));
  EXPECT_EQ(q.argmax, (std::vector<std::uint32_t>{0, 2}));

  EXPECT_EQ(maxpool_forward(FeatureMaps(1, 2, 15, 5)).maps.height, 7u);
}

TEST(Model, ShapeChainOfDefaultArchitecture) {
  const CnnArch a;
  EXPECT_EQ(a.input_size(), 1350u);
  EXPECT_EQ(a.pool1_height(), 15u);
  EXPECT_EQ(a.pool2_height(), 7u);
  EXPECT_EQ(a.flat_size(), 2240u);
  const auto m = CnnModel::he_init(a, 3);
  EXPECT_EQ(m.conv1.weight.size(), 32u * 9u * 9u);
  EXPECT_EQ(m.fc1.weight.size(), 2240u * 128u);
  EXPECT_EQ(m.fc2.weight.size(), 128u * 3u);
  Rng rng(4);
  Vector x(1350);
  for (auto& v : x) v = rng.uniform(0.0, 3.0);
  const auto p = forward(m, std::span<const Vector>(&x, 1));
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0][0] + p[0][1] + p[0][2], 1.0, 1e-12);
}

TEST(Forward, ZeroModelIsUniform) {
  const auto m = CnnModel::zeros(miniature_arch());
  Rng rng(5);
  std::vector<Vector> xs(4, Vector(miniature_arch().input_size()));
  for (auto& x : xs)
    for (auto& v : x) v = rng.normal(0.0, 10.0);
  for (const auto& p : forward(m, xs))
    for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Forward, ProbabilitiesAndIdenticalRows) {
  const auto a = miniature_arch();
  const auto m = CnnModel::he_init(a, 6);
  Rng rng(7);
  Vector x(a.input_size());
  for (auto& v : x) v = rng.normal();
  const std::vector<Vector> batch{x, x, x};
  const auto p = forward(m, batch);
  for (const auto& row : p) {
    EXPECT_EQ(row, p[0]);
    double s = 0.0;
    for (double v : row) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_THROW(forward(m, std::vector<Vector>{Vector(3)}), DimensionError);
}

TEST(Softmax, ShiftInvariant) {
  Eigen::MatrixXd l(3, 2);
  l << 1.0, 800.0, 2.0, 801.0, -1.0, 798.0;
  const auto p = softmax_columns(l);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(p(k, 0), p(k, 1), 1e-12);
  EXPECT_NEAR(p.col(0).sum(), 1.0, 1e-12);
}

TEST(Backward, OutputBiasGradientIsPMinusOneHot) {
  const auto a = miniature_arch();
  const auto m = CnnModel::he_init(a, 8);
  Rng rng(9);
  Vector x(a.input_size());
  for (auto& v : x) v = rng.normal();
  const Vector* ptr = &x;
  const auto fc = forward_cached(m, pack_batch(std::span<const Vector* const>(&ptr, 1), a));
  const std::vector<int> label{2};
  const auto g = backward(m, fc, label);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(g.fc2.bias[static_cast<std::size_t>(k)], fc.probs(k, 0) - (k == 2 ? 1.0 : 0.0), 1e-15);

  const auto g2 = backward(m, fc, label, 2.0);
  const auto p1 = g.parameters();
  const auto p2 = g2.parameters();
  for (std::size_t p = 0; p < p1.size(); ++p)
    for (std::size_t i = 0; i < p1[p]->size(); ++i) EXPECT_NEAR((*p2[p])[i], 2.0 * (*p1[p])[i], 1e-15 + 1e-13 * std::abs((*p1[p])[i]));
}

TEST(GradCheck, AllParametersAgreeWithFiniteDifferences) {
  const auto a = miniature_arch();
  const auto m = CnnModel::he_init(a, 10);
  Rng rng(11);
  const auto x = random_maps(rng, 3, a.in_channels, a.height, a.width);
  const std::vector<int> labels{0, 2, 1};
  const auto r = grad_check(m, x, labels);
  EXPECT_EQ(r.parameters_checked, m.parameter_count());
  EXPECT_TRUE(r.passes(1e-4)) << "max relative error " << r.max_relative_error << " at " << r.worst_parameter;
}

TEST(GradCheck, CatchesASignBug) {
  const auto a = miniature_arch();
  const auto m = CnnModel::he_init(a, 12);
  Rng rng(13);
  const auto x = random_maps(rng, 2, a.in_channels, a.height, a.width);
  const std::vector<int> labels{1, 0};
  const auto buggy = [](const CnnModel& model, const FeatureMaps& in, std::span<const int> l) {
    auto g = analytic_gradient(model, in, l);
    for (auto& v : g.conv2.weight) v = -v;
    return g;
  };
  EXPECT_FALSE(grad_check(m, x, labels, 1e-5, buggy).passes(1e-4));
}

TEST(GradCheck, ZeroInputGivesFiniteGradients) {
  const auto a = miniature_arch();
  const auto m = CnnModel::he_init(a, 14);
  const FeatureMaps x(2, a.in_channels, a.height, a.width);
  const std::vector<int> labels{0, 1};
  // Every ReLU sits exactly on its kink here, so only finiteness is asked.
  EXPECT_TRUE(grad_check(m, x, labels).all_finite);
  auto shifted = m;
  for (auto* b : {&shifted.conv1.bias, &shifted.conv2.bias, &shifted.fc1.bias})
    for (std::size_t i = 0; i < b->size(); ++i) (*b)[i] = 0.1 + 0.01 * static_cast<double>(i);
  const auto r = grad_check(shifted, x, labels);
  EXPECT_TRUE(r.passes(1e-4)) << r.max_relative_error;
}

TEST(Train, ZeroLearningRateLeavesWeights) {
  const CnnArch a{2, 6, 3, 4, 4, 8, 3};
  std::vector<Vector> xs;
  std::vector<int> ys;
  banded_classes(a, 10, 15, xs, ys);
  auto m = CnnModel::he_init(a, 16);
  const auto before = m;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  train(m, xs, ys, cfg);
  EXPECT_EQ(m, before);
}

TEST(Train, LearnsSeparatedClassesDeterministically) {
  const CnnArch a{2, 6, 3, 4, 4, 8, 3};
  std::vector<Vector> xs;
  std::vector<int> ys;
  banded_classes(a, 50, 17, xs, ys);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.seed = 42;
  auto m = CnnModel::he_init(a, 42);
  const auto h = train(m, xs, ys, cfg);
  ASSERT_EQ(h.epoch_loss.size(), 30u);
  EXPECT_LT(h.epoch_loss.front(), h.initial_loss);
  std::vector<int> pred;
  for (const auto& x : xs) pred.push_back(predict(m, x));
  EXPECT_GE(accuracy_of(ys, pred), 0.99);

  auto again = CnnModel::he_init(a, 42);
  train(again, xs, ys, cfg);
  EXPECT_EQ(m, again);
}

TEST(Train, Errors) {
  auto m = CnnModel::zeros(miniature_arch());
  std::vector<Vector> xs(2, Vector(miniature_arch().input_size()));
  std::vector<int> ys{0};
  EXPECT_THROW(train(m, xs, ys, {}), DimensionError);
  TrainConfig zero_batch;
  zero_batch.batch_size = 0;
  ys.push_back(1);
  EXPECT_THROW(train(m, xs, ys, zero_batch), PreconditionError);
  EXPECT_THROW(CnnModel::zeros(CnnArch{2, 3, 3, 3, 4, 5, 3}), PreconditionError);
}
