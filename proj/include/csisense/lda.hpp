#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csisense/error.hpp"
#include "csisense/features.hpp"

namespace csisense::lda {

/// Shared-covariance Gaussian discriminant. For each class c:
///   delta_c(x) = w_c' x + w0_c,  w_c = S^-1 mu_c,
///   w0_c = -1/2 mu_c' S^-1 mu_c + log(prior_c)
/// For two classes w_1 - w_2 = S^-1 (mu_1 - mu_2), the Fisher direction.
struct LdaModel {
  std::vector<Vector> means;
  Eigen::MatrixXd scatter;  // pooled within-class covariance, ridge included
  std::vector<Vector> weights;
  Vector biases;
  Vector priors;

  std::size_t num_classes() const noexcept { return means.size(); }
  std::size_t dims() const noexcept { return means.empty() ? 0 : means.front().size(); }

  Vector discriminants(std::span<const double> x) const {
    if (x.size() != dims()) throw DimensionError("LDA input has wrong dimension");
    Vector d(num_classes());
    for (std::size_t c = 0; c < num_classes(); ++c) {
      double s = biases[c];
      for (std::size_t i = 0; i < x.size(); ++i) s += weights[c][i] * x[i];
      d[c] = s;
    }
    return d;
  }
};

inline constexpr double kDefaultRidge = 1e-6;

/// Fits class means, the pooled within-class covariance
///   S = sum_c sum_{i in c} (x_i - mu_c)(x_i - mu_c)' / (n - K),
/// adds ridge * trace(S)/d * I, and solves S w_c = mu_c by Cholesky.
inline LdaModel fit_lda(const LabeledSet& data, int num_classes, double ridge = kDefaultRidge) {
  if (data.x.size() != data.y.size()) throw DimensionError("feature/label count mismatch");
  if (num_classes < 2) throw DegenerateDataError("LDA needs at least two classes");
  const std::size_t d = data.dims();
  const auto K = static_cast<std::size_t>(num_classes);

  std::vector<std::size_t> counts(K, 0);
  std::vector<Eigen::VectorXd> mu(K, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.x[i];
    if (x.size() != d) throw DimensionError("ragged feature vectors");
    for (double v : x)
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    const int c = data.y[i];
    if (c < 0 || c >= num_classes) throw PreconditionError("label out of range");
    ++counts[static_cast<std::size_t>(c)];
    mu[static_cast<std::size_t>(c)] += Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(d));
  }
  for (std::size_t c = 0; c < K; ++c) {
    if (counts[c] < 2)
      throw DegenerateDataError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) + " samples; LDA needs >= 2");
    mu[c] /= static_cast<double>(counts[c]);
  }

  // Centered data matrix, one column per sample; S = Z Z' / (n - K).
  const auto n = data.size();
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    Z.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(data.x[i].data(), static_cast<Eigen::Index>(d)) - mu[static_cast<std::size_t>(data.y[i])];
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  S.selfadjointView<Eigen::Lower>().rankUpdate(Z, 1.0 / static_cast<double>(n - K));
  S = S.selfadjointView<Eigen::Lower>();

  const double trace = S.trace();
  double shift = ridge * trace / static_cast<double>(d);
  if (!(shift > 0.0)) shift = ridge > 0.0 ? ridge : 0.0;
  S.diagonal().array() += shift;

  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw DegenerateDataError("pooled scatter is not positive definite; increase ridge");

  LdaModel m;
  m.scatter = S;
  for (std::size_t c = 0; c < K; ++c) {
    const Eigen::VectorXd w = llt.solve(mu[c]);
    m.means.emplace_back(mu[c].data(), mu[c].data() + d);
    m.weights.emplace_back(w.data(), w.data() + d);
    const double prior = static_cast<double>(counts[c]) / static_cast<double>(n);
    m.priors.push_back(prior);
    m.biases.push_back(-0.5 * mu[c].dot(w) + std::log(prior));
  }
  return m;
}

inline constexpr double kTieTolerance = 1e-9;

/// argmax of the discriminants. Scores within kTieTolerance (relative to
/// their magnitude) count as tied, and ties go to the lowest class index.
inline int predict_lda(const LdaModel& m, std::span<const double> x) {
  const auto d = m.discriminants(x);
  int best = 0;
  for (std::size_t c = 1; c < d.size(); ++c) {
    const double cur = d[static_cast<std::size_t>(best)];
    if (d[c] > cur + kTieTolerance * std::max(1.0, std::abs(cur))) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace csisense::lda
