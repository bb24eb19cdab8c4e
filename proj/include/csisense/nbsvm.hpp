#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "csisense/error.hpp"
#include "csisense/features.hpp"
#include "csisense/svm.hpp"

namespace csisense::nbsvm {

/// Per-class, per-feature independent Gaussians.
struct GaussianNb {
  Vector priors;                   // P(C_k)
  std::vector<Vector> means;       // [class][feature]
  std::vector<Vector> variances;   // [class][feature], all >= var_floor
  double var_floor = 0.0;

  std::size_t num_classes() const noexcept { return priors.size(); }
  std::size_t dims() const noexcept { return means.empty() ? 0 : means.front().size(); }
};

inline constexpr double kVarFloorFactor = 1e-9;

inline double log_normal_pdf(double x, double mean, double var) noexcept {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

/// Maximum-likelihood fit. Variances are floored at 1e-9 times the largest
/// per-feature variance of the whole training set.
inline GaussianNb fit_nb(const LabeledSet& data, int num_classes) {
  if (data.x.size() != data.y.size()) throw DimensionError("feature/label count mismatch");
  const std::size_t d = data.dims();
  const auto K = static_cast<std::size_t>(num_classes);
  GaussianNb nb;
  nb.priors.assign(K, 0.0);
  nb.means.assign(K, Vector(d, 0.0));
  nb.variances.assign(K, Vector(d, 0.0));
  std::vector<std::size_t> counts(K, 0);
  Vector all_mean(d, 0.0), all_var(d, 0.0);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = data.y[i];
    if (c < 0 || c >= num_classes) throw PreconditionError("label out of range");
    if (data.x[i].size() != d) throw DimensionError("ragged feature vectors");
    ++counts[static_cast<std::size_t>(c)];
    for (std::size_t f = 0; f < d; ++f) {
      const double v = data.x[i][f];
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
      nb.means[static_cast<std::size_t>(c)][f] += v;
      all_mean[f] += v;
    }
  }
  for (std::size_t c = 0; c < K; ++c) {
    if (counts[c] < 2)
      throw DegenerateDataError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) + " samples; NB needs >= 2");
    for (auto& m : nb.means[c]) m /= static_cast<double>(counts[c]);
    nb.priors[c] = static_cast<double>(counts[c]) / static_cast<double>(data.size());
  }
  for (auto& m : all_mean) m /= static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(data.y[i]);
    for (std::size_t f = 0; f < d; ++f) {
      const double dc = data.x[i][f] - nb.means[c][f];
      const double da = data.x[i][f] - all_mean[f];
      nb.variances[c][f] += dc * dc;
      all_var[f] += da * da;
    }
  }
  double max_var = 0.0;
  for (auto v : all_var) max_var = std::max(max_var, v / static_cast<double>(data.size()));
  nb.var_floor = max_var > 0.0 ? kVarFloorFactor * max_var : kVarFloorFactor;
  for (std::size_t c = 0; c < K; ++c)
    for (auto& v : nb.variances[c]) v = std::max(v / static_cast<double>(counts[c]), nb.var_floor);
  return nb;
}

/// Unnormalized log P(C_k) + sum_f log N(x_f; mu, var) per class.
inline Vector nb_log_scores(const GaussianNb& nb, std::span<const double> x) {
  if (x.size() != nb.dims()) throw DimensionError("NB input has wrong dimension");
  Vector s(nb.num_classes());
  for (std::size_t c = 0; c < nb.num_classes(); ++c) {
    double acc = std::log(nb.priors[c]);
    for (std::size_t f = 0; f < x.size(); ++f) acc += log_normal_pdf(x[f], nb.means[c][f], nb.variances[c][f]);
    s[c] = acc;
  }
  return s;
}

/// Normalizes log scores into probabilities with log-sum-exp.
inline Vector softmax_log(std::span<const double> log_scores) {
  const double mx = *std::max_element(log_scores.begin(), log_scores.end());
  double total = 0.0;
  Vector p(log_scores.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_scores[i] - mx);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

/// P(C_k | x) = P(x | C_k) P(C_k) / P(x), evaluated in log space.
inline Vector nb_posterior(const GaussianNb& nb, std::span<const double> x) {
  const auto s = nb_log_scores(nb, x);
  return softmax_log(s);
}

/// How NB output is handed to the SVM stage.
enum class TransformMode : std::uint8_t {
  PerFeatureLikelihood = 0,  // 3*d: per-feature class log-likelihoods, max-shifted to 0
  Posterior = 1,             // K: class posteriors
  Identity = 2,              // d: features unchanged (plain linear SVM)
};

inline std::size_t transformed_size(TransformMode mode, std::size_t dims, std::size_t classes) {
  switch (mode) {
    case TransformMode::PerFeatureLikelihood: return dims * classes;
    case TransformMode::Posterior: return classes;
    case TransformMode::Identity: return dims;
  }
  return 0;
}

/// Per-feature class log-likelihoods z[f*K + k] = log N(x_f; mu_fk, var_fk),
/// shifted per feature so that max_k z[f*K + k] = 0.
inline Vector nb_transform(const GaussianNb& nb, std::span<const double> x) {
  if (x.size() != nb.dims()) throw DimensionError("NB input has wrong dimension");
  const std::size_t K = nb.num_classes();
  Vector z(x.size() * K);
  for (std::size_t f = 0; f < x.size(); ++f) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double v = log_normal_pdf(x[f], nb.means[k][f], nb.variances[k][f]);
      z[f * K + k] = v;
      mx = std::max(mx, v);
    }
    for (std::size_t k = 0; k < K; ++k) z[f * K + k] -= mx;
  }
  return z;
}

inline Vector apply_transform(const GaussianNb& nb, TransformMode mode, std::span<const double> x) {
  switch (mode) {
    case TransformMode::PerFeatureLikelihood: return nb_transform(nb, x);
    case TransformMode::Posterior: return nb_posterior(nb, x);
    case TransformMode::Identity: break;
  }
  if (x.size() != nb.dims()) throw DimensionError("NB input has wrong dimension");
  return Vector(x.begin(), x.end());
}

struct NbSvmModel {
  GaussianNb nb;
  TransformMode mode = TransformMode::PerFeatureLikelihood;
  svm::MulticlassSvm svm;
};

struct NbSvmParams {
  TransformMode mode = TransformMode::PerFeatureLikelihood;
  svm::SmoParams smo{};
  unsigned threads = 1;
};

/// Fit NB, push every training vector through the NB transform, then train a
/// one-vs-one linear SVM on the transformed vectors.
inline NbSvmModel fit_nbsvm(const LabeledSet& data, int num_classes, const NbSvmParams& p = {}) {
  NbSvmModel m;
  m.mode = p.mode;
  m.nb = fit_nb(data, num_classes);
  LabeledSet t;
  t.y = data.y;
  t.x.reserve(data.size());
  for (const auto& x : data.x) t.x.push_back(apply_transform(m.nb, m.mode, x));
  m.svm = svm::train_multiclass(t, num_classes, svm::KernelSpec::linear(), p.smo, p.threads);
  return m;
}

inline int predict_nbsvm(const NbSvmModel& m, std::span<const double> x) {
  const auto z = apply_transform(m.nb, m.mode, x);
  return svm::predict_multiclass(m.svm, z);
}

}  // namespace csisense::nbsvm
