#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <list>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csisense/error.hpp"
#include "csisense/features.hpp"
#include "csisense/parallel.hpp"

namespace csisense::svm {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

enum class KernelKind : std::uint8_t { Linear = 0, Polynomial = 1, Rbf = 2 };

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double poly_c = 0.0;  // offset c in (x.y + c)^d
  int poly_d = 3;       // degree d
  double rbf_gamma = 1.0;

  static KernelSpec linear() { return {}; }
  static KernelSpec polynomial(double c, int d) { return {KernelKind::Polynomial, c, d, 1.0}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, 0.0, 3, gamma}; }

  void validate() const {
    if (kind == KernelKind::Rbf && !(rbf_gamma > 0.0 && std::isfinite(rbf_gamma)))
      throw PreconditionError("RBF gamma must be positive and finite");
    if (kind == KernelKind::Polynomial && poly_d < 1) throw PreconditionError("polynomial degree must be >= 1");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double dot(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionError("kernel arguments differ in length: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  switch (spec.kind) {
    case KernelKind::Linear: return dot(x, y);
    case KernelKind::Polynomial: return std::pow(dot(x, y) + spec.poly_c, spec.poly_d);
    case KernelKind::Rbf: return std::exp(-spec.rbf_gamma * squared_distance(x, y));
  }
  return 0.0;
}

/// gamma = 1 / (dims * variance of all training feature entries).
inline double scale_gamma(std::span<const Vector> xs) {
  if (xs.empty() || xs.front().empty()) throw PreconditionError("scale_gamma needs data");
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs)
    for (double v : x) {
      sum += v;
      sq += v * v;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 1e-12);
  return 1.0 / (static_cast<double>(xs.front().size()) * var);
}

// ---------------------------------------------------------------------------
// Kernel matrix access for the solver. Holds the full Gram matrix when the
// problem is small enough, otherwise a bounded LRU cache of rows.
// ---------------------------------------------------------------------------

class KernelMatrix {
 public:
  KernelMatrix(const KernelSpec& spec, std::span<const Vector> x, std::size_t full_limit, std::size_t cache_rows)
      : spec_(spec), x_(x), n_(x.size()), diag_(x.size()) {
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = kernel_eval(spec_, x_[i], x_[i]);
    if (n_ <= full_limit) {
      build_full();
    } else {
      capacity_ = std::max<std::size_t>(cache_rows, 2);
    }
  }

  std::size_t size() const noexcept { return n_; }
  double diag(std::size_t i) const noexcept { return diag_[i]; }
  bool is_full() const noexcept { return !full_.empty() || n_ == 0; }

  /// Row i of K. The pointer stays valid until two further row() calls.
  const double* row(std::size_t i) {
    if (!full_.empty()) return full_.data() + i * n_;
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second.data();
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Vector r(n_);
    for (std::size_t j = 0; j < n_; ++j) r[j] = kernel_eval(spec_, x_[i], x_[j]);
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    return lru_.front().second.data();
  }

 private:
  void build_full() {
    if (n_ == 0) return;
    const std::size_t d = x_.front().size();
    Eigen::MatrixXd X(d, n_);
    for (std::size_t i = 0; i < n_; ++i) X.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(x_[i].data(), static_cast<Eigen::Index>(d));
    Eigen::MatrixXd G = X.transpose() * X;
    full_.resize(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double g = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        double k = 0.0;
        switch (spec_.kind) {
          case KernelKind::Linear: k = g; break;
          case KernelKind::Polynomial: k = std::pow(g + spec_.poly_c, spec_.poly_d); break;
          case KernelKind::Rbf: {
            const double d2 = i == j ? 0.0 : std::max(0.0, G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +
                                                                 G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) - 2.0 * g);
            k = std::exp(-spec_.rbf_gamma * d2);
            break;
          }
        }
        full_[i * n_ + j] = k;
      }
    }
    // Symmetrize so row(i)[j] == row(j)[i] bitwise.
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) full_[j * n_ + i] = full_[i * n_ + j];
  }

  KernelSpec spec_;
  std::span<const Vector> x_;
  std::size_t n_;
  Vector diag_;
  Vector full_;
  std::size_t capacity_ = 0;
  std::list<std::pair<std::size_t, Vector>> lru_;
  std::unordered_map<std::size_t, std::list<std::pair<std::size_t, Vector>>::iterator> index_;
};

// ---------------------------------------------------------------------------
// Binary soft-margin SVM trained by SMO
// ---------------------------------------------------------------------------

struct SmoParams {
  double C = 1.0;
  double tol = 1e-3;
  int max_passes = 200;
  std::size_t full_gram_limit = 6000;
  std::size_t cache_rows = 2000;
};

/// Raw dual solution over all training points.
struct SmoSolution {
  Vector alpha;
  double bias = 0.0;
  double objective = 0.0;  // dual objective sum(alpha) - 1/2 alpha' Q alpha
  std::size_t iterations = 0;
  bool converged = false;
};

struct BinarySvm {
  KernelSpec kernel;
  double C = 1.0;
  std::vector<Vector> support;
  Vector coef;  // alpha_i * y_i per support vector
  double bias = 0.0;

  double decision_value(std::span<const double> x) const {
    double s = bias;
    for (std::size_t i = 0; i < support.size(); ++i) s += coef[i] * kernel_eval(kernel, support[i], x);
    return s;
  }
};

namespace detail {

inline void check_binary(std::span<const Vector> x, std::span<const int> y) {
  if (x.size() != y.size()) throw DimensionError("feature/label count mismatch");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw PreconditionError("binary SVM labels must be -1 or +1");
  }
  if (!pos || !neg) throw DegenerateDataError("binary SVM needs both classes present");
  const std::size_t d = x.front().size();
  for (const auto& v : x) {
    if (v.size() != d) throw DimensionError("ragged feature vectors");
    for (double e : v)
      if (!std::isfinite(e)) throw DataError("non-finite feature value");
  }
}

}  // namespace detail

/// SMO with maximal-violating-pair working-set selection using second-order
/// gain. Stops once max_{I_up}(-yG) - min_{I_low}(-yG) < tol, which bounds
/// every point's KKT violation by tol, or after max_passes * n pair updates.
inline SmoSolution solve_smo(std::span<const Vector> x, std::span<const int> y, const KernelSpec& spec, const SmoParams& p) {
  spec.validate();
  if (!(p.C > 0.0)) throw PreconditionError("C must be positive");
  if (!(p.tol > 0.0)) throw PreconditionError("tol must be positive");
  detail::check_binary(x, y);

  const std::size_t n = x.size();
  KernelMatrix K(spec, x, p.full_gram_limit, p.cache_rows);
  constexpr double tau = 1e-12;
  const double C = p.C;

  Vector alpha(n, 0.0);
  Vector G(n, -1.0);  // gradient of 1/2 a'Qa - e'a
  auto yd = [&](std::size_t i) { return static_cast<double>(y[i]); };
  auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C); };

  SmoSolution sol;
  const std::size_t max_iter = static_cast<std::size_t>(std::max(p.max_passes, 1)) * std::max<std::size_t>(n, 1);
  double m_up = 0.0, m_low = 0.0;

  for (;;) {
    // First index: maximal violator in I_up.
    std::size_t i = n;
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -yd(t) * G[t];
      if (in_up(t) && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low(t) && v < m_low) m_low = v;
    }
    if (i == n || m_up - m_low < p.tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= max_iter) break;

    // Second index: best second-order gain among I_low violators.
    const double* Ki = K.row(i);
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -yd(t) * G[t];
      const double b = m_up - v;
      if (b <= 0.0) continue;
      double a = K.diag(i) + K.diag(t) - 2.0 * Ki[t];
      if (a <= 0.0) a = tau;
      const double gain = -(b * b) / a;
      if (gain < best) {
        best = gain;
        j = t;
      }
    }
    if (j == n) {
      sol.converged = true;
      break;
    }
    const double* Kj = K.row(j);
    Ki = K.row(i);

    const double old_ai = alpha[i], old_aj = alpha[j];
    double quad = K.diag(i) + K.diag(j) - 2.0 * Ki[j];
    if (quad <= 0.0) quad = tau;

    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += yd(t) * (yd(i) * Ki[t] * dai + yd(j) * Kj[t] * daj);
    ++sol.iterations;
  }

  // Bias: average of -yG over free vectors, else the middle of the
  // feasible interval.
  double free_sum = 0.0;
  std::size_t free_n = 0;
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double v = -yd(t) * G[t];
    if (alpha[t] > 0.0 && alpha[t] < C) {
      free_sum += v;
      ++free_n;
    } else if ((alpha[t] >= C && y[t] == -1) || (alpha[t] <= 0.0 && y[t] == 1)) {
      ub = std::min(ub, v);
    } else {
      lb = std::max(lb, v);
    }
  }
  double b = free_n > 0 ? free_sum / static_cast<double>(free_n) : 0.5 * (ub + lb);
  if (!std::isfinite(b)) b = 0.5 * (m_up + m_low);
  if (std::isfinite(m_up) && std::isfinite(m_low)) b = std::clamp(b, std::min(m_up, m_low), std::max(m_up, m_low));
  sol.bias = b;

  // With G = Qa - e: sum(a) - 1/2 a'Qa = sum a_t (1 - (G_t + 1) / 2).
  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (1.0 - 0.5 * (G[t] + 1.0));
  sol.objective = obj;
  sol.alpha = std::move(alpha);
  return sol;
}

inline BinarySvm to_machine(std::span<const Vector> x, std::span<const int> y, const KernelSpec& spec, double C,
                            const SmoSolution& sol) {
  BinarySvm m;
  m.kernel = spec;
  m.C = C;
  m.bias = sol.bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (sol.alpha[i] > 0.0) {
      m.support.push_back(x[i]);
      m.coef.push_back(sol.alpha[i] * static_cast<double>(y[i]));
    }
  }
  return m;
}

inline BinarySvm train_binary(std::span<const Vector> x, std::span<const int> y, const KernelSpec& spec,
                              const SmoParams& p = {}) {
  const auto sol = solve_smo(x, y, spec, p);
  return to_machine(x, y, spec, p.C, sol);
}

/// Largest KKT violation of a trained machine over its training data:
/// 0 < a < C needs y f = 1, a = 0 needs y f >= 1, a = C needs y f <= 1.
inline double max_kkt_violation(std::span<const Vector> x, std::span<const int> y, const KernelSpec& spec, double C,
                                const SmoSolution& sol) {
  const auto m = to_machine(x, y, spec, C, sol);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double margin = static_cast<double>(y[i]) * m.decision_value(x[i]) - 1.0;
    const double a = sol.alpha[i];
    double v = 0.0;
    if (a <= 0.0) v = std::max(0.0, -margin);
    else if (a >= C) v = std::max(0.0, margin);
    else v = std::abs(margin);
    worst = std::max(worst, v);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// One-vs-one multiclass
// ---------------------------------------------------------------------------

struct MulticlassSvm {
  int num_classes = 0;
  std::vector<std::pair<int, int>> pairs;  // (a, b), a < b; +1 side is a
  std::vector<BinarySvm> machines;

  Vector decision_values(std::span<const double> x) const {
    Vector d(machines.size());
    for (std::size_t m = 0; m < machines.size(); ++m) d[m] = machines[m].decision_value(x);
    return d;
  }
};

inline std::vector<std::pair<int, int>> ovo_pairs(int k) {
  std::vector<std::pair<int, int>> p;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) p.emplace_back(a, b);
  return p;
}

/// Majority vote over pairwise machines. decision > 0 votes for the first
/// class of the pair, otherwise the second. Ties go to the class with the
/// largest summed |decision| over the votes it won, then the lowest index.
inline int vote_ovo(int num_classes, std::span<const std::pair<int, int>> pairs, std::span<const double> decisions) {
  std::vector<int> votes(static_cast<std::size_t>(num_classes), 0);
  Vector margin(static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const int winner = decisions[m] > 0.0 ? pairs[m].first : pairs[m].second;
    ++votes[static_cast<std::size_t>(winner)];
    margin[static_cast<std::size_t>(winner)] += std::abs(decisions[m]);
  }
  int best = 0;
  for (int c = 1; c < num_classes; ++c) {
    const auto cu = static_cast<std::size_t>(c), bu = static_cast<std::size_t>(best);
    if (votes[cu] > votes[bu] || (votes[cu] == votes[bu] && margin[cu] > margin[bu])) best = c;
  }
  return best;
}

inline MulticlassSvm train_multiclass(const LabeledSet& data, int num_classes, const KernelSpec& spec,
                                      const SmoParams& p = {}, unsigned threads = 1) {
  if (data.x.size() != data.y.size()) throw DimensionError("feature/label count mismatch");
  MulticlassSvm model;
  model.num_classes = num_classes;
  model.pairs = ovo_pairs(num_classes);
  model.machines.resize(model.pairs.size());
  parallel_for(model.pairs.size(), threads, [&](std::size_t m) {
    const auto [a, b] = model.pairs[m];
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.y[i] == a || data.y[i] == b) {
        xs.push_back(data.x[i]);
        ys.push_back(data.y[i] == a ? 1 : -1);
      }
    }
    model.machines[m] = train_binary(xs, ys, spec, p);
  });
  return model;
}

inline int predict_multiclass(const MulticlassSvm& m, std::span<const double> x) {
  const auto d = m.decision_values(x);
  return vote_ovo(m.num_classes, m.pairs, d);
}

}  // namespace csisense::svm
