#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "csisense/csi_data.hpp"
#include "csisense/error.hpp"

namespace csisense {

using Vector = std::vector<double>;

/// Labelled real vectors with class indices in [0, K). This is what every
/// classical learner consumes; CSI samples are turned into it by an
/// extractor.
struct LabeledSet {
  std::vector<Vector> x;
  std::vector<int> y;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t dims() const noexcept { return x.empty() ? 0 : x.front().size(); }
};

// ---------------------------------------------------------------------------
// CNN input: amplitude only, layout [pair][subcarrier][time].
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCnnInputSize = kAntennaPairs * kSubcarriers * kTimeSlots;

using CnnInput = std::array<double, kCnnInputSize>;

constexpr std::size_t cnn_index(std::size_t pair, std::size_t k, std::size_t t) noexcept {
  return (pair * kSubcarriers + k) * kTimeSlots + t;
}

/// (time, subcarrier, tx, rx) amplitudes -> [tx*3+rx][subcarrier][time].
/// The reshape to (5,30,9) and the transpose to (9,30,5) are fused.
inline CnnInput to_cnn_input(const CsiSample& s) noexcept {
  CnnInput out{};
  for (std::size_t t = 0; t < kTimeSlots; ++t)
    for (std::size_t k = 0; k < kSubcarriers; ++k)
      for (std::size_t tx = 0; tx < kTxAntennas; ++tx)
        for (std::size_t rx = 0; rx < kRxAntennas; ++rx)
          out[cnn_index(tx * kRxAntennas + rx, k, t)] = s.amplitude(t, k, tx, rx);
  return out;
}

// ---------------------------------------------------------------------------
// Classical feature vectors
// ---------------------------------------------------------------------------

enum class FeatureKind : std::uint8_t {
  MeanAmplitude = 0,  // 270-d: per (subcarrier, pair) amplitude averaged over time
  Raw = 1,            // 2700-d: full tensor, phase included
};

inline constexpr std::size_t kMeanFeatureSize = kSubcarriers * kAntennaPairs;

constexpr std::size_t feature_size(FeatureKind kind) noexcept {
  return kind == FeatureKind::Raw ? kTensorSize : kMeanFeatureSize;
}

struct FeatureVector {
  Vector values;
  FeatureKind kind = FeatureKind::MeanAmplitude;
};

/// feature[k*9 + p] = mean over time slots of amplitude(t, k, pair p).
inline FeatureVector extract_classical(const CsiSample& s) {
  FeatureVector f{Vector(kMeanFeatureSize, 0.0), FeatureKind::MeanAmplitude};
  for (std::size_t k = 0; k < kSubcarriers; ++k)
    for (std::size_t tx = 0; tx < kTxAntennas; ++tx)
      for (std::size_t rx = 0; rx < kRxAntennas; ++rx) {
        double sum = 0.0;
        for (std::size_t t = 0; t < kTimeSlots; ++t) sum += s.amplitude(t, k, tx, rx);
        f.values[k * kAntennaPairs + tx * kRxAntennas + rx] = sum / static_cast<double>(kTimeSlots);
      }
  return f;
}

/// Row-major flatten of the whole tensor (same order as CSD1 on disk).
inline FeatureVector extract_raw(const CsiSample& s) {
  return {Vector(s.tensor.begin(), s.tensor.end()), FeatureKind::Raw};
}

/// Inverse of extract_raw; the label is not part of a feature vector.
inline CsiSample unflatten(const FeatureVector& f, PostureLabel label = PostureLabel::Stand) {
  if (f.values.size() != kTensorSize) throw DimensionError("unflatten needs a 2700-d raw feature vector");
  CsiSample s;
  std::copy(f.values.begin(), f.values.end(), s.tensor.begin());
  s.label = label;
  return s;
}

inline FeatureVector extract(FeatureKind kind, const CsiSample& s) {
  return kind == FeatureKind::Raw ? extract_raw(s) : extract_classical(s);
}

inline LabeledSet extract_all(FeatureKind kind, const Dataset& d) {
  LabeledSet out;
  out.x.reserve(d.size());
  out.y.reserve(d.size());
  for (const auto& s : d.samples) {
    out.x.push_back(extract(kind, s).values);
    out.y.push_back(class_index(s.label));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

inline constexpr double kStdFloor = 1e-8;

/// Per-dimension z-score with statistics frozen from the training data.
struct Scaler {
  Vector mean;
  Vector stddev;

  std::size_t dims() const noexcept { return mean.size(); }

  Vector transform(std::span<const double> x) const {
    if (x.size() != mean.size()) throw DimensionError("scaler dimension mismatch");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stddev[i];
    return out;
  }

  void transform_in_place(std::vector<Vector>& xs) const {
    for (auto& x : xs) x = transform(x);
  }

  static Scaler fit(std::span<const Vector> train) {
    if (train.empty()) throw PreconditionError("cannot standardize an empty training set");
    const std::size_t d = train.front().size();
    Scaler s{Vector(d, 0.0), Vector(d, 0.0)};
    for (const auto& x : train) {
      if (x.size() != d) throw DimensionError("ragged training vectors");
      for (std::size_t i = 0; i < d; ++i) s.mean[i] += x[i];
    }
    const double n = static_cast<double>(train.size());
    for (auto& m : s.mean) m /= n;
    for (const auto& x : train)
      for (std::size_t i = 0; i < d; ++i) {
        const double c = x[i] - s.mean[i];
        s.stddev[i] += c * c;
      }
    for (auto& v : s.stddev) v = std::max(std::sqrt(v / n), kStdFloor);
    return s;
  }
};

inline std::pair<Scaler, std::vector<Vector>> standardize(std::span<const Vector> train) {
  Scaler s = Scaler::fit(train);
  std::vector<Vector> out;
  out.reserve(train.size());
  for (const auto& x : train) out.push_back(s.transform(x));
  return {std::move(s), std::move(out)};
}

}  // namespace csisense
