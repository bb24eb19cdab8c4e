#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "csisense.hpp"

namespace testing_support {

using namespace csisense;

inline CsiSample random_sample(Rng& rng, PostureLabel label) {
  CsiSample s;
  s.label = label;
  for (std::size_t i = 0; i < kTensorSize; i += 2) {
    s.tensor[i] = rng.uniform(0.0, 10.0);
    s.tensor[i + 1] = rng.uniform(-std::numbers::pi, std::numbers::pi);
  }
  canonicalize(s);
  return s;
}

inline Dataset random_dataset(Rng& rng, std::size_t n, std::string tag = "A") {
  Dataset d;
  d.environment_id = std::move(tag);
  for (std::size_t i = 0; i < n; ++i) d.samples.push_back(random_sample(rng, static_cast<PostureLabel>(rng.below(3))));
  return d;
}

inline std::string csd_bytes(const Dataset& d) {
  std::ostringstream out(std::ios::binary);
  write_csd(d, out);
  return out.str();
}

inline std::string npy_bytes(const Dataset& d) {
  std::ostringstream out(std::ios::binary);
  write_npy(d, out);
  return out.str();
}

inline std::span<const unsigned char> as_span(const std::string& s) {
  return {reinterpret_cast<const unsigned char*>(s.data()), s.size()};
}

/// K isotropic Gaussian blobs in `dims` dimensions; class c is centred at
/// sep * e_(c mod dims) (so every pair of centres is sep * sqrt(2) apart).
inline LabeledSet blobs(std::size_t per_class, std::size_t dims, int classes, double sep, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSet s;
  for (int c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      Vector x(dims);
      for (std::size_t f = 0; f < dims; ++f) x[f] = rng.normal(0.0, sigma) + (f == static_cast<std::size_t>(c) % dims ? sep : 0.0);
      s.x.push_back(std::move(x));
      s.y.push_back(c);
    }
  return s;
}

inline double accuracy_of(const std::vector<int>& truth, const std::vector<int>& pred) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

}  // namespace testing_support
