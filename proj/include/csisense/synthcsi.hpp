#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "csisense/csi_data.hpp"
#include "csisense/error.hpp"
#include "csisense/parallel.hpp"
#include "csisense/rng.hpp"

namespace csisense::synth {

// ---------------------------------------------------------------------------
// Radio constants: 2.4 GHz band, channel 6, 20 MHz, 30 reported subcarriers
// (the grouping used by common 802.11n CSI tools).
// ---------------------------------------------------------------------------

inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kCenterFrequencyHz = 2.437e9;
inline constexpr double kSubcarrierSpacingHz = 312.5e3;
inline constexpr std::array<int, kSubcarriers> kSubcarrierIndices = {
    -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1,
    1,   3,   5,   7,   9,   11,  13,  15,  17,  19,  21, 23, 25, 27, 28};

inline double subcarrier_frequency(std::size_t k) noexcept {
  return kCenterFrequencyHz + kSubcarrierIndices[k] * kSubcarrierSpacingHz;
}

inline constexpr double wavelength() noexcept { return kSpeedOfLight / kCenterFrequencyHz; }

// ---------------------------------------------------------------------------
// Environment model
// ---------------------------------------------------------------------------

struct Tap {
  double gain = 1.0;      // (0, 1]
  double delay_ns = 0.0;
  std::array<double, kAntennaPairs> phase_offsets{};  // radians, per tx*3+rx
};

struct EnvProfile {
  std::string env_id;
  double width_m = 0.0, length_m = 0.0, height_m = 0.0;
  double link_distance_m = 0.0;  // router to receiver
  double antenna_height_m = 0.0;
  std::vector<Tap> taps;          // taps[0] is line of sight
  double snr_db = 20.0;
  double slot_jitter = 0.0;       // relative gain jitter of reflected taps per time slot

  void validate() const {
    if (taps.empty()) throw PreconditionError("environment needs at least one tap");
    for (const auto& t : taps) {
      if (!(t.gain > 0.0 && t.gain <= 1.0)) throw PreconditionError("tap gain must lie in (0, 1]");
      if (t.gain > taps.front().gain) throw PreconditionError("line-of-sight tap must have the largest gain");
    }
    if (!std::isfinite(snr_db)) throw PreconditionError("SNR must be finite");
  }
};

/// Body shadowing of the line-of-sight path: attenuation per
/// (rx antenna, subcarrier band). Antenna 0 is the upper element.
inline constexpr std::size_t kBands = 3;
using ShadowGrid = std::array<std::array<double, kBands>, kRxAntennas>;

struct PostureEffect {
  std::array<ShadowGrid, kNumClasses> profiles;
  double depth_spread = 0.0;  // per-sample depth varies uniformly in [1-s, 1+s]
  double cell_jitter = 0.0;   // per-sample relative noise on each cell's attenuation

  static constexpr ShadowGrid no_shadow() {
    return {{{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}}};
  }
};

inline constexpr std::size_t band_of(std::size_t k) noexcept { return k * kBands / kSubcarriers; }

// ---------------------------------------------------------------------------
// Frozen calibration. These constants were tuned once so that posture is
// learnable inside one room while the room's multipath dominates the
// cross-room difference; the regression suite pins the resulting behaviour.
// ---------------------------------------------------------------------------

namespace calibration {

inline constexpr double kLinkDistance = 3.0;
inline constexpr double kAntennaHeight = 1.0;
inline constexpr double kWallReflection = 0.8;
inline constexpr double kFloorReflection = 0.7;
inline constexpr double kCeilingReflection = 0.6;
inline constexpr double kSnrDb = 15.0;
inline constexpr double kSlotJitter = 0.1;
inline constexpr double kDepthSpread = 0.2;
inline constexpr double kCellJitter = 0.1;
inline constexpr int kReflectionOrder = 2;

// Stand shadows the upper element across the band, Sit the middle one,
// LieDown only the lower element in the middle band.
inline constexpr std::array<ShadowGrid, kNumClasses> kPostureProfiles = {{
    {{{0.45, 0.45, 0.50}, {0.85, 0.80, 0.85}, {0.95, 0.95, 0.95}}},
    {{{0.90, 0.90, 0.90}, {0.45, 0.50, 0.45}, {0.85, 0.85, 0.85}}},
    {{{1.00, 1.00, 1.00}, {0.95, 0.90, 0.95}, {0.80, 0.45, 0.80}}},
}};

}  // namespace calibration

inline PostureEffect default_posture_effect() {
  return PostureEffect{calibration::kPostureProfiles, calibration::kDepthSpread, calibration::kCellJitter};
}

struct RoomParams {
  double link_distance = calibration::kLinkDistance;
  double antenna_height = calibration::kAntennaHeight;
  double wall = calibration::kWallReflection;
  double floor = calibration::kFloorReflection;
  double ceiling = calibration::kCeilingReflection;
  double snr_db = calibration::kSnrDb;
  double slot_jitter = calibration::kSlotJitter;
  int reflection_order = calibration::kReflectionOrder;
};

/// Image-method taps up to `reflection_order` bounces for a shoebox room
/// with the link centred in it. Both arrays are vertical half-wavelength
/// ULAs (element 0 on top). A tap's delay is measured between the centre
/// elements; its per-pair phase offsets carry the exact path-length
/// differences of the other element pairs plus a sign flip per bounce.
inline EnvProfile make_room(std::string id, double width, double length, double height, const RoomParams& cal = {}) {
  EnvProfile env;
  env.env_id = std::move(id);
  env.width_m = width;
  env.length_m = length;
  env.height_m = height;
  env.link_distance_m = cal.link_distance;
  env.antenna_height_m = cal.antenna_height;
  env.snr_db = cal.snr_db;
  env.slot_jitter = cal.slot_jitter;

  using P3 = std::array<double, 3>;
  const P3 dims = {width, length, height};
  const double spacing = wavelength() / 2.0;
  auto element = [&](double x, std::size_t i) {
    return P3{x, length / 2, cal.antenna_height + (1.0 - static_cast<double>(i)) * spacing};
  };
  auto dist = [](const P3& u, const P3& v) {
    const double dx = u[0] - v[0], dy = u[1] - v[1], dz = u[2] - v[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  };
  const double tx_x = width / 2 - cal.link_distance / 2;
  const double rx_x = width / 2 + cal.link_distance / 2;
  const double los = cal.link_distance;
  const double k0 = 2.0 * std::numbers::pi / wavelength();

  // Per axis, image (m, q) sits at (1 - 2q) x + 2 m L and has bounced
  // |m - q| times off the wall at 0 and |m| times off the wall at L.
  struct AxisImage {
    int m, q;
    int bounces() const { return std::abs(m - q) + std::abs(m); }
  };
  std::vector<AxisImage> axis_images;
  for (int m = -cal.reflection_order; m <= cal.reflection_order; ++m)
    for (int q = 0; q <= 1; ++q)
      if (AxisImage{m, q}.bounces() <= cal.reflection_order) axis_images.push_back({m, q});

  const double low_coeff[3] = {cal.wall, cal.wall, cal.floor};
  const double high_coeff[3] = {cal.wall, cal.wall, cal.ceiling};

  auto add_tap = [&](const std::array<AxisImage, 3>& img) {
    auto image = [&](P3 p) {
      for (std::size_t ax = 0; ax < 3; ++ax) p[ax] = (1 - 2 * img[ax].q) * p[ax] + 2.0 * img[ax].m * dims[ax];
      return p;
    };
    double coeff = 1.0;
    int bounces = 0;
    for (std::size_t ax = 0; ax < 3; ++ax) {
      coeff *= std::pow(low_coeff[ax], std::abs(img[ax].m - img[ax].q)) * std::pow(high_coeff[ax], std::abs(img[ax].m));
      bounces += img[ax].bounces();
    }
    const double ref_len = dist(element(rx_x, 1), image(element(tx_x, 1)));
    Tap t;
    t.gain = coeff * los / ref_len;
    t.delay_ns = ref_len / kSpeedOfLight * 1e9;
    for (std::size_t a = 0; a < kTxAntennas; ++a)
      for (std::size_t b = 0; b < kRxAntennas; ++b) {
        const double len = dist(element(rx_x, b), image(element(tx_x, a)));
        t.phase_offsets[a * kRxAntennas + b] = -k0 * (len - ref_len) + std::numbers::pi * bounces;
      }
    env.taps.push_back(t);
  };

  add_tap({AxisImage{0, 0}, AxisImage{0, 0}, AxisImage{0, 0}});
  for (int order = 1; order <= cal.reflection_order; ++order)
    for (const auto& ix : axis_images)
      for (const auto& iy : axis_images)
        for (const auto& iz : axis_images)
          if (ix.bounces() + iy.bounces() + iz.bounces() == order) add_tap({ix, iy, iz});
  env.validate();
  return env;
}

struct DefaultEnvs {
  EnvProfile a;
  EnvProfile b;
};

/// The two rooms of the benchmark. Same link geometry, different size.
inline DefaultEnvs default_envs() {
  return {make_room("A", 5.0, 3.0, 2.5), make_room("B", 6.6, 4.7, 2.6)};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// One capture. For each slot t, subcarrier k and antenna pair:
///   H = sum_p g_p * s_p * exp(-j 2 pi f_k tau_p + j phi_p(tx, rx)) + noise
/// with s_0 the posture shadowing (scaled by a per-sample depth) and s_p a
/// per-slot jitter for reflected taps. A per-sample common phase models
/// the receiver's unknown carrier phase.
inline CsiSample gen_sample_shadowed(const EnvProfile& env, const ShadowGrid& shadow, double depth, PostureLabel label, Rng& rng) {
  CsiSample s;
  s.label = label;
  const double noise_sd = std::pow(10.0, -env.snr_db / 20.0) * env.taps.front().gain / std::numbers::sqrt2;
  const double common_phase = rng.uniform(-std::numbers::pi, std::numbers::pi);

  std::array<std::array<double, kBands>, kRxAntennas> atten{};
  for (std::size_t r = 0; r < kRxAntennas; ++r)
    for (std::size_t b = 0; b < kBands; ++b) atten[r][b] = std::max(0.0, 1.0 - (1.0 - shadow[r][b]) * depth);

  // Precompute per-tap, per-subcarrier propagation phase.
  const std::size_t P = env.taps.size();
  std::vector<std::complex<double>> prop(P * kSubcarriers);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < kSubcarriers; ++k) {
      const double ph = -2.0 * std::numbers::pi * std::fmod(subcarrier_frequency(k) * env.taps[p].delay_ns * 1e-9, 1.0);
      prop[p * kSubcarriers + k] = std::polar(1.0, ph);
    }

  std::vector<double> slot_gain(P);
  for (std::size_t t = 0; t < kTimeSlots; ++t) {
    slot_gain[0] = 1.0;
    for (std::size_t p = 1; p < P; ++p) slot_gain[p] = 1.0 + env.slot_jitter * rng.normal();
    for (std::size_t k = 0; k < kSubcarriers; ++k) {
      const std::size_t band = band_of(k);
      for (std::size_t tx = 0; tx < kTxAntennas; ++tx)
        for (std::size_t rx = 0; rx < kRxAntennas; ++rx) {
          const std::size_t pair = tx * kRxAntennas + rx;
          std::complex<double> h{};
          for (std::size_t p = 0; p < P; ++p) {
            const auto& tap = env.taps[p];
            const double g = tap.gain * slot_gain[p] * (p == 0 ? atten[rx][band] : 1.0);
            h += g * prop[p * kSubcarriers + k] * std::polar(1.0, tap.phase_offsets[pair]);
          }
          h *= std::polar(1.0, common_phase);
          if (noise_sd > 0.0) h += std::complex<double>(rng.normal(0.0, noise_sd), rng.normal(0.0, noise_sd));
          s.set(t, k, tx, rx, std::abs(h), std::arg(h));
        }
    }
  }
  canonicalize(s);
  return s;
}

inline CsiSample gen_sample(const EnvProfile& env, const PostureEffect& effect, PostureLabel posture, Rng& rng) {
  const double depth = 1.0 + effect.depth_spread * (2.0 * rng.uniform() - 1.0);
  ShadowGrid shadow = effect.profiles[static_cast<std::size_t>(posture)];
  if (effect.cell_jitter > 0.0)
    for (auto& row : shadow)
      for (auto& cell : row) cell = std::clamp(1.0 - (1.0 - cell) * (1.0 + effect.cell_jitter * rng.normal()), 0.0, 1.0);
  return gen_sample_shadowed(env, shadow, depth, posture, rng);
}

/// Generates counts[c] samples of each posture. Sample i of class c uses
/// seed derive_seed(derive_seed(seed, c), i), so the result does not depend
/// on the thread count. The output order is shuffled deterministically.
inline Dataset gen_dataset(const EnvProfile& env, const PostureEffect& effect, std::array<std::size_t, kNumClasses> counts,
                           std::uint64_t seed, unsigned threads = 1) {
  env.validate();
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) jobs.emplace_back(c, i);

  Dataset d;
  d.environment_id = env.env_id;
  d.samples.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto [c, i] = jobs[j];
    Rng rng(derive_seed(derive_seed(seed, c), i));
    d.samples[j] = gen_sample(env, effect, static_cast<PostureLabel>(c), rng);
  });
  Rng order(derive_seed(seed, 0x5EED5EEDull));
  shuffle(std::span<CsiSample>(d.samples), order);
  return d;
}

inline Dataset gen_dataset(const EnvProfile& env, std::array<std::size_t, kNumClasses> counts, std::uint64_t seed,
                           unsigned threads = 1) {
  return gen_dataset(env, default_posture_effect(), counts, seed, threads);
}

}  // namespace csisense::synth
