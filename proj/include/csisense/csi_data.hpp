#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csisense/binio.hpp"
#include "csisense/error.hpp"

namespace csisense {

inline constexpr std::size_t kTimeSlots = 5;
inline constexpr std::size_t kSubcarriers = 30;
inline constexpr std::size_t kTxAntennas = 3;
inline constexpr std::size_t kRxAntennas = 3;
inline constexpr std::size_t kAntennaPairs = kTxAntennas * kRxAntennas;
inline constexpr std::size_t kTensorSize = kTimeSlots * kSubcarriers * kAntennaPairs * 2;
inline constexpr std::size_t kNumClasses = 3;

static_assert(kTensorSize == 2700);

enum class PostureLabel : std::uint8_t { Stand = 0, Sit = 1, LieDown = 2 };

inline constexpr std::array<PostureLabel, kNumClasses> kAllPostures = {
    PostureLabel::Stand, PostureLabel::Sit, PostureLabel::LieDown};

constexpr int class_index(PostureLabel l) noexcept { return static_cast<int>(l); }

inline PostureLabel label_from_code(unsigned code) {
  if (code >= kNumClasses) throw FormatError("label code " + std::to_string(code) + " out of range");
  return static_cast<PostureLabel>(code);
}

constexpr std::string_view label_name(PostureLabel l) noexcept {
  switch (l) {
    case PostureLabel::Stand: return "Stand";
    case PostureLabel::Sit: return "Sit";
    case PostureLabel::LieDown: return "LieDown";
  }
  return "?";
}

/// Flat offset of (time, subcarrier, tx, rx, part) in row-major order;
/// part 0 is amplitude, part 1 is phase.
constexpr std::size_t tensor_index(std::size_t t, std::size_t k, std::size_t tx, std::size_t rx,
                                   std::size_t part) noexcept {
  return ((((t * kSubcarriers + k) * kTxAntennas + tx) * kRxAntennas + rx) * 2) + part;
}

/// Maps any finite angle to [-pi, pi).
inline double wrap_phase(double p) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (p >= -std::numbers::pi && p < std::numbers::pi) return p;
  double r = p - two_pi * std::floor((p + std::numbers::pi) / two_pi);
  if (r >= std::numbers::pi) r -= two_pi;
  if (r < -std::numbers::pi) r = -std::numbers::pi;
  return r;
}

/// Rounds to float32 precision without leaving [-pi, pi): the float
/// nearest to +/-pi lies just outside the interval, so it is pulled in by
/// one ulp.
inline double quantize_phase(double p) noexcept {
  double q = static_cast<float>(wrap_phase(p));
  if (q >= std::numbers::pi) q = std::nextafter(static_cast<float>(std::numbers::pi), 0.0f);
  if (q < -std::numbers::pi) q = std::nextafter(static_cast<float>(-std::numbers::pi), 0.0f);
  return q;
}

/// One labelled capture. Values live in memory as double but are kept on
/// the float32 grid so that file round trips are bit exact.
struct CsiSample {
  std::array<double, kTensorSize> tensor{};
  PostureLabel label = PostureLabel::Stand;

  double amplitude(std::size_t t, std::size_t k, std::size_t tx, std::size_t rx) const noexcept {
    return tensor[tensor_index(t, k, tx, rx, 0)];
  }
  double phase(std::size_t t, std::size_t k, std::size_t tx, std::size_t rx) const noexcept {
    return tensor[tensor_index(t, k, tx, rx, 1)];
  }
  void set(std::size_t t, std::size_t k, std::size_t tx, std::size_t rx, double amp, double ph) noexcept {
    tensor[tensor_index(t, k, tx, rx, 0)] = amp;
    tensor[tensor_index(t, k, tx, rx, 1)] = ph;
  }

  friend bool operator==(const CsiSample&, const CsiSample&) = default;
};

/// Brings a sample onto the canonical grid: amplitudes rounded to float32,
/// phases wrapped to [-pi, pi) and rounded. Throws DataError on non-finite
/// entries or negative amplitudes.
inline void canonicalize(CsiSample& s) {
  for (std::size_t i = 0; i < kTensorSize; i += 2) {
    const double amp = s.tensor[i];
    const double ph = s.tensor[i + 1];
    if (!std::isfinite(amp) || !std::isfinite(ph)) throw DataError("non-finite CSI entry at offset " + std::to_string(i));
    if (amp < 0.0) throw DataError("negative amplitude at offset " + std::to_string(i));
    s.tensor[i] = static_cast<float>(amp);
    s.tensor[i + 1] = quantize_phase(ph);
  }
}

/// True when every amplitude is finite and >= 0 and every phase is finite
/// and in [-pi, pi).
inline bool is_valid(const CsiSample& s) noexcept {
  for (std::size_t i = 0; i < kTensorSize; i += 2) {
    const double amp = s.tensor[i];
    const double ph = s.tensor[i + 1];
    if (!std::isfinite(amp) || amp < 0.0) return false;
    if (!std::isfinite(ph) || ph < -std::numbers::pi || ph >= std::numbers::pi) return false;
  }
  return true;
}

struct Dataset {
  std::vector<CsiSample> samples;
  std::string environment_id;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  std::array<std::size_t, kNumClasses> class_counts() const noexcept {
    std::array<std::size_t, kNumClasses> c{};
    for (const auto& s : samples) ++c[class_index(s.label)];
    return c;
  }

  /// Copy of the samples at `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.environment_id = environment_id;
    out.samples.reserve(indices.size());
    for (std::size_t i : indices) out.samples.push_back(samples.at(i));
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// CSD1 container
//
//   "CSD1" | version u16 = 1 | reserved u16 = 0 | count u32 | tag_len u8 |
//   tag bytes | count * (label u8 | 2700 * f32)
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsdMagic = "CSD1";
inline constexpr std::uint16_t kCsdVersion = 1;
inline constexpr std::size_t kCsdHeaderFixed = 4 + 2 + 2 + 4 + 1;
inline constexpr std::size_t kCsdSampleBytes = 1 + kTensorSize * 4;

inline std::size_t write_csd(const Dataset& d, std::ostream& sink) {
  if (d.environment_id.size() > 255) throw PreconditionError("environment tag longer than 255 bytes");
  if (d.samples.size() > 0xFFFFFFFFull) throw PreconditionError("too many samples for CSD1");
  for (const auto& s : d.samples)
    if (!is_valid(s)) throw PreconditionError("dataset contains an invalid sample");

  binio::Writer w(sink);
  w.text(kCsdMagic);
  w.u16(kCsdVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(d.samples.size()));
  w.u8(static_cast<std::uint8_t>(d.environment_id.size()));
  w.text(d.environment_id);
  for (const auto& s : d.samples) {
    w.u8(static_cast<std::uint8_t>(s.label));
    for (double v : s.tensor) w.f32(static_cast<float>(v));
  }
  return w.written();
}

namespace detail {

/// Validates one raw (amplitude, phase) pair read from disk and returns the
/// canonical in-memory values. Phases within (-2pi, 2pi) are wrapped.
inline void ingest_pair(float amp, float ph, double& amp_out, double& ph_out, std::size_t offset) {
  if (!std::isfinite(amp) || !std::isfinite(ph))
    throw DataError("non-finite CSI entry at tensor offset " + std::to_string(offset));
  if (amp < 0.0f) throw DataError("negative amplitude at tensor offset " + std::to_string(offset));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double p = ph;
  if (!(p > -two_pi && p < two_pi)) throw DataError("phase out of range at tensor offset " + std::to_string(offset));
  amp_out = amp;
  ph_out = (p >= -std::numbers::pi && p < std::numbers::pi) ? p : quantize_phase(p);
}

}  // namespace detail

inline Dataset parse_csd(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.require(4, "truncated CSD1 header");
  auto magic = r.bytes(4);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != kCsdMagic)
    throw FormatError("bad magic: not a CSD1 file");
  r.require(kCsdHeaderFixed - 4, "truncated CSD1 header");
  const auto version = r.u16();
  if (version != kCsdVersion) throw FormatError("unsupported CSD1 version " + std::to_string(version));
  if (r.u16() != 0) throw FormatError("reserved CSD1 header field is nonzero");
  const std::uint32_t count = r.u32();
  const std::uint8_t tag_len = r.u8();
  auto tag = r.bytes(tag_len, "truncated environment tag");

  Dataset d;
  d.environment_id.assign(reinterpret_cast<const char*>(tag.data()), tag.size());
  const std::size_t expected = r.position() + static_cast<std::size_t>(count) * kCsdSampleBytes;
  if (r.size() < expected) throw TruncationError("truncated CSD1 payload", expected, r.size());
  if (r.size() > expected) throw FormatError("trailing bytes after last CSD1 sample");

  d.samples.resize(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    auto& s = d.samples[n];
    s.label = label_from_code(r.u8());
    for (std::size_t i = 0; i < kTensorSize; i += 2) {
      const float amp = r.f32();
      const float ph = r.f32();
      detail::ingest_pair(amp, ph, s.tensor[i], s.tensor[i + 1], i);
    }
  }
  return d;
}

inline Dataset read_csd(std::istream& source) {
  const auto bytes = binio::slurp(source);
  return parse_csd(bytes);
}

}  // namespace csisense
