#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csisense/binio.hpp"
#include "csisense/csi_data.hpp"
#include "csisense/error.hpp"

namespace csisense {

/// Raw tensor as stored in an NPY file: flat row-major data and its shape.
struct NpyTensor {
  std::vector<double> data;
  std::vector<std::size_t> shape;

  /// Number of CSI samples: shape[0] for batched files, 1 otherwise.
  std::size_t sample_count() const noexcept { return shape.size() == 6 ? shape[0] : 1; }
};

inline constexpr std::array<std::size_t, 5> kSampleShape = {kTimeSlots, kSubcarriers, kTxAntennas, kRxAntennas, 2};

namespace npy_detail {

inline constexpr std::string_view kMagic = "\x93NUMPY";

struct Header {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

/// Minimal parser for the Python dict literal NPY writes, e.g.
/// {'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }
class DictParser {
 public:
  explicit DictParser(std::string_view s) : s_(s) {}

  Header parse() {
    Header h;
    bool have_descr = false, have_order = false, have_shape = false;
    expect('{');
    for (;;) {
      skip_ws();
      if (peek() == '}') {
        ++i_;
        break;
      }
      const std::string key = quoted();
      expect(':');
      if (key == "descr") {
        h.descr = quoted();
        have_descr = true;
      } else if (key == "fortran_order") {
        h.fortran_order = boolean();
        have_order = true;
      } else if (key == "shape") {
        h.shape = tuple();
        have_shape = true;
      } else {
        throw FormatError("unexpected NPY header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      expect('}');
      break;
    }
    if (!have_descr || !have_order || !have_shape) throw FormatError("NPY header missing a required key");
    return h;
  }

 private:
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) throw FormatError(std::string("malformed NPY header: expected '") + c + "'");
    ++i_;
  }
  std::string quoted() {
    skip_ws();
    const char q = peek();
    if (q != '\'' && q != '"') throw FormatError("malformed NPY header: expected string");
    ++i_;
    const auto end = s_.find(q, i_);
    if (end == std::string_view::npos) throw FormatError("malformed NPY header: unterminated string");
    std::string out(s_.substr(i_, end - i_));
    i_ = end + 1;
    return out;
  }
  bool boolean() {
    skip_ws();
    if (s_.substr(i_, 4) == "True") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "False") {
      i_ += 5;
      return false;
    }
    throw FormatError("malformed NPY header: expected True/False");
  }
  std::vector<std::size_t> tuple() {
    std::vector<std::size_t> dims;
    expect('(');
    for (;;) {
      skip_ws();
      if (peek() == ')') {
        ++i_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) throw FormatError("malformed NPY shape");
      std::uint64_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        if (v > (std::uint64_t{1} << 40)) throw ShapeError("NPY dimension too large");
        v = v * 10 + static_cast<std::uint64_t>(peek() - '0');
        ++i_;
      }
      dims.push_back(static_cast<std::size_t>(v));
      if (dims.size() > 32) throw ShapeError("NPY shape has too many dimensions");
      skip_ws();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      expect(')');
      return dims;
    }
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

inline bool is_accepted_shape(const std::vector<std::size_t>& shape) {
  if (shape.size() == 5) return std::equal(shape.begin(), shape.end(), kSampleShape.begin());
  if (shape.size() == 6) return std::equal(shape.begin() + 1, shape.end(), kSampleShape.begin());
  return false;
}

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

}  // namespace npy_detail

/// Parses an NPY v1.0 little-endian float32/float64 C-order array of shape
/// (5,30,3,3,2) or (N,5,30,3,3,2).
inline NpyTensor parse_npy(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.require(6, "truncated NPY magic");
  auto magic = r.bytes(6);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 6) != npy_detail::kMagic)
    throw FormatError("bad magic: not an NPY file");
  r.require(4, "truncated NPY preamble");
  const auto major = r.u8();
  const auto minor = r.u8();
  if (major != 1 || minor != 0)
    throw UnsupportedError("NPY version " + std::to_string(major) + "." + std::to_string(minor) + " not supported");
  const std::uint16_t header_len = r.u16();
  auto header_bytes = r.bytes(header_len, "truncated NPY header");
  const std::string_view header_text(reinterpret_cast<const char*>(header_bytes.data()), header_bytes.size());

  const auto h = npy_detail::DictParser(header_text).parse();
  if (h.fortran_order) throw UnsupportedError("Fortran-ordered NPY arrays are not supported");
  std::size_t item = 0;
  if (h.descr == "<f4") item = 4;
  else if (h.descr == "<f8") item = 8;
  else throw UnsupportedError("NPY dtype '" + h.descr + "' not supported (need <f4 or <f8)");
  if (!npy_detail::is_accepted_shape(h.shape))
    throw ShapeError("NPY shape " + npy_detail::shape_string(h.shape) + " is neither (5,30,3,3,2) nor (N,5,30,3,3,2)");

  NpyTensor out;
  out.shape = h.shape;
  const std::size_t n = out.sample_count();
  if (n > r.remaining() / (kTensorSize * item))
    throw TruncationError("truncated NPY data", r.position() + n * kTensorSize * item, r.size());
  const std::size_t count = n * kTensorSize;
  if (r.remaining() != count * item) throw FormatError("trailing bytes after NPY data");
  out.data.resize(count);
  for (auto& v : out.data) v = item == 4 ? static_cast<double>(r.f32()) : r.f64();
  return out;
}

inline NpyTensor read_npy(std::istream& source) {
  const auto bytes = binio::slurp(source);
  return parse_npy(bytes);
}

/// Writes the dataset's tensors as float32 (N,5,30,3,3,2). Labels are not
/// part of NPY; keep them in a CSD1 file.
inline std::size_t write_npy(const Dataset& d, std::ostream& sink) {
  if (d.empty()) throw PreconditionError("write_npy needs at least one sample");
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(d.size()) +
                     ", 5, 30, 3, 3, 2), }";
  // Pad with spaces and a trailing newline so the data starts on a
  // 64-byte boundary, as numpy itself does.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  binio::Writer w(sink);
  w.text(npy_detail::kMagic);
  w.u8(1);
  w.u8(0);
  w.u16(static_cast<std::uint16_t>(dict.size()));
  w.text(dict);
  for (const auto& s : d.samples)
    for (double v : s.tensor) w.f32(static_cast<float>(v));
  return w.written();
}

/// Builds a dataset from NPY tensors. `labels` must have one entry per
/// sample; values are validated and canonicalized like CSD1 input.
inline Dataset dataset_from_npy(const NpyTensor& t, std::span<const PostureLabel> labels, std::string env_id = {}) {
  const std::size_t n = t.sample_count();
  if (labels.size() != n)
    throw DimensionError("have " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " tensors");
  Dataset d;
  d.environment_id = std::move(env_id);
  d.samples.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto& out = d.samples[s];
    out.label = labels[s];
    const double* src = t.data.data() + s * kTensorSize;
    for (std::size_t i = 0; i < kTensorSize; i += 2) {
      detail::ingest_pair(static_cast<float>(src[i]), static_cast<float>(src[i + 1]), out.tensor[i], out.tensor[i + 1], i);
    }
  }
  return d;
}

}  // namespace csisense
