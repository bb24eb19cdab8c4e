#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "csisense/binio.hpp"
#include "csisense/cnn.hpp"
#include "csisense/csi_data.hpp"
#include "csisense/error.hpp"
#include "csisense/features.hpp"
#include "csisense/forest.hpp"
#include "csisense/lda.hpp"
#include "csisense/nbsvm.hpp"
#include "csisense/rng.hpp"
#include "csisense/svm.hpp"

namespace csisense {

enum class ModelKind : std::uint8_t { Lda = 0, NbSvm = 1, KernelSvm = 2, Forest = 3, Cnn = 4 };

inline constexpr std::array<ModelKind, 5> kAllModelKinds = {ModelKind::Lda, ModelKind::NbSvm, ModelKind::KernelSvm,
                                                            ModelKind::Forest, ModelKind::Cnn};

constexpr std::string_view model_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Lda: return "lda";
    case ModelKind::NbSvm: return "nbsvm";
    case ModelKind::KernelSvm: return "ksvm";
    case ModelKind::Forest: return "forest";
    case ModelKind::Cnn: return "cnn";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : kAllModelKinds)
    if (model_name(k) == s) return k;
  return std::nullopt;
}

/// Everything needed to train one of the five classifiers.
struct ModelSpec {
  ModelKind kind = ModelKind::Lda;
  FeatureKind features = FeatureKind::MeanAmplitude;

  double lda_ridge = lda::kDefaultRidge;

  nbsvm::TransformMode nb_mode = nbsvm::TransformMode::PerFeatureLikelihood;

  svm::KernelKind kernel = svm::KernelKind::Rbf;
  double rbf_gamma = 0.0;  // 0 selects 1 / (dims * feature variance)
  double poly_c = 1.0;
  int poly_d = 3;

  svm::SmoParams smo{};

  std::size_t n_trees = 100;
  std::size_t max_features = 0;  // 0 selects ceil(sqrt(d))
  int max_depth = -1;
  std::size_t min_samples_split = 2;

  cnn::TrainConfig cnn{};

  unsigned threads = 1;

  static ModelSpec defaults(ModelKind k) {
    ModelSpec s;
    s.kind = k;
    return s;
  }
};

/// CNN weights plus the global amplitude normalization fitted on training data.
struct CnnClassifier {
  cnn::CnnModel net;
  double input_mean = 0.0;
  double input_scale = 1.0;
};

struct TrainedModel {
  ModelKind kind = ModelKind::Lda;
  FeatureKind features = FeatureKind::MeanAmplitude;
  Scaler scaler;  // unused for the CNN
  std::variant<lda::LdaModel, nbsvm::NbSvmModel, svm::MulticlassSvm, forest::ForestModel, CnnClassifier> model;
};

namespace model_detail {

inline Vector cnn_vector(const CsiSample& s, const CnnClassifier& c) {
  const auto in = to_cnn_input(s);
  Vector v(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) v[i] = (in[i] - c.input_mean) / c.input_scale;
  return v;
}

inline int predict_features(const TrainedModel& m, std::span<const double> x) {
  return std::visit(
      [&](const auto& mdl) -> int {
        using T = std::decay_t<decltype(mdl)>;
        if constexpr (std::is_same_v<T, lda::LdaModel>) return lda::predict_lda(mdl, x);
        else if constexpr (std::is_same_v<T, nbsvm::NbSvmModel>) return nbsvm::predict_nbsvm(mdl, x);
        else if constexpr (std::is_same_v<T, svm::MulticlassSvm>) return svm::predict_multiclass(mdl, x);
        else if constexpr (std::is_same_v<T, forest::ForestModel>) return forest::predict_forest(mdl, x);
        else throw PreconditionError("CNN models do not take feature vectors");
      },
      m.model);
}

}  // namespace model_detail

/// Class index per sample, in dataset order.
inline std::vector<int> predict_all(const TrainedModel& m, const Dataset& d) {
  std::vector<int> out(d.size());
  if (const auto* c = std::get_if<CnnClassifier>(&m.model)) {
    constexpr std::size_t chunk = 256;
    for (std::size_t s = 0; s < d.size(); s += chunk) {
      const std::size_t e = std::min(d.size(), s + chunk);
      std::vector<Vector> batch;
      for (std::size_t i = s; i < e; ++i) batch.push_back(model_detail::cnn_vector(d.samples[i], *c));
      const auto probs = cnn::forward(c->net, batch);
      for (std::size_t i = s; i < e; ++i) {
        const auto& p = probs[i - s];
        out[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = m.scaler.transform(extract(m.features, d.samples[i]).values);
    out[i] = model_detail::predict_features(m, x);
  }
  return out;
}

inline PostureLabel predict(const TrainedModel& m, const CsiSample& s) {
  Dataset one;
  one.samples.push_back(s);
  return static_cast<PostureLabel>(predict_all(m, one).front());
}

/// Trains `spec` on `train`. Classical models see standardized features;
/// the CNN sees globally normalized amplitudes.
inline TrainedModel train_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed) {
  if (train.empty()) throw PreconditionError("training set is empty");
  constexpr int K = static_cast<int>(kNumClasses);
  TrainedModel out;
  out.kind = spec.kind;
  out.features = spec.features;

  if (spec.kind == ModelKind::Cnn) {
    CnnClassifier c;
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : train.samples) {
      for (double v : to_cnn_input(s)) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    c.input_mean = sum / static_cast<double>(n);
    c.input_scale = std::max(std::sqrt(std::max(sq / static_cast<double>(n) - c.input_mean * c.input_mean, 0.0)), kStdFloor);
    std::vector<Vector> inputs;
    std::vector<int> labels;
    inputs.reserve(train.size());
    for (const auto& s : train.samples) {
      inputs.push_back(model_detail::cnn_vector(s, c));
      labels.push_back(class_index(s.label));
    }
    auto cfg = spec.cnn;
    cfg.seed = seed;
    c.net = cnn::CnnModel::he_init(cnn::CnnArch{}, derive_seed(seed, 0xC0FFEE), cfg.init_gain);
    cnn::train(c.net, inputs, labels, cfg);
    out.model = std::move(c);
    return out;
  }

  LabeledSet data = extract_all(spec.features, train);
  out.scaler = Scaler::fit(data.x);
  out.scaler.transform_in_place(data.x);

  switch (spec.kind) {
    case ModelKind::Lda: out.model = lda::fit_lda(data, K, spec.lda_ridge); break;
    case ModelKind::NbSvm: {
      nbsvm::NbSvmParams p{spec.nb_mode, spec.smo, spec.threads};
      out.model = nbsvm::fit_nbsvm(data, K, p);
      break;
    }
    case ModelKind::KernelSvm: {
      svm::KernelSpec ks;
      ks.kind = spec.kernel;
      ks.poly_c = spec.poly_c;
      ks.poly_d = spec.poly_d;
      ks.rbf_gamma = spec.rbf_gamma > 0.0 ? spec.rbf_gamma : svm::scale_gamma(data.x);
      out.model = svm::train_multiclass(data, K, ks, spec.smo, spec.threads);
      break;
    }
    case ModelKind::Forest: {
      forest::ForestParams p;
      p.n_trees = spec.n_trees;
      p.max_features = spec.max_features;
      p.max_depth = spec.max_depth;
      p.min_samples_split = spec.min_samples_split;
      p.threads = spec.threads;
      out.model = forest::fit_forest(data, K, p, seed);
      break;
    }
    case ModelKind::Cnn: break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSM1 model container
//
//   "CSM1" | kind u8 | version u16 = 1 | feature kind u8 | scaler | body
//
// Vectors are u64 length + f64 values, little-endian. Bodies are
// model-specific and documented next to their writers.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelMagic = "CSM1";
inline constexpr std::uint16_t kModelVersion = 1;

namespace model_io {

using binio::Reader;
using binio::Writer;

inline void write_matrix(Writer& w, const std::vector<Vector>& rows) {
  w.u64(rows.size());
  w.u64(rows.empty() ? 0 : rows.front().size());
  for (const auto& r : rows)
    for (double v : r) w.f64(v);
}

inline std::vector<Vector> read_matrix(Reader& r) {
  const auto n = r.u64();
  const auto d = r.u64();
  if (d != 0 && n > r.remaining() / 8 / d) throw TruncationError("truncated matrix", r.position() + n * d * 8, r.size());
  if (d == 0 && n > r.remaining()) throw FormatError("implausible matrix header");
  std::vector<Vector> rows(static_cast<std::size_t>(n), Vector(static_cast<std::size_t>(d)));
  for (auto& row : rows)
    for (auto& v : row) v = r.f64();
  return rows;
}

inline void write_kernel(Writer& w, const svm::KernelSpec& k) {
  w.u8(static_cast<std::uint8_t>(k.kind));
  w.f64(k.poly_c);
  w.i32(k.poly_d);
  w.f64(k.rbf_gamma);
}

inline svm::KernelSpec read_kernel(Reader& r) {
  svm::KernelSpec k;
  const auto kind = r.u8();
  if (kind > 2) throw FormatError("unknown kernel kind");
  k.kind = static_cast<svm::KernelKind>(kind);
  k.poly_c = r.f64();
  k.poly_d = r.i32();
  k.rbf_gamma = r.f64();
  k.validate();
  return k;
}

// num_classes u32 | machines u32 | per machine: a u32, b u32, kernel, C, bias, support matrix, coef
inline void write_svm(Writer& w, const svm::MulticlassSvm& m) {
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  w.u32(static_cast<std::uint32_t>(m.machines.size()));
  for (std::size_t i = 0; i < m.machines.size(); ++i) {
    const auto& b = m.machines[i];
    w.u32(static_cast<std::uint32_t>(m.pairs[i].first));
    w.u32(static_cast<std::uint32_t>(m.pairs[i].second));
    write_kernel(w, b.kernel);
    w.f64(b.C);
    w.f64(b.bias);
    write_matrix(w, b.support);
    w.f64s(b.coef);
  }
}

inline svm::MulticlassSvm read_svm(Reader& r) {
  svm::MulticlassSvm m;
  m.num_classes = static_cast<int>(r.u32());
  const auto n = r.u32();
  if (m.num_classes < 2 || m.num_classes > 64) throw FormatError("implausible class count");
  if (n != static_cast<std::uint32_t>(m.num_classes * (m.num_classes - 1) / 2)) throw FormatError("wrong number of one-vs-one machines");
  for (std::uint32_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(r.u32()), b = static_cast<int>(r.u32());
    if (a < 0 || b <= a || b >= m.num_classes) throw FormatError("bad class pair");
    m.pairs.emplace_back(a, b);
    svm::BinarySvm mach;
    mach.kernel = read_kernel(r);
    mach.C = r.f64();
    mach.bias = r.f64();
    mach.support = read_matrix(r);
    mach.coef = r.f64s();
    if (mach.coef.size() != mach.support.size()) throw FormatError("support/coefficient count mismatch");
    m.machines.push_back(std::move(mach));
  }
  return m;
}

// K u32 | means | weights | biases | priors | scatter (d x d rows)
inline void write_lda(Writer& w, const lda::LdaModel& m) {
  write_matrix(w, m.means);
  write_matrix(w, m.weights);
  w.f64s(m.biases);
  w.f64s(m.priors);
  const auto d = static_cast<std::size_t>(m.scatter.rows());
  w.u64(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) w.f64(m.scatter(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

inline lda::LdaModel read_lda(Reader& r) {
  lda::LdaModel m;
  m.means = read_matrix(r);
  m.weights = read_matrix(r);
  m.biases = r.f64s();
  m.priors = r.f64s();
  const auto d = r.u64();
  if (d > 0 && d > r.remaining() / 8 / d) throw TruncationError("truncated scatter", r.position() + d * d * 8, r.size());
  m.scatter.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m.scatter(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.f64();
  const auto K = m.means.size();
  if (K < 2 || m.weights.size() != K || m.biases.size() != K || m.priors.size() != K || m.dims() != d ||
      (K > 0 && m.weights.front().size() != d))
    throw FormatError("inconsistent LDA section");
  return m;
}

// priors | means | variances | floor | mode u8 | svm
inline void write_nbsvm(Writer& w, const nbsvm::NbSvmModel& m) {
  w.f64s(m.nb.priors);
  write_matrix(w, m.nb.means);
  write_matrix(w, m.nb.variances);
  w.f64(m.nb.var_floor);
  w.u8(static_cast<std::uint8_t>(m.mode));
  write_svm(w, m.svm);
}

inline nbsvm::NbSvmModel read_nbsvm(Reader& r) {
  nbsvm::NbSvmModel m;
  m.nb.priors = r.f64s();
  m.nb.means = read_matrix(r);
  m.nb.variances = read_matrix(r);
  m.nb.var_floor = r.f64();
  const auto mode = r.u8();
  if (mode > 2) throw FormatError("unknown NB transform mode");
  m.mode = static_cast<nbsvm::TransformMode>(mode);
  m.svm = read_svm(r);
  const auto K = m.nb.priors.size();
  if (m.nb.means.size() != K || m.nb.variances.size() != K || static_cast<std::size_t>(m.svm.num_classes) != K)
    throw FormatError("inconsistent NB-SVM section");
  return m;
}

// classes u32 | max_features u64 | seed u64 | oob f64 | trees u32 |
// per tree: nodes u32 | per node (preorder): feature i32, threshold f64,
// left i32, right i32, label i32, counts (classes x u32)
inline void write_forest(Writer& w, const forest::ForestModel& m) {
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  w.u64(m.max_features);
  w.u64(m.seed);
  w.f64(m.oob_accuracy);
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (const auto& t : m.trees) {
    w.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.i32(n.label);
      for (auto c : n.counts) w.u32(c);
    }
  }
}

inline forest::ForestModel read_forest(Reader& r) {
  forest::ForestModel m;
  m.num_classes = static_cast<int>(r.u32());
  if (m.num_classes < 2 || m.num_classes > 64) throw FormatError("implausible class count");
  m.max_features = static_cast<std::size_t>(r.u64());
  m.seed = r.u64();
  m.oob_accuracy = r.f64();
  const auto nt = r.u32();
  const std::size_t node_bytes = 24 + 4 * static_cast<std::size_t>(m.num_classes);
  for (std::uint32_t t = 0; t < nt; ++t) {
    forest::Tree tree;
    const auto nn = r.u32();
    if (nn == 0 || nn > r.remaining() / node_bytes) throw TruncationError("truncated tree", r.position() + nn * node_bytes, r.size());
    tree.nodes.resize(nn);
    for (auto& n : tree.nodes) {
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.label = r.i32();
      n.counts.resize(static_cast<std::size_t>(m.num_classes));
      for (auto& c : n.counts) c = r.u32();
      if (n.label < 0 || n.label >= m.num_classes) throw FormatError("tree leaf label out of range");
    }
    // Children must point forward (preorder), which also rules out cycles.
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      if (n.is_leaf()) continue;
      if (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) ||
          n.left >= static_cast<std::int32_t>(nn) || n.right >= static_cast<std::int32_t>(nn))
        throw FormatError("tree child index out of range");
    }
    m.trees.push_back(std::move(tree));
  }
  if (m.trees.empty()) throw FormatError("forest has no trees");
  return m;
}

// arch (7 x u64) | input mean f64 | input scale f64 |
// 8 parameter arrays, each: ndims u32, dims u64..., then f64 array
inline void write_cnn(Writer& w, const CnnClassifier& c) {
  const auto& a = c.net.arch;
  for (auto v : {a.in_channels, a.height, a.width, a.conv1_channels, a.conv2_channels, a.hidden, a.classes}) w.u64(v);
  w.f64(c.input_mean);
  w.f64(c.input_scale);
  auto shaped = [&](std::initializer_list<std::size_t> dims, const Vector& v) {
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u64(d);
    w.f64s(v);
  };
  const auto& n = c.net;
  shaped({a.conv1_channels, a.in_channels, 3, 3}, n.conv1.weight);
  shaped({a.conv1_channels}, n.conv1.bias);
  shaped({a.conv2_channels, a.conv1_channels, 3, 3}, n.conv2.weight);
  shaped({a.conv2_channels}, n.conv2.bias);
  shaped({a.hidden, a.flat_size()}, n.fc1.weight);
  shaped({a.hidden}, n.fc1.bias);
  shaped({a.classes, a.hidden}, n.fc2.weight);
  shaped({a.classes}, n.fc2.bias);
}

inline CnnClassifier read_cnn(Reader& r) {
  cnn::CnnArch a;
  std::array<std::size_t*, 7> fields = {&a.in_channels, &a.height, &a.width, &a.conv1_channels, &a.conv2_channels, &a.hidden, &a.classes};
  for (auto* f : fields) {
    const auto v = r.u64();
    if (v > (1u << 16)) throw FormatError("implausible CNN dimension");
    *f = static_cast<std::size_t>(v);
  }
  try {
    a.validate();
  } catch (const PreconditionError& e) {
    throw FormatError(e.what());
  }
  // Each parameter takes at least 8 bytes; reject sizes the input cannot hold
  // before allocating. Computed in double since the products can overflow.
  const double k = 9.0;
  const double params = static_cast<double>(a.conv1_channels) * (static_cast<double>(a.in_channels) * k + 1.0) +
                        static_cast<double>(a.conv2_channels) * (static_cast<double>(a.conv1_channels) * k + 1.0) +
                        static_cast<double>(a.hidden) * (static_cast<double>(a.flat_size()) + 1.0) +
                        static_cast<double>(a.classes) * (static_cast<double>(a.hidden) + 1.0);
  if (params * 8.0 > static_cast<double>(r.remaining())) throw FormatError("CNN architecture larger than the model body");
  CnnClassifier c;
  c.input_mean = r.f64();
  c.input_scale = r.f64();
  c.net = cnn::CnnModel::zeros(a);
  for (auto* p : c.net.parameters()) {
    const auto nd = r.u32();
    if (nd > 8) throw FormatError("implausible tensor rank");
    std::size_t expect = 1;
    for (std::uint32_t i = 0; i < nd; ++i) expect *= static_cast<std::size_t>(r.u64());
    auto v = r.f64s();
    if (v.size() != expect || v.size() != p->size()) throw FormatError("CNN parameter shape mismatch");
    *p = std::move(v);
  }
  return c;
}

}  // namespace model_io

inline std::size_t write_model(const TrainedModel& m, std::ostream& sink) {
  binio::Writer w(sink);
  w.text(kModelMagic);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u16(kModelVersion);
  w.u8(static_cast<std::uint8_t>(m.features));
  w.f64s(m.scaler.mean);
  w.f64s(m.scaler.stddev);
  std::visit(
      [&](const auto& mdl) {
        using T = std::decay_t<decltype(mdl)>;
        if constexpr (std::is_same_v<T, lda::LdaModel>) model_io::write_lda(w, mdl);
        else if constexpr (std::is_same_v<T, nbsvm::NbSvmModel>) model_io::write_nbsvm(w, mdl);
        else if constexpr (std::is_same_v<T, svm::MulticlassSvm>) model_io::write_svm(w, mdl);
        else if constexpr (std::is_same_v<T, forest::ForestModel>) model_io::write_forest(w, mdl);
        else model_io::write_cnn(w, mdl);
      },
      m.model);
  return w.written();
}

inline TrainedModel parse_model(std::span<const unsigned char> bytes) {
  binio::Reader r(bytes);
  r.require(4, "truncated model header");
  auto magic = r.bytes(4);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != kModelMagic) throw FormatError("bad magic: not a CSM1 model file");
  TrainedModel m;
  const auto kind = r.u8();
  if (kind > 4) throw FormatError("unknown model kind " + std::to_string(kind));
  m.kind = static_cast<ModelKind>(kind);
  const auto version = r.u16();
  if (version != kModelVersion) throw FormatError("unsupported CSM1 version " + std::to_string(version));
  const auto fk = r.u8();
  if (fk > 1) throw FormatError("unknown feature kind");
  m.features = static_cast<FeatureKind>(fk);
  m.scaler.mean = r.f64s();
  m.scaler.stddev = r.f64s();
  if (m.scaler.mean.size() != m.scaler.stddev.size()) throw FormatError("scaler size mismatch");
  const std::size_t expect_dims = m.kind == ModelKind::Cnn ? 0 : feature_size(m.features);
  if (m.scaler.mean.size() != expect_dims) throw FormatError("scaler does not match feature kind");

  auto check_dims = [&](std::size_t d) {
    if (d != expect_dims) throw FormatError("model input dimension does not match feature kind");
  };
  switch (m.kind) {
    case ModelKind::Lda: {
      auto l = model_io::read_lda(r);
      check_dims(l.dims());
      m.model = std::move(l);
      break;
    }
    case ModelKind::NbSvm: {
      auto n = model_io::read_nbsvm(r);
      check_dims(n.nb.dims());
      m.model = std::move(n);
      break;
    }
    case ModelKind::KernelSvm: m.model = model_io::read_svm(r); break;
    case ModelKind::Forest: {
      auto f = model_io::read_forest(r);
      for (const auto& t : f.trees)
        for (const auto& n : t.nodes)
          if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= expect_dims) throw FormatError("split feature out of range");
      m.model = std::move(f);
      break;
    }
    case ModelKind::Cnn: {
      auto c = model_io::read_cnn(r);
      if (c.net.arch.input_size() != kCnnInputSize) throw FormatError("CNN input size does not match CSI layout");
      m.model = std::move(c);
      break;
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after model body");
  if (const auto* s = std::get_if<svm::MulticlassSvm>(&m.model)) {
    for (const auto& mach : s->machines)
      for (const auto& sv : mach.support) check_dims(sv.size());
  }
  return m;
}

inline TrainedModel read_model(std::istream& source) {
  const auto bytes = binio::slurp(source);
  return parse_model(bytes);
}

}  // namespace csisense
