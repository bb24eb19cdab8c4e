#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "csisense/csi_data.hpp"
#include "csisense/error.hpp"
#include "csisense/model.hpp"
#include "csisense/rng.hpp"

namespace csisense::eval {

inline constexpr std::size_t kValidationPerClass = 200;
inline constexpr std::array<std::size_t, 6> kSetSizes = {300, 600, 900, 1200, 1500, 1800};
inline constexpr std::array<char, 6> kSetNames = {'A', 'B', 'C', 'D', 'E', 'F'};

inline std::size_t set_index(char name) {
  for (std::size_t i = 0; i < kSetNames.size(); ++i)
    if (kSetNames[i] == name) return i;
  throw PreconditionError(std::string("unknown training set '") + name + "'");
}

/// Indices into a dataset. Training sets are nested: A is a prefix of B, and so on.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::size_t> validation;
  std::array<std::vector<std::size_t>, 6> sets;
};

/// Per class: shuffle that class's indices, take the first 200 for
/// validation and the following ones, in order, as the training pool.
inline SplitPlan make_split(const Dataset& d, std::uint64_t seed) {
  const std::size_t need = kValidationPerClass + kSetSizes.back();
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(class_index(d.samples[i].label))].push_back(i);
  for (auto c : kAllPostures) {
    const auto have = by_class[static_cast<std::size_t>(class_index(c))].size();
    if (have < need)
      throw ProtocolError("class " + std::string(label_name(c)) + " has " + std::to_string(have) + " samples; the protocol needs " +
                          std::to_string(need));
  }
  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    Rng rng(derive_seed(seed, c));
    shuffle(std::span<std::size_t>(idx), rng);
    plan.validation.insert(plan.validation.end(), idx.begin(), idx.begin() + kValidationPerClass);
    for (std::size_t s = 0; s < kSetSizes.size(); ++s)
      plan.sets[s].insert(plan.sets[s].end(), idx.begin() + kValidationPerClass, idx.begin() + kValidationPerClass + kSetSizes[s]);
  }
  std::sort(plan.validation.begin(), plan.validation.end());
  for (auto& s : plan.sets) std::sort(s.begin(), s.end());
  return plan;
}

/// Throws ProtocolError if any validation index also appears in a training set.
inline void check_no_leakage(const SplitPlan& plan) {
  const std::set<std::size_t> val(plan.validation.begin(), plan.validation.end());
  for (std::size_t s = 0; s < plan.sets.size(); ++s)
    for (auto i : plan.sets[s])
      if (val.count(i))
        throw ProtocolError("sample " + std::to_string(i) + " is in both validation and Set " + std::string(1, kSetNames[s]));
}

using Confusion = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;  // [truth][predicted]

struct EvalReport {
  std::string model;
  std::string set;
  std::string env;
  Confusion confusion{};
  std::uint64_t samples = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  double macro_f1 = 0.0;
};

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

/// Fills every metric from the confusion matrix. Zero denominators give 0.
inline void compute_metrics(EvalReport& r) {
  std::uint64_t total = 0, diag = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t)
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      total += r.confusion[t][p];
      if (t == p) diag += r.confusion[t][p];
    }
  r.samples = total;
  r.accuracy = safe_ratio(static_cast<double>(diag), static_cast<double>(total));
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::uint64_t col = 0, row = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      col += r.confusion[k][c];
      row += r.confusion[c][k];
    }
    const auto tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = safe_ratio(tp, static_cast<double>(col));
    r.recall[c] = safe_ratio(tp, static_cast<double>(row));
    r.f1[c] = safe_ratio(2.0 * r.precision[c] * r.recall[c], r.precision[c] + r.recall[c]);
    f1_sum += r.f1[c];
  }
  r.macro_f1 = f1_sum / static_cast<double>(kNumClasses);
}

inline EvalReport report_from(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DimensionError("truth/prediction count mismatch");
  EvalReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= static_cast<int>(kNumClasses) || predicted[i] < 0 || predicted[i] >= static_cast<int>(kNumClasses))
      throw PreconditionError("class index out of range");
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  compute_metrics(r);
  return r;
}

inline std::vector<int> truth_of(const Dataset& d) {
  std::vector<int> y(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) y[i] = class_index(d.samples[i].label);
  return y;
}

inline EvalReport evaluate(const TrainedModel& m, const Dataset& d) {
  const auto pred = predict_all(m, d);
  const auto truth = truth_of(d);
  auto r = report_from(truth, pred);
  r.model = std::string(model_name(m.kind));
  r.env = d.environment_id;
  return r;
}

/// Per-model training recipe; seeds are derived from the protocol seed.
struct CurveOptions {
  std::vector<ModelSpec> models;
  unsigned threads = 1;
  std::string sets = "ABCDEF";  // subset of the grid's columns to run
  std::function<void(const ModelSpec&, char set, const TrainedModel&)> on_trained;
};

inline std::vector<ModelSpec> default_models(unsigned threads = 1) {
  std::vector<ModelSpec> out;
  for (auto k : kAllModelKinds) {
    auto s = ModelSpec::defaults(k);
    s.threads = threads;
    out.push_back(s);
  }
  return out;
}

inline std::uint64_t model_seed(std::uint64_t seed, ModelKind k, std::size_t set) {
  return derive_seed(derive_seed(seed, 1000 + static_cast<std::uint64_t>(k)), set);
}

/// Trains every model on every nested set and scores it on the held-out
/// validation samples. Cells are ordered by model, then set.
inline std::vector<EvalReport> learning_curve(const Dataset& d, std::uint64_t seed, const CurveOptions& opt) {
  const auto plan = make_split(d, seed);
  check_no_leakage(plan);
  const Dataset val = d.subset(plan.validation);
  std::vector<EvalReport> cells;
  for (const auto& spec : opt.models) {
    for (std::size_t s = 0; s < plan.sets.size(); ++s) {
      if (opt.sets.find(kSetNames[s]) == std::string::npos) continue;
      const Dataset train = d.subset(plan.sets[s]);
      auto sp = spec;
      sp.threads = opt.threads;
      const auto m = train_model(sp, train, model_seed(seed, spec.kind, s));
      auto r = evaluate(m, val);
      r.set = std::string(1, kSetNames[s]);
      cells.push_back(std::move(r));
      if (opt.on_trained) opt.on_trained(spec, kSetNames[s], m);
    }
  }
  return cells;
}

/// Permutation control: `control` scored against a seeded shuffle of the
/// other environment's labels, which severs any link between CSI and label.
inline EvalReport shuffled_label_report(const TrainedModel& control, const Dataset& other, std::uint64_t seed) {
  Dataset permuted = other;
  std::vector<PostureLabel> labels;
  for (const auto& s : permuted.samples) labels.push_back(s.label);
  Rng rng(derive_seed(seed, 0x5EED));
  shuffle(std::span<PostureLabel>(labels), rng);
  for (std::size_t i = 0; i < labels.size(); ++i) permuted.samples[i].label = labels[i];
  return evaluate(control, permuted);
}

struct NamedModel {
  std::string name;
  const TrainedModel* model = nullptr;
};

struct CrossEnvResult {
  std::vector<EvalReport> reports;
  EvalReport control;
};

/// Scores each model on the other environment, plus the permutation control.
inline CrossEnvResult cross_env(std::span<const NamedModel> models, const TrainedModel& control, const Dataset& other,
                                std::uint64_t seed, const std::string& set = "F") {
  CrossEnvResult out;
  for (const auto& nm : models) {
    auto r = evaluate(*nm.model, other);
    r.model = nm.name;
    r.set = set;
    out.reports.push_back(std::move(r));
  }
  out.control = shuffled_label_report(control, other, seed);
  out.control.model = "control";
  out.control.set = set;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr int kReportSchema = 1;

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["set"] = r.set;
  j["env"] = r.env;
  j["samples"] = r.samples;
  auto conf = nlohmann::ordered_json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion"] = conf;
  j["accuracy"] = r.accuracy;
  auto per = nlohmann::ordered_json::array();
  for (auto c : kAllPostures) {
    const auto i = static_cast<std::size_t>(class_index(c));
    nlohmann::ordered_json e;
    e["class"] = label_name(c);
    e["precision"] = r.precision[i];
    e["recall"] = r.recall[i];
    e["f1"] = r.f1[i];
    per.push_back(e);
  }
  j["per_class"] = per;
  j["macro_f1"] = r.macro_f1;
  return j;
}

inline EvalReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.set = j.at("set").get<std::string>();
    r.env = j.at("env").get<std::string>();
    const auto& conf = j.at("confusion");
    if (conf.size() != kNumClasses) throw FormatError("confusion must be 3x3");
    for (std::size_t t = 0; t < kNumClasses; ++t) {
      if (conf[t].size() != kNumClasses) throw FormatError("confusion must be 3x3");
      for (std::size_t p = 0; p < kNumClasses; ++p) r.confusion[t][p] = conf[t][p].get<std::uint64_t>();
    }
    compute_metrics(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

/// {"schema": 1, "kind": ..., "seed": ..., "reports": [...], "control": {...}?}
inline std::string reports_json(const std::string& kind, std::uint64_t seed, std::span<const EvalReport> reports,
                                const EvalReport* control = nullptr) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["kind"] = kind;
  j["seed"] = seed;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  j["reports"] = arr;
  if (control) j["control"] = to_json(*control);
  return j.dump(2) + "\n";
}

inline std::vector<EvalReport> parse_reports_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kReportSchema) throw FormatError("unsupported report schema");
  if (!j.contains("reports") || !j["reports"].is_array()) throw FormatError("report has no 'reports' array");
  std::vector<EvalReport> out;
  for (const auto& r : j["reports"]) out.push_back(report_from_json(r));
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per report; confusion cells are c<truth><predicted>.
inline std::string reports_csv(std::span<const EvalReport> reports) {
  std::string out = "model,set,env,samples,accuracy,macro_f1";
  for (auto c : kAllPostures) {
    const std::string n(label_name(c));
    out += ",precision_" + n + ",recall_" + n + ",f1_" + n;
  }
  for (std::size_t t = 0; t < kNumClasses; ++t)
    for (std::size_t p = 0; p < kNumClasses; ++p) out += ",c" + std::to_string(t) + std::to_string(p);
  out += "\n";
  for (const auto& r : reports) {
    out += r.model + "," + r.set + "," + r.env + "," + std::to_string(r.samples) + "," + format_double(r.accuracy) + "," +
           format_double(r.macro_f1);
    for (std::size_t c = 0; c < kNumClasses; ++c)
      out += "," + format_double(r.precision[c]) + "," + format_double(r.recall[c]) + "," + format_double(r.f1[c]);
    for (const auto& row : r.confusion)
      for (auto v : row) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

}  // namespace csisense::eval
