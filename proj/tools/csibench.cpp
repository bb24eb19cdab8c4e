// csibench: command-line driver for generating CSI datasets, training the
// five posture classifiers and producing evaluation reports.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "csisense.hpp"

namespace fs = std::filesystem;
using namespace csisense;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitProtocol = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string extension(const std::string& path) {
  auto ext = fs::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path, 0);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path, 0);
}

Json file_entry(const std::string& path) {
  const auto bytes = read_file(path);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return Json{{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", hex}};
}

/// Manifest of resolved parameters plus input/output fingerprints.
struct Manifest {
  Json j;
  explicit Manifest(const std::string& command, unsigned threads) {
    j["tool"] = "csibench";
    j["schema"] = 1;
    j["command"] = command;
    j["threads"] = threads;
    j["params"] = Json::object();
    j["inputs"] = Json::array();
    j["outputs"] = Json::array();
  }
  void input(const std::string& p) { j["inputs"].push_back(file_entry(p)); }
  void output(const std::string& p) { j["outputs"].push_back(file_entry(p)); }
  void write(const std::string& path) { write_file(path, j.dump(2) + "\n"); }
};

std::string serialize_dataset(const Dataset& d, const std::string& path) {
  std::ostringstream out(std::ios::binary);
  const auto ext = extension(path);
  if (ext == ".csd") write_csd(d, out);
  else if (ext == ".npy") write_npy(d, out);
  else throw UsageError("unsupported dataset extension '" + ext + "' (expected .csd or .npy)");
  return out.str();
}

Dataset load_labeled(const std::string& path) {
  const auto ext = extension(path);
  if (ext == ".npy") throw UsageError(path + ": NPY files carry no labels; convert to .csd first");
  if (ext != ".csd") throw UsageError("unsupported dataset extension '" + ext + "' (expected .csd)");
  const auto bytes = read_file(path);
  return parse_csd(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

TrainedModel load_model(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_model(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

std::string serialize_model(const TrainedModel& m) {
  std::ostringstream out(std::ios::binary);
  write_model(m, out);
  return out.str();
}

const std::vector<std::string> kModelChoices = {"lda", "nbsvm", "ksvm", "forest", "cnn"};

/// Hyperparameter overrides shared by train, curve and crossenv.
struct Hyper {
  std::string features = "mean";
  std::optional<double> ridge, C, tol, gamma, coef0, lr, momentum;
  std::optional<int> max_passes, degree, max_depth, epochs;
  std::optional<std::size_t> trees, max_features, min_split, batch;
  std::string kernel = "rbf";
  std::string nb_mode = "likelihood";

  void attach(CLI::App* c) {
    c->add_option("--features", features, "Classical feature kind")->check(CLI::IsMember({"mean", "raw"}));
    c->add_option("--ridge", ridge, "LDA ridge factor");
    c->add_option("--C", C, "SVM box constraint");
    c->add_option("--tol", tol, "SMO tolerance");
    c->add_option("--max-passes", max_passes, "SMO iteration cap in passes over the data");
    c->add_option("--kernel", kernel, "Kernel SVM kernel")->check(CLI::IsMember({"linear", "poly", "rbf"}));
    c->add_option("--gamma", gamma, "RBF gamma (default: 1/(d*var))");
    c->add_option("--degree", degree, "Polynomial degree");
    c->add_option("--coef0", coef0, "Polynomial offset c");
    c->add_option("--nb-mode", nb_mode, "NB-to-SVM interface")->check(CLI::IsMember({"likelihood", "posterior", "identity"}));
    c->add_option("--trees", trees, "Forest size");
    c->add_option("--max-features", max_features, "Features tried per split (default ceil(sqrt(d)))");
    c->add_option("--max-depth", max_depth, "Tree depth limit (-1: unlimited)");
    c->add_option("--min-samples-split", min_split, "Smallest node that may split");
    c->add_option("--epochs", epochs, "CNN epochs");
    c->add_option("--batch", batch, "CNN minibatch size");
    c->add_option("--lr", lr, "CNN learning rate");
    c->add_option("--momentum", momentum, "CNN momentum");
  }

  ModelSpec spec(ModelKind kind, unsigned threads) const {
    auto s = ModelSpec::defaults(kind);
    s.threads = threads;
    s.features = features == "raw" ? FeatureKind::Raw : FeatureKind::MeanAmplitude;
    if (ridge) s.lda_ridge = *ridge;
    if (C) s.smo.C = *C;
    if (tol) s.smo.tol = *tol;
    if (max_passes) s.smo.max_passes = *max_passes;
    s.kernel = kernel == "linear" ? svm::KernelKind::Linear : kernel == "poly" ? svm::KernelKind::Polynomial : svm::KernelKind::Rbf;
    if (gamma) s.rbf_gamma = *gamma;
    if (degree) s.poly_d = *degree;
    if (coef0) s.poly_c = *coef0;
    s.nb_mode = nb_mode == "posterior"  ? nbsvm::TransformMode::Posterior
                : nb_mode == "identity" ? nbsvm::TransformMode::Identity
                                        : nbsvm::TransformMode::PerFeatureLikelihood;
    if (trees) s.n_trees = *trees;
    if (max_features) s.max_features = *max_features;
    if (max_depth) s.max_depth = *max_depth;
    if (min_split) s.min_samples_split = *min_split;
    if (epochs) s.cnn.epochs = static_cast<std::size_t>(*epochs);
    if (batch) s.cnn.batch_size = *batch;
    if (lr) s.cnn.learning_rate = *lr;
    if (momentum) s.cnn.momentum = *momentum;
    return s;
  }

  Json to_json(const ModelSpec& s) const {
    Json j;
    j["model"] = std::string(model_name(s.kind));
    switch (s.kind) {
      case ModelKind::Lda:
        j["features"] = features;
        j["ridge"] = s.lda_ridge;
        break;
      case ModelKind::NbSvm:
        j["features"] = features;
        j["nb_mode"] = nb_mode;
        j["C"] = s.smo.C;
        j["tol"] = s.smo.tol;
        j["max_passes"] = s.smo.max_passes;
        break;
      case ModelKind::KernelSvm:
        j["features"] = features;
        j["kernel"] = kernel;
        j["gamma"] = s.rbf_gamma > 0.0 ? Json(s.rbf_gamma) : Json("scale");
        j["degree"] = s.poly_d;
        j["coef0"] = s.poly_c;
        j["C"] = s.smo.C;
        j["tol"] = s.smo.tol;
        j["max_passes"] = s.smo.max_passes;
        break;
      case ModelKind::Forest:
        j["features"] = features;
        j["trees"] = s.n_trees;
        j["max_features"] = s.max_features == 0 ? Json("sqrt") : Json(s.max_features);
        j["max_depth"] = s.max_depth;
        j["min_samples_split"] = s.min_samples_split;
        break;
      case ModelKind::Cnn:
        j["epochs"] = s.cnn.epochs;
        j["batch"] = s.cnn.batch_size;
        j["lr"] = s.cnn.learning_rate;
        j["momentum"] = s.cnn.momentum;
        break;
    }
    return j;
  }
};

std::vector<ModelKind> parse_model_list(const std::string& list) {
  std::vector<ModelKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto k = parse_model_kind(item);
    if (!k) throw UsageError("unknown model '" + item + "'; choose from lda, nbsvm, ksvm, forest, cnn");
    out.push_back(*k);
  }
  if (out.empty()) throw UsageError("--models needs at least one model");
  return out;
}

std::string validate_sets(const std::string& sets) {
  if (sets.empty()) throw UsageError("--sets needs at least one of A..F");
  for (char c : sets)
    if (c < 'A' || c > 'F') throw UsageError(std::string("unknown training set '") + c + "'");
  return sets;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string env;
  std::optional<std::size_t> per_class;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_gen(const GenArgs& a, unsigned threads) {
  const auto envs = synth::default_envs();
  const auto& env = a.env == "A" ? envs.a : envs.b;
  const std::size_t n = a.per_class.value_or(a.env == "A" ? 2000 : 100);
  if (const auto ext = extension(a.out); ext != ".csd" && ext != ".npy")
    throw UsageError("unsupported dataset extension '" + ext + "' (expected .csd or .npy)");
  if (extension(a.out) == ".npy") std::cerr << "warning: NPY output stores tensors only; labels are dropped\n";
  const auto d = synth::gen_dataset(env, {n, n, n}, a.seed, threads);
  write_file(a.out, serialize_dataset(d, a.out));
  Manifest m("gen", threads);
  m.j["params"] = Json{{"env", a.env}, {"per_class", n}, {"seed", a.seed}, {"out", a.out}};
  m.output(a.out);
  m.write(a.out + ".manifest.json");
  std::cout << "wrote " << d.size() << " samples (env " << env.env_id << ") to " << a.out << "\n";
  return kExitOk;
}

struct ConvertArgs {
  std::string in, out, label, labels_from, env;
};

int cmd_convert(const ConvertArgs& a, unsigned threads) {
  const auto in_ext = extension(a.in), out_ext = extension(a.out);
  for (const auto& e : {in_ext, out_ext})
    if (e != ".csd" && e != ".npy") throw UsageError("unsupported extension '" + e + "' (expected .csd or .npy)");
  const auto bytes = read_file(a.in);
  const std::span<const unsigned char> view(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  Dataset d;
  if (in_ext == ".csd") {
    d = parse_csd(view);
  } else {
    const auto t = parse_npy(view);
    std::vector<PostureLabel> labels;
    std::string env = a.env;
    if (!a.labels_from.empty()) {
      const auto src = load_labeled(a.labels_from);
      if (src.size() != t.sample_count())
        throw DataError("label source has " + std::to_string(src.size()) + " samples, NPY has " + std::to_string(t.sample_count()));
      for (const auto& s : src.samples) labels.push_back(s.label);
      if (env.empty()) env = src.environment_id;
    } else if (!a.label.empty()) {
      std::optional<PostureLabel> l;
      for (auto p : kAllPostures)
        if (label_name(p) == a.label) l = p;
      if (!l) throw UsageError("unknown label '" + a.label + "'; choose from Stand, Sit, LieDown");
      labels.assign(t.sample_count(), *l);
    } else if (out_ext == ".csd") {
      throw UsageError("NPY input has no labels; pass --label or --labels-from");
    } else {
      labels.assign(t.sample_count(), PostureLabel::Stand);
    }
    d = dataset_from_npy(t, labels, env);
  }
  if (in_ext == ".csd" && out_ext == ".npy") std::cerr << "warning: NPY output stores tensors only; labels are dropped\n";
  write_file(a.out, serialize_dataset(d, a.out));
  Manifest m("convert", threads);
  m.j["params"] = Json{{"in", a.in}, {"out", a.out}, {"label", a.label}, {"labels_from", a.labels_from}, {"env", a.env}};
  m.input(a.in);
  m.output(a.out);
  m.write(a.out + ".manifest.json");
  std::cout << "converted " << d.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string model, data, set = "F", out;
  std::uint64_t seed = 42;
  Hyper hyper;
};

int cmd_train(const TrainArgs& a, unsigned threads) {
  if (extension(a.out) != ".csm") throw UsageError("model output must end in .csm");
  const auto kind = *parse_model_kind(a.model);
  const auto data = load_labeled(a.data);
  const auto spec = a.hyper.spec(kind, threads);
  Dataset train;
  std::uint64_t seed = a.seed;
  if (a.set == "all") {
    train = data;
  } else {
    const auto plan = eval::make_split(data, a.seed);
    eval::check_no_leakage(plan);
    const auto s = eval::set_index(a.set.front());
    train = data.subset(plan.sets[s]);
    seed = eval::model_seed(a.seed, kind, s);
  }
  const auto model = train_model(spec, train, seed);
  write_file(a.out, serialize_model(model));
  Manifest m("train", threads);
  m.j["params"] = Json{{"data", a.data}, {"set", a.set}, {"seed", a.seed}, {"model_seed", seed}, {"out", a.out}};
  m.j["params"]["hyperparameters"] = a.hyper.to_json(spec);
  m.input(a.data);
  m.output(a.out);
  m.write(a.out + ".manifest.json");
  std::cout << "trained " << a.model << " on " << train.size() << " samples -> " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model, data, subset = "all", out;
  std::uint64_t seed = 42;
};

int cmd_eval(const EvalArgs& a, unsigned threads) {
  const auto model = load_model(a.model);
  auto data = load_labeled(a.data);
  std::string set = "all";
  if (a.subset == "validation") {
    const auto plan = eval::make_split(data, a.seed);
    eval::check_no_leakage(plan);
    data = data.subset(plan.validation);
    set = "validation";
  }
  auto r = eval::evaluate(model, data);
  r.set = set;
  const std::vector<eval::EvalReport> reports{r};
  write_file(a.out + ".json", eval::reports_json("eval", a.seed, reports));
  write_file(a.out + ".csv", eval::reports_csv(reports));
  Manifest m("eval", threads);
  m.j["params"] = Json{{"model", a.model}, {"data", a.data}, {"subset", a.subset}, {"seed", a.seed}, {"out", a.out}};
  m.input(a.model);
  m.input(a.data);
  m.output(a.out + ".json");
  m.output(a.out + ".csv");
  m.write(a.out + ".manifest.json");
  std::printf("%s on %s (%llu samples): accuracy %.4f, macro-F1 %.4f\n", r.model.c_str(), a.data.c_str(),
              static_cast<unsigned long long>(r.samples), r.accuracy, r.macro_f1);
  return kExitOk;
}

struct CurveArgs {
  std::string data, out_dir, models = "lda,nbsvm,ksvm,forest,cnn", sets = "ABCDEF";
  std::uint64_t seed = 42;
  bool save_models = false;
  Hyper hyper;
};

int cmd_curve(const CurveArgs& a, unsigned threads) {
  const auto kinds = parse_model_list(a.models);
  const auto data = load_labeled(a.data);
  eval::CurveOptions opt;
  opt.threads = threads;
  opt.sets = validate_sets(a.sets);
  Json specs = Json::array();
  for (auto k : kinds) {
    opt.models.push_back(a.hyper.spec(k, threads));
    specs.push_back(a.hyper.to_json(opt.models.back()));
  }
  std::vector<std::string> saved;
  opt.on_trained = [&](const ModelSpec& s, char set, const TrainedModel& m) {
    std::cerr << "  trained " << model_name(s.kind) << " on Set " << set << "\n";
    if (!a.save_models) return;
    const auto path = (fs::path(a.out_dir) / "models" / (std::string(model_name(s.kind)) + "_" + set + ".csm")).string();
    write_file(path, serialize_model(m));
    saved.push_back(path);
  };
  const auto cells = eval::learning_curve(data, a.seed, opt);
  const auto json_path = (fs::path(a.out_dir) / "curve.json").string();
  const auto csv_path = (fs::path(a.out_dir) / "curve.csv").string();
  write_file(json_path, eval::reports_json("curve", a.seed, cells));
  write_file(csv_path, eval::reports_csv(cells));
  Manifest m("curve", threads);
  m.j["params"] = Json{{"data", a.data}, {"seed", a.seed}, {"sets", a.sets}, {"out_dir", a.out_dir}, {"models", specs}};
  m.input(a.data);
  m.output(json_path);
  m.output(csv_path);
  for (const auto& p : saved) m.output(p);
  m.write((fs::path(a.out_dir) / "manifest.json").string());
  for (const auto& c : cells) std::printf("%-7s Set %s  accuracy %.4f\n", c.model.c_str(), c.set.c_str(), c.accuracy);
  return kExitOk;
}

struct CrossArgs {
  std::string train, test, out_dir, models_dir, models = "lda,nbsvm,ksvm,forest,cnn";
  std::uint64_t seed = 42;
  Hyper hyper;
};

int cmd_crossenv(const CrossArgs& a, unsigned threads) {
  const auto kinds = parse_model_list(a.models);
  const auto data = load_labeled(a.train);
  const auto other = load_labeled(a.test);
  const auto plan = eval::make_split(data, a.seed);
  eval::check_no_leakage(plan);
  const auto set_f = data.subset(plan.sets.back());
  Manifest m("crossenv", threads);
  m.input(a.train);
  m.input(a.test);
  std::vector<TrainedModel> models;
  for (auto k : kinds) {
    if (!a.models_dir.empty()) {
      const auto path = (fs::path(a.models_dir) / (std::string(model_name(k)) + "_F.csm")).string();
      models.push_back(load_model(path));
      if (models.back().kind != k) throw FormatError(path + " holds a " + std::string(model_name(models.back().kind)) + " model");
      m.input(path);
    } else {
      models.push_back(train_model(a.hyper.spec(k, threads), set_f, eval::model_seed(a.seed, k, plan.sets.size() - 1)));
    }
  }
  std::vector<eval::NamedModel> named;
  for (const auto& md : models) named.push_back({std::string(model_name(md.kind)), &md});
  const auto control = train_model(ModelSpec::defaults(ModelKind::Lda), set_f, eval::model_seed(a.seed, ModelKind::Lda, plan.sets.size() - 1));
  const auto res = eval::cross_env(named, control, other, a.seed);
  const auto json_path = (fs::path(a.out_dir) / "crossenv.json").string();
  const auto csv_path = (fs::path(a.out_dir) / "crossenv.csv").string();
  write_file(json_path, eval::reports_json("crossenv", a.seed, res.reports, &res.control));
  write_file(csv_path, eval::reports_csv(res.reports));
  m.j["params"] = Json{{"train", a.train}, {"test", a.test}, {"seed", a.seed}, {"models_dir", a.models_dir}, {"models", a.models}};
  m.output(json_path);
  m.output(csv_path);
  m.write((fs::path(a.out_dir) / "manifest.json").string());
  for (const auto& r : res.reports) std::printf("%-7s env %s  accuracy %.4f\n", r.model.c_str(), r.env.c_str(), r.accuracy);
  std::printf("%-7s env %s  accuracy %.4f\n", "control", res.control.env.c_str(), res.control.accuracy);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csibench - WLAN CSI posture recognition benchmark"};
  app.require_subcommand(1);
  unsigned threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (default: CSI_BENCH_THREADS, then all cores)")
      ->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  c_gen->add_option("--env", gen.env, "Environment")->required()->check(CLI::IsMember({"A", "B"}));
  c_gen->add_option("--per-class", gen.per_class, "Samples per posture (default 2000 for A, 100 for B)");
  c_gen->add_option("--seed", gen.seed, "Random seed");
  c_gen->add_option("--out", gen.out, "Output .csd or .npy file")->required();

  ConvertArgs conv;
  auto* c_conv = app.add_subcommand("convert", "Convert between CSD1 and NPY");
  c_conv->add_option("in", conv.in, "Input file")->required();
  c_conv->add_option("out", conv.out, "Output file")->required();
  c_conv->add_option("--label", conv.label, "Label for every sample of an NPY input");
  c_conv->add_option("--labels-from", conv.labels_from, "CSD file supplying labels for an NPY input");
  c_conv->add_option("--env", conv.env, "Environment tag for an NPY input");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train one model");
  c_train->add_option("--model", train.model, "Model kind")->required()->check(CLI::IsMember(kModelChoices));
  c_train->add_option("--data", train.data, "Labeled .csd dataset")->required();
  c_train->add_option("--set", train.set, "Training set A-F, or 'all'")->check(CLI::IsMember({"A", "B", "C", "D", "E", "F", "all"}));
  c_train->add_option("--seed", train.seed, "Split and training seed");
  c_train->add_option("--out", train.out, "Output .csm model")->required();
  train.hyper.attach(c_train);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a model file");
  c_eval->add_option("--model", ev.model, "Model .csm file")->required();
  c_eval->add_option("--data", ev.data, "Labeled .csd dataset")->required();
  c_eval->add_option("--subset", ev.subset, "Which samples to score")->check(CLI::IsMember({"all", "validation"}));
  c_eval->add_option("--seed", ev.seed, "Split seed for --subset validation");
  c_eval->add_option("--out", ev.out, "Report path prefix (.json and .csv are appended)")->required();

  CurveArgs curve;
  auto* c_curve = app.add_subcommand("curve", "Learning curve over Sets A-F");
  c_curve->add_option("--data", curve.data, "Labeled .csd dataset")->required();
  c_curve->add_option("--seed", curve.seed, "Protocol seed");
  c_curve->add_option("--out-dir", curve.out_dir, "Output directory")->required();
  c_curve->add_option("--models", curve.models, "Comma-separated model list");
  c_curve->add_option("--sets", curve.sets, "Training sets to run, e.g. AF");
  c_curve->add_flag("--save-models", curve.save_models, "Write every trained model to <out-dir>/models");
  curve.hyper.attach(c_curve);

  CrossArgs cross;
  auto* c_cross = app.add_subcommand("crossenv", "Score Set-F models on another environment");
  c_cross->add_option("--train", cross.train, "Labeled .csd dataset of the training environment")->required();
  c_cross->add_option("--test", cross.test, "Labeled .csd dataset of the other environment")->required();
  c_cross->add_option("--seed", cross.seed, "Protocol seed");
  c_cross->add_option("--out-dir", cross.out_dir, "Output directory")->required();
  c_cross->add_option("--models-dir", cross.models_dir, "Directory with <model>_F.csm files (default: train them)");
  c_cross->add_option("--models", cross.models, "Comma-separated model list");
  cross.hyper.attach(c_cross);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  const unsigned threads = resolve_threads(threads_flag);
  try {
    if (*c_gen) return cmd_gen(gen, threads);
    if (*c_conv) return cmd_convert(conv, threads);
    if (*c_train) return cmd_train(train, threads);
    if (*c_eval) return cmd_eval(ev, threads);
    if (*c_curve) return cmd_curve(curve, threads);
    if (*c_cross) return cmd_crossenv(cross, threads);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
