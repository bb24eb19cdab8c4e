// Acceptance runner: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
//
//   acceptance [work_dir]
//
// Criteria 8-11 drive the csibench binary end to end and write their
// datasets, models and reports under work_dir.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace csisense;
using namespace testing_support;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kPolyLinearTol = 1e-12;
constexpr double kLdaAngleTol = 1e-8;
constexpr double kDualRelTol = 1e-3;
constexpr double kKktTol = 1e-3;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kSoftmaxSumTol = 1e-12;
constexpr double kMetricTol = 1e-12;
constexpr double kInEnvFloor = 0.85;
constexpr double kAllModelsFloor = 0.50;
constexpr double kCurveSlack = 0.02;
constexpr double kCrossCeiling = 0.50;
constexpr double kCrossDrop = 0.30;
constexpr double kChance = 1.0 / 3.0;
constexpr double kChanceBand = 0.08;
constexpr double kFormatBudgetS = 60.0;
constexpr double kGradBudgetS = 30.0;
constexpr double kProtocolBudgetS = 600.0;

struct Result {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Format fidelity
// ---------------------------------------------------------------------------

Dataset random_tagged_dataset(Rng& rng, std::size_t n) {
  std::string tag;
  const auto len = rng.below(8);
  for (std::uint64_t i = 0; i < len; ++i) tag.push_back(static_cast<char>('A' + rng.below(26)));
  return random_dataset(rng, n, tag);
}

std::string mutate(const std::string& bytes, Rng& rng) {
  auto b = bytes;
  switch (rng.below(4)) {
    case 0: {  // overwrite bytes, biased toward the header
      const auto flips = 1 + rng.below(6);
      for (std::uint64_t i = 0; i < flips && !b.empty(); ++i) {
        const auto pos = rng.uniform() < 0.6 ? rng.below(std::min<std::size_t>(b.size(), 140)) : rng.below(b.size());
        b[pos] = static_cast<char>(rng.below(256));
      }
      break;
    }
    case 1: b.resize(rng.below(b.size() + 1)); break;
    case 2: {
      const auto pos = rng.below(b.size() + 1);
      b.insert(pos, std::string(1 + rng.below(16), static_cast<char>(rng.below(256))));
      break;
    }
    default: {  // bit flip in a float, which may produce NaN/Inf or huge phases
      if (b.empty()) break;
      const auto pos = rng.below(b.size());
      b[pos] = static_cast<char>(b[pos] ^ (1 << rng.below(8)));
      break;
    }
  }
  return b;
}

Result criterion_format() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t mismatches = 0;
  std::vector<std::string> csd_corpus, npy_corpus;
  for (int i = 0; i < 1000; ++i) {
    const auto d = random_tagged_dataset(rng, rng.below(4));
    const auto csd = csd_bytes(d);
    const auto back = parse_csd(as_span(csd));
    if (csd_bytes(back) != csd || !(back == d)) ++mismatches;
    if (i % 10 == 0) csd_corpus.push_back(csd);
    if (d.empty()) continue;
    const auto npy = npy_bytes(d);
    const auto t = parse_npy(as_span(npy));
    std::vector<PostureLabel> labels;
    for (const auto& s : d.samples) labels.push_back(s.label);
    const auto from_npy = dataset_from_npy(t, labels, d.environment_id);
    if (npy_bytes(from_npy) != npy || !(from_npy == d)) ++mismatches;
    if (i % 10 == 0) npy_corpus.push_back(npy);
  }
  std::size_t typed = 0, accepted = 0, crashes = 0;
  for (int i = 0; i < 10000; ++i) {
    const bool csd = i % 2 == 0;
    const auto& corpus = csd ? csd_corpus : npy_corpus;
    const auto bytes = mutate(corpus[rng.below(corpus.size())], rng);
    try {
      if (csd) (void)parse_csd(as_span(bytes));
      else (void)parse_npy(as_span(bytes));
      ++accepted;
    } catch (const Error&) {
      ++typed;
    } catch (...) {
      ++crashes;
    }
  }
  const double secs = seconds_since(t0);
  Result r;
  r.pass = mismatches == 0 && crashes == 0 && secs < kFormatBudgetS;
  r.detail = std::to_string(mismatches) + " round-trip mismatches; fuzz 10000: " + std::to_string(typed) + " typed errors, " +
             std::to_string(accepted) + " accepted, " + std::to_string(crashes) + " untyped; " + fmt("%.1f s", secs);
  return r;
}

// ---------------------------------------------------------------------------
// 2. Exact-arithmetic units
// ---------------------------------------------------------------------------

Result criterion_units() {
  const bool g1 = forest::gini(forest::Counts{5, 5, 5}) == 2.0 / 3.0;
  const bool g0 = forest::gini(forest::Counts{10, 0, 0}) == 0.0;
  Rng rng(7);
  bool rbf_exact = true;
  double poly_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 1 + rng.below(20);
    Vector a(d), b(d);
    for (std::size_t j = 0; j < d; ++j) {
      a[j] = rng.normal(0.0, 3.0);
      b[j] = rng.normal(0.0, 3.0);
    }
    const double gamma = std::exp(rng.uniform(-8.0, 3.0));
    if (svm::kernel_eval(svm::KernelSpec::rbf(gamma), a, a) != 1.0) rbf_exact = false;
    poly_err = std::max(poly_err, std::abs(svm::kernel_eval(svm::KernelSpec::polynomial(0.0, 1), a, b) -
                                           svm::kernel_eval(svm::KernelSpec::linear(), a, b)));
  }
  Result r;
  r.pass = g1 && g0 && rbf_exact && poly_err <= kPolyLinearTol;
  r.detail = std::string("gini(5,5,5)=2/3 ") + (g1 ? "exact" : "inexact") + ", gini(10,0,0)=0 " + (g0 ? "exact" : "inexact") +
             ", RBF K(x,x)=1 " + (rbf_exact ? "exact" : "inexact") + ", max |poly-linear| " + fmt("%.2e", poly_err);
  return r;
}

// ---------------------------------------------------------------------------
// 3. LDA closed form
// ---------------------------------------------------------------------------

double angle_between(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd u = a.normalized(), v = b.normalized();
  return 2.0 * std::atan2((u - v).norm(), (u + v).norm());
}

Result criterion_lda() {
  // Points mu_c +/- a e_k for every axis k: each diagonal entry of the
  // scatter sums to 4 a^2 over both classes, and n - K = 4D - 2, so the
  // pooled covariance is exactly I when a^2 = (4D - 2) / 4.
  const std::size_t D = 3;
  const double a = std::sqrt((4.0 * D - 2.0) / 4.0);
  const Vector mu[2] = {{1.0, 2.0, 0.5}, {-1.0, 0.3, 2.0}};
  LabeledSet s;
  for (int c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < D; ++k)
      for (double sign : {1.0, -1.0}) {
        Vector x = mu[c];
        x[k] += sign * a;
        s.x.push_back(x);
        s.y.push_back(c);
      }
  const auto m = lda::fit_lda(s, 2, 0.0);
  // Independent scatter and solve.
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(D, D);
  Eigen::VectorXd means[2] = {Eigen::VectorXd::Zero(D), Eigen::VectorXd::Zero(D)};
  for (std::size_t i = 0; i < s.size(); ++i) means[s.y[i]] += Eigen::Map<const Eigen::VectorXd>(s.x[i].data(), D) / (2.0 * D);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(s.x[i].data(), D) - means[s.y[i]];
    S += d * d.transpose() / static_cast<double>(s.size() - 2);
  }
  const Eigen::VectorXd expected = S.fullPivLu().solve(means[0] - means[1]);
  Eigen::VectorXd got(D);
  for (std::size_t k = 0; k < D; ++k) got(static_cast<Eigen::Index>(k)) = m.weights[0][k] - m.weights[1][k];
  const double angle = angle_between(got, expected);
  const double s_err = (S - Eigen::MatrixXd::Identity(D, D)).cwiseAbs().maxCoeff();
  Result r;
  r.pass = angle <= kLdaAngleTol && s_err < 1e-12;
  r.detail = "angle(w0-w1, S^-1(mu0-mu1)) " + fmt("%.2e", angle) + " rad, |S-I| " + fmt("%.1e", s_err);
  return r;
}

// ---------------------------------------------------------------------------
// 4. SVM oracle
// ---------------------------------------------------------------------------

Result criterion_svm() {
  Rng rng(44);
  const svm::KernelSpec specs[] = {svm::KernelSpec::linear(), svm::KernelSpec::rbf(0.5), svm::KernelSpec::polynomial(1.0, 2)};
  double worst_rel = 0.0, worst_kkt = 0.0;
  const int fixtures = 60;
  for (int f = 0; f < fixtures; ++f) {
    std::vector<Vector> x;
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) {
      x.push_back({rng.normal(), rng.normal()});
      y.push_back(i < 2 ? (i == 0 ? 1 : -1) : (rng.below(2) ? 1 : -1));
    }
    svm::SmoParams p;
    p.C = f % 2 ? 0.5 : 5.0;
    p.tol = 1e-6;
    const auto& spec = specs[f % 3];
    const auto sol = svm::solve_smo(x, y, spec, p);
    const double oracle = oracles::brute_force_dual(x, y, spec, p.C);
    const double mine = oracles::dual_objective(x, y, spec, sol.alpha);
    worst_rel = std::max(worst_rel, std::abs(mine - oracle) / std::max(1.0, std::abs(oracle)));
    worst_kkt = std::max(worst_kkt, svm::max_kkt_violation(x, y, spec, p.C, sol));
  }
  const std::vector<Vector> xor_x{{0.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {1.0, 0.0}};
  const std::vector<int> xor_y{1, 1, -1, -1};
  svm::SmoParams p;
  p.C = 10.0;
  const auto m = svm::train_binary(xor_x, xor_y, svm::KernelSpec::rbf(1.0), p);
  int correct = 0;
  for (std::size_t i = 0; i < 4; ++i) correct += (m.decision_value(xor_x[i]) > 0.0) == (xor_y[i] == 1);
  Result r;
  r.pass = worst_rel <= kDualRelTol && worst_kkt <= kKktTol && correct == 4;
  r.detail = std::to_string(fixtures) + " six-point fixtures: max dual rel. gap " + fmt("%.2e", worst_rel) + ", max KKT violation " +
             fmt("%.2e", worst_kkt) + "; XOR/RBF train accuracy " + std::to_string(correct) + "/4";
  return r;
}

// ---------------------------------------------------------------------------
// 5. Tree oracle
// ---------------------------------------------------------------------------

Result criterion_tree() {
  Rng rng(55);
  int mismatched = 0;
  const int fixtures = 500;
  for (int f = 0; f < fixtures; ++f) {
    const std::size_t dims = 1 + rng.below(3);
    LabeledSet s;
    for (int i = 0; i < 6; ++i) {
      Vector x(dims);
      for (auto& v : x) v = static_cast<double>(rng.below(5));
      s.x.push_back(x);
      s.y.push_back(static_cast<int>(rng.below(3)));
    }
    Rng unused(0);
    const auto tree = forest::fit_tree(s, 3, forest::TreeParams{dims, -1, 2}, unused);
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<oracles::OracleNode> oracle;
    oracles::oracle_grow(s, rows, 3, oracle);
    bool same = tree.nodes.size() == oracle.size();
    for (std::size_t i = 0; same && i < oracle.size(); ++i)
      same = tree.nodes[i].feature == oracle[i].feature && tree.nodes[i].threshold == oracle[i].threshold &&
             tree.nodes[i].counts == oracle[i].counts && tree.nodes[i].label == oracle[i].label;
    mismatched += !same;
  }
  LabeledSet four;
  four.x = {{0.0}, {1.0}, {10.0}, {11.0}};
  four.y = {0, 0, 1, 1};
  const std::vector<std::size_t> rows{0, 1, 2, 3}, feats{0};
  const auto sp = forest::best_split(four, rows, feats, 2);
  const bool split_ok = sp && sp->threshold == 5.5 && std::abs(sp->gain - 0.5) < 1e-15;
  Result r;
  r.pass = mismatched == 0 && split_ok;
  r.detail = std::to_string(fixtures - mismatched) + "/" + std::to_string(fixtures) + " trees equal the CART oracle; best_split " +
             (sp ? "threshold " + fmt("%g", sp->threshold) + " gain " + fmt("%.17g", sp->gain) : std::string("none"));
  return r;
}

// ---------------------------------------------------------------------------
// 6. CNN gradients
// ---------------------------------------------------------------------------

double batch_loss(const cnn::CnnModel& m, std::span<const Vector> xs, std::span<const int> ys) {
  const auto probs = cnn::forward(m, xs);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s -= std::log(probs[i][static_cast<std::size_t>(ys[i])]);
  return s / static_cast<double>(xs.size());
}

Result criterion_cnn() {
  const auto t0 = Clock::now();
  const auto a = cnn::miniature_arch();
  const auto model = cnn::CnnModel::he_init(a, 66);
  Rng rng(67);
  std::vector<Vector> xs(4, Vector(a.input_size()));
  for (auto& x : xs)
    for (auto& v : x) v = rng.normal();
  const std::vector<int> ys{0, 2, 1, 2};
  std::vector<const Vector*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  const auto grad = cnn::analytic_gradient(model, cnn::pack_batch(ptrs, a), ys);

  auto probe = model;
  auto params = probe.parameters();
  const auto g = grad.parameters();
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p]->size(); ++i, ++checked) {
      double& w = (*params[p])[i];
      const double keep = w;
      w = keep + kGradStep;
      const double up = batch_loss(probe, xs, ys);
      w = keep - kGradStep;
      const double down = batch_loss(probe, xs, ys);
      w = keep;
      const double numeric = (up - down) / (2.0 * kGradStep);
      const double analytic = (*g[p])[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::isfinite(rel) ? rel : INFINITY);
    }

  double sum_err = 0.0;
  const auto big = cnn::CnnModel::he_init(cnn::CnnArch{}, 68);
  std::vector<Vector> inputs(16, Vector(big.arch.input_size()));
  for (auto& x : inputs)
    for (auto& v : x) v = rng.normal(0.0, 3.0);
  for (const auto* m : {&model, &big}) {
    const auto probs = cnn::forward(*m, m == &model ? std::span<const Vector>(xs) : std::span<const Vector>(inputs));
    for (const auto& row : probs) sum_err = std::max(sum_err, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  }
  const double secs = seconds_since(t0);
  Result r;
  r.pass = checked == model.parameter_count() && worst < kGradRelTol && sum_err <= kSoftmaxSumTol && secs < kGradBudgetS;
  r.detail = std::to_string(checked) + " parameters, max rel. error " + fmt("%.2e", worst) + "; max |row sum - 1| " +
             fmt("%.1e", sum_err) + "; " + fmt("%.1f s", secs);
  return r;
}

// ---------------------------------------------------------------------------
// 7. Metrics oracle
// ---------------------------------------------------------------------------

Result criterion_metrics() {
  Rng rng(77);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    eval::EvalReport r;
    for (auto& row : r.confusion)
      for (auto& v : row) v = rng.below(rep % 5 == 0 ? 3 : 50);
    eval::compute_metrics(r);
    // Brute force: expand the matrix into individual predictions.
    std::vector<int> t, p;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (std::uint64_t k = 0; k < r.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; ++k) {
          t.push_back(a);
          p.push_back(b);
        }
    double hit = 0.0, macro = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) hit += t[i] == p[i];
    const double acc = t.empty() ? 0.0 : hit / static_cast<double>(t.size());
    worst = std::max(worst, std::abs(acc - r.accuracy));
    for (int c = 0; c < 3; ++c) {
      double tp = 0, pp = 0, ap = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        tp += t[i] == c && p[i] == c;
        pp += p[i] == c;
        ap += t[i] == c;
      }
      const double prec = pp > 0 ? tp / pp : 0.0, rec = ap > 0 ? tp / ap : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      const auto k = static_cast<std::size_t>(c);
      worst = std::max({worst, std::abs(prec - r.precision[k]), std::abs(rec - r.recall[k]), std::abs(f1 - r.f1[k])});
      macro += f1 / 3.0;
    }
    worst = std::max(worst, std::abs(macro - r.macro_f1));
  }
  std::vector<int> truth, constant;
  for (int i = 0; i < 600; ++i) {
    truth.push_back(i % 3);
    constant.push_back(2);
  }
  const auto c = eval::report_from(truth, constant);
  Result r;
  r.pass = worst <= kMetricTol && c.accuracy == 1.0 / 3.0;
  r.detail = "1000 matrices, max deviation " + fmt("%.1e", worst) + "; constant predictor accuracy " + fmt("%.17g", c.accuracy);
  return r;
}

// ---------------------------------------------------------------------------
// 8-11. Protocol runs through the CLI
// ---------------------------------------------------------------------------

struct ProtocolRun {
  bool ok = false;
  double seconds = 0.0;
  std::map<std::string, double> in_env_a, in_env_f, cross;
  double control = 0.0;
  std::map<std::string, std::string> files;
};

int sh(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" CSIBENCH_PATH "\" --threads 1 " + args + " >>\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ProtocolRun run_protocol(const fs::path& dir) {
  ProtocolRun out;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto log = dir / "log.txt";
  const auto a = (dir / "env_a.csd").string(), b = (dir / "env_b.csd").string();
  const auto t0 = Clock::now();
  if (sh("gen --env A --per-class 2000 --seed 42 --out " + a, log) != 0) return out;
  if (sh("gen --env B --per-class 100 --seed 42 --out " + b, log) != 0) return out;
  if (sh("curve --data " + a + " --seed 42 --sets AF --save-models --out-dir " + (dir / "curve").string(), log) != 0) return out;
  if (sh("crossenv --train " + a + " --test " + b + " --seed 42 --models-dir " + (dir / "curve" / "models").string() +
             " --out-dir " + (dir / "crossenv").string(),
         log) != 0)
    return out;
  out.seconds = seconds_since(t0);
  for (const auto* rel : {"curve/curve.json", "curve/curve.csv", "crossenv/crossenv.json", "crossenv/crossenv.csv"})
    out.files[rel] = slurp(dir / rel);
  for (const auto& c : eval::parse_reports_json(out.files["curve/curve.json"])) (c.set == "A" ? out.in_env_a : out.in_env_f)[c.model] = c.accuracy;
  for (const auto& c : eval::parse_reports_json(out.files["crossenv/crossenv.json"])) out.cross[c.model] = c.accuracy;
  const auto j = nlohmann::json::parse(out.files["crossenv/crossenv.json"]);
  out.control = eval::report_from_json(j.at("control")).accuracy;
  out.ok = out.in_env_f.size() == 5 && out.in_env_a.size() == 5 && out.cross.size() == 5;
  return out;
}

const char* const kModels[] = {"lda", "nbsvm", "ksvm", "forest", "cnn"};

Result criterion_in_env(const ProtocolRun& p) {
  Result r;
  if (!p.ok) return {false, "protocol run failed"};
  r.pass = p.in_env_f.at("nbsvm") >= kInEnvFloor && p.in_env_f.at("cnn") >= kInEnvFloor && p.seconds < kProtocolBudgetS;
  for (const auto* m : kModels) {
    r.pass = r.pass && p.in_env_f.at(m) > kAllModelsFloor;
    r.detail += std::string(m) + " " + fmt("%.4f", p.in_env_f.at(m)) + ", ";
  }
  r.detail += "Set F on 600 validation samples; full protocol " + fmt("%.0f s", p.seconds);
  return r;
}

Result criterion_curve(const ProtocolRun& p) {
  Result r;
  if (!p.ok) return {false, "protocol run failed"};
  for (const auto* m : kModels) {
    r.pass = r.pass && p.in_env_f.at(m) >= p.in_env_a.at(m) - kCurveSlack;
    r.detail += std::string(m) + " A " + fmt("%.4f", p.in_env_a.at(m)) + " -> F " + fmt("%.4f", p.in_env_f.at(m)) + "; ";
  }
  r.detail.resize(r.detail.size() - 2);
  return r;
}

Result criterion_cross(const ProtocolRun& p) {
  Result r;
  if (!p.ok) return {false, "protocol run failed"};
  for (const auto* m : kModels) {
    r.pass = r.pass && p.cross.at(m) <= kCrossCeiling;
    r.detail += std::string(m) + " " + fmt("%.4f", p.cross.at(m)) + ", ";
  }
  for (const auto* m : {"nbsvm", "cnn"}) {
    const double drop = p.in_env_f.at(m) - p.cross.at(m);
    r.pass = r.pass && drop >= kCrossDrop;
    r.detail += std::string(m) + " drop " + fmt("%.1f pts", 100.0 * drop) + ", ";
  }
  r.pass = r.pass && std::abs(p.control - kChance) <= kChanceBand;
  r.detail += "shuffled-label control " + fmt("%.4f", p.control) + " (Env B, 300 samples)";
  return r;
}

Result criterion_determinism(const ProtocolRun& p, const ProtocolRun& q) {
  if (!p.ok || !q.ok) return {false, "protocol run failed"};
  Result r;
  std::size_t same = 0;
  for (const auto& [name, bytes] : p.files) {
    const bool eq = q.files.count(name) && q.files.at(name) == bytes;
    same += eq;
    r.pass = r.pass && eq;
  }
  r.detail = std::to_string(same) + "/" + std::to_string(p.files.size()) + " report files byte-identical across two --threads 1 runs";
  return r;
}

void report(int id, const char* name, const Result& r, int& failures) {
  std::printf("%s criterion %2d  %-28s %s\n", r.pass ? "PASS" : "FAIL", id, name, r.detail.c_str());
  std::fflush(stdout);
  failures += !r.pass;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  int failures = 0;
  report(1, "format fidelity", criterion_format(), failures);
  report(2, "exact-arithmetic units", criterion_units(), failures);
  report(3, "LDA closed form", criterion_lda(), failures);
  report(4, "SVM oracle", criterion_svm(), failures);
  report(5, "tree oracle", criterion_tree(), failures);
  report(6, "CNN gradients", criterion_cnn(), failures);
  report(7, "metrics oracle", criterion_metrics(), failures);
  const auto first = run_protocol(work / "run1");
  report(8, "in-environment accuracy", criterion_in_env(first), failures);
  report(9, "learning-curve shape", criterion_curve(first), failures);
  report(10, "cross-environment collapse", criterion_cross(first), failures);
  const auto second = run_protocol(work / "run2");
  report(11, "determinism", criterion_determinism(first, second), failures);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
