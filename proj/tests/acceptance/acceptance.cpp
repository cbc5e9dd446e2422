// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gradient_cases.hpp"
#include "lupiet/cli/commands.hpp"
#include "lupiet/cli/config.hpp"
#include "lupiet/corpus/synth.hpp"
#include "lupiet/diffcore/ops.hpp"
#include "lupiet/metrics/metrics.hpp"
#include "lupiet/training/losses.hpp"
#include "lupiet/training/training.hpp"

namespace {

using namespace lupiet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kGradTolerance = 1e-3;
constexpr std::size_t kGradInstances = 20;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kKdSelfTolerance = 1e-10;
constexpr double kIdentityTolerance = 1e-12;
constexpr double kSoftmaxSumTolerance = 1e-9;
constexpr double kUniformTolerance = 1e-3;
constexpr double kHugeTau = 1e6;
constexpr double kOracleTolerance = 1e-12;
constexpr double kParityTolerance = 1e-12;
constexpr double kCurveBudgetSeconds = 1800.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o) {
  std::printf("criterion %d: %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str());
  std::fflush(stdout);
  failures += !o.pass;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> random_logits(Rng& rng, std::size_t k, double scale = 4.0) {
  std::vector<double> z(k);
  for (double& v : z) v = rng.uniform(-scale, scale);
  return z;
}

// --- 1 ----------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Outcome o;
  double worst = 0.0;
  std::size_t checked = 0;
  auto note = [&](const GradCheckReport& r, const std::string& what) {
    ++checked;
    worst = std::max(worst, r.max_relative_error);
    if (!(r.max_relative_error < kGradTolerance)) {
      o.pass = false;
      o.detail += what + " failed (" + r.summary() + "); ";
    }
  };
  const GradCheckOptions options{1e-5, kGradTolerance};
  std::size_t op_count = 0;
  for (const auto& c : testing::primitive_op_cases()) {
    ++op_count;
    for (std::uint64_t trial = 0; trial < kGradInstances; ++trial) {
      Rng rng(derive_seed(1000 + trial, c.name));
      auto [f, inputs] = c.make(rng);
      note(check_gradients(f, inputs, options), c.name);
    }
  }
  for (std::uint64_t trial = 0; trial < kGradInstances; ++trial) {
    Rng rng(5000 + trial);
    auto t = testing::tiny_model(Architecture::kWord, rng, trial);
    note(testing::check_model_ce(t), "word model CE");
  }
  for (std::uint64_t trial = 0; trial < kGradInstances; ++trial) {
    Rng rng(6000 + trial);
    auto t = testing::tiny_model(Architecture::kWord, rng, trial);
    const KlDirection dir = trial % 2 ? KlDirection::kTeacherStudent : KlDirection::kStudentTeacher;
    const DistillConfig d{rng.uniform(0.5, 4.0), rng.uniform(), trial % 3 == 0, dir};
    note(testing::check_model_combined(t, d, rng), "combined loss");
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= kGradBudgetSeconds) o.pass = false;
  o.detail += std::to_string(op_count) + " ops x " + std::to_string(kGradInstances) +
              " + model CE x " + std::to_string(kGradInstances) + " + combined x " +
              std::to_string(kGradInstances) + " = " + std::to_string(checked) +
              " checks, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", elapsed);
  return o;
}

// --- 2 ----------------------------------------------------------------------

Outcome distillation_identities() {
  Outcome o;
  Rng rng(2);
  double self_worst = 0.0, min_kd = 1.0, endpoint_worst = 0.0, linear_worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng.below(6);
    const auto s = random_logits(rng, k), t = random_logits(rng, k);
    const std::size_t y = rng.below(k);
    for (KlDirection dir : {KlDirection::kStudentTeacher, KlDirection::kTeacherStudent}) {
      DistillConfig c{rng.uniform(0.5, 8.0), 0.0, i % 2 == 0, dir};
      self_worst = std::max(self_worst, std::abs(distill_loss(s, s, c)));
      const double kd = distill_loss(s, t, c);
      min_kd = std::min(min_kd, kd);
      const double ce = pure::cross_entropy(s, y);
      c.alpha = 0.0;
      const double at0 = combined_loss(s, t, y, c);
      c.alpha = 1.0;
      const double at1 = combined_loss(s, t, y, c);
      endpoint_worst = std::max({endpoint_worst, std::abs(at0 - ce), std::abs(at1 - kd)});
      c.alpha = rng.uniform();
      linear_worst = std::max(
          linear_worst, std::abs(combined_loss(s, t, y, c) - ((1 - c.alpha) * ce + c.alpha * kd)));
    }
  }
  o.pass = self_worst <= kKdSelfTolerance && min_kd >= 0.0 && endpoint_worst <= kIdentityTolerance &&
           linear_worst <= kIdentityTolerance;
  o.detail = "1000 pairs x 2 directions; |KD(p,p)| " + fmt("%.1e", self_worst) + ", min KD " +
             fmt("%.3e", min_kd) + ", endpoint err " + fmt("%.1e", endpoint_worst) +
             ", linearity err " + fmt("%.1e", linear_worst);
  return o;
}

// --- 3 ----------------------------------------------------------------------

Outcome temperature_properties() {
  Outcome o;
  Rng rng(3);
  double sum_worst = 0.0, uniform_worst = 0.0;
  std::size_t argmax_breaks = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng.below(8);
    const auto z = random_logits(rng, k, 10.0);
    const std::size_t top = pure::argmax(z);
    for (double tau : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      const auto p = pure::softmax_with_temperature(z, tau);
      sum_worst = std::max(sum_worst, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
      argmax_breaks += pure::argmax(p) != top;
    }
    const auto p = pure::softmax_with_temperature(z, kHugeTau);
    for (double v : p) uniform_worst = std::max(uniform_worst, std::abs(v - 1.0 / static_cast<double>(k)));
  }
  o.pass = sum_worst <= kSoftmaxSumTolerance && argmax_breaks == 0 && uniform_worst <= kUniformTolerance;
  o.detail = "1000 logit vectors; sum err " + fmt("%.1e", sum_worst) + ", argmax changes " +
             std::to_string(argmax_breaks) + ", max |p - 1/K| at tau=1e6 " + fmt("%.1e", uniform_worst);
  return o;
}

// --- 4 ----------------------------------------------------------------------

double auroc_pairs(const std::vector<std::size_t>& y, const std::vector<double>& s) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / pairs;
}

double ap_rank_walk(const std::vector<std::size_t>& y, const std::vector<double>& s) {
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (y[order[r]] == 1) total += static_cast<double>(++hits) / static_cast<double>(r + 1);
  return total / static_cast<double>(hits);
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(4);
  double auroc_err = 0.0, aupr_err = 0.0, warp_err = 0.0;
  auto instance = [&](std::vector<std::size_t>& y, std::vector<double>& s, bool ties) {
    const std::size_t n = 2 + rng.below(49);
    y.assign(n, 0);
    s.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.below(2);
      s[i] = ties ? static_cast<double>(rng.below(5)) : rng.uniform(-3.0, 3.0);
    }
    y[0] = 0;
    y[1] = 1;
  };
  std::vector<std::size_t> y;
  std::vector<double> s;
  for (int i = 0; i < 200; ++i) {
    instance(y, s, i % 2 == 0);
    auroc_err = std::max(auroc_err, std::abs(auroc(y, s) - auroc_pairs(y, s)));
    aupr_err = std::max(aupr_err, std::abs(aupr(y, s) - ap_rank_walk(y, s)));
  }
  for (int i = 0; i < 100; ++i) {
    instance(y, s, false);
    std::vector<double> w(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) w[j] = std::exp(2.0 * s[j]) + std::pow(s[j], 3);
    warp_err = std::max(warp_err, std::abs(auroc(y, w) - auroc(y, s)));
  }
  o.pass = auroc_err <= kOracleTolerance && aupr_err <= kOracleTolerance && warp_err <= kOracleTolerance;
  o.detail = "200 instances n<=50; AUROC err " + fmt("%.1e", auroc_err) + ", AUPR err " +
             fmt("%.1e", aupr_err) + "; 100 monotone transforms, err " + fmt("%.1e", warp_err);
  return o;
}

// --- 5 ----------------------------------------------------------------------

Outcome windowing() {
  Outcome o;
  SynthSpec spec;
  spec.num_samples = 1000;
  spec.seed = 5;
  spec.time_mode = TimeMode::kDays;
  const Corpus corpus = generate_synthetic(spec);
  Rng rng(5);
  std::size_t prefix_violations = 0;
  for (const auto& sample : corpus.samples) {
    const double t = rng.uniform(0.1, 8.0), t2 = t + rng.uniform(0.0, 8.0);
    const auto a = slice_window(sample, t), b = slice_window(sample, t2);
    bool ok = a.documents.size() <= b.documents.size() && a.documents.data() == b.documents.data();
    for (const auto& d : a.documents) ok = ok && d.time <= t;
    prefix_violations += !ok;
  }

  // Samples that end before the 3-unit window look the same under 3 and 7.
  const Vocabulary vocab = Vocabulary::build(corpus, 1, 8);
  const EncodedCorpus encoded(corpus, vocab);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.embed_dim = 8;
  mc.filter_widths = {3};
  mc.filters = 4;
  Model word = Model::init(mc, 1);
  mc.architecture = Architecture::kDoc;
  Model doc = Model::init(mc, 1);
  std::size_t short_samples = 0, short_mismatches = 0;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const auto& docs = corpus.samples[i].documents;
    if (docs.empty() || docs.back().time > 3.0) continue;
    ++short_samples;
    const auto v3 = encoded.view(i, 3.0), v7 = encoded.view(i, 7.0);
    const bool same = v3.concatenated() == v7.concatenated() &&
                      v3.documents.size() == v7.documents.size() &&
                      word.logits(v3) == word.logits(v7) && doc.logits(v3) == doc.logits(v7);
    short_mismatches += !same;
  }
  o.pass = prefix_violations == 0 && short_samples > 0 && short_mismatches == 0;
  o.detail = "1000 fuzzed samples, " + std::to_string(prefix_violations) + " prefix violations; " +
             std::to_string(short_samples) + " short samples, " + std::to_string(short_mismatches) +
             " differ between windows 3 and 7 (views and logits compared exactly)";
  return o;
}

// --- 6 ----------------------------------------------------------------------

// Late-signal regime: most evidence arrives after the baseline window.
cli::ExperimentConfig curve_config(KlDirection direction) {
  cli::ExperimentConfig c;
  SynthSpec s;
  s.num_samples = 2000;
  s.vocab_size = 200;
  s.horizon = 3.0;
  s.rho_early = 0.1;
  s.rho_late = 0.5;
  s.label_noise = 0.1;
  s.seed = 3;
  c.synth = s;
  c.baseline_window = 1.0;
  c.extended_windows = {3.0};
  c.strategies = {Strategy::kBaseline, Strategy::kTeacher, Strategy::kLupiet};
  c.model.embed_dim = 16;
  c.model.filter_widths = {3};
  c.model.filters = 8;
  c.model.dropout = 0.1;
  c.train.max_epochs = 30;
  c.train.batch_size = 32;
  c.train.learning_rate = 0.003;
  c.train.patience = 5;
  c.taus = {1.0};
  c.alphas = {0.9};
  c.direction = direction;
  c.seeds = {1, 2, 3, 4, 5};
  c.jobs = std::max(1u, std::thread::hardware_concurrency());
  return c;
}

struct CurveStats {
  double mean = 0.0, std = 0.0;
};

CurveStats curve_stat(const std::vector<CurveRow>& rows, double ratio, const std::string& strategy) {
  for (const auto& r : rows) {
    if (r.ratio == ratio && r.report.strategy == strategy) {
      const auto& m = r.report.metrics.at("auroc");
      return {m.mean, m.std};
    }
  }
  throw std::runtime_error("curve lacks " + strategy + " at ratio " + std::to_string(ratio));
}

std::string ms(const CurveStats& s) { return fmt("%.4f", s.mean) + " +- " + fmt("%.4f", s.std); }

struct CurveCheck {
  bool teacher_better = false, gap_positive = false, gap_shrinks = false;
  std::string detail;
};

CurveCheck learning_curve(KlDirection direction) {
  const auto exp = cli::load_experiment(curve_config(direction));
  const auto curve = cli::run_learning_curve(*exp, {0.1, 1.0}, exp->config.jobs);
  CurveCheck out;
  if (!curve.failures.empty()) {
    out.detail = "runs failed: " + curve.failures.front();
    return out;
  }
  const auto b10 = curve_stat(curve.rows, 0.1, "baseline"), b100 = curve_stat(curve.rows, 1.0, "baseline");
  const auto l10 = curve_stat(curve.rows, 0.1, "lupiet"), l100 = curve_stat(curve.rows, 1.0, "lupiet");
  const auto t10 = curve_stat(curve.rows, 0.1, "teacher"), t100 = curve_stat(curve.rows, 1.0, "teacher");
  const double gap10 = l10.mean - b10.mean, gap100 = l100.mean - b100.mean;
  out.teacher_better = t100.mean > b100.mean && t10.mean > b10.mean;
  out.gap_positive = gap10 > 0.0;
  out.gap_shrinks = gap10 > gap100;
  out.detail = "AUROC over 5 seeds; ratio 0.1: baseline " + ms(b10) + ", lupiet " + ms(l10) +
               ", teacher " + ms(t10) + "; ratio 1.0: baseline " + ms(b100) + ", lupiet " +
               ms(l100) + ", teacher " + ms(t100) + "; gap " + fmt("%+.4f", gap10) + " -> " +
               fmt("%+.4f", gap100);
  return out;
}

Outcome qualitative_curve() {
  const auto start = Clock::now();
  const CurveCheck chosen = learning_curve(KlDirection::kStudentTeacher);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = chosen.teacher_better && chosen.gap_positive && chosen.gap_shrinks &&
           elapsed < kCurveBudgetSeconds;
  o.detail = std::string("(a) teacher > baseline ") + (chosen.teacher_better ? "yes" : "no") +
             ", (b) gap at 10% > 0 " + (chosen.gap_positive ? "yes" : "no") +
             ", (c) gap shrinks " + (chosen.gap_shrinks ? "yes" : "no") + "; " + chosen.detail +
             "; " + fmt("%.0f s", elapsed);
  return o;
}

// The other KL direction, reported for reference; the verdict uses the default.
void report_classical_direction() {
  try {
    const CurveCheck classical = learning_curve(KlDirection::kTeacherStudent);
    std::printf("  teacher_student direction: (b) %s, (c) %s; %s\n",
                classical.gap_positive ? "yes" : "no", classical.gap_shrinks ? "yes" : "no",
                classical.detail.c_str());
  } catch (const std::exception& e) {
    std::printf("  teacher_student direction: exception: %s\n", e.what());
  }
}

// --- 7 ----------------------------------------------------------------------

double step_loss_diff(const TrainResult& a, const TrainResult& b) {
  const auto& x = a.records.back().step_losses;
  const auto& y = b.records.back().step_losses;
  if (x.size() != y.size() || x.empty()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

Outcome strategy_parity() {
  SynthSpec s;
  s.num_samples = 300;
  s.seed = 7;
  const Corpus corpus = generate_synthetic(s);
  const Vocabulary vocab = Vocabulary::build(corpus, 1, 8);
  const EncodedCorpus encoded(corpus, vocab);
  const Dataset data = Dataset::from(encoded);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.embed_dim = 8;
  mc.filter_widths = {2, 3};
  mc.filters = 6;
  TrainConfig tc;
  tc.max_epochs = 5;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;
  tc.seed = 11;
  const TrainResult base = train_standard(data, mc, tc);
  const double transfer = step_loss_diff(train_transfer(data, mc, tc, {tc.window}), base);
  const double mixed = step_loss_diff(train_mixed(data, mc, tc, {tc.window}), base);
  TrainConfig teacher_cfg = tc;
  teacher_cfg.window = 3.0;
  Model teacher = train_standard(data, mc, teacher_cfg, Strategy::kTeacher).model;
  DistillConfig d;
  d.alpha = 0.0;
  const double student = step_loss_diff(train_student(data, mc, tc, teacher, 3.0, d), base);
  Outcome o;
  o.pass = transfer <= kParityTolerance && mixed <= kParityTolerance && student <= kParityTolerance;
  o.detail = std::to_string(base.records.back().step_losses.size()) +
             " steps; max per-step loss diff vs baseline: transfer [1] " + fmt("%.1e", transfer) +
             ", mixed {1} " + fmt("%.1e", mixed) + ", lupiet alpha=0 " + fmt("%.1e", student);
  return o;
}

// --- 8 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.entries()[i];
    const auto& y = b.entries()[i];
    if (x.name != y.name || x.value.shape() != y.value.shape()) return false;
    if (std::memcmp(x.value.data().data(), y.value.data().data(), x.value.numel() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "lupiet_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "config.json") << R"({
  "synth": {"num_samples": 300, "seed": 8},
  "extended_windows": [3, 7],
  "strategies": ["teacher", "lupiet", "transfer", "mixed"],
  "model": {"embed_dim": 8, "filter_widths": [3], "filters": 6},
  "train": {"max_epochs": 4, "batch_size": 16, "learning_rate": 0.01},
  "distill": {"tau": [1, 2], "alpha": [0.5, 0.9]},
  "master_seed": 17,
  "seeds": [1, 2],
  "output_dir": "out"
})";
  }
  std::ostringstream sink;
  std::vector<std::string> csvs, tables;
  bool ran = true;
  for (const char* jobs : {"1", "1", "3"}) {
    const char* argv[] = {"lupiet", "compare", "--config", nullptr, "--jobs", jobs};
    const std::string cfg = (dir / "config.json").string();
    argv[3] = cfg.c_str();
    ran = ran && cli::run(6, argv, sink, sink) == 0;
    csvs.push_back(slurp(dir / "out" / "comparison.csv"));
    tables.push_back(slurp(dir / "out" / "comparison.txt"));
  }
  const bool tables_same = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2] &&
                           tables[0] == tables[1] && tables[0] == tables[2];

  // Checkpoints written by the runs reload bitwise.
  std::size_t checkpoints = 0, mismatches = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out")) {
    if (e.path().filename() != "checkpoint.bin") continue;
    ++checkpoints;
    const Checkpoint a = load_checkpoint(e.path());
    const fs::path copy = dir / "resaved.bin";
    save_checkpoint(copy, Model(a.config, a.params), a.vocab_hash);
    const Checkpoint b = load_checkpoint(copy);
    mismatches += !(bitwise_equal(a.params, b.params) && slurp(copy) == slurp(e.path()));
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = ran && tables_same && checkpoints > 0 && mismatches == 0;
  o.detail = std::string("compare x3 (jobs 1, 1, 3) ") + (tables_same ? "byte-identical" : "DIFFER") +
             (ran ? "" : ", a run failed") + "; " + std::to_string(checkpoints) +
             " checkpoints re-saved, " + std::to_string(mismatches) + " not bitwise equal";
  return o;
}

void guarded(int id, const char* title, const std::function<Outcome()>& fn) {
  try {
    report(id, title, fn());
  } catch (const std::exception& e) {
    report(id, title, {false, std::string("exception: ") + e.what()});
  }
}

}  // namespace

int main() {
  guarded(1, "gradient correctness", gradient_correctness);
  guarded(2, "distillation loss identities", distillation_identities);
  guarded(3, "temperature properties", temperature_properties);
  guarded(4, "metric oracle equivalence", metric_oracles);
  guarded(5, "windowing", windowing);
  guarded(6, "learning curve reproduction", qualitative_curve);
  report_classical_direction();
  guarded(7, "strategy parity degenerations", strategy_parity);
  guarded(8, "determinism", determinism);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures;
}
