#include "lupiet/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lupiet/error.hpp"
#include "lupiet/rng.hpp"

namespace lupiet::cli {
namespace {

using nlohmann::json;

// Strict object reader: every key must be consumed, each read names its path.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  bool has(std::string_view key) {
    seen_.insert(std::string(key));
    return j_.contains(key);
  }

  const json& raw(std::string_view key) {
    seen_.insert(std::string(key));
    return j_.at(std::string(key));
  }

  template <typename T>
  void read(std::string_view key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(std::string(key)).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), "wrong type");
    }
  }

  std::size_t read_count(std::string_view key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(std::string(key));
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(path(key), "expected a nonnegative integer");
    }
    return v.get<std::size_t>();
  }

  void finish() const {
    for (const auto& [key, unused] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthSpec synth_from(const json& j, const std::string& path) {
  Fields f(j, path);
  SynthSpec s;
  s.num_samples = f.read_count("num_samples", s.num_samples);
  s.num_classes = f.read_count("num_classes", s.num_classes);
  f.read("class_prior", s.class_prior);
  s.vocab_size = f.read_count("vocab_size", s.vocab_size);
  s.signal_tokens_per_class = f.read_count("signal_tokens_per_class", s.signal_tokens_per_class);
  f.read("docs_per_unit", s.docs_per_unit);
  f.read("horizon", s.horizon);
  f.read("min_length", s.min_length);
  f.read("boundary", s.boundary);
  f.read("rho_early", s.rho_early);
  f.read("rho_late", s.rho_late);
  f.read("noise_rate", s.noise_rate);
  f.read("label_noise", s.label_noise);
  s.min_tokens = f.read_count("min_tokens", s.min_tokens);
  s.max_tokens = f.read_count("max_tokens", s.max_tokens);
  if (f.has("time_mode")) {
    std::string mode;
    f.read("time_mode", mode);
    if (mode == "days") {
      s.time_mode = TimeMode::kDays;
    } else if (mode == "chunks") {
      s.time_mode = TimeMode::kChunks;
    } else {
      throw ConfigError(f.path("time_mode"), "expected \"days\" or \"chunks\"");
    }
  }
  if (f.has("split_ratio")) {
    std::vector<double> r;
    f.read("split_ratio", r);
    if (r.size() != 3) throw ConfigError(f.path("split_ratio"), "expected three ratios");
    s.split_ratio = {r[0], r[1], r[2]};
  }
  f.read("seed", s.seed);
  f.finish();
  try {
    validate(s);
  } catch (const ParameterError& e) {
    throw ConfigError(path.empty() ? "<root>" : path, e.what());
  }
  return s;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text) { return synth_from(parse_json(text), ""); }

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  return parse_synth_spec(read_file(path));
}

ExperimentConfig parse_experiment_config(std::string_view text,
                                         const std::filesystem::path& base_dir) {
  const json root = parse_json(text);
  Fields f(root, "");
  ExperimentConfig c;

  if (f.has("corpus")) {
    std::string p;
    f.read("corpus", p);
    c.corpus_path = base_dir / p;
  }
  if (f.has("synth")) c.synth = synth_from(f.raw("synth"), "synth");
  if (f.has("architecture")) {
    std::string a;
    f.read("architecture", a);
    const auto arch = parse_architecture(a);
    if (!arch) throw ConfigError("architecture", "expected \"word\" or \"doc\"");
    c.model.architecture = *arch;
  }
  if (f.has("num_classes")) c.num_classes = f.read_count("num_classes", 0);
  f.read("baseline_window", c.baseline_window);
  f.read("extended_windows", c.extended_windows);
  if (f.has("strategies")) {
    std::vector<std::string> names;
    f.read("strategies", names);
    c.strategies.clear();
    for (const auto& n : names) {
      const auto s = parse_strategy(n);
      if (!s) throw ConfigError("strategies", "unknown strategy \"" + n + "\"");
      c.strategies.push_back(*s);
    }
  }
  if (f.has("vocab")) {
    Fields v(f.raw("vocab"), "vocab");
    c.min_frequency = v.read_count("min_frequency", c.min_frequency);
    v.finish();
  }
  if (f.has("encoding")) {
    Fields e(f.raw("encoding"), "encoding");
    c.encoding.max_documents = e.read_count("max_documents", c.encoding.max_documents);
    c.encoding.max_tokens_per_document =
        e.read_count("max_tokens_per_document", c.encoding.max_tokens_per_document);
    e.finish();
  }
  if (f.has("model")) {
    Fields m(f.raw("model"), "model");
    c.model.embed_dim = m.read_count("embed_dim", c.model.embed_dim);
    m.read("filter_widths", c.model.filter_widths);
    c.model.filters = m.read_count("filters", c.model.filters);
    c.model.encoder_dim = m.read_count("encoder_dim", c.model.encoder_dim);
    c.model.hidden = m.read_count("hidden", c.model.hidden);
    m.read("dropout", c.model.dropout);
    m.finish();
  }
  if (f.has("train")) {
    Fields t(f.raw("train"), "train");
    c.train.max_epochs = t.read_count("max_epochs", c.train.max_epochs);
    c.train.batch_size = t.read_count("batch_size", c.train.batch_size);
    t.read("learning_rate", c.train.learning_rate);
    t.read("weight_decay", c.train.weight_decay);
    c.train.patience = t.read_count("patience", c.train.patience);
    if (t.has("selection")) {
      std::string s;
      t.read("selection", s);
      const auto m = parse_selection_metric(s);
      if (!m) throw ConfigError("train.selection", "expected auto, auroc or macro_f1");
      c.train.selection = *m;
    }
    t.finish();
  }
  if (f.has("distill")) {
    Fields d(f.raw("distill"), "distill");
    d.read("tau", c.taus);
    d.read("alpha", c.alphas);
    d.read("tau_squared", c.tau_squared);
    if (d.has("direction")) {
      std::string s;
      d.read("direction", s);
      const auto dir = parse_kl_direction(s);
      if (!dir) throw ConfigError("distill.direction", "expected student_teacher or teacher_student");
      c.direction = *dir;
    }
    d.finish();
  }
  f.read("master_seed", c.master_seed);
  f.read("seeds", c.seeds);
  if (f.has("output_dir")) {
    std::string p;
    f.read("output_dir", p);
    c.output_dir = p;
  }
  c.output_dir = base_dir / c.output_dir;
  c.jobs = f.read_count("jobs", c.jobs);
  f.finish();

  validate(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path), path.parent_path());
}

void validate(const ExperimentConfig& c) {
  if (c.corpus_path.has_value() == c.synth.has_value()) {
    throw ConfigError("corpus", "exactly one of \"corpus\" and \"synth\" must be given");
  }
  if (c.num_classes && *c.num_classes < 2) throw ConfigError("num_classes", "must be at least 2");
  if (!(c.baseline_window > 0.0)) throw ConfigError("baseline_window", "must be positive");
  double prev = c.baseline_window;
  for (double w : c.extended_windows) {
    if (!(w > prev)) {
      throw ConfigError("extended_windows",
                        "windows must be strictly increasing and longer than the baseline window");
    }
    prev = w;
  }
  if (c.strategies.empty()) throw ConfigError("strategies", "at least one strategy is required");
  for (Strategy s : c.strategies) {
    if (s != Strategy::kBaseline && c.extended_windows.empty()) {
      throw ConfigError("extended_windows",
                        std::string(strategy_name(s)) + " needs at least one extended window");
    }
  }
  if (c.taus.empty()) throw ConfigError("distill.tau", "at least one value is required");
  for (double t : c.taus) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("distill.tau", "values must be positive");
  }
  if (c.alphas.empty()) throw ConfigError("distill.alpha", "at least one value is required");
  for (double a : c.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("distill.alpha", "values must lie in [0, 1]");
  }
  if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  std::set<std::uint64_t> unique(c.seeds.begin(), c.seeds.end());
  if (unique.size() != c.seeds.size()) throw ConfigError("seeds", "seeds must be distinct");
  if (c.jobs == 0) throw ConfigError("jobs", "must be positive");
  if (c.min_frequency == 0) throw ConfigError("vocab.min_frequency", "must be positive");
  try {
    ModelConfig m = c.model;
    m.vocab_size = 2;
    m.num_classes = 2;
    validate(m);
  } catch (const ParameterError& e) {
    throw ConfigError("model", e.what());
  }
  try {
    validate(c.train);
  } catch (const ParameterError& e) {
    throw ConfigError("train", e.what());
  }
}

std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t seed) {
  return derive_seed(master_seed, seed);
}

}  // namespace lupiet::cli
