#include "lupiet/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lupiet/corpus/synth.hpp"
#include "lupiet/error.hpp"
#include "lupiet/parallel.hpp"

namespace lupiet::cli {
namespace fs = std::filesystem;

std::unique_ptr<Experiment> load_experiment(ExperimentConfig config) {
  auto exp = std::make_unique<Experiment>();
  exp->config = std::move(config);
  const ExperimentConfig& c = exp->config;
  if (c.synth) {
    exp->corpus = generate_synthetic(*c.synth);
    if (c.num_classes && *c.num_classes != exp->corpus.num_classes) {
      throw ConfigError("num_classes", "does not match synth.num_classes");
    }
  } else {
    exp->corpus = load_corpus(*c.corpus_path, c.num_classes);
  }
  exp->vocab = Vocabulary::build(exp->corpus, c.min_frequency, c.model.embed_dim);
  exp->encoded = std::make_unique<EncodedCorpus>(exp->corpus, exp->vocab, c.encoding);
  exp->data = Dataset::from(*exp->encoded);
  exp->model = c.model;
  exp->model.vocab_size = exp->vocab.size();
  exp->model.num_classes = exp->corpus.num_classes;
  return exp;
}

std::vector<RowSpec> plan_rows(const ExperimentConfig& c, std::vector<Strategy> strategies) {
  static constexpr Strategy kOrder[] = {Strategy::kBaseline, Strategy::kTeacher, Strategy::kLupiet,
                                        Strategy::kTransfer, Strategy::kMixed};
  const double b = c.baseline_window;
  const auto& ext = c.extended_windows;
  std::vector<RowSpec> rows;
  for (Strategy s : kOrder) {
    if (std::find(strategies.begin(), strategies.end(), s) == strategies.end()) continue;
    if (s != Strategy::kBaseline && ext.empty()) {
      throw ConfigError("extended_windows",
                        std::string(strategy_name(s)) + " needs at least one extended window");
    }
    switch (s) {
      case Strategy::kBaseline:
        rows.push_back({s, {b}, format_window(b)});
        break;
      case Strategy::kTeacher:
        for (double w : ext) rows.push_back({s, {w}, format_window(w)});
        break;
      case Strategy::kLupiet:
        for (double w : ext) rows.push_back({s, {b, w}, format_window(w)});
        break;
      case Strategy::kTransfer:
        for (std::size_t k = 0; k < ext.size(); ++k) {
          RowSpec r{s, {}, {}};
          for (std::size_t j = k + 1; j-- > 0;) r.windows.push_back(ext[j]);
          r.windows.push_back(b);
          for (double w : r.windows) r.label += (r.label.empty() ? "" : "->") + format_window(w);
          rows.push_back(std::move(r));
        }
        break;
      case Strategy::kMixed:
        for (std::size_t k = 0; k < ext.size(); ++k) {
          RowSpec r{s, {b}, format_window(b)};
          for (std::size_t j = 0; j <= k; ++j) {
            r.windows.push_back(ext[j]);
            r.label += "+" + format_window(ext[j]);
          }
          rows.push_back(std::move(r));
        }
        break;
    }
  }
  return rows;
}

bool RowResult::ok() const { return error().empty(); }

std::string RowResult::error() const {
  for (const SeedRun& r : runs) {
    if (!r.result) return "seed " + std::to_string(r.seed) + ": " + r.error;
  }
  return runs.empty() ? "no runs" : "";
}

MetricsReport RowResult::report() const {
  std::vector<std::map<std::string, double>> per_seed;
  for (const SeedRun& r : runs) per_seed.push_back(r.result->records.back().test_metrics);
  return aggregate_seeds(per_seed, std::string(strategy_name(spec.strategy)), spec.label);
}

namespace {

template <typename Fn>
void guarded(SeedRun& slot, Fn&& fn) {
  try {
    slot.result = fn();
  } catch (const TrainingAborted& e) {
    slot.failed_record = e.record();
    slot.error = e.what();
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
}

std::vector<DistillConfig> distill_grid(const ExperimentConfig& c) {
  std::vector<DistillConfig> grid;
  for (double tau : c.taus)
    for (double alpha : c.alphas) grid.push_back({tau, alpha, c.tau_squared, c.direction});
  return grid;
}

}  // namespace

RunSet run_rows(const Experiment& exp, const std::vector<RowSpec>& specs,
                const std::vector<Dataset>& per_seed, std::size_t jobs) {
  const ExperimentConfig& c = exp.config;
  const std::size_t n = c.seeds.size();
  if (per_seed.size() != n) throw Error("one dataset per seed is required");

  auto train_cfg = [&](std::size_t i, double window) {
    TrainConfig t = c.train;
    t.seed = run_seed(c.master_seed, c.seeds[i]);
    t.window = window;
    return t;
  };
  auto init_runs = [&](RowResult& row) {
    row.runs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      row.runs[i].seed = c.seeds[i];
      row.runs[i].run_seed = run_seed(c.master_seed, c.seeds[i]);
    }
  };

  RunSet out;
  std::set<double> teacher_windows;
  for (const RowSpec& s : specs) {
    if (s.strategy == Strategy::kTeacher || s.strategy == Strategy::kTransfer) {
      teacher_windows.insert(s.windows.front());
    } else if (s.strategy == Strategy::kLupiet) {
      teacher_windows.insert(s.windows.back());
    }
  }
  std::map<double, std::size_t> teacher_index;
  for (double w : teacher_windows) {
    teacher_index[w] = out.teachers.size();
    RowResult t;
    t.spec = {Strategy::kTeacher, {w}, format_window(w)};
    init_runs(t);
    out.teachers.push_back(std::move(t));
  }
  out.rows.resize(specs.size());
  for (std::size_t r = 0; r < specs.size(); ++r) {
    out.rows[r].spec = specs[r];
    init_runs(out.rows[r]);
  }

  // Phase 1: runs that start from scratch.
  std::vector<std::function<void()>> tasks;
  for (RowResult& t : out.teachers) {
    for (std::size_t i = 0; i < n; ++i) {
      tasks.push_back([&, i] {
        guarded(t.runs[i], [&] {
          return train_standard(per_seed[i], exp.model, train_cfg(i, t.spec.windows[0]),
                                Strategy::kTeacher);
        });
      });
    }
  }
  for (RowResult& row : out.rows) {
    if (row.spec.strategy == Strategy::kBaseline) {
      for (std::size_t i = 0; i < n; ++i) {
        tasks.push_back([&, i] {
          guarded(row.runs[i], [&] {
            return train_standard(per_seed[i], exp.model, train_cfg(i, c.baseline_window));
          });
        });
      }
    } else if (row.spec.strategy == Strategy::kMixed) {
      for (std::size_t i = 0; i < n; ++i) {
        tasks.push_back([&, i] {
          guarded(row.runs[i], [&] {
            return train_mixed(per_seed[i], exp.model, train_cfg(i, c.baseline_window),
                               row.spec.windows);
          });
        });
      }
    }
  }
  parallel_for(tasks.size(), jobs, [&](std::size_t k) { tasks[k](); });
  tasks.clear();

  auto teacher_of = [&](double w, std::size_t i) -> const SeedRun& {
    return out.teachers[teacher_index.at(w)].runs[i];
  };
  auto require_teacher = [&](double w, std::size_t i) -> const TrainResult& {
    const SeedRun& t = teacher_of(w, i);
    if (!t.result) throw TrainingDivergenceError("teacher on window " + format_window(w) +
                                                 " failed: " + t.error);
    return *t.result;
  };

  // Phase 2: grid search on the first seed for distilled rows, transfer stages.
  const auto grid = distill_grid(c);
  std::vector<std::vector<SeedRun>> grid_runs(out.rows.size());
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    RowResult& row = out.rows[r];
    if (row.spec.strategy == Strategy::kLupiet) {
      grid_runs[r].resize(grid.size());
      const double w = row.spec.windows.back();
      for (std::size_t g = 0; g < grid.size(); ++g) {
        tasks.push_back([&, r, g, w] {
          guarded(grid_runs[r][g], [&] {
            Model teacher = require_teacher(w, 0).model;
            return train_student(per_seed[0], exp.model, train_cfg(0, c.baseline_window), teacher,
                                 w, grid[g]);
          });
        });
      }
    } else if (row.spec.strategy == Strategy::kTransfer) {
      for (std::size_t i = 0; i < n; ++i) {
        tasks.push_back([&, i] {
          guarded(row.runs[i], [&] {
            TrainResult first = require_teacher(row.spec.windows.front(), i);
            return continue_transfer(per_seed[i], std::move(first),
                                     train_cfg(i, c.baseline_window), row.spec.windows);
          });
        });
      }
    }
  }
  parallel_for(tasks.size(), jobs, [&](std::size_t k) { tasks[k](); });
  tasks.clear();

  // Phase 3: retrain the selected distillation setting on the remaining seeds.
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    RowResult& row = out.rows[r];
    if (row.spec.strategy != Strategy::kLupiet) continue;
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const SeedRun& gr = grid_runs[r][g];
      const double v = gr.result ? gr.result->records.back().selected_metric : 0.0;
      if (gr.result) row.grid.push_back({grid[g], v});
      if (gr.result && (!best || v > grid_runs[r][*best].result->records.back().selected_metric)) {
        best = g;
      }
    }
    if (!best) {
      for (SeedRun& s : row.runs) s.error = "every grid point failed: " + grid_runs[r][0].error;
      continue;
    }
    row.chosen = grid[*best];
    row.runs[0].result = std::move(grid_runs[r][*best].result);
    const double w = row.spec.windows.back();
    for (std::size_t i = 1; i < n; ++i) {
      tasks.push_back([&, i, w] {
        guarded(row.runs[i], [&] {
          Model teacher = require_teacher(w, i).model;
          return train_student(per_seed[i], exp.model, train_cfg(i, c.baseline_window), teacher, w,
                               *row.chosen);
        });
      });
    }
  }
  parallel_for(tasks.size(), jobs, [&](std::size_t k) { tasks[k](); });

  for (RowResult& row : out.rows) {
    if (row.spec.strategy == Strategy::kTeacher) {
      row.runs = out.teachers[teacher_index.at(row.spec.windows.front())].runs;
    }
  }
  return out;
}

namespace {

std::string variant_dir(const std::string& label) {
  std::string out;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label.compare(i, 2, "->") == 0) {
      out += "to";
      ++i;
    } else {
      out += label[i];
    }
  }
  return out;
}

void write_row(const Experiment& exp, const RowResult& row, const fs::path& root) {
  const fs::path dir = root / std::string(strategy_name(row.spec.strategy)) / variant_dir(row.spec.label);
  for (const SeedRun& run : row.runs) {
    const fs::path seed_dir = dir / ("seed-" + std::to_string(run.seed));
    fs::create_directories(seed_dir);
    std::ofstream rec(seed_dir / "record.jsonl");
    if (run.result) {
      save_checkpoint(seed_dir / "checkpoint.bin", run.result->model, exp.vocab.hash());
      for (const RunRecord& r : run.result->records) write_run_record(rec, r);
    } else if (run.failed_record) {
      write_run_record(rec, *run.failed_record);
    }
    if (!rec) throw Error("failed writing " + (seed_dir / "record.jsonl").string());
  }
  if (!row.grid.empty()) {
    std::ofstream g(dir / "grid.csv");
    g << "tau,alpha,validation_metric\n";
    for (const GridPoint& p : row.grid) {
      g << format_metric(p.distill.tau) << ',' << format_metric(p.distill.alpha) << ','
        << format_metric(p.validation_metric) << '\n';
    }
  }
  if (row.ok()) {
    std::ofstream m(dir / "metrics.csv");
    write_metrics_csv(m, {row.report()});
  }
}

}  // namespace

void write_artifacts(const Experiment& exp, const RunSet& runs, const fs::path& root) {
  for (const RowResult& t : runs.teachers) write_row(exp, t, root);
  for (const RowResult& r : runs.rows) write_row(exp, r, root);
}

void write_matrix_csv(std::ostream& out, const std::vector<RowResult>& rows) {
  std::vector<MetricsReport> reports;
  for (const RowResult& r : rows)
    if (r.ok()) reports.push_back(r.report());
  write_metrics_csv(out, reports);
  for (const RowResult& r : rows) {
    if (!r.ok()) {
      out << "# failed " << strategy_name(r.spec.strategy) << ' ' << r.spec.label << ": "
          << r.error() << '\n';
    }
  }
}

namespace {

std::string display_name(Strategy s) {
  switch (s) {
    case Strategy::kBaseline:
      return "Baseline";
    case Strategy::kTeacher:
      return "Teacher";
    case Strategy::kLupiet:
      return "LuPIET";
    case Strategy::kTransfer:
      return "Transfer";
    case Strategy::kMixed:
      return "Mix-train";
  }
  return "";
}

}  // namespace

std::string format_matrix_table(const std::vector<RowResult>& rows) {
  std::vector<std::string> metrics;
  for (const RowResult& r : rows) {
    if (!r.ok()) continue;
    for (const auto& [name, unused] : r.report().metrics) metrics.push_back(name);
    break;
  }
  std::ostringstream out;
  out << std::left << std::setw(12) << "window";
  for (const auto& m : metrics) out << std::setw(22) << m;
  out << '\n';
  std::optional<Strategy> group;
  for (const RowResult& r : rows) {
    if (r.spec.strategy != group) {
      group = r.spec.strategy;
      out << display_name(*group) << '\n';
    }
    out << "  " << std::setw(10) << r.spec.label;
    if (!r.ok()) {
      out << "failed: " << r.error() << '\n';
      continue;
    }
    const MetricsReport rep = r.report();
    for (const auto& m : metrics) {
      const auto it = rep.metrics.find(m);
      const std::string cell = it == rep.metrics.end()
                                   ? "-"
                                   : format_metric(it->second.mean) + " (" +
                                         format_metric(it->second.std) + ")";
      out << std::setw(22) << cell;
    }
    out << '\n';
  }
  // Padding leaves trailing blanks on each line; drop them.
  std::string text = out.str(), trimmed;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + '\n';
  }
  return trimmed;
}

CurveResult run_learning_curve(const Experiment& exp, const std::vector<double>& ratios_in,
                               std::size_t jobs, const fs::path* artifacts) {
  const ExperimentConfig& c = exp.config;
  const auto ratios = validate_ratios(ratios_in);
  if (c.extended_windows.empty()) {
    throw ConfigError("extended_windows", "learning curves need at least one extended window");
  }
  const auto specs = plan_rows(c, {Strategy::kBaseline, Strategy::kLupiet});
  const auto& pool = exp.data.train;
  std::vector<std::size_t> labels;
  for (std::size_t i : pool) labels.push_back(exp.encoded->sample(i).label);

  CurveResult out;
  for (double ratio : ratios) {
    std::vector<Dataset> per_seed;
    for (std::uint64_t s : c.seeds) {
      per_seed.push_back(exp.data.with_train(stratified_subsample(
          pool, labels, exp.encoded->num_classes(), ratio, run_seed(c.master_seed, s))));
    }
    const RunSet runs = run_rows(exp, specs, per_seed, jobs);
    if (artifacts) write_artifacts(exp, runs, *artifacts / ("ratio-" + format_window(ratio)));
    auto collect = [&](const RowResult& r) {
      if (r.ok()) {
        out.rows.push_back({ratio, r.report()});
      } else {
        out.failures.push_back("ratio " + format_window(ratio) + " " +
                               std::string(strategy_name(r.spec.strategy)) + " " + r.spec.label +
                               ": " + r.error());
      }
    };
    collect(runs.rows.front());  // baseline
    for (const RowResult& t : runs.teachers) collect(t);
    for (std::size_t k = 1; k < runs.rows.size(); ++k) collect(runs.rows[k]);
  }
  return out;
}

namespace {

// Maps the exception taxonomy onto exit codes.
template <typename Fn>
int with_exit_codes(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

ExperimentConfig load_with_overrides(const fs::path& path, std::optional<std::size_t> jobs) {
  ExperimentConfig c = load_experiment_config(path);
  if (jobs) {
    if (*jobs == 0) throw ConfigError("--jobs", "must be positive");
    c.jobs = *jobs;
  }
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

int finish_rows(const std::vector<RowResult>& rows, std::ostream& out, std::ostream& err) {
  out << format_matrix_table(rows);
  int code = 0;
  for (const RowResult& r : rows) {
    if (!r.ok()) {
      err << "error: " << strategy_name(r.spec.strategy) << ' ' << r.spec.label << ": "
          << r.error() << '\n';
      code = 1;
    }
  }
  return code;
}

}  // namespace

int cmd_gen_data(const fs::path& spec_path, const fs::path& out_path, std::ostream& out,
                 std::ostream& err) {
  return with_exit_codes(err, [&] {
    const SynthSpec spec = load_synth_spec(spec_path);
    const Corpus corpus = generate_synthetic(spec);
    save_corpus(corpus, out_path);
    out << std::left << std::setw(12) << "split" << "cases\n";
    for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
      out << std::setw(12) << split_name(s) << corpus.count(s) << '\n';
    }
    return 0;
  });
}

int cmd_train(const fs::path& config, const std::string& strategy_text,
              std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs,
              std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    const auto strategy = parse_strategy(strategy_text);
    if (!strategy) {
      err << "error: unknown strategy \"" << strategy_text
          << "\" (expected baseline, teacher, lupiet, transfer or mixed)\n";
      return 2;
    }
    ExperimentConfig c = load_with_overrides(config, jobs);
    if (seed) c.seeds = {*seed};
    const auto specs = plan_rows(c, {*strategy});
    const auto exp = load_experiment(std::move(c));
    const std::vector<Dataset> per_seed(exp->config.seeds.size(), exp->data);
    const RunSet runs = run_rows(*exp, specs, per_seed, exp->config.jobs);
    write_artifacts(*exp, runs, exp->config.output_dir);
    std::ostringstream csv;
    write_matrix_csv(csv, runs.rows);
    write_file(exp->config.output_dir / std::string(strategy_name(*strategy)) / "metrics.csv",
               csv.str());
    return finish_rows(runs.rows, out, err);
  });
}

int cmd_compare(const fs::path& config, std::optional<std::size_t> jobs, std::ostream& out,
                std::ostream& err) {
  return with_exit_codes(err, [&] {
    ExperimentConfig c = load_with_overrides(config, jobs);
    auto strategies = c.strategies;
    strategies.push_back(Strategy::kBaseline);
    const auto specs = plan_rows(c, strategies);
    const auto exp = load_experiment(std::move(c));
    const std::vector<Dataset> per_seed(exp->config.seeds.size(), exp->data);
    const RunSet runs = run_rows(*exp, specs, per_seed, exp->config.jobs);
    write_artifacts(*exp, runs, exp->config.output_dir);
    std::ostringstream csv;
    write_matrix_csv(csv, runs.rows);
    write_file(exp->config.output_dir / "comparison.csv", csv.str());
    write_file(exp->config.output_dir / "comparison.txt", format_matrix_table(runs.rows));
    return finish_rows(runs.rows, out, err);
  });
}

int cmd_curve(const fs::path& config, const std::string& ratios_text,
              std::optional<std::size_t> jobs, std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    std::vector<double> ratios;
    std::stringstream ss(ratios_text);
    for (std::string item; std::getline(ss, item, ',');) {
      std::size_t used = 0;
      double r = 0.0;
      try {
        r = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size()) {
        throw ValidationError("--ratios: \"" + item + "\" is not a number");
      }
      ratios.push_back(r);
    }
    ratios = validate_ratios(std::move(ratios));
    const auto exp = load_experiment(load_with_overrides(config, jobs));
    const fs::path root = exp->config.output_dir / "curve";
    const CurveResult curve = run_learning_curve(*exp, ratios, exp->config.jobs, &root);

    std::ostringstream csv;
    write_curve_csv(csv, curve.rows);
    std::ostringstream summary;
    const std::string metric = exp->encoded->num_classes() == 2 ? "auroc" : "macro_f1";
    for (double w : exp->config.extended_windows) {
      // Rows for different teacher windows share the strategy name; compare per window.
      std::vector<CurveRow> subset;
      for (const CurveRow& r : curve.rows) {
        if (r.report.strategy == "baseline" ||
            (r.report.strategy == "lupiet" && r.report.window == format_window(w))) {
          subset.push_back(r);
        }
      }
      if (const auto gap = curve_gap(subset, "baseline", "lupiet", metric)) {
        summary << format_gap_summary(*gap, "baseline", "lupiet[" + format_window(w) + "]", metric)
                << '\n';
      }
    }
    write_file(exp->config.output_dir / "curve.csv", csv.str());
    write_file(exp->config.output_dir / "curve_summary.txt", summary.str());
    out << csv.str() << summary.str();
    for (const auto& f : curve.failures) err << "error: " << f << '\n';
    return curve.failures.empty() ? 0 : 1;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early prediction from time-series text with privileged longer windows", "lupiet"};
  app.require_subcommand(1);

  std::string spec, out_path, config, strategy, ratios;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen->add_option("--spec", spec, "Synthetic corpus spec (JSON)")->required();
  gen->add_option("--out", out_path, "Output corpus file (JSON lines)")->required();

  auto* train = app.add_subcommand("train", "Train one strategy over the configured seeds");
  train->add_option("--config", config, "Experiment config (JSON)")->required();
  train->add_option("--strategy", strategy, "baseline|teacher|lupiet|transfer|mixed")->required();
  train->add_option("--seed", seed, "Run only this seed");
  train->add_option("--jobs", jobs, "Concurrent runs");

  auto* compare = app.add_subcommand("compare", "Run every configured strategy and tabulate");
  compare->add_option("--config", config, "Experiment config (JSON)")->required();
  compare->add_option("--jobs", jobs, "Concurrent runs");

  auto* curve = app.add_subcommand("curve", "Learning curve over training-set ratios");
  curve->add_option("--config", config, "Experiment config (JSON)")->required();
  curve->add_option("--ratios", ratios, "Comma-separated ratios in (0, 1]")->required();
  curve->add_option("--jobs", jobs, "Concurrent runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return 2;
  }

  if (*gen) return cmd_gen_data(spec, out_path, out, err);
  if (*train) return cmd_train(config, strategy, seed, jobs, out, err);
  if (*compare) return cmd_compare(config, jobs, out, err);
  return cmd_curve(config, ratios, jobs, out, err);
}

}  // namespace lupiet::cli
