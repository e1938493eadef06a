#include "progmoe_cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "progmoe/artifacts.hpp"
#include "progmoe/cohort.hpp"
#include "progmoe/config.hpp"
#include "progmoe/csv.hpp"
#include "progmoe/gmm.hpp"
#include "progmoe/metrics.hpp"
#include "progmoe/synthetic.hpp"
#include "progmoe/training.hpp"
#include "progmoe_cli/svg.hpp"

namespace progmoe::cli {

namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

/// Writes to `path`, or to `out` when path is "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

EngineConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);
  for (const auto& o : overrides) kv.set_assignment(o);
  return engine_config_from(kv);
}

// -------------------------------------------------------------- subcommands

struct GenerateArgs {
  std::string spec;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int do_generate(const GenerateArgs& a, std::ostream& out) {
  const GeneratorSpec spec = load_generator_spec(a.spec);
  const SyntheticCohort syn = generate_synthetic(spec, a.seed);
  const fs::path dir = ensure_dir(a.out_dir);
  std::ostringstream cohort, graph;
  write_cohort_jsonl(cohort, syn.cohort);
  write_connectome(graph, syn.truth.connectome);
  write_text_file((dir / "cohort.jsonl").string(), cohort.str());
  write_text_file((dir / "connectome.csv").string(), graph.str());
  write_text_file((dir / "ground_truth.json").string(), ground_truth_json(syn.truth));
  std::ostringstream traj;
  write_trajectory_csv(traj, syn.truth.trajectory, syn.truth.connectome.region_names());
  write_text_file((dir / "true_trajectory.csv").string(), traj.str());
  out << "generated " << syn.cohort.size() << " subjects into " << dir.string() << "\n";
  return 0;
}

struct FitArgs {
  std::string cohort;
  std::string connectome;
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> threads;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool quiet = false;
};

int do_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  EngineConfig cfg = resolve_config(a.config, a.overrides);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.threads) {
    cfg.train.threads = *a.threads;
    cfg.train.deterministic = false;
  }
  if (a.deterministic) cfg.train.deterministic = true;
  cfg.train.validate();

  const Cohort cohort = load_cohort(a.cohort);
  const Connectome g = load_connectome(a.connectome);
  FitObserver observer;
  if (!a.quiet) {
    observer = [&err](const OuterRecord& r) {
      err << "outer " << r.iteration << ": train " << csv::format_double(r.aligned_train_traj) << " val "
          << csv::format_double(r.val_traj) << "\n";
    };
  }
  const FitResult result = fit(cohort, g, cfg.model, cfg.train, observer);
  const FitReport& rep = result.report;

  const fs::path dir = ensure_dir(a.out_dir);
  save_checkpoint((dir / "checkpoint.json").string(), cfg, g, result.model);
  write_text_file((dir / "fit_report.json").string(), fit_report_json(rep, cfg));
  std::ostringstream gate, placements, errmap;
  write_gate_csv(gate, rep.gate_times, rep.gate);
  std::vector<Placement> all = rep.train_placements;
  all.insert(all.end(), rep.val_placements.begin(), rep.val_placements.end());
  all.insert(all.end(), rep.test_placements.begin(), rep.test_placements.end());
  write_placements_csv(placements, all);
  write_error_map_csv(errmap, rep.error_map, g.region_names());
  write_text_file((dir / "gate.csv").string(), gate.str());
  write_text_file((dir / "placements.csv").string(), placements.str());
  write_text_file((dir / "error_map.csv").string(), errmap.str());
  out << "fit finished after " << rep.history.size() << " outer iterations"
      << (rep.converged ? " (converged)" : "") << "; test SSE " << csv::format_double(rep.test_sse) << "\n";
  return 0;
}

struct AlignArgs {
  std::string checkpoint;
  std::string cohort;
  std::string out = "-";
};

int do_align(const AlignArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint cp = load_checkpoint(a.checkpoint);
  const Cohort cohort = load_cohort(a.cohort);
  const Trajectory traj = integrate(cp.model, build_operators(cp.connectome));
  const CohortAlignment aligned = align_cohort(traj, cohort, 1);
  for (const auto& f : aligned.failures) err << "warning: " << one_line(f.message) << "\n";
  std::ostringstream os;
  write_placements_csv(os, aligned.placements);
  emit(a.out, os.str(), out);
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::optional<double> horizon;
  std::vector<double> times;
  std::string out = "-";
};

int do_predict(const PredictArgs& a, std::ostream& out) {
  const Checkpoint cp = load_checkpoint(a.checkpoint);
  const Trajectory full = integrate(cp.model, build_operators(cp.connectome));
  Trajectory sel;
  sel.step = full.step;
  sel.horizon = full.horizon;
  std::vector<double> times = a.times;
  if (times.empty()) {
    const double h = a.horizon.value_or(full.horizon);
    if (!(h >= 0.0) || h > full.horizon + 1e-9) {
      throw Error(ErrorKind::OutOfWindow, "horizon " + csv::format_double(h) + " outside [0, " +
                                              csv::format_double(full.horizon) + "]");
    }
    for (double t : full.times) {
      if (t <= h + 1e-9) times.push_back(t);
    }
  }
  sel.states.resize(static_cast<Eigen::Index>(times.size()), full.n());
  for (std::size_t k = 0; k < times.size(); ++k) {
    sel.states.row(static_cast<Eigen::Index>(k)) = predict_at(full, times[k]).transpose();
  }
  sel.times = times;
  std::ostringstream os;
  write_trajectory_csv(os, sel, cp.connectome.region_names());
  emit(a.out, os.str(), out);
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string cohort;
  std::string placements;
  std::string out = "-";
};

int do_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Checkpoint cp = load_checkpoint(a.checkpoint);
  const Cohort cohort = load_cohort(a.cohort);
  const Trajectory traj = integrate(cp.model, build_operators(cp.connectome));
  MetricsSummary m;
  std::vector<Placement> placements;
  if (a.placements.empty()) {
    CohortAlignment aligned = align_cohort(traj, cohort, 1);
    placements = std::move(aligned.placements);
    m.failures = std::move(aligned.failures);
  } else {
    std::ifstream in(a.placements);
    if (!in) throw Error(ErrorKind::IoError, "cannot open placements '" + a.placements + "'");
    placements = read_placements_csv(in);
  }
  const PlacedScans scans = collect_scans(traj, placements, cohort);
  m.sse = sse(scans.pred, scans.obs);
  m.pearson = mean_pearson(scans.pred, scans.obs);
  m.subjects = placements.size();
  m.scans = static_cast<std::size_t>(scans.pred.rows());
  emit(a.out, metrics_json(m), out);
  return 0;
}

struct PlotArgs {
  std::string input;
  std::string out = "-";
  std::string kind = "auto";
};

int do_export_plot(const PlotArgs& a, std::ostream& out) {
  const std::string text = read_text_file(a.input);
  CsvKind kind;
  if (a.kind == "auto") {
    std::istringstream probe(text);
    std::string header;
    if (!csv::next_line(probe, header)) throw Error(ErrorKind::ParseError, "'" + a.input + "' is empty");
    kind = detect_csv_kind(header);
  } else if (a.kind == "trajectory") {
    kind = CsvKind::Trajectory;
  } else if (a.kind == "gate") {
    kind = CsvKind::Gate;
  } else if (a.kind == "error-map") {
    kind = CsvKind::ErrorMap;
  } else {
    throw Error(ErrorKind::InvalidConfig, "--kind must be auto|trajectory|gate|error-map");
  }
  std::istringstream in(text);
  emit(a.out, render_csv(in, kind), out);
  return 0;
}

struct NormalizeArgs {
  std::string raw;
  std::string out = "cohort.jsonl";
  std::string constants;
  std::string cutoffs;
  std::string positivity;
  std::uint64_t gmm_seed = 0;
};

int do_normalize(const NormalizeArgs& a, std::ostream& out) {
  const RawCohort raw = load_raw_cohort(a.raw);
  const NormalizedCohort norm = normalize(raw);
  std::ostringstream cohort;
  write_cohort_jsonl(cohort, norm.cohort);
  emit(a.out, cohort.str(), out);
  if (!a.constants.empty()) {
    nlohmann::ordered_json j = {{"min", norm.constants.min}, {"max", norm.constants.max}};
    write_text_file(a.constants, j.dump(1) + "\n");
  }
  if (!a.cutoffs.empty() || !a.positivity.empty()) {
    Eigen::Index rows = 0;
    for (const auto& s : norm.cohort) rows += s.observations.rows();
    Eigen::MatrixXd samples(rows, static_cast<Eigen::Index>(raw.region_names.size()));
    Eigen::Index r = 0;
    for (const auto& s : norm.cohort) {
      samples.middleRows(r, s.observations.rows()) = s.observations;
      r += s.observations.rows();
    }
    GmmOptions opt;
    opt.seed = a.gmm_seed;
    const auto cutoffs = fit_gmm_cutoffs(samples, opt);
    if (!a.cutoffs.empty()) {
      std::ostringstream os;
      write_cutoffs_csv(os, cutoffs, raw.region_names);
      write_text_file(a.cutoffs, os.str());
    }
    if (!a.positivity.empty()) {
      std::ostringstream os;
      os << "id,scan,positive_regions\n";
      for (const auto& p : positivity_summary(norm.cohort, cutoffs)) {
        for (std::size_t k = 0; k < p.positive_regions.size(); ++k) {
          os << p.subject_id << "," << k << "," << p.positive_regions[k] << "\n";
        }
      }
      write_text_file(a.positivity, os.str());
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stage-aware mixture-of-experts graph ODE for disease progression", "progmoe"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Sample a synthetic cohort from a generator spec");
  generate->add_option("--spec", gen.spec, "Generator spec (key = value)")->required()->check(CLI::ExistingFile);
  generate->add_option("--seed", gen.seed, "Sampling seed");
  generate->add_option("--out-dir", gen.out_dir, "Directory for cohort.jsonl, connectome.csv, ground_truth.json, true_trajectory.csv");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "Fit the model with alternating trajectory fitting and alignment");
  fitc->add_option("--cohort", fa.cohort, "Cohort JSONL")->required()->check(CLI::ExistingFile);
  fitc->add_option("--connectome", fa.connectome, "Connectome CSV")->required()->check(CLI::ExistingFile);
  fitc->add_option("--config", fa.config, "Engine config (key = value); defaults when omitted");
  fitc->add_option("--set", fa.overrides, "Override one config key, e.g. --set train.lambda1=0.1");
  fitc->add_option("--threads", fa.threads, "Alignment worker threads (disables deterministic mode)");
  fitc->add_flag("--deterministic", fa.deterministic, "Force single-threaded bit-exact execution");
  fitc->add_option("--seed", fa.seed, "Override train.seed");
  fitc->add_option("--out-dir", fa.out_dir, "Directory for checkpoint and reports");
  fitc->add_flag("--quiet", fa.quiet, "Suppress per-iteration progress on stderr");

  AlignArgs al;
  auto* align = app.add_subcommand("align", "Place subjects on a fitted trajectory");
  align->add_option("--checkpoint", al.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  align->add_option("--cohort", al.cohort, "Cohort JSONL")->required()->check(CLI::ExistingFile);
  align->add_option("--out", al.out, "Placements CSV ('-' for stdout)");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Write the fitted trajectory");
  predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  auto* hopt = predict->add_option("--horizon", pr.horizon, "Last grid time to write (default: model horizon)");
  predict->add_option("--t", pr.times, "Explicit times to write (repeatable)")->excludes(hopt);
  predict->add_option("--out", pr.out, "Trajectory CSV ('-' for stdout)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "SSE and mean Pearson r of a cohort against a checkpoint");
  evaluate->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--cohort", ev.cohort, "Cohort JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--placements", ev.placements, "Use these placements instead of aligning");
  evaluate->add_option("--out", ev.out, "Metrics JSON ('-' for stdout)");

  PlotArgs pl;
  auto* plot = app.add_subcommand("export-plot", "Render a trajectory, gate or error-map CSV as SVG");
  plot->add_option("--input", pl.input, "CSV written by fit or predict")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", pl.out, "SVG path ('-' for stdout)");
  plot->add_option("--kind", pl.kind, "auto|trajectory|gate|error-map");

  NormalizeArgs no;
  auto* normalizec = app.add_subcommand("normalize", "Raw scan CSV to a [0, 1] cohort plus GMM cutoffs");
  normalizec->add_option("--raw", no.raw, "CSV: subject_id,scan_date,<regions>")->required()->check(CLI::ExistingFile);
  normalizec->add_option("--out", no.out, "Cohort JSONL ('-' for stdout)");
  normalizec->add_option("--constants", no.constants, "Write normalization constants JSON");
  normalizec->add_option("--cutoffs", no.cutoffs, "Write per-region GMM cutoffs CSV");
  normalizec->add_option("--positivity", no.positivity, "Write per-scan positive-region counts CSV");
  normalizec->add_option("--gmm-seed", no.gmm_seed, "Seed for the mixture initialization");

  bool dump_flag = false;
  std::string dump_config;
  std::vector<std::string> dump_overrides;
  auto* config = app.add_subcommand("config", "Show engine configuration");
  config->add_flag("--dump", dump_flag, "Print every key with its value")->required();
  config->add_option("--config", dump_config, "Merge this file over the defaults before printing");
  config->add_option("--set", dump_overrides, "Override one key before printing");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (generate->parsed()) return do_generate(gen, out);
    if (fitc->parsed()) return do_fit(fa, out, err);
    if (align->parsed()) return do_align(al, out, err);
    if (predict->parsed()) return do_predict(pr, out);
    if (evaluate->parsed()) return do_evaluate(ev, out);
    if (plot->parsed()) return do_export_plot(pl, out);
    if (normalizec->parsed()) return do_normalize(no, out);
    if (config->parsed()) {
      out << dump(resolve_config(dump_config, dump_overrides));
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return e.kind() == ErrorKind::Diverged ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: IoError: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace progmoe::cli
