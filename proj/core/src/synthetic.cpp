#include "progmoe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "progmoe/artifacts.hpp"
#include "progmoe/csv.hpp"
#include "progmoe/error.hpp"
#include "progmoe/ode.hpp"
#include "progmoe/training.hpp"

namespace progmoe {

TruthKind parse_truth_kind(const std::string& name) {
  if (name == "mechanistic") return TruthKind::Mechanistic;
  if (name == "two_regime") return TruthKind::TwoRegime;
  if (name == "checkpoint") return TruthKind::Checkpoint;
  throw Error(ErrorKind::InvalidConfig, "unknown truth '" + name + "' (expected mechanistic|two_regime|checkpoint)");
}

std::string to_string(TruthKind kind) {
  switch (kind) {
    case TruthKind::Mechanistic: return "mechanistic";
    case TruthKind::TwoRegime: return "two_regime";
    case TruthKind::Checkpoint: return "checkpoint";
  }
  return "mechanistic";
}

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, "generator: " + what); };
  if (graph != "ring" && graph != "path" && graph != "file") fail("graph must be ring|path|file");
  if (graph == "file" && graph_file.empty()) fail("graph = file needs graph.file");
  if (graph != "file" && graph_n < 3) fail("graph.n must be >= 3");
  if (truth == TruthKind::Checkpoint && checkpoint.empty()) fail("truth = checkpoint needs truth.checkpoint");
  if (!(k >= 0.0) || !(alpha >= 0.0)) fail("truth.k and truth.alpha must be >= 0");
  grid_steps(horizon, step);
  if (subjects < 1) fail("subjects must be >= 1");
  if (scans_min < 1 || scans_max < scans_min) fail("need 1 <= scans.min <= scans.max");
  if (!(gap_min > 0.0) || gap_max < gap_min) fail("need 0 < gap.min <= gap.max");
  if ((scans_max - 1) * gap_max > horizon) fail("the longest possible follow-up exceeds the horizon");
  if (!(noise_sigma >= 0.0) || !(noisy_sigma >= 0.0)) fail("noise levels must be >= 0");
}

GeneratorSpec generator_spec_from(const KeyValues& kv) {
  GeneratorSpec s;
  s.graph = kv.get_string("graph", s.graph);
  s.graph_n = kv.get_int("graph.n", s.graph_n);
  s.graph_weight = kv.get_double("graph.weight", s.graph_weight);
  s.graph_file = kv.get_string("graph.file", s.graph_file);
  s.truth = parse_truth_kind(kv.get_string("truth", to_string(s.truth)));
  s.k = kv.get_double("truth.k", s.k);
  s.alpha = kv.get_double("truth.alpha", s.alpha);
  s.c0_base = kv.get_double("truth.c0_base", s.c0_base);
  s.c0_seed = kv.get_double("truth.c0_seed", s.c0_seed);
  s.seed_regions = kv.get_ints("truth.seed_regions", s.seed_regions);
  s.gate_steepness = kv.get_double("truth.gate_steepness", s.gate_steepness);
  s.gate_gain = kv.get_double("truth.gate_gain", s.gate_gain);
  s.local_rate = kv.get_double("truth.local_rate", s.local_rate);
  s.local_plateau = kv.get_double("truth.local_plateau", s.local_plateau);
  s.checkpoint = kv.get_string("truth.checkpoint", s.checkpoint);
  s.horizon = kv.get_double("model.horizon", s.horizon);
  s.step = kv.get_double("model.step", s.step);
  s.subjects = kv.get_int("subjects", s.subjects);
  s.scans_min = kv.get_int("scans.min", s.scans_min);
  s.scans_max = kv.get_int("scans.max", s.scans_max);
  s.gap_min = kv.get_double("gap.min", s.gap_min);
  s.gap_max = kv.get_double("gap.max", s.gap_max);
  s.snap_to_grid = kv.get_bool("snap_to_grid", s.snap_to_grid);
  s.noise_sigma = kv.get_double("noise.sigma", s.noise_sigma);
  s.noisy_regions = kv.get_ints("noise.regions", s.noisy_regions);
  s.noisy_sigma = kv.get_double("noise.region_sigma", s.noisy_sigma);
  s.id_prefix = kv.get_string("id_prefix", s.id_prefix);
  kv.require_all_consumed();
  s.validate();
  return s;
}

GeneratorSpec load_generator_spec(const std::string& path) { return generator_spec_from(KeyValues::load(path)); }

std::string dump(const GeneratorSpec& s) {
  auto d = [](double v) { return csv::format_double(v); };
  std::ostringstream os;
  os << "graph = " << s.graph << "\n"
     << "graph.n = " << s.graph_n << "\n"
     << "graph.weight = " << d(s.graph_weight) << "\n"
     << "graph.file = " << s.graph_file << "\n"
     << "truth = " << to_string(s.truth) << "\n"
     << "truth.k = " << d(s.k) << "\n"
     << "truth.alpha = " << d(s.alpha) << "\n"
     << "truth.c0_base = " << d(s.c0_base) << "\n"
     << "truth.c0_seed = " << d(s.c0_seed) << "\n"
     << "truth.seed_regions = " << format_list(s.seed_regions) << "\n"
     << "truth.gate_steepness = " << d(s.gate_steepness) << "\n"
     << "truth.gate_gain = " << d(s.gate_gain) << "\n"
     << "truth.local_rate = " << d(s.local_rate) << "\n"
     << "truth.local_plateau = " << d(s.local_plateau) << "\n"
     << "truth.checkpoint = " << s.checkpoint << "\n"
     << "model.horizon = " << d(s.horizon) << "\n"
     << "model.step = " << d(s.step) << "\n"
     << "subjects = " << s.subjects << "\n"
     << "scans.min = " << s.scans_min << "\n"
     << "scans.max = " << s.scans_max << "\n"
     << "gap.min = " << d(s.gap_min) << "\n"
     << "gap.max = " << d(s.gap_max) << "\n"
     << "snap_to_grid = " << (s.snap_to_grid ? "true" : "false") << "\n"
     << "noise.sigma = " << d(s.noise_sigma) << "\n"
     << "noise.regions = " << format_list(s.noisy_regions) << "\n"
     << "noise.region_sigma = " << d(s.noisy_sigma) << "\n"
     << "id_prefix = " << s.id_prefix << "\n";
  return os.str();
}

Connectome build_spec_graph(const GeneratorSpec& spec) {
  if (spec.graph == "ring") return ring_graph(spec.graph_n, spec.graph_weight);
  if (spec.graph == "path") return path_graph(spec.graph_n, spec.graph_weight);
  return load_connectome(spec.graph_file);
}

MoeModel build_truth_model(const GeneratorSpec& spec, const Connectome& g) {
  const Eigen::Index n = g.n();
  if (spec.truth == TruthKind::Checkpoint) {
    Checkpoint cp = load_checkpoint(spec.checkpoint);
    if (cp.model.n() != n) throw Error(ErrorKind::DimensionMismatch, "checkpoint region count differs from the graph");
    if (cp.model.config().horizon != spec.horizon || cp.model.config().step != spec.step) {
      throw Error(ErrorKind::InvalidConfig, "checkpoint horizon/step differ from the generator spec");
    }
    return std::move(cp.model);
  }

  ModelConfig cfg;
  cfg.horizon = spec.horizon;
  cfg.step = spec.step;
  cfg.k_init = spec.k;
  cfg.alpha_init = spec.alpha;
  cfg.c0_base = spec.c0_base;
  cfg.c0_seed = spec.c0_seed;
  cfg.seed_regions.assign(spec.seed_regions.begin(), spec.seed_regions.end());
  cfg.ignd.latent_dim = static_cast<int>(std::min<Eigen::Index>(2, n));
  cfg.gate.hidden = 1;
  cfg.local.hidden_widths = {1};
  cfg.gate.mode = spec.truth == TruthKind::Mechanistic ? GateMode::Mechanistic : GateMode::Temporal;
  MoeModel m = MoeModel::create(cfg, n, 0);

  if (spec.truth == TruthKind::TwoRegime) {
    // Gate hidden unit tanh(s (t/T - 1/2)) switches sign at T/2; the output
    // layer maps -1 to the mechanistic expert and +1 to the local expert.
    auto& p = m.params();
    p.value("gate.W0")(0, 0) = spec.gate_steepness;
    p.value("gate.b0")(0, 0) = -0.5 * spec.gate_steepness;
    p.value("gate.W1") << -spec.gate_gain, 0.0, spec.gate_gain;
    p.value("gate.b1").setZero();
    // Local reaction rate * tanh(3 (plateau - c)): growth that stops at the plateau.
    p.value("local.mlp.W0")(0, 0) = -3.0;
    p.value("local.mlp.b0")(0, 0) = 3.0 * spec.local_plateau;
    p.value("local.mlp.W1")(0, 0) = spec.local_rate;
    p.value("local.mlp.b1")(0, 0) = 0.0;
  }
  return m;
}

SyntheticCohort generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Connectome g = build_spec_graph(spec);
  for (int r : spec.seed_regions) {
    if (r < 0 || r >= g.n()) throw Error(ErrorKind::InvalidConfig, "generator: seed region out of range");
  }
  for (int r : spec.noisy_regions) {
    if (r < 0 || r >= g.n()) throw Error(ErrorKind::InvalidConfig, "generator: noisy region out of range");
  }
  const GraphOperators ops = build_operators(g);
  MoeModel model = build_truth_model(spec, g);
  const Trajectory traj = integrate(model, ops);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> scan_count(spec.scans_min, spec.scans_max);
  std::uniform_real_distribution<double> gap(spec.gap_min, spec.gap_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto snap = [&spec](double t) { return std::round(t / spec.step) * spec.step; };

  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(g.n(), spec.noise_sigma);
  for (int r : spec.noisy_regions) sigma[r] = std::hypot(spec.noise_sigma, spec.noisy_sigma);

  const int width = static_cast<int>(std::to_string(std::max(spec.subjects - 1, 0)).size());
  Cohort cohort;
  std::vector<Placement> truth_t0;
  for (int i = 0; i < spec.subjects; ++i) {
    Subject s;
    std::string num = std::to_string(i);
    s.id = spec.id_prefix + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    const int scans = scan_count(rng);
    s.gaps.push_back(0.0);
    for (int k = 1; k < scans; ++k) {
      double dt = gap(rng);
      if (spec.snap_to_grid) dt = std::max(snap(dt), spec.step);
      s.gaps.push_back(s.gaps.back() + dt);
    }
    if (spec.snap_to_grid) {
      for (auto& v : s.gaps) v = snap(v);
    }
    double room = std::max(spec.horizon - s.gaps.back(), 0.0);
    double t0 = unit(rng) * room;
    if (spec.snap_to_grid) t0 = std::min(snap(t0), std::floor(room / spec.step + 1e-9) * spec.step);
    s.observations.resize(scans, g.n());
    for (int k = 0; k < scans; ++k) {
      const double t = std::min(t0 + s.gaps[static_cast<std::size_t>(k)], spec.horizon);
      Eigen::VectorXd c = predict_at(traj, t);
      for (Eigen::Index r = 0; r < g.n(); ++r) {
        const double e = noise(rng);
        if (sigma[r] > 0.0) c[r] += sigma[r] * e;
      }
      s.observations.row(k) = c.cwiseMax(0.0).cwiseMin(1.0).transpose();
    }
    truth_t0.push_back({s.id, t0, 0.0});
    cohort.push_back(std::move(s));
  }

  std::vector<double> gate_times;
  Eigen::MatrixXd gate = gate_curve(model, &gate_times);
  return SyntheticCohort{std::move(cohort), GroundTruth{g, std::move(model), traj, std::move(truth_t0),
                                                        std::move(gate_times), std::move(gate)}};
}

}  // namespace progmoe
