#include "progmoe/artifacts.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "progmoe/csv.hpp"
#include "progmoe/error.hpp"
#include "progmoe/synthetic.hpp"

namespace progmoe {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  return ordered_json{{"shape", {m.rows(), m.cols()}}, {"values", values}};
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& what) {
  const auto shape = j.at("shape").get<std::vector<long>>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != values.size()) {
    throw Error(ErrorKind::ParseError, what + ": shape and value count disagree");
  }
  Eigen::MatrixXd m(shape[0], shape[1]);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = values[i++];
  return m;
}

ordered_json placements_json(const std::vector<Placement>& placements) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : placements) arr.push_back({{"id", p.subject_id}, {"t0", p.t0}, {"sse", p.sse}});
  return arr;
}

ordered_json failures_json(const std::vector<AlignmentFailure>& failures) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : failures) {
    arr.push_back({{"id", f.subject_id}, {"kind", std::string(to_string(f.kind))}, {"message", f.message}});
  }
  return arr;
}

ordered_json gate_json(const std::vector<double>& times, const Eigen::MatrixXd& gate) {
  ordered_json cols = ordered_json::object();
  cols["t"] = times;
  const char* names[] = {"beta_M", "beta_S", "beta_L"};
  for (int j = 0; j < 3; ++j) {
    std::vector<double> v(static_cast<std::size_t>(gate.rows()));
    for (Eigen::Index k = 0; k < gate.rows(); ++k) v[static_cast<std::size_t>(k)] = gate(k, j);
    cols[names[j]] = v;
  }
  return cols;
}

ordered_json pearson_json(const PearsonSummary& p) {
  ordered_json j;
  j["mean"] = std::isfinite(p.mean) ? ordered_json(p.mean) : ordered_json(nullptr);
  j["used"] = p.used;
  j["skipped"] = p.skipped;
  return j;
}

std::vector<std::string> read_header(std::istream& in, const std::string& what) {
  std::string line;
  if (!csv::next_line(in, line)) throw Error(ErrorKind::ParseError, what + ": empty file");
  return csv::split_line(line);
}

void expect_header(const std::vector<std::string>& got, const std::vector<std::string>& want, const std::string& what) {
  if (got != want) throw Error(ErrorKind::ParseError, what + ": unexpected header");
}

}  // namespace

// ---------------------------------------------------------------- checkpoint

std::string checkpoint_json(const EngineConfig& config, const Connectome& connectome, const MoeModel& model) {
  ordered_json j;
  j["format"] = "progmoe-checkpoint";
  j["version"] = kCheckpointVersion;
  const std::string text = dump(config);
  j["config_hash"] = hex64(fnv1a64(text));
  j["config"] = text;
  j["rng"] = {{"engine", "mt19937_64"}, {"seed", config.train.seed}};
  j["connectome"] = {{"regions", connectome.region_names()}, {"adjacency", matrix_json(connectome.adjacency())}};
  ordered_json params = ordered_json::object();
  for (const auto& e : model.params().entries()) {
    ordered_json p = matrix_json(e.value);
    p["trainable"] = e.trainable;
    params[e.name] = p;
  }
  j["params"] = params;
  return j.dump(1) + "\n";
}

void save_checkpoint(const std::string& path, const EngineConfig& config, const Connectome& connectome,
                     const MoeModel& model) {
  write_text_file(path, checkpoint_json(config, connectome, model));
}

Checkpoint parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "progmoe-checkpoint") {
      throw Error(ErrorKind::ParseError, "checkpoint: wrong format tag");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error(ErrorKind::ParseError, "checkpoint: unsupported version " + std::to_string(version));
    }
    const std::string text_cfg = j.at("config").get<std::string>();
    if (hex64(fnv1a64(text_cfg)) != j.at("config_hash").get<std::string>()) {
      throw Error(ErrorKind::ParseError, "checkpoint: config hash mismatch");
    }
    std::istringstream cfg_in(text_cfg);
    EngineConfig config = engine_config_from(KeyValues::parse(cfg_in, "checkpoint config"));
    Connectome connectome = Connectome::from_adjacency(j.at("connectome").at("regions").get<std::vector<std::string>>(),
                                                       matrix_from(j.at("connectome").at("adjacency"), "adjacency"));
    ad::ParamStore store;
    // Insertion order of the reference layout is restored by from_params.
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) {
      store.add(it.key(), matrix_from(it.value(), it.key()), it.value().value("trainable", true));
    }
    MoeModel model = MoeModel::from_params(config.model, connectome.n(), std::move(store));
    if (config.train.freeze_mechanistic) model.params().set_trainable_prefix("mech.", false);
    return Checkpoint{std::move(config), std::move(connectome), std::move(model)};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_text_file(path)); }

// -------------------------------------------------------------------- reports

std::string fit_report_json(const FitReport& r, const EngineConfig& config) {
  ordered_json j;
  j["format"] = "progmoe-fit-report";
  j["config_hash"] = hex64(config_hash(config));
  j["converged"] = r.converged;
  j["outer_iterations"] = r.history.size();
  j["best"] = {{"outer", r.best_outer}, {"epoch", r.best_epoch}, {"val_traj", r.best_val_traj}};

  ordered_json history = ordered_json::array();
  for (const auto& h : r.history) {
    std::vector<double> total, traj, norm, ortho, val;
    for (const auto& e : h.epochs) {
      total.push_back(e.train.total);
      traj.push_back(e.train.traj);
      norm.push_back(e.train.norm);
      ortho.push_back(e.train.ortho);
      val.push_back(e.val_traj);
    }
    history.push_back({{"iteration", h.iteration},
                       {"train_total", total},
                       {"train_traj", traj},
                       {"train_norm", norm},
                       {"train_ortho", ortho},
                       {"val_traj", val},
                       {"first_epoch_train_traj", h.first_epoch_train_traj},
                       {"aligned_train_traj", h.aligned_train_traj}});
  }
  j["history"] = history;
  j["test"] = {{"sse", r.test_sse}, {"pearson", pearson_json(r.test_pearson)}, {"scans", r.test_scans}};
  j["mechanistic"] = {{"k", r.k}, {"alpha", r.alpha}};
  j["splits"] = {{"train", r.train_ids}, {"val", r.val_ids}, {"test", r.test_ids}};
  j["placements"] = {{"train", placements_json(r.train_placements)},
                     {"val", placements_json(r.val_placements)},
                     {"test", placements_json(r.test_placements)}};
  j["failures"] = failures_json(r.failures);
  j["gate"] = gate_json(r.gate_times, r.gate);

  ordered_json bins = ordered_json::array();
  for (std::size_t b = 0; b < r.error_map.bins.size(); ++b) {
    ordered_json mse = ordered_json::array();
    for (Eigen::Index c = 0; c < r.error_map.mse.cols(); ++c) {
      const double v = r.error_map.mse(static_cast<Eigen::Index>(b), c);
      mse.push_back(std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr));
    }
    bins.push_back({{"lo", r.error_map.bins[b].first},
                    {"hi", r.error_map.bins[b].second},
                    {"count", r.error_map.counts[b]},
                    {"mse", mse}});
  }
  j["error_map"] = bins;
  return j.dump(1) + "\n";
}

std::string ground_truth_json(const GroundTruth& truth) {
  ordered_json j;
  j["format"] = "progmoe-ground-truth";
  const MechanisticParams mech = truth.model.mechanistic();
  j["mechanistic"] = {{"k", mech.k()}, {"alpha", mech.alpha()}};
  const Eigen::VectorXd c0 = truth.model.c0();
  j["c0"] = std::vector<double>(c0.data(), c0.data() + c0.size());
  j["placements"] = placements_json(truth.placements);
  j["gate"] = gate_json(truth.gate_times, truth.gate);
  ordered_json params = ordered_json::object();
  for (const auto& e : truth.model.params().entries()) params[e.name] = matrix_json(e.value);
  j["params"] = params;
  return j.dump(1) + "\n";
}

std::vector<Placement> load_ground_truth_placements(const std::string& path) {
  try {
    const json j = json::parse(read_text_file(path));
    std::vector<Placement> out;
    for (const auto& p : j.at("placements")) {
      out.push_back({p.at("id").get<std::string>(), p.at("t0").get<double>(), p.at("sse").get<double>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "ground truth '" + path + "': " + e.what());
  }
}

std::string metrics_json(const MetricsSummary& m) {
  ordered_json j;
  j["sse"] = m.sse;
  j["pearson"] = pearson_json(m.pearson);
  j["subjects"] = m.subjects;
  j["scans"] = m.scans;
  j["failures"] = failures_json(m.failures);
  return j.dump(1) + "\n";
}

// ----------------------------------------------------------------------- CSV

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != traj.n()) {
    throw Error(ErrorKind::DimensionMismatch, "trajectory CSV: region name count differs from the state width");
  }
  out << "t";
  for (const auto& name : names) out << "," << name;
  out << "\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << csv::format_double(traj.times[k]);
    for (Eigen::Index c = 0; c < traj.n(); ++c) out << "," << csv::format_double(traj.states(static_cast<Eigen::Index>(k), c));
    out << "\n";
  }
}

TrajectoryTable read_trajectory_csv(std::istream& in) {
  const auto header = read_header(in, "trajectory CSV");
  if (header.size() < 2 || header[0] != "t") throw Error(ErrorKind::ParseError, "trajectory CSV: header must be t,<regions>");
  TrajectoryTable t;
  t.region_names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (csv::next_line(in, line)) {
    const auto f = csv::split_line(line);
    if (f.size() != header.size()) throw Error(ErrorKind::ParseError, "trajectory CSV: ragged row");
    t.times.push_back(csv::parse_double(f[0], "trajectory CSV"));
    std::vector<double> row;
    for (std::size_t c = 1; c < f.size(); ++c) row.push_back(csv::parse_double(f[c], "trajectory CSV"));
    rows.push_back(std::move(row));
  }
  t.states.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.region_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      t.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return t;
}

void write_gate_csv(std::ostream& out, const std::vector<double>& times, const Eigen::MatrixXd& gate) {
  if (gate.rows() != static_cast<Eigen::Index>(times.size()) || gate.cols() != 3) {
    throw Error(ErrorKind::DimensionMismatch, "gate CSV: expected one 3-vector per time");
  }
  out << "t,beta_M,beta_S,beta_L\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << csv::format_double(times[k]);
    for (int j = 0; j < 3; ++j) out << "," << csv::format_double(gate(static_cast<Eigen::Index>(k), j));
    out << "\n";
  }
}

GateTable read_gate_csv(std::istream& in) {
  expect_header(read_header(in, "gate CSV"), {"t", "beta_M", "beta_S", "beta_L"}, "gate CSV");
  GateTable g;
  std::vector<std::array<double, 3>> rows;
  std::string line;
  while (csv::next_line(in, line)) {
    const auto f = csv::split_line(line);
    if (f.size() != 4) throw Error(ErrorKind::ParseError, "gate CSV: ragged row");
    g.times.push_back(csv::parse_double(f[0], "gate CSV"));
    rows.push_back({csv::parse_double(f[1], "gate CSV"), csv::parse_double(f[2], "gate CSV"),
                    csv::parse_double(f[3], "gate CSV")});
  }
  g.gate.resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < 3; ++j) g.gate(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j)];
  return g;
}

void write_placements_csv(std::ostream& out, const std::vector<Placement>& placements) {
  out << "id,t0,sse\n";
  for (const auto& p : placements) {
    out << p.subject_id << "," << csv::format_double(p.t0) << "," << csv::format_double(p.sse) << "\n";
  }
}

std::vector<Placement> read_placements_csv(std::istream& in) {
  expect_header(read_header(in, "placements CSV"), {"id", "t0", "sse"}, "placements CSV");
  std::vector<Placement> out;
  std::string line;
  while (csv::next_line(in, line)) {
    const auto f = csv::split_line(line);
    if (f.size() != 3) throw Error(ErrorKind::ParseError, "placements CSV: ragged row");
    out.push_back({f[0], csv::parse_double(f[1], "placements CSV"), csv::parse_double(f[2], "placements CSV")});
  }
  return out;
}

void write_error_map_csv(std::ostream& out, const ErrorMap& map, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != map.mse.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "error map CSV: region name count differs from the map width");
  }
  out << "bin_lo,bin_hi,region,mse,count\n";
  for (std::size_t b = 0; b < map.bins.size(); ++b) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      out << csv::format_double(map.bins[b].first) << "," << csv::format_double(map.bins[b].second) << ","
          << names[c] << "," << csv::format_double(map.mse(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)))
          << "," << map.counts[b] << "\n";
    }
  }
}

ErrorMapTable read_error_map_csv(std::istream& in) {
  expect_header(read_header(in, "error map CSV"), {"bin_lo", "bin_hi", "region", "mse", "count"}, "error map CSV");
  struct Row {
    double lo, hi;
    std::string region;
    double mse;
    std::size_t count;
  };
  std::vector<Row> rows;
  std::string line;
  while (csv::next_line(in, line)) {
    const auto f = csv::split_line(line);
    if (f.size() != 5) throw Error(ErrorKind::ParseError, "error map CSV: ragged row");
    rows.push_back({csv::parse_double(f[0], "error map CSV"), csv::parse_double(f[1], "error map CSV"), f[2],
                    csv::parse_double(f[3], "error map CSV"),
                    static_cast<std::size_t>(csv::parse_double(f[4], "error map CSV"))});
  }
  ErrorMapTable t;
  for (const auto& r : rows) {
    if (t.map.bins.empty() || t.map.bins.back() != std::make_pair(r.lo, r.hi)) {
      t.map.bins.emplace_back(r.lo, r.hi);
      t.map.counts.push_back(r.count);
    }
    if (t.map.bins.size() == 1) t.region_names.push_back(r.region);
  }
  const auto bins = static_cast<Eigen::Index>(t.map.bins.size());
  const auto n = static_cast<Eigen::Index>(t.region_names.size());
  if (static_cast<Eigen::Index>(rows.size()) != bins * n) throw Error(ErrorKind::ParseError, "error map CSV: incomplete grid");
  t.map.mse.resize(bins, n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.map.mse(static_cast<Eigen::Index>(i) / n, static_cast<Eigen::Index>(i) % n) = rows[i].mse;
  }
  return t;
}

void write_cutoffs_csv(std::ostream& out, const std::vector<GmmCutoff>& cutoffs, const std::vector<std::string>& names) {
  if (names.size() != cutoffs.size()) throw Error(ErrorKind::DimensionMismatch, "cutoff CSV: one name per region required");
  out << "region,mu_neg,sigma_neg,mu_pos,sigma_pos,weight_neg,cutoff,degenerate\n";
  auto d = [](double v) { return csv::format_double(v); };
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    const auto& c = cutoffs[i];
    out << names[i] << "," << d(c.mu_neg) << "," << d(c.sigma_neg) << "," << d(c.mu_pos) << "," << d(c.sigma_pos)
        << "," << d(c.weight_neg) << "," << d(c.cutoff) << "," << (c.degenerate ? "true" : "false") << "\n";
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace progmoe
