#pragma once

// File formats: checkpoints, fit reports, ground truth and the CSV exports.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "progmoe/alignment.hpp"
#include "progmoe/config.hpp"
#include "progmoe/gmm.hpp"
#include "progmoe/graph.hpp"
#include "progmoe/metrics.hpp"
#include "progmoe/moe.hpp"
#include "progmoe/training.hpp"

namespace progmoe {

struct GroundTruth;

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  EngineConfig config;
  Connectome connectome;
  MoeModel model;
};

/// JSON: format tag, version, config text and hash, RNG seed, connectome and
/// every parameter as {shape, row-major values}.
std::string checkpoint_json(const EngineConfig& config, const Connectome& connectome, const MoeModel& model);
void save_checkpoint(const std::string& path, const EngineConfig& config, const Connectome& connectome,
                     const MoeModel& model);
Checkpoint parse_checkpoint(const std::string& text);
Checkpoint load_checkpoint(const std::string& path);

std::string fit_report_json(const FitReport& report, const EngineConfig& config);
std::string ground_truth_json(const GroundTruth& truth);
/// Per-subject true t0 from a ground-truth file.
std::vector<Placement> load_ground_truth_placements(const std::string& path);

struct MetricsSummary {
  double sse = 0.0;
  PearsonSummary pearson;
  std::size_t subjects = 0;
  std::size_t scans = 0;
  std::vector<AlignmentFailure> failures;
};
std::string metrics_json(const MetricsSummary& m);

// ------------------------------------------------------------------- CSV

/// t,<region...>
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::string>& region_names);
struct TrajectoryTable {
  std::vector<std::string> region_names;
  std::vector<double> times;
  Eigen::MatrixXd states;
};
TrajectoryTable read_trajectory_csv(std::istream& in);

/// t,beta_M,beta_S,beta_L
void write_gate_csv(std::ostream& out, const std::vector<double>& times, const Eigen::MatrixXd& gate);
struct GateTable {
  std::vector<double> times;
  Eigen::MatrixXd gate;
};
GateTable read_gate_csv(std::istream& in);

/// id,t0,sse
void write_placements_csv(std::ostream& out, const std::vector<Placement>& placements);
std::vector<Placement> read_placements_csv(std::istream& in);

/// bin_lo,bin_hi,region,mse,count (mse is "nan" for empty bins)
void write_error_map_csv(std::ostream& out, const ErrorMap& map, const std::vector<std::string>& region_names);
struct ErrorMapTable {
  ErrorMap map;
  std::vector<std::string> region_names;
};
ErrorMapTable read_error_map_csv(std::istream& in);

/// region,mu_neg,sigma_neg,mu_pos,sigma_pos,weight_neg,cutoff,degenerate
void write_cutoffs_csv(std::ostream& out, const std::vector<GmmCutoff>& cutoffs,
                       const std::vector<std::string>& region_names);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace progmoe
