#pragma once

// Synthetic cohorts drawn from a known model, for recovery experiments.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "progmoe/alignment.hpp"
#include "progmoe/config.hpp"
#include "progmoe/graph.hpp"
#include "progmoe/moe.hpp"

namespace progmoe {

enum class TruthKind {
  Mechanistic,  // gate fixed at [1, 0, 0]
  TwoRegime,    // steep gate: mechanistic early, local reaction late
  Checkpoint,   // any saved model
};

struct GeneratorSpec {
  std::string graph = "ring";  // ring | path | file
  int graph_n = 8;
  double graph_weight = 1.0;
  std::string graph_file;

  TruthKind truth = TruthKind::Mechanistic;
  double k = 0.2;
  double alpha = 0.8;
  double c0_base = 0.05;
  double c0_seed = 0.3;
  std::vector<int> seed_regions{0};
  double gate_steepness = 40.0;  // two-regime switch sharpness around T/2
  double gate_gain = 2.5;        // two-regime logit separation
  double local_rate = 0.5;       // late growth rate * tanh(3 (plateau - c))
  double local_plateau = 0.9;
  std::string checkpoint;

  double horizon = 12.0;
  double step = 0.1;

  int subjects = 60;
  int scans_min = 1;
  int scans_max = 2;
  double gap_min = 0.5;  // between consecutive scans
  double gap_max = 2.0;
  bool snap_to_grid = false;
  double noise_sigma = 0.01;
  std::vector<int> noisy_regions;  // extra noise in these regions
  double noisy_sigma = 0.0;
  std::string id_prefix = "s";

  void validate() const;
};

TruthKind parse_truth_kind(const std::string& name);
std::string to_string(TruthKind kind);

GeneratorSpec generator_spec_from(const KeyValues& kv);
GeneratorSpec load_generator_spec(const std::string& path);
std::string dump(const GeneratorSpec& spec);

struct GroundTruth {
  Connectome connectome;
  MoeModel model;
  Trajectory trajectory;
  std::vector<Placement> placements;  // true t0 per subject (sse = 0)
  std::vector<double> gate_times;
  Eigen::MatrixXd gate;  // grid_len x 3
};

struct SyntheticCohort {
  Cohort cohort;
  GroundTruth truth;
};

/// Builds the true model of a spec (no sampling).
MoeModel build_truth_model(const GeneratorSpec& spec, const Connectome& g);
Connectome build_spec_graph(const GeneratorSpec& spec);

/// Integrates the true model, samples t0 and gaps per subject, and adds
/// Gaussian noise clipped to [0, 1]. Identical spec and seed give identical output.
SyntheticCohort generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace progmoe
