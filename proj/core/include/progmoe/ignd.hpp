#pragma once

// Inhomogeneous graph neural diffusion expert.
//
// Encoder: every node aggregates A-weighted messages phi([c_u, c_v]) from its
// anatomical neighbours and maps [c_u, aggregate (, t/T)] to a latent row h_u.
// Decoder: the refined adjacency A_hat = rownorm(sigmoid(h h^T)) drives one
// propagation step, and a per-node readout of (A_hat - I) h gives dc/dt.
// The pair (h, A_hat h) is the learned low-rank stand-in for K G(c, t) K^T.

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "progmoe/autodiff.hpp"
#include "progmoe/graph.hpp"
#include "progmoe/nn.hpp"

namespace progmoe {

enum class TimeEncoding { None, ScalarAppend };

struct IgndConfig {
  int latent_dim = 16;
  std::vector<int> encoder_layers{16};
  int prop_hidden = 8;
  int message_dim = 8;
  int decoder_hidden = 16;
  TimeEncoding time_encoding = TimeEncoding::None;
  bool mask_to_support = false;

  /// Throws InvalidConfig unless 1 <= latent_dim <= n.
  void validate(Eigen::Index n) const;

  nn::DenseStack prop_stack() const;
  nn::DenseStack encoder_stack() const;
  nn::DenseStack decoder_stack() const;
};

/// Directed message pairs (target u <- source v) for every A_uv > 0, ordered by (u, v).
struct MessageGraph {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> target;
  std::vector<Eigen::Index> source;
  std::vector<double> weight;
  Eigen::MatrixXd support;  // 1 where A_uv > 0

  static MessageGraph from(const GraphOperators& ops);
};

struct LatentState {
  Eigen::MatrixXd h;      // n x latent_dim
  Eigen::MatrixXd a_hat;  // n x n, row-stochastic
};

void add_ignd_params(ad::ParamStore& store, const IgndConfig& cfg, std::mt19937_64& rng);

struct IgndNodes {
  ad::Var h;
  ad::Var a_hat;
  ad::Var dcdt;
};

/// Tape form. `tau` is normalized time t / T.
ad::Var ignd_encode(const IgndConfig& cfg, const nn::Binding& params, const MessageGraph& graph, ad::Var c,
                    double tau);
IgndNodes ignd_forward(const IgndConfig& cfg, const nn::Binding& params, const MessageGraph& graph, ad::Var c,
                       double tau);

LatentState encode(const ad::ParamStore& params, const IgndConfig& cfg, const GraphOperators& ops,
                   const Eigen::VectorXd& c, double tau);
Eigen::VectorXd eval_f_S(const ad::ParamStore& params, const IgndConfig& cfg, const GraphOperators& ops,
                         const Eigen::VectorXd& c, double tau);

}  // namespace progmoe
