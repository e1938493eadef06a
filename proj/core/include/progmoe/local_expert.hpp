#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "progmoe/autodiff.hpp"
#include "progmoe/nn.hpp"

namespace progmoe {

/// Node-local reaction network: output[u] = mlp(c[u] (, t/T)), weights shared across regions.
struct LocalExpertConfig {
  std::vector<int> hidden_widths{32, 32};
  nn::Activation activation = nn::Activation::Tanh;
  bool time_input = false;

  nn::DenseStack stack() const;
};

void add_local_params(ad::ParamStore& store, const LocalExpertConfig& cfg, std::mt19937_64& rng);

ad::Var local_forward(const LocalExpertConfig& cfg, const nn::Binding& params, ad::Var c, double tau);

Eigen::VectorXd eval_f_L(const ad::ParamStore& params, const LocalExpertConfig& cfg, const Eigen::VectorXd& c,
                         double tau);

}  // namespace progmoe
