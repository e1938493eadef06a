#pragma once

#include <random>
#include <string>
#include <vector>

#include "progmoe/autodiff.hpp"

namespace progmoe::nn {

enum class Activation { Tanh, Softplus };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// A stack of dense layers x -> act(x W0 + b0) -> ... -> x Wk + bk.
/// Parameters are stored as "<prefix>.W<i>" (in x out) and "<prefix>.b<i>" (1 x out).
struct DenseStack {
  std::string prefix;
  int input = 1;
  std::vector<int> hidden;
  int output = 1;
  Activation activation = Activation::Tanh;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  std::string weight_name(int layer) const { return prefix + ".W" + std::to_string(layer); }
  std::string bias_name(int layer) const { return prefix + ".b" + std::to_string(layer); }
};

/// Glorot-uniform weights, zero biases. With `zero_last` the output layer
/// starts as the zero map.
void add_params(ad::ParamStore& store, const DenseStack& stack, std::mt19937_64& rng, bool zero_last);

/// Looks up tape nodes for the parameters of a store bound with Tape::bind.
class Binding {
 public:
  Binding() = default;
  Binding(const ad::ParamStore* store, std::vector<ad::Var> vars) : store_(store), vars_(std::move(vars)) {}

  ad::Var operator[](const std::string& name) const { return vars_[store_->index(name)]; }
  bool contains(const std::string& name) const { return store_ && store_->contains(name); }
  const std::vector<ad::Var>& vars() const { return vars_; }

 private:
  const ad::ParamStore* store_ = nullptr;
  std::vector<ad::Var> vars_;
};

/// Binds every parameter as a differentiable leaf.
Binding bind(ad::Tape& tape, ad::ParamStore& store);
/// Binds every parameter as a constant (forward-only evaluation).
Binding bind_constants(ad::Tape& tape, const ad::ParamStore& store);

/// Applies the stack row-wise to `x` (rows x input).
ad::Var forward(const DenseStack& stack, const Binding& params, ad::Var x);

}  // namespace progmoe::nn
