#include "progmoe/nn.hpp"

#include <cmath>

#include "progmoe/error.hpp"

namespace progmoe::nn {

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  throw Error(ErrorKind::InvalidConfig, "unknown activation '" + name + "' (expected tanh|softplus)");
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "softplus"; }

void add_params(ad::ParamStore& store, const DenseStack& stack, std::mt19937_64& rng, bool zero_last) {
  int fan_in = stack.input;
  for (int layer = 0; layer < stack.layer_count(); ++layer) {
    const bool last = layer + 1 == stack.layer_count();
    const int fan_out = last ? stack.output : stack.hidden[static_cast<std::size_t>(layer)];
    ad::Matrix w = ad::Matrix::Zero(fan_in, fan_out);
    if (!(last && zero_last)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    store.add(stack.weight_name(layer), std::move(w));
    store.add(stack.bias_name(layer), ad::Matrix::Zero(1, fan_out));
    fan_in = fan_out;
  }
}

Binding bind(ad::Tape& tape, ad::ParamStore& store) { return Binding(&store, tape.bind(store)); }

Binding bind_constants(ad::Tape& tape, const ad::ParamStore& store) {
  std::vector<ad::Var> vars;
  vars.reserve(store.size());
  for (const auto& e : store.entries()) vars.push_back(tape.constant(e.value));
  return Binding(&store, std::move(vars));
}

ad::Var forward(const DenseStack& stack, const Binding& params, ad::Var x) {
  if (x.cols() != stack.input) {
    throw Error(ErrorKind::ShapeMismatch, stack.prefix + ": input has " + std::to_string(x.cols()) +
                                              " columns, expected " + std::to_string(stack.input));
  }
  ad::Var h = x;
  for (int layer = 0; layer < stack.layer_count(); ++layer) {
    h = ad::add_row_bias(ad::matmul(h, params[stack.weight_name(layer)]), params[stack.bias_name(layer)]);
    if (layer + 1 < stack.layer_count()) {
      h = stack.activation == Activation::Tanh ? ad::tanh(h) : ad::softplus(h);
    }
  }
  return h;
}

}  // namespace progmoe::nn
