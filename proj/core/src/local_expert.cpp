#include "progmoe/local_expert.hpp"

#include "progmoe/error.hpp"

namespace progmoe {

nn::DenseStack LocalExpertConfig::stack() const {
  return {"local.mlp", time_input ? 2 : 1, hidden_widths, 1, activation};
}

void add_local_params(ad::ParamStore& store, const LocalExpertConfig& cfg, std::mt19937_64& rng) {
  nn::add_params(store, cfg.stack(), rng, true);
}

ad::Var local_forward(const LocalExpertConfig& cfg, const nn::Binding& params, ad::Var c, double tau) {
  ad::Var input = c;
  if (cfg.time_input) input = ad::concat_cols({c, c.tape()->constant(ad::Matrix::Constant(c.rows(), 1, tau))});
  return nn::forward(cfg.stack(), params, input);
}

Eigen::VectorXd eval_f_L(const ad::ParamStore& params, const LocalExpertConfig& cfg, const Eigen::VectorXd& c,
                         double tau) {
  if (!c.allFinite()) throw Error(ErrorKind::NonFiniteInput, "state contains NaN or Inf");
  ad::Tape tape;
  const nn::Binding bound = nn::bind_constants(tape, params);
  return local_forward(cfg, bound, tape.constant(c), tau).value().col(0);
}

}  // namespace progmoe
