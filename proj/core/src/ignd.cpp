#include "progmoe/ignd.hpp"

#include "progmoe/error.hpp"

namespace progmoe {

void IgndConfig::validate(Eigen::Index n) const {
  if (latent_dim < 1 || latent_dim > n) {
    throw Error(ErrorKind::InvalidConfig, "ignd latent_dim must lie in [1, n=" + std::to_string(n) + "], got " +
                                              std::to_string(latent_dim));
  }
  if (prop_hidden < 1 || message_dim < 1 || decoder_hidden < 1) {
    throw Error(ErrorKind::InvalidConfig, "ignd layer widths must be positive");
  }
  for (int w : encoder_layers) {
    if (w < 1) throw Error(ErrorKind::InvalidConfig, "ignd encoder widths must be positive");
  }
}

nn::DenseStack IgndConfig::prop_stack() const { return {"ignd.prop", 2, {prop_hidden}, message_dim}; }

nn::DenseStack IgndConfig::encoder_stack() const {
  const int extra = time_encoding == TimeEncoding::ScalarAppend ? 1 : 0;
  return {"ignd.enc", 1 + message_dim + extra, encoder_layers, latent_dim};
}

nn::DenseStack IgndConfig::decoder_stack() const { return {"ignd.dec", latent_dim, {decoder_hidden}, 1}; }

MessageGraph MessageGraph::from(const GraphOperators& ops) {
  MessageGraph g;
  g.n = ops.n();
  g.support = Eigen::MatrixXd::Zero(g.n, g.n);
  for (Eigen::Index u = 0; u < g.n; ++u) {
    for (Eigen::Index v = 0; v < g.n; ++v) {
      const double w = ops.adjacency(u, v);
      if (w == 0.0) continue;
      g.target.push_back(u);
      g.source.push_back(v);
      g.weight.push_back(w);
      g.support(u, v) = 1.0;
    }
  }
  return g;
}

void add_ignd_params(ad::ParamStore& store, const IgndConfig& cfg, std::mt19937_64& rng) {
  nn::add_params(store, cfg.prop_stack(), rng, false);
  nn::add_params(store, cfg.encoder_stack(), rng, false);
  // Zero readout: the expert starts as the zero map.
  nn::add_params(store, cfg.decoder_stack(), rng, true);
}

ad::Var ignd_encode(const IgndConfig& cfg, const nn::Binding& params, const MessageGraph& graph, ad::Var c,
                    double tau) {
  ad::Tape& tape = *c.tape();
  std::vector<ad::Var> enc_in{c};
  if (!graph.target.empty()) {
    ad::Var pairs = ad::concat_cols({ad::gather_rows(c, graph.target), ad::gather_rows(c, graph.source)});
    ad::Var messages = nn::forward(cfg.prop_stack(), params, pairs);
    enc_in.push_back(ad::segment_sum(messages, graph.target, graph.weight, graph.n));
  } else {
    enc_in.push_back(tape.constant(ad::Matrix::Zero(graph.n, cfg.message_dim)));
  }
  if (cfg.time_encoding == TimeEncoding::ScalarAppend) {
    enc_in.push_back(tape.constant(ad::Matrix::Constant(graph.n, 1, tau)));
  }
  return nn::forward(cfg.encoder_stack(), params, ad::concat_cols(enc_in));
}

IgndNodes ignd_forward(const IgndConfig& cfg, const nn::Binding& params, const MessageGraph& graph, ad::Var c,
                       double tau) {
  IgndNodes out;
  out.h = ignd_encode(cfg, params, graph, c, tau);
  ad::Var affinity = ad::sigmoid(ad::matmul(out.h, ad::transpose(out.h)));
  if (cfg.mask_to_support) affinity = ad::hadamard(affinity, c.tape()->constant(graph.support));
  out.a_hat = ad::row_normalize(affinity);
  // one diffusion-like step (A_hat - I) h; a node in agreement with its
  // neighbourhood gets no graph-driven change beyond the readout bias
  const ad::Var flux = ad::sub(ad::matmul(out.a_hat, out.h), out.h);
  out.dcdt = nn::forward(cfg.decoder_stack(), params, flux);
  return out;
}

namespace {

void check_state(const GraphOperators& ops, const Eigen::VectorXd& c) {
  if (c.size() != ops.n()) throw Error(ErrorKind::DimensionMismatch, "state length does not match region count");
  if (!c.allFinite()) throw Error(ErrorKind::NonFiniteInput, "state contains NaN or Inf");
}

}  // namespace

LatentState encode(const ad::ParamStore& params, const IgndConfig& cfg, const GraphOperators& ops,
                   const Eigen::VectorXd& c, double tau) {
  check_state(ops, c);
  ad::Tape tape;
  const nn::Binding bound = nn::bind_constants(tape, params);
  const MessageGraph graph = MessageGraph::from(ops);
  IgndNodes nodes = ignd_forward(cfg, bound, graph, tape.constant(c), tau);
  return {nodes.h.value(), nodes.a_hat.value()};
}

Eigen::VectorXd eval_f_S(const ad::ParamStore& params, const IgndConfig& cfg, const GraphOperators& ops,
                         const Eigen::VectorXd& c, double tau) {
  check_state(ops, c);
  ad::Tape tape;
  const nn::Binding bound = nn::bind_constants(tape, params);
  const MessageGraph graph = MessageGraph::from(ops);
  return ignd_forward(cfg, bound, graph, tape.constant(c), tau).dcdt.value().col(0);
}

}  // namespace progmoe
