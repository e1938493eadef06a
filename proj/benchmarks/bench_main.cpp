#include <benchmark/benchmark.h>

#include <random>

#include "progmoe/alignment.hpp"
#include "progmoe/gmm.hpp"
#include "progmoe/graph.hpp"
#include "progmoe/moe.hpp"
#include "progmoe/synthetic.hpp"
#include "progmoe/training.hpp"

namespace {

using namespace progmoe;

ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.ignd.latent_dim = 4;
  cfg.ignd.encoder_layers = {8};
  cfg.local.hidden_widths = {16};
  cfg.gate.hidden = 4;
  return cfg;
}

// a model whose neural readouts are nonzero, so every expert does real work
MoeModel busy_model(Eigen::Index n) {
  MoeModel m = MoeModel::create(bench_config(), n, 1);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d(0.0, 0.2);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    auto& e = m.params().entry(i);
    if (e.name.rfind("mech.", 0) == 0 || e.name == "c0_raw") continue;
    for (Eigen::Index k = 0; k < e.value.size(); ++k) e.value.data()[k] += d(rng);
  }
  return m;
}

void BM_LaplacianOperators(benchmark::State& state) {
  const Connectome g = ring_graph(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_operators(g));
}
BENCHMARK(BM_LaplacianOperators)->Arg(8)->Arg(64)->Arg(256);

void BM_RhsEval(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const GraphOperators ops = build_operators(ring_graph(n));
  const MoeModel m = busy_model(n);
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(n, 0.05, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(eval_rhs(m, ops, c, 3.0));
}
BENCHMARK(BM_RhsEval)->Arg(8)->Arg(32)->Arg(86);

void BM_Integrate(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const GraphOperators ops = build_operators(ring_graph(n));
  const MoeModel m = busy_model(n);
  for (auto _ : state) benchmark::DoNotOptimize(integrate(m, ops));
}
BENCHMARK(BM_Integrate)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_LossGradient(benchmark::State& state) {
  GeneratorSpec spec;
  spec.graph_n = static_cast<int>(state.range(0));
  spec.subjects = 40;
  const SyntheticCohort syn = generate_synthetic(spec, 4);
  const GraphOperators ops = build_operators(syn.truth.connectome);
  MoeModel m = busy_model(spec.graph_n);
  TrainConfig cfg;
  cfg.lambda1 = 0.1;
  cfg.lambda2 = 0.1;
  const auto placed = pair_placements(syn.truth.placements, syn.cohort);
  for (auto _ : state) {
    ad::Tape tape;
    const ModelBinding b = bind_model(tape, m, ops, true);
    const LossNodes loss = loss_nodes(b, integrate_nodes(b), placed, cfg);
    m.params().zero_grad();
    tape.backward(loss.total);
    benchmark::DoNotOptimize(loss.total.scalar());
  }
}
BENCHMARK(BM_LossGradient)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_AlignCohort(benchmark::State& state) {
  GeneratorSpec spec;
  spec.subjects = static_cast<int>(state.range(0));
  const SyntheticCohort syn = generate_synthetic(spec, 5);
  for (auto _ : state) benchmark::DoNotOptimize(align_cohort(syn.truth.trajectory, syn.cohort));
}
BENCHMARK(BM_AlignCohort)->Arg(60)->Arg(240)->Unit(benchmark::kMillisecond);

void BM_GmmCutoff(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> lo(0.1, 0.05), hi(0.4, 0.05);
  std::vector<double> values;
  for (int i = 0; i < state.range(0); ++i) values.push_back(i % 2 ? lo(rng) : hi(rng));
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm_cutoff(values));
}
BENCHMARK(BM_GmmCutoff)->Arg(200)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
