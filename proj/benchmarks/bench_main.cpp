#include <benchmark/benchmark.h>

#include <vector>

#include "sami/encoder.hpp"
#include "sami/env.hpp"
#include "sami/estimators.hpp"
#include "sami/nn.hpp"
#include "sami/rng.hpp"
#include "sami/sac.hpp"
#include "sami/tape.hpp"

namespace {

using namespace sami;

void bench_lstm_step(benchmark::State& state) {
  RngStream rng(1);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const LstmCellParams p = make_lstm(13, hidden, rng);
  std::vector<double> x(13), h(hidden, 0.0), c(hidden, 0.0);
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) {
    lstm_step_value(p, x.data(), h.data(), c.data(), h.data(), c.data());
    benchmark::DoNotOptimize(h.data());
  }
}
BENCHMARK(bench_lstm_step)->Arg(32)->Arg(128);

void bench_encoder_prefix(benchmark::State& state) {
  RngStream rng(2);
  const EncoderParams p = make_encoder(env::kObsDim, env::kActDim, 128, 6, rng);
  Trajectory tr;
  tr.obs_dim = env::kObsDim;
  tr.act_dim = env::kActDim;
  const std::size_t len = env::kEpisodeLen;
  for (std::size_t i = 0; i < (len + 1) * tr.obs_dim; ++i) tr.obs.push_back(rng.normal());
  for (std::size_t i = 0; i < len * tr.act_dim; ++i) tr.act.push_back(rng.normal());
  for (std::size_t i = 0; i < len; ++i) {
    tr.rew.push_back(rng.normal());
    tr.ret += tr.rew.back();
  }
  for (auto _ : state) {
    const ContextEmbedding e = encode(p, tr);
    benchmark::DoNotOptimize(e.values.data());
  }
}
BENCHMARK(bench_encoder_prefix);

void bench_infonce(benchmark::State& state) {
  RngStream rng(3);
  const auto k = static_cast<std::size_t>(state.range(0));
  EstimatorBatch b;
  const auto draw = [&] {
    ContextEmbedding e;
    e.values.resize(6);
    for (auto& v : e.values) v = rng.normal();
    return EstimatorSample{e, 0, std::nullopt};
  };
  b.query = draw();
  b.positive = draw();
  for (std::size_t i = 0; i + 1 < k; ++i) b.negatives.push_back(draw());
  const SimilarityConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(infonce(b, cfg));
}
BENCHMARK(bench_infonce)->Arg(12)->Arg(64);

void bench_env_step(benchmark::State& state) {
  RngStream rng(4);
  const TaskFeatures f{5.0, 1.0, {}};
  BlockRelocateState s = reset(f, rng);
  const std::array<double, 3> a{0.5, 0.2, -1.0};
  for (auto _ : state) {
    const StepResult r = step(s, a, f);
    s = r.state;
    if (r.done) s = reset(f, rng);
    benchmark::DoNotOptimize(s.x);
  }
}
BENCHMARK(bench_env_step);

void bench_critic_backward(benchmark::State& state) {
  RngStream rng(5);
  SacConfig cfg;
  cfg.obs_dim = env::kObsDim;
  cfg.act_dim = env::kActDim;
  cfg.embed_dim = 6;
  cfg.hidden = {64, 64};
  SacParams p = make_sac(cfg, rng);
  std::vector<SacTransition> batch(64);
  std::vector<ContextEmbedding> embs(batch.size());
  std::vector<double> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].obs.resize(cfg.obs_dim);
    batch[i].act.resize(cfg.act_dim);
    batch[i].next_obs.resize(cfg.obs_dim);
    for (auto& v : batch[i].obs) v = rng.normal();
    for (auto& v : batch[i].act) v = rng.uniform(-1.0, 1.0);
    for (auto& v : batch[i].next_obs) v = rng.normal();
    batch[i].rew = rng.normal();
    embs[i].values.resize(cfg.embed_dim);
    for (auto& v : embs[i].values) v = rng.normal();
    targets[i] = rng.normal();
  }
  for (auto _ : state) {
    Tape t;
    const auto c1 = mlp_leaves(t, p.critic1, true);
    const auto c2 = mlp_leaves(t, p.critic2, true);
    std::vector<Tape::NodeId> emb_nodes;
    for (const auto& e : embs) emb_nodes.push_back(t.constant(Tensor::vector(e.values)));
    const auto loss = critic_loss_node(t, c1, c2, batch, emb_nodes, targets);
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(c1[0]).data());
  }
}
BENCHMARK(bench_critic_backward);

}  // namespace

BENCHMARK_MAIN();
