#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sami/config.hpp"
#include "sami/encoder.hpp"
#include "sami/env.hpp"
#include "sami/replay.hpp"
#include "sami/sac.hpp"

namespace sami {

// Everything a run learns: the live context encoder, its momentum twin and
// the actor-critic parameters.
struct TrainedAgent {
  EncoderParams encoder;
  EncoderParams momentum;
  SacParams sac;
};

struct EpisodeRecord {
  std::string split;
  int task_id = 0;
  TaskFeatures features;
  double ret = 0.0;
  bool success = false;
  Skill skill = Skill::Other;
};

struct ProbePoint {
  std::size_t step = 0;
  std::string split;
  double mean_return = 0.0;
  double success_rate = 0.0;
};

// Per-training-round diagnostics; contrastive holds the round's mean estimate
// (0 when the variant has no contrastive term).
struct RoundDiagnostics {
  std::size_t step = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double contrastive = 0.0;
  double log_k = 0.0;
  std::size_t buffer_transitions = 0;
};

struct RunResult {
  std::string variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string env_version = kEnvVersion;
  std::string code_version = kCodeVersion;
  std::vector<EpisodeRecord> training_episodes;
  std::map<std::string, std::vector<EpisodeRecord>> eval_episodes;  // keyed by split
  std::vector<ProbePoint> probes;
  std::vector<RoundDiagnostics> rounds;
  double wall_clock_seconds = 0.0;
};

std::string run_result_json(const RunResult& r);
RunResult parse_run_result(const std::string& json_text);
// Behavioral payload only: no variant label, config hash or timing. Two runs
// that made identical decisions produce identical bytes here.
std::string behavior_json(const RunResult& r);

struct MetaTrainOutput {
  TrainedAgent agent;
  RunResult result;
  std::string buffer_jsonl;  // final replay contents, one JSON object per line
};

// Trains one seed end to end: per-episode task sampling, ranked-buffer
// storage, per-round gradient steps with the variant's contrastive term,
// momentum and target updates, periodic probes and a final evaluation over
// all three splits. Deterministic given (config, seed).
MetaTrainOutput meta_train(const ExperimentConfig& cfg, std::uint64_t seed);

// Frozen-parameter evaluation: deterministic actions, zero-initialized
// recurrent state per episode, embedding refreshed from the growing prefix at
// every step.
std::vector<EpisodeRecord> meta_test(const TrainedAgent& agent, const ExperimentConfig& cfg,
                                     const TaskSplit& split, std::size_t episodes_per_task,
                                     std::uint64_t seed);

// Mean over cells of the per-cell success rate.
double aggregate_success(const std::vector<EpisodeRecord>& episodes);
// Fraction of episodes per skill name.
std::map<std::string, double> skill_histogram(const std::vector<EpisodeRecord>& episodes);

void save_agent(const std::string& path, TrainedAgent& agent, const ExperimentConfig& cfg,
                std::uint64_t seed);
TrainedAgent load_agent(const std::string& path, ExperimentConfig* cfg_out = nullptr,
                        std::uint64_t* seed_out = nullptr);

// Runs meta_train for one seed and writes result.json, metrics.jsonl,
// buffer.jsonl, checkpoint.json and timing.json under cfg.out_dir. Returns
// the result file path.
std::string run_and_save(const ExperimentConfig& cfg, std::uint64_t seed);

// One meta_train per (value, seed); per-value aggregate rows. Axis is one of
// buffer_size, contrastive_batch, alpha, K (alias of contrastive_batch).
// Returns the aggregate CSV text and writes per-run files under cfg.out_dir.
std::string sweep(const ExperimentConfig& base, const std::string& axis,
                  const std::vector<double>& values);

// Aggregates result files: per (variant, split) mean and std of the per-seed
// aggregate success rates and returns, plus paired t-tests between variants
// on seed-matched aggregates.
std::string report(const std::vector<RunResult>& results);

// One row per evaluation episode: features, skill, success, the final-step
// embedding and its 2-D principal-component projection.
std::string export_embeddings_csv(const TrainedAgent& agent, const ExperimentConfig& cfg,
                                  const TaskSplit& split, std::size_t episodes_per_task,
                                  std::uint64_t seed);

// Estimator diagnostics for the CLI: suite is bounds, oracle or tightness.
// CSV columns: estimator, k, value, bound_logk, exact_mi, seed.
std::string estimator_suite_csv(const std::string& suite, std::uint64_t seed);

}  // namespace sami
