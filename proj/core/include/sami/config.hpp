#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sami {

inline constexpr const char* kCodeVersion = "0.1.0";

// Full experiment description. Defaults follow the reference hyperparameter
// table; every field round-trips through JSON and unknown keys are rejected.
struct ExperimentConfig {
  std::string variant = "satesac";  // tesac | ccm | satesac | saccm

  // env
  std::string env_family = "block-relocate";
  std::size_t num_crippled = 0;

  // encoder
  std::size_t encoder_hidden = 128;
  std::size_t embed_dim = 6;
  bool normalize_embeddings = false;
  double momentum = 0.05;  // momentum encoder soft-update rate
  double beta = 0.1;       // similarity temperature

  // estimator
  double alpha = 1.0;  // contrastive loss coefficient
  std::size_t contrastive_batch = 12;
  bool pairwise_distance = false;  // soft-loss distance: mean-vs-mean or mean of pairwise
  bool detach_multiplier = false;
  bool cross_task_low_return_only = true;  // restrict cross-task negatives to low-return pools

  // replay
  std::size_t buffer_capacity = 100000;
  double top_fraction = 0.2;
  double bottom_fraction = 0.5;
  bool distinct_query = false;

  // rl
  std::vector<std::size_t> sac_hidden = {128, 128};
  double gamma = 0.99;
  double lr = 1e-3;
  double target_rate_critic = 0.01;
  double target_rate_actor = 0.05;
  double init_alpha = 1.0;
  std::size_t sac_batch = 256;
  bool encoder_grad_from_actor = false;  // also feed actor-loss gradients to the encoder

  // train
  std::size_t total_timesteps = 200000;
  std::size_t train_freq = 128;  // env steps between training rounds
  std::size_t grad_steps = 16;   // gradient steps per round
  std::size_t warmup_steps = 1000;  // uniform-random action warmup
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // eval
  std::size_t eval_episodes_per_task = 100;
  std::size_t probe_episodes = 10;
  std::size_t eval_every = 10000;

  std::string out_dir = "results";
};

// Throws std::invalid_argument with the offending field on bad values.
void validate(const ExperimentConfig& c);

// Strict JSON: unknown keys anywhere are an error.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical serialization (sorted keys); config_hash is FNV-1a over it.
std::string config_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

}  // namespace sami
