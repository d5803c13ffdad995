#pragma once

#include <span>
#include <vector>

#include "sami/encoder.hpp"
#include "sami/nn.hpp"
#include "sami/rng.hpp"
#include "sami/tape.hpp"

namespace sami {

struct SacConfig {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t embed_dim = 0;
  std::vector<std::size_t> hidden = {128, 128};
  double gamma = 0.99;
  double target_rate_critic = 0.01;
  double target_rate_actor = 0.05;
  double init_alpha = 1.0;
  double target_entropy = 0.0;  // defaulted to -act_dim by make_sac
  double log_std_min = -20.0;
  double log_std_max = 2.0;
};

// Actor maps (state, embedding) to per-dimension mean and log-std; critics
// map (state, action, embedding) to a scalar value. Target networks are
// updated only through update_targets.
struct SacParams {
  SacConfig cfg;
  Mlp actor;
  Mlp critic1, critic2;
  Mlp target_critic1, target_critic2;
  Mlp target_actor;
  Tensor log_alpha;

  double alpha() const;
};

SacParams make_sac(SacConfig cfg, RngStream& rng);

std::vector<NamedParam> named_params(SacParams& p);

struct PolicyOutput {
  std::vector<double> action;  // tanh-squashed, in [-1, 1] per dim
  double log_prob = 0.0;
};

// Squashed-Gaussian draw; deterministic returns tanh(mean). The log-prob
// includes the tanh change-of-variables correction.
PolicyOutput act(const SacParams& p, std::span<const double> obs, const ContextEmbedding& emb,
                 bool deterministic, RngStream& rng);

struct SacTransition {
  std::vector<double> obs;
  std::vector<double> act;
  std::vector<double> next_obs;
  double rew = 0.0;
  bool done = false;
};

// Soft Bellman targets y = r + gamma (1-done) (min twin target Q - alpha log
// pi), with the next action drawn from the target actor using the provided
// standard-normal noise (batch * act_dim, row major).
std::vector<double> critic_targets(const SacParams& p, const std::vector<SacTransition>& batch,
                                   const std::vector<ContextEmbedding>& next_embeddings,
                                   const std::vector<double>& noise);

// Mean over the batch of (q1 - y)^2 + (q2 - y)^2. Embedding nodes may be
// encoder subgraphs, so the encoder trains through this loss. Swapping the
// two critics leaves the value unchanged.
Tape::NodeId critic_loss_node(Tape& t, const std::vector<Tape::NodeId>& critic1_layers,
                              const std::vector<Tape::NodeId>& critic2_layers,
                              const std::vector<SacTransition>& batch,
                              const std::vector<Tape::NodeId>& embeddings,
                              const std::vector<double>& targets);

// Mean of (alpha log pi - min twin Q) under reparameterized actions; critics
// enter as constants. Embedding nodes may carry gradient (encoder-through-
// actor training) or be constants.
Tape::NodeId actor_loss_node(Tape& t, const SacParams& p,
                             const std::vector<Tape::NodeId>& actor_layers,
                             const std::vector<SacTransition>& batch,
                             const std::vector<Tape::NodeId>& embeddings,
                             const std::vector<double>& noise,
                             double* mean_log_prob_out = nullptr);
Tape::NodeId actor_loss_node(Tape& t, const SacParams& p,
                             const std::vector<Tape::NodeId>& actor_layers,
                             const std::vector<SacTransition>& batch,
                             const std::vector<ContextEmbedding>& embeddings,
                             const std::vector<double>& noise,
                             double* mean_log_prob_out = nullptr);

// Value-only conveniences over the node builders.
double critic_loss(const SacParams& p, const std::vector<SacTransition>& batch,
                   const std::vector<ContextEmbedding>& embeddings,
                   const std::vector<double>& targets);
double actor_loss(const SacParams& p, const std::vector<SacTransition>& batch,
                  const std::vector<ContextEmbedding>& embeddings,
                  const std::vector<double>& noise, double* mean_log_prob_out = nullptr);

// One optimizer step on log alpha toward the target entropy; returns the new
// alpha. The state must have been created over {&p.log_alpha}.
double tune_entropy(SacParams& p, AdamState& st, double mean_log_prob);

// Polyak blend of target critics (critic rate) and target actor (actor rate).
void update_targets(SacParams& p);

}  // namespace sami
