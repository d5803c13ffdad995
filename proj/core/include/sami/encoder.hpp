#pragma once

#include <span>
#include <vector>

#include "sami/nn.hpp"
#include "sami/trajectory.hpp"

namespace sami {

// Context embedding produced by the trajectory encoder.
struct ContextEmbedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double dot(const ContextEmbedding& o) const;
};

// Recurrent trajectory encoder: LSTM over (observation, previous action,
// previous reward) followed by a linear head. The step-0 input zero-pads the
// previous action and reward. Hidden and cell state start at zero for every
// episode.
struct EncoderParams {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t embed_dim = 0;
  bool normalize = false;  // L2-normalize embeddings (off by default)
  LstmCellParams lstm;
  Dense head;
};

EncoderParams make_encoder(std::size_t obs_dim, std::size_t act_dim, std::size_t hidden_dim,
                           std::size_t embed_dim, RngStream& rng);

std::vector<NamedParam> named_params(EncoderParams& p, const std::string& prefix);
std::vector<Tensor*> param_tensors(const std::vector<NamedParam>& named);

// Carried hidden state for incremental per-step encoding during rollouts.
struct EncoderState {
  std::vector<double> h;
  std::vector<double> c;
};
EncoderState initial_encoder_state(const EncoderParams& p);

// Advances the recurrent state one step and returns the embedding read out at
// this step. prev_act may be null at t = 0 (zero padding).
ContextEmbedding encode_step(const EncoderParams& p, EncoderState& st,
                             std::span<const double> obs, const double* prev_act,
                             double prev_rew);

// Embedding of the prefix tau[0..t]: consumes observations 0..t and the
// actions/rewards before them. t may equal length(), which consumes the whole
// trajectory including the final observation.
ContextEmbedding encode_prefix(const EncoderParams& p, const Trajectory& traj, std::size_t t);

// Whole-trajectory embedding, equal to encode_prefix(p, traj, traj.length()).
ContextEmbedding encode(const EncoderParams& p, const Trajectory& traj);

// exp(dot(a, b) / beta); strictly positive.
double similarity(const ContextEmbedding& a, const ContextEmbedding& b, double beta);

// target <- m * online + (1 - m) * target, elementwise over every parameter.
// The target (momentum) encoder never receives gradient updates.
void momentum_update(EncoderParams& target, const EncoderParams& online, double m);

// Tape-side encoder for training. Parameters are inserted as gradient leaves
// once and reused across all prefix passes on the same tape.
struct EncoderLeaves {
  Tape::LstmNodeIds lstm;
  Tape::NodeId head_w, head_b;
};
EncoderLeaves encoder_leaves(Tape& t, const EncoderParams& p, bool requires_grad = true);

// Builds the prefix pass on the tape and returns the embedding node. If
// carry_out is non-null it receives the final (h, c) node pair so the caller
// can extend the pass.
struct EncoderCarry {
  Tape::NodeId h, c;
};
Tape::NodeId encode_prefix_node(Tape& t, const EncoderParams& p, const EncoderLeaves& leaves,
                                const Trajectory& traj, std::size_t t_end,
                                EncoderCarry* carry_out = nullptr);

}  // namespace sami
