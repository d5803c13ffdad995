#include "sami/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace sami {

double ContextEmbedding::dot(const ContextEmbedding& o) const {
  if (values.size() != o.values.size())
    throw std::invalid_argument("ContextEmbedding::dot: dimension mismatch " +
                                std::to_string(values.size()) + " vs " +
                                std::to_string(o.values.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * o.values[i];
  return s;
}

EncoderParams make_encoder(std::size_t obs_dim, std::size_t act_dim, std::size_t hidden_dim,
                           std::size_t embed_dim, RngStream& rng) {
  EncoderParams p;
  p.obs_dim = obs_dim;
  p.act_dim = act_dim;
  p.embed_dim = embed_dim;
  p.lstm = make_lstm(obs_dim + act_dim + 1, hidden_dim, rng);
  p.head = make_dense(hidden_dim, embed_dim, rng);
  return p;
}

std::vector<NamedParam> named_params(EncoderParams& p, const std::string& prefix) {
  auto out = named_params(p.lstm, prefix + ".lstm");
  out.push_back({prefix + ".head.w", &p.head.w});
  out.push_back({prefix + ".head.b", &p.head.b});
  return out;
}

std::vector<Tensor*> param_tensors(const std::vector<NamedParam>& named) {
  std::vector<Tensor*> out;
  out.reserve(named.size());
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

EncoderState initial_encoder_state(const EncoderParams& p) {
  return {std::vector<double>(p.lstm.hidden_dim, 0.0),
          std::vector<double>(p.lstm.hidden_dim, 0.0)};
}

namespace {
void fill_input(const EncoderParams& p, std::span<const double> obs, const double* prev_act,
                double prev_rew, std::vector<double>& x) {
  if (obs.size() != p.obs_dim)
    throw std::invalid_argument("encode: observation dim " + std::to_string(obs.size()) +
                                " does not match encoder obs_dim " + std::to_string(p.obs_dim));
  x.assign(p.obs_dim + p.act_dim + 1, 0.0);
  std::copy(obs.begin(), obs.end(), x.begin());
  if (prev_act)
    std::copy(prev_act, prev_act + p.act_dim, x.begin() + p.obs_dim);
  x[p.obs_dim + p.act_dim] = prev_act ? prev_rew : 0.0;
}

ContextEmbedding read_head(const EncoderParams& p, const double* h) {
  ContextEmbedding e;
  e.values.assign(p.embed_dim, 0.0);
  dense_value(p.head, h, e.values.data());
  if (p.normalize) {
    double n = 0.0;
    for (double v : e.values) n += v * v;
    n = std::sqrt(n);
    if (n > 0.0)
      for (double& v : e.values) v /= n;
  }
  return e;
}
}  // namespace

ContextEmbedding encode_step(const EncoderParams& p, EncoderState& st,
                             std::span<const double> obs, const double* prev_act,
                             double prev_rew) {
  std::vector<double> x;
  fill_input(p, obs, prev_act, prev_rew, x);
  lstm_step_value(p.lstm, x.data(), st.h.data(), st.c.data(), st.h.data(), st.c.data());
  return read_head(p, st.h.data());
}

namespace {
void check_traj_dims(const char* where, const EncoderParams& p, const Trajectory& traj) {
  if (traj.obs_dim != p.obs_dim || traj.act_dim != p.act_dim)
    throw std::invalid_argument(std::string(where) + ": trajectory dims (" +
                                std::to_string(traj.obs_dim) + ", " +
                                std::to_string(traj.act_dim) + ") do not match encoder dims (" +
                                std::to_string(p.obs_dim) + ", " + std::to_string(p.act_dim) +
                                ")");
}
}  // namespace

ContextEmbedding encode_prefix(const EncoderParams& p, const Trajectory& traj, std::size_t t) {
  check_traj_dims("encode_prefix", p, traj);
  if (t > traj.length())
    throw std::invalid_argument("encode_prefix: prefix end " + std::to_string(t) +
                                " exceeds trajectory length " + std::to_string(traj.length()));
  EncoderState st = initial_encoder_state(p);
  ContextEmbedding e;
  for (std::size_t j = 0; j <= t; ++j) {
    std::span<const double> obs(traj.obs_at(j), p.obs_dim);
    const double* pa = j > 0 ? traj.act_at(j - 1) : nullptr;
    double pr = j > 0 ? traj.rew[j - 1] : 0.0;
    e = encode_step(p, st, obs, pa, pr);
  }
  return e;
}

ContextEmbedding encode(const EncoderParams& p, const Trajectory& traj) {
  if (traj.length() == 0) throw std::invalid_argument("encode: empty trajectory");
  return encode_prefix(p, traj, traj.length());
}

double similarity(const ContextEmbedding& a, const ContextEmbedding& b, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("similarity: temperature must be positive");
  return std::exp(a.dot(b) / beta);
}

void momentum_update(EncoderParams& target, const EncoderParams& online, double m) {
  if (m < 0.0 || m > 1.0) throw std::invalid_argument("momentum_update: rate outside [0,1]");
  auto tn = named_params(target, "t");
  auto on = named_params(const_cast<EncoderParams&>(online), "o");
  for (std::size_t i = 0; i < tn.size(); ++i) {
    Tensor& t = *tn[i].tensor;
    const Tensor& o = *on[i].tensor;
    if (!t.same_shape(o)) throw_shape_error("momentum_update", t, o);
    for (std::size_t j = 0; j < t.numel(); ++j) t[j] = m * o[j] + (1.0 - m) * t[j];
  }
}

EncoderLeaves encoder_leaves(Tape& t, const EncoderParams& p, bool requires_grad) {
  EncoderLeaves l;
  l.lstm.w_i = t.leaf(p.lstm.w_i, requires_grad);
  l.lstm.w_f = t.leaf(p.lstm.w_f, requires_grad);
  l.lstm.w_o = t.leaf(p.lstm.w_o, requires_grad);
  l.lstm.w_c = t.leaf(p.lstm.w_c, requires_grad);
  l.lstm.b_i = t.leaf(p.lstm.b_i, requires_grad);
  l.lstm.b_f = t.leaf(p.lstm.b_f, requires_grad);
  l.lstm.b_o = t.leaf(p.lstm.b_o, requires_grad);
  l.lstm.b_c = t.leaf(p.lstm.b_c, requires_grad);
  l.head_w = t.leaf(p.head.w, requires_grad);
  l.head_b = t.leaf(p.head.b, requires_grad);
  return l;
}

Tape::NodeId encode_prefix_node(Tape& t, const EncoderParams& p, const EncoderLeaves& leaves,
                                const Trajectory& traj, std::size_t t_end,
                                EncoderCarry* carry_out) {
  check_traj_dims("encode_prefix_node", p, traj);
  if (t_end > traj.length())
    throw std::invalid_argument("encode_prefix_node: prefix end exceeds trajectory length");
  std::size_t hid = p.lstm.hidden_dim;
  Tape::NodeId h = t.constant(Tensor::zeros({hid}));
  Tape::NodeId c = t.constant(Tensor::zeros({hid}));
  std::vector<double> x;
  for (std::size_t j = 0; j <= t_end; ++j) {
    std::span<const double> obs(traj.obs_at(j), p.obs_dim);
    const double* pa = j > 0 ? traj.act_at(j - 1) : nullptr;
    fill_input(p, obs, pa, j > 0 ? traj.rew[j - 1] : 0.0, x);
    auto out = t.lstm_step(leaves.lstm, t.constant(Tensor::vector(x)), h, c);
    h = out.h;
    c = out.c;
  }
  if (carry_out) *carry_out = {h, c};
  Tape::NodeId e = t.affine(h, leaves.head_w, leaves.head_b);
  if (p.normalize) {
    // e / max(||e||, tiny); the reciprocal goes through exp(-log n) since the
    // tape has no division op.
    Tape::NodeId n = t.clamp(t.l2_norm(e), 1e-12, 1e308);
    Tape::NodeId inv = t.exp(t.scale(t.log(n), -1.0));
    e = t.mul_scalar(e, inv);
  }
  return e;
}

}  // namespace sami
