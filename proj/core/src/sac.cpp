#include "sami/sac.hpp"

#include <cmath>
#include <stdexcept>

namespace sami {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

double softplus_stable(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

// log(1 - tanh(u)^2) without catastrophic cancellation.
double tanh_log_jacobian(double u) {
  return 2.0 * (std::log(2.0) - u - softplus_stable(-2.0 * u));
}

std::vector<double> concat2(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct SquashedSample {
  std::vector<double> action;
  double log_prob = 0.0;
};

// eps == nullptr takes the deterministic u = mean path.
SquashedSample squash_gaussian(const std::vector<double>& mean, const std::vector<double>& log_std,
                               const double* eps) {
  SquashedSample out;
  out.action.resize(mean.size());
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double e = eps ? eps[d] : 0.0;
    const double u = mean[d] + std::exp(log_std[d]) * e;
    out.action[d] = std::tanh(u);
    out.log_prob += -0.5 * e * e - log_std[d] - kHalfLog2Pi - tanh_log_jacobian(u);
  }
  return out;
}

// mean, log_std (clamped) from an actor head output.
void actor_forward(const SacConfig& cfg, const Mlp& actor, std::span<const double> obs,
                   std::span<const double> emb, std::vector<double>& mean,
                   std::vector<double>& log_std) {
  const auto input = concat2(obs, emb);
  std::vector<double> y(2 * cfg.act_dim);
  mlp_value(actor, input.data(), y.data());
  mean.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(cfg.act_dim));
  log_std.resize(cfg.act_dim);
  for (std::size_t d = 0; d < cfg.act_dim; ++d)
    log_std[d] = std::clamp(y[cfg.act_dim + d], cfg.log_std_min, cfg.log_std_max);
}

double critic_value(const Mlp& critic, std::span<const double> obs, std::span<const double> act,
                    std::span<const double> emb) {
  std::vector<double> input(obs.begin(), obs.end());
  input.insert(input.end(), act.begin(), act.end());
  input.insert(input.end(), emb.begin(), emb.end());
  double q = 0.0;
  mlp_value(critic, input.data(), &q);
  return q;
}

void polyak(Mlp& target, const Mlp& live, double rate) {
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    Tensor* dst[2] = {&target.layers[l].w, &target.layers[l].b};
    const Tensor* src[2] = {&live.layers[l].w, &live.layers[l].b};
    for (int i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < dst[i]->numel(); ++j)
        (*dst[i])[j] = rate * (*src[i])[j] + (1.0 - rate) * (*dst[i])[j];
  }
}

}  // namespace

double SacParams::alpha() const { return std::exp(log_alpha.item()); }

SacParams make_sac(SacConfig cfg, RngStream& rng) {
  if (cfg.obs_dim == 0 || cfg.act_dim == 0)
    throw std::invalid_argument("sac config needs positive obs and action dims");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0)
    throw std::invalid_argument("discount must lie in [0, 1)");
  if (cfg.target_entropy == 0.0) cfg.target_entropy = -static_cast<double>(cfg.act_dim);

  SacParams p;
  p.cfg = cfg;
  const std::size_t actor_in = cfg.obs_dim + cfg.embed_dim;
  const std::size_t critic_in = cfg.obs_dim + cfg.act_dim + cfg.embed_dim;
  p.actor = make_mlp(actor_in, cfg.hidden, 2 * cfg.act_dim, rng);
  p.critic1 = make_mlp(critic_in, cfg.hidden, 1, rng);
  p.critic2 = make_mlp(critic_in, cfg.hidden, 1, rng);
  p.target_critic1 = p.critic1;
  p.target_critic2 = p.critic2;
  p.target_actor = p.actor;
  p.log_alpha = Tensor::scalar(std::log(cfg.init_alpha));
  return p;
}

std::vector<NamedParam> named_params(SacParams& p) {
  std::vector<NamedParam> out;
  for (auto& n : named_params(p.actor, "actor")) out.push_back(n);
  for (auto& n : named_params(p.critic1, "critic1")) out.push_back(n);
  for (auto& n : named_params(p.critic2, "critic2")) out.push_back(n);
  for (auto& n : named_params(p.target_critic1, "target_critic1")) out.push_back(n);
  for (auto& n : named_params(p.target_critic2, "target_critic2")) out.push_back(n);
  for (auto& n : named_params(p.target_actor, "target_actor")) out.push_back(n);
  out.push_back({"log_alpha", &p.log_alpha});
  return out;
}

PolicyOutput act(const SacParams& p, std::span<const double> obs, const ContextEmbedding& emb,
                 bool deterministic, RngStream& rng) {
  if (emb.dim() != p.cfg.embed_dim) throw std::invalid_argument("embedding dimension mismatch");
  std::vector<double> mean, log_std;
  actor_forward(p.cfg, p.actor, obs, emb.values, mean, log_std);
  for (double v : mean)
    if (!std::isfinite(v)) throw std::runtime_error("actor produced non-finite output");

  std::vector<double> eps;
  if (!deterministic) {
    eps.resize(p.cfg.act_dim);
    for (double& e : eps) e = rng.normal();
  }
  const auto s = squash_gaussian(mean, log_std, deterministic ? nullptr : eps.data());
  return {s.action, s.log_prob};
}

std::vector<double> critic_targets(const SacParams& p, const std::vector<SacTransition>& batch,
                                   const std::vector<ContextEmbedding>& next_embeddings,
                                   const std::vector<double>& noise) {
  if (next_embeddings.size() != batch.size())
    throw std::invalid_argument("one next embedding per transition required");
  if (noise.size() != batch.size() * p.cfg.act_dim)
    throw std::invalid_argument("noise must be batch * act_dim");
  const double a = p.alpha();
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tr = batch[i];
    std::vector<double> mean, log_std;
    actor_forward(p.cfg, p.target_actor, tr.next_obs, next_embeddings[i].values, mean, log_std);
    const auto s = squash_gaussian(mean, log_std, noise.data() + i * p.cfg.act_dim);
    const double q1 =
        critic_value(p.target_critic1, tr.next_obs, s.action, next_embeddings[i].values);
    const double q2 =
        critic_value(p.target_critic2, tr.next_obs, s.action, next_embeddings[i].values);
    const double mask = tr.done ? 0.0 : 1.0;
    y[i] = tr.rew + p.cfg.gamma * mask * (std::min(q1, q2) - a * s.log_prob);
  }
  return y;
}

Tape::NodeId critic_loss_node(Tape& t, const std::vector<Tape::NodeId>& critic1_layers,
                              const std::vector<Tape::NodeId>& critic2_layers,
                              const std::vector<SacTransition>& batch,
                              const std::vector<Tape::NodeId>& embeddings,
                              const std::vector<double>& targets) {
  if (batch.empty()) throw std::invalid_argument("empty critic batch");
  if (embeddings.size() != batch.size() || targets.size() != batch.size())
    throw std::invalid_argument("one embedding and target per transition required");

  std::vector<Tape::NodeId> per_sample;
  per_sample.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto sa = concat2(batch[i].obs, batch[i].act);
    const auto input = t.concat(t.constant(Tensor::vector(sa)), embeddings[i]);
    const auto q1 = t.sum(mlp_node(t, critic1_layers, input));
    const auto q2 = t.sum(mlp_node(t, critic2_layers, input));
    const auto y = t.constant(Tensor::scalar(targets[i]));
    const auto d1 = t.sub(q1, y);
    const auto d2 = t.sub(q2, y);
    per_sample.push_back(t.add(t.mul(d1, d1), t.mul(d2, d2)));
  }
  return t.mean(t.stack_scalars(per_sample));
}

Tape::NodeId actor_loss_node(Tape& t, const SacParams& p,
                             const std::vector<Tape::NodeId>& actor_layers,
                             const std::vector<SacTransition>& batch,
                             const std::vector<Tape::NodeId>& embeddings,
                             const std::vector<double>& noise, double* mean_log_prob_out) {
  if (batch.empty()) throw std::invalid_argument("empty actor batch");
  if (embeddings.size() != batch.size())
    throw std::invalid_argument("one embedding per transition required");
  if (noise.size() != batch.size() * p.cfg.act_dim)
    throw std::invalid_argument("noise must be batch * act_dim");

  const std::size_t a_dim = p.cfg.act_dim;
  const auto c1 = mlp_leaves(t, p.critic1, false);
  const auto c2 = mlp_leaves(t, p.critic2, false);
  const double alpha = p.alpha();

  double log_prob_total = 0.0;
  std::vector<Tape::NodeId> per_sample;
  per_sample.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto obs_node = t.constant(Tensor::vector(batch[i].obs));
    const auto x = t.concat(obs_node, embeddings[i]);
    const auto head = mlp_node(t, actor_layers, x);
    const auto mean = t.slice(head, 0, a_dim);
    const auto log_std = t.clamp(t.slice(head, a_dim, a_dim), p.cfg.log_std_min, p.cfg.log_std_max);

    std::vector<double> eps_row(noise.begin() + static_cast<std::ptrdiff_t>(i * a_dim),
                                noise.begin() + static_cast<std::ptrdiff_t>((i + 1) * a_dim));
    const auto eps = t.constant(Tensor::vector(eps_row));
    const auto u = t.add(mean, t.mul(t.exp(log_std), eps));
    const auto action = t.tanh(u);

    // Gaussian term: (u - mean)/std is identically eps, so only log_std
    // carries gradient.
    std::vector<double> gconst(a_dim);
    for (std::size_t d = 0; d < a_dim; ++d)
      gconst[d] = -0.5 * eps_row[d] * eps_row[d] - kHalfLog2Pi;
    const auto gauss = t.sub(t.constant(Tensor::vector(gconst)), log_std);
    // Squash correction 2(log2 - u - softplus(-2u)) per dim.
    const auto corr = t.scale(
        t.sub(t.sub(t.constant(Tensor::full({a_dim}, std::log(2.0))), u), t.softplus(t.scale(u, -2.0))),
        2.0);
    const auto log_prob = t.sub(t.sum(gauss), t.sum(corr));
    log_prob_total += t.value(log_prob).item();

    const auto input = t.concat(obs_node, t.concat(action, embeddings[i]));
    const auto q = t.minimum(t.sum(mlp_node(t, c1, input)), t.sum(mlp_node(t, c2, input)));
    per_sample.push_back(t.sub(t.scale(log_prob, alpha), q));
  }
  if (mean_log_prob_out) *mean_log_prob_out = log_prob_total / static_cast<double>(batch.size());
  return t.mean(t.stack_scalars(per_sample));
}

Tape::NodeId actor_loss_node(Tape& t, const SacParams& p,
                             const std::vector<Tape::NodeId>& actor_layers,
                             const std::vector<SacTransition>& batch,
                             const std::vector<ContextEmbedding>& embeddings,
                             const std::vector<double>& noise, double* mean_log_prob_out) {
  std::vector<Tape::NodeId> emb_nodes;
  emb_nodes.reserve(embeddings.size());
  for (const auto& e : embeddings) emb_nodes.push_back(t.constant(Tensor::vector(e.values)));
  return actor_loss_node(t, p, actor_layers, batch, emb_nodes, noise, mean_log_prob_out);
}

double critic_loss(const SacParams& p, const std::vector<SacTransition>& batch,
                   const std::vector<ContextEmbedding>& embeddings,
                   const std::vector<double>& targets) {
  Tape t;
  const auto c1 = mlp_leaves(t, p.critic1, false);
  const auto c2 = mlp_leaves(t, p.critic2, false);
  std::vector<Tape::NodeId> emb_nodes;
  emb_nodes.reserve(embeddings.size());
  for (const auto& e : embeddings) emb_nodes.push_back(t.constant(Tensor::vector(e.values)));
  return t.value(critic_loss_node(t, c1, c2, batch, emb_nodes, targets)).item();
}

double actor_loss(const SacParams& p, const std::vector<SacTransition>& batch,
                  const std::vector<ContextEmbedding>& embeddings,
                  const std::vector<double>& noise, double* mean_log_prob_out) {
  Tape t;
  const auto a = mlp_leaves(t, p.actor, false);
  return t.value(actor_loss_node(t, p, a, batch, embeddings, noise, mean_log_prob_out)).item();
}

double tune_entropy(SacParams& p, AdamState& st, double mean_log_prob) {
  // d/dlog_alpha of -log_alpha * (E log pi + target entropy).
  const Tensor grad = Tensor::scalar(-(mean_log_prob + p.cfg.target_entropy));
  std::vector<Tensor*> params{&p.log_alpha};
  std::vector<const Tensor*> grads{&grad};
  adam_step(st, params, grads);
  return p.alpha();
}

void update_targets(SacParams& p) {
  polyak(p.target_critic1, p.critic1, p.cfg.target_rate_critic);
  polyak(p.target_critic2, p.critic2, p.cfg.target_rate_critic);
  polyak(p.target_actor, p.actor, p.cfg.target_rate_actor);
}

}  // namespace sami
