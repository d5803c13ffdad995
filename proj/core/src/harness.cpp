#include "sami/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "sami/checkpoint.hpp"
#include "sami/discrete.hpp"
#include "sami/estimators.hpp"
#include "sami/io.hpp"
#include "sami/stats.hpp"

namespace sami {
namespace {

using nlohmann::json;

enum class ContrastiveMode { none, cross_task, intra_task, combined };

ContrastiveMode variant_mode(const std::string& v) {
  if (v == "tesac") return ContrastiveMode::none;
  if (v == "ccm") return ContrastiveMode::cross_task;
  if (v == "satesac") return ContrastiveMode::intra_task;
  if (v == "saccm") return ContrastiveMode::combined;
  throw std::invalid_argument("unknown variant: " + v);
}

int mask_bits(const std::array<bool, 3>& m) {
  int bits = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) bits |= 1 << i;
  return bits;
}

Skill skill_from_name(const std::string& s) {
  if (s == "push") return Skill::Push;
  if (s == "lift") return Skill::Lift;
  if (s == "other") return Skill::Other;
  throw std::invalid_argument("unknown skill name: " + s);
}

json episode_json(const EpisodeRecord& e) {
  return json{{"split", e.split},
              {"task_id", e.task_id},
              {"mass", e.features.mass},
              {"friction", e.features.friction},
              {"crippled", mask_bits(e.features.crippled_mask)},
              {"return", e.ret},
              {"success", e.success},
              {"skill", skill_name(e.skill)}};
}

EpisodeRecord episode_from_json(const json& j) {
  EpisodeRecord e;
  e.split = j.at("split").get<std::string>();
  e.task_id = j.at("task_id").get<int>();
  e.features.mass = j.at("mass").get<double>();
  e.features.friction = j.at("friction").get<double>();
  const int bits = j.at("crippled").get<int>();
  for (std::size_t i = 0; i < 3; ++i) e.features.crippled_mask[i] = (bits >> i) & 1;
  e.ret = j.at("return").get<double>();
  e.success = j.at("success").get<bool>();
  e.skill = skill_from_name(j.at("skill").get<std::string>());
  return e;
}

json probe_json(const ProbePoint& p) {
  return json{{"step", p.step},
              {"split", p.split},
              {"mean_return", p.mean_return},
              {"success_rate", p.success_rate}};
}

ProbePoint probe_from_json(const json& j) {
  ProbePoint p;
  p.step = j.at("step").get<std::size_t>();
  p.split = j.at("split").get<std::string>();
  p.mean_return = j.at("mean_return").get<double>();
  p.success_rate = j.at("success_rate").get<double>();
  return p;
}

json round_json(const RoundDiagnostics& r) {
  return json{{"step", r.step},
              {"critic_loss", r.critic_loss},
              {"actor_loss", r.actor_loss},
              {"alpha", r.alpha},
              {"contrastive", r.contrastive},
              {"log_k", r.log_k},
              {"buffer_transitions", r.buffer_transitions}};
}

RoundDiagnostics round_from_json(const json& j) {
  RoundDiagnostics r;
  r.step = j.at("step").get<std::size_t>();
  r.critic_loss = j.at("critic_loss").get<double>();
  r.actor_loss = j.at("actor_loss").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.contrastive = j.at("contrastive").get<double>();
  r.log_k = j.at("log_k").get<double>();
  r.buffer_transitions = j.at("buffer_transitions").get<std::size_t>();
  return r;
}

json behavior_payload(const RunResult& r) {
  json training = json::array();
  for (const auto& e : r.training_episodes) training.push_back(episode_json(e));
  json eval = json::object();
  for (const auto& [split, eps] : r.eval_episodes) {
    json arr = json::array();
    for (const auto& e : eps) arr.push_back(episode_json(e));
    eval[split] = std::move(arr);
  }
  json probes = json::array();
  for (const auto& p : r.probes) probes.push_back(probe_json(p));
  json rounds = json::array();
  for (const auto& d : r.rounds) rounds.push_back(round_json(d));
  return json{{"training_episodes", std::move(training)},
              {"eval_episodes", std::move(eval)},
              {"probes", std::move(probes)},
              {"rounds", std::move(rounds)}};
}

SacConfig sac_config_from(const ExperimentConfig& cfg) {
  SacConfig s;
  s.obs_dim = env::kObsDim;
  s.act_dim = env::kActDim;
  s.embed_dim = cfg.embed_dim;
  s.hidden = cfg.sac_hidden;
  s.gamma = cfg.gamma;
  s.target_rate_critic = cfg.target_rate_critic;
  s.target_rate_actor = cfg.target_rate_actor;
  s.init_alpha = cfg.init_alpha;
  return s;
}

TrainedAgent fresh_agent(const ExperimentConfig& cfg, RngStream& rng) {
  TrainedAgent a;
  a.encoder = make_encoder(env::kObsDim, env::kActDim, cfg.encoder_hidden, cfg.embed_dim, rng);
  a.encoder.normalize = cfg.normalize_embeddings;
  a.momentum = a.encoder;
  a.sac = make_sac(sac_config_from(cfg), rng);
  return a;
}

std::vector<NamedParam> agent_params(TrainedAgent& a) {
  std::vector<NamedParam> out = named_params(a.encoder, "encoder");
  auto mom = named_params(a.momentum, "momentum");
  out.insert(out.end(), mom.begin(), mom.end());
  auto sac = named_params(a.sac);
  out.insert(out.end(), sac.begin(), sac.end());
  return out;
}

// Parameter tensors and their tape leaves in matching order, so gradients can
// be read off leaf by leaf.
std::vector<Tensor*> encoder_tensors(EncoderParams& p) {
  return {&p.lstm.w_i, &p.lstm.w_f, &p.lstm.w_o, &p.lstm.w_c, &p.lstm.b_i,
          &p.lstm.b_f, &p.lstm.b_o, &p.lstm.b_c, &p.head.w,   &p.head.b};
}

std::vector<Tape::NodeId> encoder_leaf_ids(const EncoderLeaves& l) {
  return {l.lstm.w_i, l.lstm.w_f, l.lstm.w_o, l.lstm.w_c, l.lstm.b_i,
          l.lstm.b_f, l.lstm.b_o, l.lstm.b_c, l.head_w,   l.head_b};
}

std::vector<Tensor*> mlp_tensors(Mlp& m) {
  std::vector<Tensor*> out;
  for (auto& layer : m.layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

void append_grads(const Tape& t, const std::vector<Tape::NodeId>& ids,
                  std::vector<const Tensor*>& out) {
  for (const auto id : ids) {
    const Tensor& g = t.grad(id);
    out.push_back(g.numel() > 0 ? &g : nullptr);
  }
}

struct GradDiag {
  double critic = 0.0;
  double actor = 0.0;
  double contrastive = 0.0;
  double log_k = 0.0;
  double alpha = 0.0;
};

struct Optimizers {
  std::vector<Tensor*> enc_params, critic_params, actor_params;
  AdamState enc, critic, actor, alpha;
};

Optimizers make_optimizers(TrainedAgent& agent, const ExperimentConfig& cfg) {
  AdamConfig ac;
  ac.lr = cfg.lr;
  Optimizers o{encoder_tensors(agent.encoder), mlp_tensors(agent.sac.critic1),
               mlp_tensors(agent.sac.actor),   make_adam({}, ac),
               make_adam({}, ac),              make_adam({}, ac),
               make_adam({&agent.sac.log_alpha}, ac)};
  const auto c2 = mlp_tensors(agent.sac.critic2);
  o.critic_params.insert(o.critic_params.end(), c2.begin(), c2.end());
  o.enc = make_adam(o.enc_params, ac);
  o.critic = make_adam(o.critic_params, ac);
  o.actor = make_adam(o.actor_params, ac);
  return o;
}

struct TrainCtx {
  const ExperimentConfig& cfg;
  ContrastiveMode mode;
  TrainedAgent& agent;
  RankedBuffer& buffer;
  RngStream& rl_rng;
  RngStream& con_rng;
  Optimizers& opt;
  std::size_t con_cursor = 0;
};

struct ConBuild {
  Tape::NodeId loss;
  double estimate = 0.0;
  double log_k = 0.0;
};

std::optional<ConBuild> build_contrastive(Tape& t, TrainCtx& c, const EncoderLeaves& el) {
  std::vector<int> eligible;
  for (const int id : c.buffer.task_ids()) {
    const std::size_t n = c.buffer.ranked(id).size();
    bool ok = false;
    switch (c.mode) {
      case ContrastiveMode::intra_task:
        ok = n >= 2;
        break;
      case ContrastiveMode::cross_task:
        ok = n >= 1 && c.buffer.num_trajectories() > n;
        break;
      case ContrastiveMode::combined:
        ok = n >= 2 && c.buffer.num_trajectories() > n;
        break;
      default:
        break;
    }
    if (ok) eligible.push_back(id);
  }
  if (eligible.empty()) return std::nullopt;
  const int task = eligible[c.con_cursor % eligible.size()];
  ++c.con_cursor;

  SoftSanceConfig soft;
  soft.similarity.beta = c.cfg.beta;
  soft.pairwise_distance = c.cfg.pairwise_distance;
  soft.detach_multiplier = c.cfg.detach_multiplier;

  // Keys come from the momentum encoder and never carry gradient; the query
  // runs through the live encoder on the tape.
  const auto key_node = [&](std::size_t slot) {
    const ContextEmbedding e = encode(c.agent.momentum, c.buffer.get(slot));
    return t.constant(Tensor::vector(e.values));
  };
  const auto query_node = [&](std::size_t slot) {
    const Trajectory& traj = c.buffer.get(slot);
    return encode_prefix_node(t, c.agent.encoder, el, traj, traj.length());
  };

  const std::size_t k = c.cfg.contrastive_batch;
  if (c.mode == ContrastiveMode::cross_task) {
    const auto& rank = c.buffer.ranked(task);
    const auto query = query_node(rank[c.con_rng.integer(rank.size())]);
    const auto pos = key_node(rank[c.con_rng.integer(rank.size())]);
    const auto cross = c.buffer.sample_cross_task(task, k, c.con_rng, false);
    std::vector<Tape::NodeId> negs;
    negs.reserve(cross.size());
    for (const auto s : cross) negs.push_back(key_node(s));
    const auto est = nce_node(t, query, pos, negs, c.cfg.beta);
    return ConBuild{t.scale(est, -1.0), t.value(est).item(),
                    std::log(static_cast<double>(1 + negs.size()))};
  }

  SkillAwareConfig scfg;
  scfg.top_fraction = c.cfg.top_fraction;
  scfg.bottom_fraction = c.cfg.bottom_fraction;
  scfg.distinct_query = c.cfg.distinct_query;
  const auto draw = c.buffer.sample_skill_aware(task, k, c.con_rng, scfg);
  const auto query = query_node(draw.query);
  const auto pos = key_node(draw.positive);
  std::vector<Tape::NodeId> negs;
  negs.reserve(draw.negatives.size());
  for (const auto s : draw.negatives) negs.push_back(key_node(s));
  if (c.mode == ContrastiveMode::combined) {
    const auto cross = c.buffer.sample_cross_task(task, k, c.con_rng,
                                                  c.cfg.cross_task_low_return_only,
                                                  c.cfg.bottom_fraction);
    for (const auto s : cross) negs.push_back(key_node(s));
  }
  const auto est = nce_node(t, query, pos, negs, c.cfg.beta);
  const std::array<Tape::NodeId, 1> pos_group{pos};
  const auto loss = soft_sance_node(t, pos_group, negs, est, soft);
  return ConBuild{loss, t.value(est).item(), std::log(static_cast<double>(1 + negs.size()))};
}

GradDiag grad_step(TrainCtx& c) {
  auto& enc = c.agent.encoder;
  auto& sac = c.agent.sac;
  Tape t;
  const auto el = encoder_leaves(t, enc, true);
  const auto c1 = mlp_leaves(t, sac.critic1, true);
  const auto c2 = mlp_leaves(t, sac.critic2, true);
  const auto al = mlp_leaves(t, sac.actor, true);

  const auto refs = c.buffer.sample_rl_batch(c.cfg.sac_batch, c.rl_rng);
  std::vector<SacTransition> batch;
  std::vector<Tape::NodeId> emb_nodes;
  std::vector<ContextEmbedding> next_embs;
  batch.reserve(refs.size());
  emb_nodes.reserve(refs.size());
  next_embs.reserve(refs.size());
  for (const auto& ref : refs) {
    const Trajectory& traj = c.buffer.get(ref.slot);
    SacTransition tr;
    tr.obs.assign(traj.obs_at(ref.t), traj.obs_at(ref.t) + traj.obs_dim);
    tr.act.assign(traj.act_at(ref.t), traj.act_at(ref.t) + traj.act_dim);
    tr.next_obs.assign(traj.obs_at(ref.t + 1), traj.obs_at(ref.t + 1) + traj.obs_dim);
    tr.rew = traj.rew[ref.t];
    tr.done = (ref.t + 1 == traj.length());
    batch.push_back(std::move(tr));
    emb_nodes.push_back(encode_prefix_node(t, enc, el, traj, ref.t));
    next_embs.push_back(encode_prefix(enc, traj, ref.t + 1));
  }
  std::vector<double> target_noise(batch.size() * sac.cfg.act_dim);
  for (auto& v : target_noise) v = c.rl_rng.normal();
  const auto targets = critic_targets(sac, batch, next_embs, target_noise);
  const auto critic = critic_loss_node(t, c1, c2, batch, emb_nodes, targets);

  GradDiag diag;
  Tape::NodeId total = critic;
  if (c.mode != ContrastiveMode::none && c.cfg.alpha != 0.0) {
    if (const auto con = build_contrastive(t, c, el)) {
      total = t.add(total, t.scale(con->loss, c.cfg.alpha));
      diag.contrastive = con->estimate;
      diag.log_k = con->log_k;
    }
  }

  std::vector<double> actor_noise(batch.size() * sac.cfg.act_dim);
  for (auto& v : actor_noise) v = c.rl_rng.normal();
  double mean_log_prob = 0.0;
  Tape::NodeId actor;
  if (c.cfg.encoder_grad_from_actor) {
    actor = actor_loss_node(t, sac, al, batch, emb_nodes, actor_noise, &mean_log_prob);
  } else {
    std::vector<Tape::NodeId> detached;
    detached.reserve(emb_nodes.size());
    for (const auto id : emb_nodes) detached.push_back(t.constant(t.value(id)));
    actor = actor_loss_node(t, sac, al, batch, detached, actor_noise, &mean_log_prob);
  }
  total = t.add(total, actor);
  t.backward(total);

  std::vector<const Tensor*> enc_grads, critic_grads, actor_grads;
  append_grads(t, encoder_leaf_ids(el), enc_grads);
  append_grads(t, c1, critic_grads);
  append_grads(t, c2, critic_grads);
  append_grads(t, al, actor_grads);
  adam_step(c.opt.enc, c.opt.enc_params, enc_grads);
  adam_step(c.opt.critic, c.opt.critic_params, critic_grads);
  adam_step(c.opt.actor, c.opt.actor_params, actor_grads);
  diag.alpha = tune_entropy(sac, c.opt.alpha, mean_log_prob);
  momentum_update(c.agent.momentum, enc, c.cfg.momentum);
  update_targets(sac);

  diag.critic = t.value(critic).item();
  diag.actor = t.value(actor).item();
  return diag;
}

TaskFeatures crippled_features(TaskFeatures f, std::size_t num_crippled, RngStream& rng) {
  if (num_crippled == 0) return f;
  if (num_crippled > env::kActDim) throw std::invalid_argument("too many crippled actuators");
  std::array<std::size_t, env::kActDim> idx{0, 1, 2};
  for (std::size_t i = 0; i < num_crippled; ++i) {
    const std::size_t j = i + rng.integer(env::kActDim - i);
    std::swap(idx[i], idx[j]);
  }
  for (std::size_t i = 0; i < num_crippled; ++i) f.crippled_mask[idx[i]] = true;
  return f;
}

EpisodeRecord eval_episode(const TrainedAgent& agent, const TaskFeatures& features, int task_id,
                           const std::string& split_name, RngStream& env_rng,
                           RngStream& unused_rng, ContextEmbedding* final_emb = nullptr) {
  BlockRelocateState state = reset(features, env_rng);
  EncoderState es = initial_encoder_state(agent.encoder);
  Trajectory traj;
  traj.task_id = task_id;
  traj.features = features;
  traj.obs_dim = env::kObsDim;
  traj.act_dim = env::kActDim;
  std::array<double, 3> last_action{};
  const double* prev_act = nullptr;
  double prev_rew = 0.0;
  bool done = false;
  ContextEmbedding emb;
  while (!done) {
    const std::vector<double> obs = observe(state);
    traj.obs.insert(traj.obs.end(), obs.begin(), obs.end());
    emb = encode_step(agent.encoder, es, obs, prev_act, prev_rew);
    const PolicyOutput out = act(agent.sac, obs, emb, true, unused_rng);
    std::copy(out.action.begin(), out.action.end(), last_action.begin());
    const StepResult res = crippled_step(state, last_action, features);
    traj.act.insert(traj.act.end(), last_action.begin(), last_action.end());
    traj.rew.push_back(res.reward);
    prev_act = last_action.data();
    prev_rew = res.reward;
    state = res.state;
    done = res.done;
  }
  const std::vector<double> obs = observe(state);
  traj.obs.insert(traj.obs.end(), obs.begin(), obs.end());
  for (const double r : traj.rew) traj.ret += r;
  EpisodeRecord rec;
  rec.split = split_name;
  rec.task_id = task_id;
  rec.features = features;
  rec.ret = traj.ret;
  rec.success = goal_distance(state) < env::kSuccessDist;
  rec.skill = classify_skill(traj);
  if (final_emb) *final_emb = emb;
  return rec;
}

std::vector<std::string> canonical_splits(const std::set<std::string>& present) {
  std::vector<std::string> out;
  for (const char* name : {"train", "moderate", "extreme"})
    if (present.count(name)) out.push_back(name);
  for (const auto& s : present)
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

double mean_return(const std::vector<EpisodeRecord>& eps) {
  if (eps.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : eps) sum += e.ret;
  return sum / static_cast<double>(eps.size());
}

std::string write_run_files(const ExperimentConfig& cfg, std::uint64_t seed,
                            MetaTrainOutput& out) {
  ensure_dir(cfg.out_dir);
  const std::string hash = config_hash(cfg);
  const std::string stem =
      cfg.out_dir + "/" + cfg.variant + "-" + hash + "-s" + std::to_string(seed);
  atomic_write_file(stem + "-result.json", run_result_json(out.result));

  std::ostringstream metrics;
  metrics << json{{"type", "meta"},
                  {"variant", cfg.variant},
                  {"seed", seed},
                  {"config_hash", hash},
                  {"env_version", kEnvVersion},
                  {"code_version", kCodeVersion}}
                 .dump()
          << "\n";
  for (const auto& r : out.result.rounds) {
    json j = round_json(r);
    j["type"] = "round";
    metrics << j.dump() << "\n";
  }
  for (const auto& p : out.result.probes) {
    json j = probe_json(p);
    j["type"] = "probe";
    metrics << j.dump() << "\n";
  }
  atomic_write_file(stem + "-metrics.jsonl", metrics.str());
  atomic_write_file(stem + "-buffer.jsonl", out.buffer_jsonl);
  save_agent(stem + "-checkpoint.json", out.agent, cfg, seed);
  atomic_write_file(stem + "-timing.json",
                    json{{"wall_clock_seconds", out.result.wall_clock_seconds},
                         {"variant", cfg.variant},
                         {"seed", seed},
                         {"config_hash", hash},
                         {"env_version", kEnvVersion},
                         {"code_version", kCodeVersion}}
                        .dump(2) +
                        "\n");
  return stem + "-result.json";
}

void apply_sweep_axis(ExperimentConfig& cfg, const std::string& axis, double value) {
  if (axis == "buffer_size") {
    cfg.buffer_capacity = static_cast<std::size_t>(std::llround(value));
  } else if (axis == "contrastive_batch" || axis == "K") {
    cfg.contrastive_batch = static_cast<std::size_t>(std::llround(value));
  } else if (axis == "alpha") {
    cfg.alpha = value;
  } else {
    throw std::invalid_argument("unknown sweep axis: " + axis);
  }
}

}  // namespace

std::string run_result_json(const RunResult& r) {
  json j = behavior_payload(r);
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["env_version"] = r.env_version;
  j["code_version"] = r.code_version;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j.dump(2) + "\n";
}

RunResult parse_run_result(const std::string& json_text) {
  const json j = json::parse(json_text);
  RunResult r;
  r.variant = j.at("variant").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.env_version = j.at("env_version").get<std::string>();
  r.code_version = j.at("code_version").get<std::string>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  for (const auto& e : j.at("training_episodes")) r.training_episodes.push_back(episode_from_json(e));
  for (const auto& [split, arr] : j.at("eval_episodes").items()) {
    auto& eps = r.eval_episodes[split];
    for (const auto& e : arr) eps.push_back(episode_from_json(e));
  }
  for (const auto& p : j.at("probes")) r.probes.push_back(probe_from_json(p));
  for (const auto& d : j.at("rounds")) r.rounds.push_back(round_from_json(d));
  return r;
}

std::string behavior_json(const RunResult& r) { return behavior_payload(r).dump() + "\n"; }

MetaTrainOutput meta_train(const ExperimentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const ContrastiveMode mode = variant_mode(cfg.variant);

  RngStream init_rng = derive_stream(seed, "init");
  RngStream task_rng = derive_stream(seed, "task");
  RngStream env_rng = derive_stream(seed, "env");
  RngStream actor_rng = derive_stream(seed, "actor");
  RngStream rl_rng = derive_stream(seed, "rl");
  RngStream con_rng = derive_stream(seed, "contrastive");

  MetaTrainOutput out;
  out.agent = fresh_agent(cfg, init_rng);
  RankedBuffer buffer(cfg.buffer_capacity);
  Optimizers opt = make_optimizers(out.agent, cfg);
  TrainCtx ctx{cfg, mode, out.agent, buffer, rl_rng, con_rng, opt};

  RunResult& result = out.result;
  result.variant = cfg.variant;
  result.seed = seed;
  result.config_hash = config_hash(cfg);

  const std::vector<TaskSplit> splits{train_split(), moderate_split(), extreme_split()};
  const TaskSplit& train = splits.front();

  std::size_t step = 0;
  while (step < cfg.total_timesteps) {
    const SampledTask task = sample_task(train, task_rng, cfg.num_crippled);
    BlockRelocateState state = reset(task.features, env_rng);
    EncoderState es = initial_encoder_state(out.agent.encoder);
    Trajectory traj;
    traj.task_id = task.id;
    traj.features = task.features;
    traj.obs_dim = env::kObsDim;
    traj.act_dim = env::kActDim;
    std::array<double, 3> last_action{};
    const double* prev_act = nullptr;
    double prev_rew = 0.0;
    bool done = false;
    while (!done) {
      const std::vector<double> obs = observe(state);
      traj.obs.insert(traj.obs.end(), obs.begin(), obs.end());
      const ContextEmbedding emb = encode_step(out.agent.encoder, es, obs, prev_act, prev_rew);
      if (step < cfg.warmup_steps) {
        for (auto& a : last_action) a = actor_rng.uniform(-1.0, 1.0);
      } else {
        const PolicyOutput pol = act(out.agent.sac, obs, emb, false, actor_rng);
        std::copy(pol.action.begin(), pol.action.end(), last_action.begin());
      }
      const StepResult res = crippled_step(state, last_action, task.features);
      traj.act.insert(traj.act.end(), last_action.begin(), last_action.end());
      traj.rew.push_back(res.reward);
      prev_act = last_action.data();
      prev_rew = res.reward;
      state = res.state;
      done = res.done;
      ++step;

      if (step % cfg.train_freq == 0 && step >= cfg.warmup_steps &&
          buffer.num_trajectories() > 0) {
        RoundDiagnostics rd;
        rd.step = step;
        double alpha_last = out.agent.sac.alpha();
        for (std::size_t g = 0; g < cfg.grad_steps; ++g) {
          const GradDiag d = grad_step(ctx);
          rd.critic_loss += d.critic;
          rd.actor_loss += d.actor;
          rd.contrastive += d.contrastive;
          rd.log_k += d.log_k;
          alpha_last = d.alpha;
        }
        const double n = static_cast<double>(cfg.grad_steps);
        rd.critic_loss /= n;
        rd.actor_loss /= n;
        rd.contrastive /= n;
        rd.log_k /= n;
        rd.alpha = alpha_last;
        rd.buffer_transitions = buffer.size();
        result.rounds.push_back(rd);
      }
      if (step % cfg.eval_every == 0 && step < cfg.total_timesteps) {
        for (const auto& sp : splits) {
          const auto eps =
              meta_test(out.agent, cfg, sp, cfg.probe_episodes,
                        derive_seed(seed, "probe-" + sp.name + "-" + std::to_string(step)));
          ProbePoint pp;
          pp.step = step;
          pp.split = sp.name;
          pp.mean_return = mean_return(eps);
          pp.success_rate = aggregate_success(eps);
          result.probes.push_back(pp);
        }
      }
    }
    const std::vector<double> obs = observe(state);
    traj.obs.insert(traj.obs.end(), obs.begin(), obs.end());
    for (const double r : traj.rew) traj.ret += r;
    traj.skill = classify_skill(traj);
    traj.success = goal_distance(state) < env::kSuccessDist;
    EpisodeRecord rec;
    rec.split = train.name;
    rec.task_id = task.id;
    rec.features = task.features;
    rec.ret = traj.ret;
    rec.success = traj.success;
    rec.skill = traj.skill;
    result.training_episodes.push_back(rec);
    buffer.push(std::move(traj));
  }

  for (const auto& sp : splits) {
    result.eval_episodes[sp.name] = meta_test(out.agent, cfg, sp, cfg.eval_episodes_per_task,
                                              derive_seed(seed, "final-eval-" + sp.name));
  }

  std::ostringstream snapshot;
  buffer.export_jsonl(snapshot);
  out.buffer_jsonl = snapshot.str();
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<EpisodeRecord> meta_test(const TrainedAgent& agent, const ExperimentConfig& cfg,
                                     const TaskSplit& split, std::size_t episodes_per_task,
                                     std::uint64_t seed) {
  RngStream env_rng = derive_stream(seed, "eval-env");
  RngStream unused(0);
  std::vector<EpisodeRecord> out;
  out.reserve(split.cells.size() * episodes_per_task);
  for (std::size_t ci = 0; ci < split.cells.size(); ++ci) {
    for (std::size_t ep = 0; ep < episodes_per_task; ++ep) {
      const TaskFeatures feats = crippled_features(split.cells[ci], cfg.num_crippled, env_rng);
      const int id = static_cast<int>(ci) * 8 + mask_bits(feats.crippled_mask);
      out.push_back(eval_episode(agent, feats, id, split.name, env_rng, unused));
    }
  }
  return out;
}

double aggregate_success(const std::vector<EpisodeRecord>& episodes) {
  if (episodes.empty()) return 0.0;
  std::map<int, std::pair<std::size_t, std::size_t>> per_cell;  // id -> (successes, total)
  for (const auto& e : episodes) {
    auto& [wins, total] = per_cell[e.task_id];
    wins += e.success ? 1 : 0;
    total += 1;
  }
  double sum = 0.0;
  for (const auto& [id, wt] : per_cell)
    sum += static_cast<double>(wt.first) / static_cast<double>(wt.second);
  return sum / static_cast<double>(per_cell.size());
}

std::map<std::string, double> skill_histogram(const std::vector<EpisodeRecord>& episodes) {
  std::map<std::string, double> out{{"push", 0.0}, {"lift", 0.0}, {"other", 0.0}};
  if (episodes.empty()) return out;
  for (const auto& e : episodes) out[skill_name(e.skill)] += 1.0;
  for (auto& [name, count] : out) count /= static_cast<double>(episodes.size());
  return out;
}

void save_agent(const std::string& path, TrainedAgent& agent, const ExperimentConfig& cfg,
                std::uint64_t seed) {
  const std::map<std::string, std::string> meta{
      {"config", config_json(cfg)},       {"config_hash", config_hash(cfg)},
      {"seed", std::to_string(seed)},     {"variant", cfg.variant},
      {"env_version", kEnvVersion},       {"code_version", kCodeVersion}};
  save_checkpoint(path, agent_params(agent), meta);
}

TrainedAgent load_agent(const std::string& path, ExperimentConfig* cfg_out,
                        std::uint64_t* seed_out) {
  const auto meta = checkpoint_meta(path);
  const ExperimentConfig cfg = parse_config(meta.at("config"));
  RngStream scratch(0);
  TrainedAgent agent = fresh_agent(cfg, scratch);
  load_checkpoint(path, agent_params(agent));
  if (cfg_out) *cfg_out = cfg;
  if (seed_out) *seed_out = std::stoull(meta.at("seed"));
  return agent;
}

std::string run_and_save(const ExperimentConfig& cfg, std::uint64_t seed) {
  MetaTrainOutput out = meta_train(cfg, seed);
  return write_run_files(cfg, seed, out);
}

std::string sweep(const ExperimentConfig& base, const std::string& axis,
                  const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  std::ostringstream csv;
  csv << csv_line({"axis", "value", "split", "success_mean", "success_std", "return_mean",
                   "return_std", "seeds"})
      << "\n";
  for (const double value : values) {
    ExperimentConfig cfg = base;
    apply_sweep_axis(cfg, axis, value);
    validate(cfg);
    std::map<std::string, std::vector<double>> succ, rets;
    for (const auto seed : cfg.seeds) {
      MetaTrainOutput out = meta_train(cfg, seed);
      write_run_files(cfg, seed, out);
      for (const auto& [split, eps] : out.result.eval_episodes) {
        succ[split].push_back(aggregate_success(eps));
        rets[split].push_back(mean_return(eps));
      }
    }
    std::set<std::string> present;
    for (const auto& [split, values_] : succ) present.insert(split);
    for (const auto& split : canonical_splits(present)) {
      csv << csv_line({axis, format_double(value), split, format_double(mean(succ[split])),
                       format_double(sample_std(succ[split])), format_double(mean(rets[split])),
                       format_double(sample_std(rets[split])),
                       std::to_string(succ[split].size())})
          << "\n";
    }
  }
  ensure_dir(base.out_dir);
  atomic_write_file(base.out_dir + "/sweep-" + axis + ".csv", csv.str());
  return csv.str();
}

std::string report(const std::vector<RunResult>& results) {
  // variant -> split -> seed -> (aggregate success, mean return)
  std::map<std::string, std::map<std::string, std::map<std::uint64_t, std::pair<double, double>>>>
      table;
  std::set<std::string> split_names;
  for (const auto& r : results) {
    for (const auto& [split, eps] : r.eval_episodes) {
      table[r.variant][split][r.seed] = {aggregate_success(eps), mean_return(eps)};
      split_names.insert(split);
    }
  }
  const auto splits = canonical_splits(split_names);

  std::ostringstream csv;
  csv << csv_line({"variant", "split", "success_mean", "success_std", "return_mean",
                   "return_std", "seeds"})
      << "\n";
  for (const auto& [variant, by_split] : table) {
    for (const auto& split : splits) {
      const auto it = by_split.find(split);
      if (it == by_split.end()) continue;
      std::vector<double> succ, rets;
      for (const auto& [seed, sr] : it->second) {
        succ.push_back(sr.first);
        rets.push_back(sr.second);
      }
      csv << csv_line({variant, split, format_double(mean(succ)),
                       format_double(sample_std(succ)), format_double(mean(rets)),
                       format_double(sample_std(rets)), std::to_string(succ.size())})
          << "\n";
    }
  }

  csv << "\n"
      << csv_line({"variant_a", "variant_b", "split", "t", "p", "paired_seeds"}) << "\n";
  std::vector<std::string> variants;
  for (const auto& [variant, by_split] : table) variants.push_back(variant);
  for (std::size_t i = 0; i < variants.size(); ++i) {
    for (std::size_t j = i + 1; j < variants.size(); ++j) {
      for (const auto& split : splits) {
        const auto& a_map = table[variants[i]];
        const auto& b_map = table[variants[j]];
        const auto ai = a_map.find(split);
        const auto bi = b_map.find(split);
        if (ai == a_map.end() || bi == b_map.end()) continue;
        std::vector<double> a, b;
        for (const auto& [seed, sr] : ai->second) {
          const auto bs = bi->second.find(seed);
          if (bs == bi->second.end()) continue;
          a.push_back(sr.first);
          b.push_back(bs->second.first);
        }
        if (a.size() < 2) continue;
        const TTestResult tt = paired_t_test(a, b);
        csv << csv_line({variants[i], variants[j], split, format_double(tt.t),
                         format_double(tt.p), std::to_string(a.size())})
            << "\n";
      }
    }
  }
  return csv.str();
}

std::string export_embeddings_csv(const TrainedAgent& agent, const ExperimentConfig& cfg,
                                  const TaskSplit& split, std::size_t episodes_per_task,
                                  std::uint64_t seed) {
  RngStream env_rng = derive_stream(seed, "eval-env");
  RngStream unused(0);
  std::vector<EpisodeRecord> records;
  std::vector<double> embeddings;
  const std::size_t d = agent.encoder.embed_dim;
  for (std::size_t ci = 0; ci < split.cells.size(); ++ci) {
    for (std::size_t ep = 0; ep < episodes_per_task; ++ep) {
      const TaskFeatures feats = crippled_features(split.cells[ci], cfg.num_crippled, env_rng);
      const int id = static_cast<int>(ci) * 8 + mask_bits(feats.crippled_mask);
      ContextEmbedding emb;
      records.push_back(eval_episode(agent, feats, id, split.name, env_rng, unused, &emb));
      embeddings.insert(embeddings.end(), emb.values.begin(), emb.values.end());
    }
  }
  const Pca2d pca = pca_2d(embeddings, records.size(), d);

  std::vector<std::string> header{"split",   "task_id", "mass",   "friction",
                                  "crippled", "skill",   "success", "return"};
  for (std::size_t k = 0; k < d; ++k) header.push_back("e" + std::to_string(k));
  header.push_back("p0");
  header.push_back("p1");
  std::ostringstream csv;
  csv << csv_line(header) << "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::vector<std::string> row{r.split,
                                 std::to_string(r.task_id),
                                 format_double(r.features.mass),
                                 format_double(r.features.friction),
                                 std::to_string(mask_bits(r.features.crippled_mask)),
                                 skill_name(r.skill),
                                 r.success ? "1" : "0",
                                 format_double(r.ret)};
    for (std::size_t k = 0; k < d; ++k) row.push_back(format_double(embeddings[i * d + k]));
    row.push_back(format_double(pca.projection[i * 2]));
    row.push_back(format_double(pca.projection[i * 2 + 1]));
    csv << csv_line(row) << "\n";
  }
  return csv.str();
}

std::string estimator_suite_csv(const std::string& suite, std::uint64_t seed) {
  std::ostringstream csv;
  csv << csv_line({"estimator", "k", "value", "bound_logk", "exact_mi", "seed"}) << "\n";
  const std::string seed_str = std::to_string(seed);
  const auto row = [&](const std::string& name, std::size_t k, double value, double bound,
                       double exact, bool has_bound, bool has_exact) {
    csv << csv_line({name, std::to_string(k), format_double(value),
                     has_bound ? format_double(bound) : "",
                     has_exact ? format_double(exact) : "", seed_str})
        << "\n";
  };

  if (suite == "bounds") {
    RngStream rng = derive_stream(seed, "estimator-bounds");
    const SimilarityConfig sim;
    const std::size_t dim = 6;
    const auto random_embedding = [&] {
      ContextEmbedding e;
      e.values.resize(dim);
      for (auto& v : e.values) v = rng.normal();
      return e;
    };
    for (const std::size_t k : {2, 4, 8, 64}) {
      for (int trial = 0; trial < 5; ++trial) {
        EstimatorBatch batch;
        batch.query = {random_embedding(), 0, std::nullopt};
        batch.positive = {random_embedding(), 0, std::nullopt};
        for (std::size_t n = 0; n + 1 < k; ++n)
          batch.negatives.push_back({random_embedding(), 0, std::nullopt});
        row("infonce", k, infonce(batch, sim), std::log(static_cast<double>(k)), 0.0, true,
            false);
        row("sance", k, sance(batch, sim), std::log(static_cast<double>(k)), 0.0, true, false);
      }
    }
    return csv.str();
  }

  if (suite == "oracle") {
    const DiscreteJoint independent{2, 2, {0.25, 0.25, 0.25, 0.25}};
    row("exact_mi", 0, exact_mi(independent), 0.0, 0.0, false, true);
    const DiscreteJoint correlated{2, 2, {0.4, 0.1, 0.1, 0.4}};
    row("exact_mi", 0, exact_mi(correlated), 0.0, 0.0, false, false);
    const DiscreteJoint diagonal{4, 4, {0.25, 0, 0, 0, 0, 0.25, 0, 0, 0, 0, 0.25, 0, 0, 0, 0, 0.25}};
    row("exact_mi", 0, exact_mi(diagonal), 0.0, std::log(4.0), false, true);
    RngStream rng = derive_stream(seed, "estimator-oracle");
    const DiscreteJoint3 joint = random_common_cause_joint(3, 2, 4, rng);
    row("exact_sami", 0, exact_sami(joint), 0.0, 0.0, false, false);
    return csv.str();
  }

  if (suite == "tightness") {
    const std::size_t n = 64;
    DiscreteJoint joint{n, n, std::vector<double>(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) joint.p[i * n + i] = 1.0 / static_cast<double>(n);
    const double exact = exact_mi(joint);
    for (const std::size_t k : {4, 16, 64, 256}) {
      const double v = optimal_critic_infonce(joint, k, 20000, seed);
      row("optimal_critic", k, v, std::log(static_cast<double>(k)), exact, true, true);
    }
    return csv.str();
  }

  throw std::invalid_argument("unknown estimator suite: " + suite);
}

}  // namespace sami
