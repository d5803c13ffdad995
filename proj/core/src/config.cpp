#include "sami/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "sami/rng.hpp"

namespace sami {

using nlohmann::json;

void validate(const ExperimentConfig& c) {
  const std::set<std::string> variants{"tesac", "ccm", "satesac", "saccm"};
  if (!variants.count(c.variant)) throw std::invalid_argument("unknown variant: " + c.variant);
  if (c.env_family != "block-relocate")
    throw std::invalid_argument("unknown env family: " + c.env_family);
  if (c.num_crippled > 3) throw std::invalid_argument("num_crippled must be <= 3");
  if (c.encoder_hidden == 0 || c.embed_dim == 0)
    throw std::invalid_argument("encoder dims must be positive");
  if (c.momentum < 0.0 || c.momentum > 1.0)
    throw std::invalid_argument("momentum must lie in [0, 1]");
  if (c.beta <= 0.0) throw std::invalid_argument("beta must be positive");
  if (c.alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  if (c.contrastive_batch < 2) throw std::invalid_argument("contrastive_batch must be >= 2");
  if (c.buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
  if (c.top_fraction <= 0.0 || c.top_fraction > 1.0)
    throw std::invalid_argument("top_fraction must lie in (0, 1]");
  if (c.bottom_fraction <= 0.0 || c.bottom_fraction > 1.0)
    throw std::invalid_argument("bottom_fraction must lie in (0, 1]");
  if (c.sac_hidden.empty()) throw std::invalid_argument("sac_hidden must be non-empty");
  if (c.gamma < 0.0 || c.gamma >= 1.0) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (c.lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (c.sac_batch == 0) throw std::invalid_argument("sac_batch must be positive");
  if (c.total_timesteps == 0) throw std::invalid_argument("total_timesteps must be positive");
  if (c.train_freq == 0) throw std::invalid_argument("train_freq must be positive");
  if (c.seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
  if (c.eval_episodes_per_task == 0)
    throw std::invalid_argument("eval_episodes_per_task must be positive");
}

namespace {

json section_to_json(const ExperimentConfig& c, const std::string& name) {
  if (name == "env") return {{"family", c.env_family}, {"num_crippled", c.num_crippled}};
  if (name == "encoder")
    return {{"hidden", c.encoder_hidden},
            {"embed_dim", c.embed_dim},
            {"normalize", c.normalize_embeddings},
            {"momentum", c.momentum},
            {"beta", c.beta}};
  if (name == "estimator")
    return {{"alpha", c.alpha},
            {"contrastive_batch", c.contrastive_batch},
            {"pairwise_distance", c.pairwise_distance},
            {"detach_multiplier", c.detach_multiplier},
            {"cross_task_low_return_only", c.cross_task_low_return_only}};
  if (name == "replay")
    return {{"capacity", c.buffer_capacity},
            {"top_fraction", c.top_fraction},
            {"bottom_fraction", c.bottom_fraction},
            {"distinct_query", c.distinct_query}};
  if (name == "rl")
    return {{"hidden", c.sac_hidden},
            {"gamma", c.gamma},
            {"lr", c.lr},
            {"target_rate_critic", c.target_rate_critic},
            {"target_rate_actor", c.target_rate_actor},
            {"init_alpha", c.init_alpha},
            {"batch", c.sac_batch},
            {"encoder_grad_from_actor", c.encoder_grad_from_actor}};
  if (name == "train")
    return {{"total_timesteps", c.total_timesteps},
            {"train_freq", c.train_freq},
            {"grad_steps", c.grad_steps},
            {"warmup_steps", c.warmup_steps},
            {"seeds", c.seeds}};
  if (name == "eval")
    return {{"episodes_per_task", c.eval_episodes_per_task},
            {"probe_episodes", c.probe_episodes},
            {"every", c.eval_every}};
  throw std::logic_error("bad section");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown config key: " + where + it.key());
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_json(const ExperimentConfig& c) {
  json j{{"variant", c.variant},
         {"env", section_to_json(c, "env")},
         {"encoder", section_to_json(c, "encoder")},
         {"estimator", section_to_json(c, "estimator")},
         {"replay", section_to_json(c, "replay")},
         {"rl", section_to_json(c, "rl")},
         {"train", section_to_json(c, "train")},
         {"eval", section_to_json(c, "eval")},
         {"out_dir", c.out_dir}};
  return j.dump(2);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");

  reject_unknown(
      j, {"variant", "env", "encoder", "estimator", "replay", "rl", "train", "eval", "out_dir"},
      "");

  ExperimentConfig c;
  read_key(j, "variant", c.variant);
  read_key(j, "out_dir", c.out_dir);

  if (j.contains("env")) {
    const auto& s = j.at("env");
    reject_unknown(s, {"family", "num_crippled"}, "env.");
    read_key(s, "family", c.env_family);
    read_key(s, "num_crippled", c.num_crippled);
  }
  if (j.contains("encoder")) {
    const auto& s = j.at("encoder");
    reject_unknown(s, {"hidden", "embed_dim", "normalize", "momentum", "beta"}, "encoder.");
    read_key(s, "hidden", c.encoder_hidden);
    read_key(s, "embed_dim", c.embed_dim);
    read_key(s, "normalize", c.normalize_embeddings);
    read_key(s, "momentum", c.momentum);
    read_key(s, "beta", c.beta);
  }
  if (j.contains("estimator")) {
    const auto& s = j.at("estimator");
    reject_unknown(s,
                   {"alpha", "contrastive_batch", "pairwise_distance", "detach_multiplier",
                    "cross_task_low_return_only"},
                   "estimator.");
    read_key(s, "alpha", c.alpha);
    read_key(s, "contrastive_batch", c.contrastive_batch);
    read_key(s, "pairwise_distance", c.pairwise_distance);
    read_key(s, "detach_multiplier", c.detach_multiplier);
    read_key(s, "cross_task_low_return_only", c.cross_task_low_return_only);
  }
  if (j.contains("replay")) {
    const auto& s = j.at("replay");
    reject_unknown(s, {"capacity", "top_fraction", "bottom_fraction", "distinct_query"},
                   "replay.");
    read_key(s, "capacity", c.buffer_capacity);
    read_key(s, "top_fraction", c.top_fraction);
    read_key(s, "bottom_fraction", c.bottom_fraction);
    read_key(s, "distinct_query", c.distinct_query);
  }
  if (j.contains("rl")) {
    const auto& s = j.at("rl");
    reject_unknown(s,
                   {"hidden", "gamma", "lr", "target_rate_critic", "target_rate_actor",
                    "init_alpha", "batch", "encoder_grad_from_actor"},
                   "rl.");
    read_key(s, "hidden", c.sac_hidden);
    read_key(s, "gamma", c.gamma);
    read_key(s, "lr", c.lr);
    read_key(s, "target_rate_critic", c.target_rate_critic);
    read_key(s, "target_rate_actor", c.target_rate_actor);
    read_key(s, "init_alpha", c.init_alpha);
    read_key(s, "batch", c.sac_batch);
    read_key(s, "encoder_grad_from_actor", c.encoder_grad_from_actor);
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    reject_unknown(s, {"total_timesteps", "train_freq", "grad_steps", "warmup_steps", "seeds"},
                   "train.");
    read_key(s, "total_timesteps", c.total_timesteps);
    read_key(s, "train_freq", c.train_freq);
    read_key(s, "grad_steps", c.grad_steps);
    read_key(s, "warmup_steps", c.warmup_steps);
    read_key(s, "seeds", c.seeds);
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    reject_unknown(s, {"episodes_per_task", "probe_episodes", "every"}, "eval.");
    read_key(s, "episodes_per_task", c.eval_episodes_per_task);
    read_key(s, "probe_episodes", c.probe_episodes);
    read_key(s, "every", c.eval_every);
  }

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_hash(const ExperimentConfig& c) {
  const std::uint64_t h = fnv1a64(config_json(c));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sami
