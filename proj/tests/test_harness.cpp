#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "sami/harness.hpp"
#include "sami/io.hpp"

using namespace sami;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.encoder_hidden = 8;
  cfg.embed_dim = 3;
  cfg.sac_hidden = {16, 16};
  cfg.sac_batch = 16;
  cfg.contrastive_batch = 4;
  cfg.total_timesteps = 1000;
  cfg.train_freq = 128;
  cfg.grad_steps = 2;
  cfg.warmup_steps = 100;
  cfg.eval_every = 500;
  cfg.probe_episodes = 1;
  cfg.eval_episodes_per_task = 1;
  cfg.out_dir = "harness-test-out";
  return cfg;
}

EpisodeRecord record(int task, bool success, Skill skill = Skill::Push) {
  EpisodeRecord e;
  e.split = "train";
  e.task_id = task;
  e.success = success;
  e.skill = skill;
  return e;
}

}  // namespace

TEST_CASE("aggregate success averages per-cell rates") {
  const std::vector<EpisodeRecord> eps{record(0, true), record(0, false), record(8, true)};
  CHECK(aggregate_success(eps) == doctest::Approx(0.75));
  CHECK(aggregate_success({}) == 0.0);
}

TEST_CASE("skill histogram always carries all three bins") {
  const auto empty = skill_histogram({});
  CHECK(empty.at("push") == 0.0);
  CHECK(empty.at("lift") == 0.0);
  CHECK(empty.at("other") == 0.0);
  const auto h = skill_histogram({record(0, true, Skill::Push), record(0, true, Skill::Push),
                                  record(0, true, Skill::Lift), record(0, true, Skill::Other)});
  CHECK(h.at("push") == doctest::Approx(0.5));
  CHECK(h.at("lift") == doctest::Approx(0.25));
}

TEST_CASE("run results survive a json round trip") {
  RunResult r;
  r.variant = "satesac";
  r.seed = 9;
  r.config_hash = "abc123";
  r.training_episodes = {record(3, true, Skill::Lift)};
  r.training_episodes[0].features = {2.5, 0.5, {true, false, false}};
  r.training_episodes[0].ret = -12.25;
  r.eval_episodes["extreme"] = {record(16, false, Skill::Other)};
  r.probes = {{500, "moderate", -3.5, 0.25}};
  r.rounds = {{128, 0.5, -0.25, 1.0, 2.4, 2.4849066497880004, 640}};
  r.wall_clock_seconds = 1.5;
  const std::string text = run_result_json(r);
  const RunResult back = parse_run_result(text);
  CHECK(run_result_json(back) == text);
  CHECK(back.variant == "satesac");
  CHECK(back.seed == 9);
  CHECK(back.training_episodes[0].features.mass == 2.5);
  CHECK(back.training_episodes[0].features.crippled_mask[0]);
  CHECK(back.eval_episodes.at("extreme")[0].skill == Skill::Other);
  CHECK(back.probes[0].split == "moderate");
  CHECK(back.rounds[0].buffer_transitions == 640);
  CHECK(back.wall_clock_seconds == 1.5);
}

TEST_CASE("behavior payload hides identity metadata") {
  RunResult a;
  a.variant = "satesac";
  a.config_hash = "hash-a";
  a.wall_clock_seconds = 10.0;
  a.training_episodes = {record(0, true)};
  RunResult b = a;
  b.variant = "tesac";
  b.config_hash = "hash-b";
  b.wall_clock_seconds = 99.0;
  CHECK(behavior_json(a) == behavior_json(b));
  b.training_episodes[0].success = false;
  CHECK(behavior_json(a) != behavior_json(b));
}

TEST_CASE("meta_train is deterministic and counts its bookkeeping") {
  const ExperimentConfig cfg = tiny_config();
  const MetaTrainOutput a = meta_train(cfg, 3);
  const MetaTrainOutput b = meta_train(cfg, 3);
  CHECK(behavior_json(a.result) == behavior_json(b.result));
  CHECK(a.buffer_jsonl == b.buffer_jsonl);

  // 1000 steps of 100-step episodes.
  CHECK(a.result.training_episodes.size() == 10);
  // Rounds at the 7 train_freq multiples past warmup; probes once per split.
  CHECK(a.result.rounds.size() == 7);
  CHECK(a.result.probes.size() == 3);
  CHECK(a.result.rounds[0].step == 128);
  CHECK(a.result.rounds[0].buffer_transitions == 100);
  CHECK(a.result.probes[0].step == 500);
  // Final eval covers all three splits at one episode per cell.
  CHECK(a.result.eval_episodes.at("train").size() == 9);
  CHECK(a.result.eval_episodes.at("moderate").size() == 4);
  CHECK(a.result.eval_episodes.at("extreme").size() == 7);
  CHECK(a.result.wall_clock_seconds > 0.0);

  const MetaTrainOutput c = meta_train(cfg, 4);
  CHECK(behavior_json(a.result) != behavior_json(c.result));
}

TEST_CASE("contrastive diagnostics track the variant") {
  ExperimentConfig cfg = tiny_config();
  cfg.variant = "tesac";
  const MetaTrainOutput plain = meta_train(cfg, 5);
  for (const auto& rd : plain.result.rounds) {
    CHECK(rd.contrastive == 0.0);
    CHECK(rd.log_k == 0.0);
  }
  cfg.variant = "satesac";
  const MetaTrainOutput skill = meta_train(cfg, 5);
  bool saw_logk = false;
  for (const auto& rd : skill.result.rounds) saw_logk |= rd.log_k > 0.0;
  CHECK(saw_logk);
}

TEST_CASE("meta_test is deterministic and spans the split") {
  const ExperimentConfig cfg = tiny_config();
  const MetaTrainOutput out = meta_train(cfg, 6);
  const auto e1 = meta_test(out.agent, cfg, moderate_split(), 2, 11);
  const auto e2 = meta_test(out.agent, cfg, moderate_split(), 2, 11);
  REQUIRE(e1.size() == 8);
  for (std::size_t i = 0; i < e1.size(); ++i) {
    CHECK(e1[i].ret == e2[i].ret);
    CHECK(e1[i].task_id == e2[i].task_id);
    CHECK(e1[i].split == "moderate");
  }
  const auto e3 = meta_test(out.agent, cfg, moderate_split(), 2, 12);
  bool differs = false;
  for (std::size_t i = 0; i < e1.size(); ++i) differs |= e1[i].ret != e3[i].ret;
  CHECK(differs);  // different eval seed, different goals
}

TEST_CASE("agents survive a save and load") {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = tiny_config();
  MetaTrainOutput out = meta_train(cfg, 7);
  const std::string path = cfg.out_dir + "/agent-roundtrip.json";
  save_agent(path, out.agent, cfg, 7);

  ExperimentConfig cfg_back;
  std::uint64_t seed_back = 0;
  const TrainedAgent loaded = load_agent(path, &cfg_back, &seed_back);
  CHECK(seed_back == 7);
  CHECK(config_hash(cfg_back) == config_hash(cfg));

  const auto before = meta_test(out.agent, cfg, extreme_split(), 1, 21);
  const auto after = meta_test(loaded, cfg, extreme_split(), 1, 21);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].ret == after[i].ret);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("run_and_save writes the full artifact set") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = tiny_config();
  cfg.total_timesteps = 300;
  cfg.eval_every = 200;
  const std::string path = run_and_save(cfg, 8);
  CHECK(fs::exists(path));
  const RunResult r = parse_run_result(read_file(path));
  CHECK(r.seed == 8);
  CHECK(r.config_hash == config_hash(cfg));
  const std::string stem = path.substr(0, path.rfind("-result.json"));
  CHECK(fs::exists(stem + "-metrics.jsonl"));
  CHECK(fs::exists(stem + "-buffer.jsonl"));
  CHECK(fs::exists(stem + "-checkpoint.json"));
  CHECK(fs::exists(stem + "-timing.json"));
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("sweeps aggregate one row per value") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = tiny_config();
  cfg.total_timesteps = 300;
  cfg.eval_every = 200;
  cfg.seeds = {1};
  const std::string csv = sweep(cfg, "alpha", {0.0, 1.0});
  std::size_t lines = 0;
  for (const char c : csv) lines += c == '\n' ? 1 : 0;
  CHECK(lines >= 3);  // header + one row per value
  CHECK(csv.find("alpha") != std::string::npos);
  CHECK_THROWS_WITH_AS(sweep(cfg, "bogus", {1.0}), "unknown sweep axis: bogus",
                       std::invalid_argument);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("report joins variants with paired tests") {
  RunResult a1, a2, b1, b2;
  for (auto* r : {&a1, &a2}) r->variant = "tesac";
  for (auto* r : {&b1, &b2}) r->variant = "satesac";
  a1.seed = 1;
  a2.seed = 2;
  b1.seed = 1;
  b2.seed = 2;
  for (auto* r : {&a1, &a2, &b1, &b2}) {
    r->eval_episodes["train"] = {record(0, r->variant == "satesac")};
    r->eval_episodes["extreme"] = {record(8, r->variant == "satesac")};
  }
  const std::string csv = report({a1, a2, b1, b2});
  CHECK(csv.find("tesac") != std::string::npos);
  CHECK(csv.find("satesac") != std::string::npos);
  CHECK(csv.find("extreme") != std::string::npos);
  CHECK(csv.find("variant_a,variant_b,split,t,p,paired_seeds") != std::string::npos);
  // Perfectly separated success rates: both splits report a paired test row.
  CHECK(csv.find("satesac,tesac,train") != std::string::npos);
}

TEST_CASE("estimator suites emit csv diagnostics") {
  const std::string bounds = estimator_suite_csv("bounds", 3);
  CHECK(bounds.rfind("estimator,k,value,bound_logk,exact_mi,seed", 0) == 0);
  CHECK(bounds.find("infonce") != std::string::npos);
  CHECK(bounds.find("sance") != std::string::npos);
  const std::string oracle = estimator_suite_csv("oracle", 3);
  CHECK(oracle.find("exact_mi") != std::string::npos);
  const std::string tight = estimator_suite_csv("tightness", 3);
  CHECK(tight.find("optimal_critic") != std::string::npos);
  CHECK_THROWS_AS(estimator_suite_csv("bogus", 3), std::invalid_argument);
}
