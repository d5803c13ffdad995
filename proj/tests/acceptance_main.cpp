// Acceptance suite: one line per criterion, [PASS]/[FAIL], exit code equals
// the number of failures. Criteria can be selected by number on the command
// line; default runs all.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sami/discrete.hpp"
#include "sami/encoder.hpp"
#include "sami/env.hpp"
#include "sami/estimators.hpp"
#include "sami/harness.hpp"
#include "sami/io.hpp"
#include "sami/nn.hpp"
#include "sami/replay.hpp"
#include "sami/rng.hpp"
#include "sami/sac.hpp"
#include "sami/stats.hpp"

#include "fd_check.hpp"

namespace {

using namespace sami;

std::string fmt(double v) { return format_double(v); }

ContextEmbedding random_embedding(std::size_t dim, RngStream& rng) {
  ContextEmbedding e;
  e.values.resize(dim);
  for (auto& v : e.values) v = rng.normal();
  return e;
}

EstimatorBatch random_batch(std::size_t k, std::size_t dim, RngStream& rng, int task = 0) {
  EstimatorBatch b;
  b.query = {random_embedding(dim, rng), task, std::nullopt};
  b.positive = {random_embedding(dim, rng), task, std::nullopt};
  for (std::size_t i = 0; i + 1 < k; ++i)
    b.negatives.push_back({random_embedding(dim, rng), task, std::nullopt});
  return b;
}

// ---------------------------------------------------------------- criterion 1
std::string crit_bound_chain() {
  RngStream rng = derive_stream(2024, "acceptance-bounds");
  for (const std::size_t k : {2, 4, 8, 64}) {
    for (const double beta : {0.1, 1.0}) {
      const SimilarityConfig cfg{beta};
      for (int i = 0; i < 1000; ++i) {
        const EstimatorBatch b = random_batch(k, 6, rng);
        const double cap = std::log(static_cast<double>(k)) + 1e-9;
        const double nce = infonce(b, cfg);
        const double sa = sance(b, cfg);
        if (nce > cap)
          return "infonce " + fmt(nce) + " exceeds log K at K=" + std::to_string(k);
        if (sa > cap) return "sance " + fmt(sa) + " exceeds log K at K=" + std::to_string(k);
      }
    }
  }
  return "";
}

// ---------------------------------------------------------------- criterion 2
std::string crit_optimal_critic() {
  const std::size_t n = 64;
  DiscreteJoint joint{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) joint.p[i * n + i] = 1.0 / static_cast<double>(n);
  const double target = std::log(64.0) - std::log(127.0) + std::log(128.0);
  const double got = optimal_critic_infonce(joint, 128, 100000, 7);
  if (std::abs(got - target) > 0.05)
    return "estimate " + fmt(got) + " not within 0.05 of " + fmt(target);
  return "";
}

// ---------------------------------------------------------------- criterion 3
std::string crit_sandwich() {
  RngStream rng = derive_stream(2024, "acceptance-sandwich");
  for (int i = 0; i < 1000; ++i) {
    const std::size_t nc = 2 + rng.integer(3);
    const std::size_t npi = 2 + rng.integer(3);
    const std::size_t nt = 2 + rng.integer(3);
    const DiscreteJoint3 joint = random_common_cause_joint(nc, npi, nt, rng);
    const double sami_v = exact_sami(joint);
    const double mi = exact_mi(joint.marginal_c_tau());
    if (sami_v < -1e-12)
      return "negative interaction value " + fmt(sami_v) + " at trial " + std::to_string(i);
    if (sami_v > mi + 1e-12)
      return "interaction value " + fmt(sami_v) + " exceeds direct dependence " + fmt(mi);
  }
  return "";
}

// ---------------------------------------------------------------- criterion 4
Trajectory tiny_trajectory(std::size_t len, std::size_t obs_dim, std::size_t act_dim,
                           RngStream& rng) {
  Trajectory tr;
  tr.obs_dim = obs_dim;
  tr.act_dim = act_dim;
  tr.task_id = 0;
  for (std::size_t t = 0; t < (len + 1) * obs_dim; ++t) tr.obs.push_back(rng.normal());
  for (std::size_t t = 0; t < len * act_dim; ++t) tr.act.push_back(rng.normal());
  for (std::size_t t = 0; t < len; ++t) tr.rew.push_back(rng.normal());
  for (const double r : tr.rew) tr.ret += r;
  return tr;
}

std::string crit_gradients() {
  using testutil::fd_check;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng = derive_stream(seed, "acceptance-grad");
    const std::size_t dim = 4, k = 5;

    // Contrastive estimates and the soft loss over leaf embeddings.
    std::vector<Tensor> embs;
    for (std::size_t i = 0; i < k + 1; ++i) {
      Tensor e = Tensor::zeros({dim});
      for (std::size_t j = 0; j < dim; ++j) e[j] = rng.normal();
      embs.push_back(e);
    }
    std::vector<Tensor*> emb_ptrs;
    for (auto& e : embs) emb_ptrs.push_back(&e);
    const auto build_nce = [&](Tape& t, std::vector<Tape::NodeId>& leaves) {
      for (auto* p : emb_ptrs) leaves.push_back(t.leaf(*p, true));
      const std::vector<Tape::NodeId> negs(leaves.begin() + 2, leaves.end());
      return nce_node(t, leaves[0], leaves[1], negs, 0.1);
    };
    worst = std::max(worst, fd_check(emb_ptrs, build_nce).max_rel);

    SoftSanceConfig soft;
    soft.pairwise_distance = (seed % 2) == 1;
    const auto build_soft = [&](Tape& t, std::vector<Tape::NodeId>& leaves) {
      for (auto* p : emb_ptrs) leaves.push_back(t.leaf(*p, true));
      const std::vector<Tape::NodeId> negs(leaves.begin() + 2, leaves.end());
      const auto est = nce_node(t, leaves[0], leaves[1], negs, 0.1);
      const std::array<Tape::NodeId, 1> pos{leaves[1]};
      return soft_sance_node(t, pos, negs, est, soft);
    };
    worst = std::max(worst, fd_check(emb_ptrs, build_soft).max_rel);

    // Critic and actor losses on a tiny SAC stack.
    SacConfig scfg;
    scfg.obs_dim = 3;
    scfg.act_dim = 2;
    scfg.embed_dim = 2;
    scfg.hidden = {4};
    SacParams sac = make_sac(scfg, rng);
    std::vector<SacTransition> batch(2);
    std::vector<Tensor> batch_embs;
    for (auto& tr : batch) {
      tr.obs.resize(scfg.obs_dim);
      tr.act.resize(scfg.act_dim);
      tr.next_obs.resize(scfg.obs_dim);
      for (auto& v : tr.obs) v = rng.normal();
      for (auto& v : tr.act) v = rng.uniform(-1.0, 1.0);
      for (auto& v : tr.next_obs) v = rng.normal();
      tr.rew = rng.normal();
      Tensor e = Tensor::zeros({scfg.embed_dim});
      for (std::size_t j = 0; j < scfg.embed_dim; ++j) e[j] = rng.normal();
      batch_embs.push_back(e);
    }
    const std::vector<double> targets{rng.normal(), rng.normal()};

    std::vector<Tensor*> critic_params;
    for (auto& l : sac.critic1.layers) {
      critic_params.push_back(&l.w);
      critic_params.push_back(&l.b);
    }
    for (auto& l : sac.critic2.layers) {
      critic_params.push_back(&l.w);
      critic_params.push_back(&l.b);
    }
    const std::size_t c1_count = sac.critic1.layers.size() * 2;
    for (auto& e : batch_embs) critic_params.push_back(&e);
    const auto build_critic = [&](Tape& t, std::vector<Tape::NodeId>& leaves) {
      for (auto* p : critic_params) leaves.push_back(t.leaf(*p, true));
      const std::vector<Tape::NodeId> c1(leaves.begin(), leaves.begin() + c1_count);
      const std::vector<Tape::NodeId> c2(leaves.begin() + c1_count, leaves.begin() + 2 * c1_count);
      const std::vector<Tape::NodeId> embn(leaves.begin() + 2 * c1_count, leaves.end());
      return critic_loss_node(t, c1, c2, batch, embn, targets);
    };
    worst = std::max(worst, fd_check(critic_params, build_critic).max_rel);

    std::vector<double> noise(batch.size() * scfg.act_dim);
    for (auto& v : noise) v = rng.normal();
    std::vector<Tensor*> actor_params;
    for (auto& l : sac.actor.layers) {
      actor_params.push_back(&l.w);
      actor_params.push_back(&l.b);
    }
    std::vector<ContextEmbedding> emb_values;
    for (const auto& e : batch_embs) {
      ContextEmbedding c;
      for (std::size_t j = 0; j < e.numel(); ++j) c.values.push_back(e[j]);
      emb_values.push_back(c);
    }
    const auto build_actor = [&](Tape& t, std::vector<Tape::NodeId>& leaves) {
      for (auto* p : actor_params) leaves.push_back(t.leaf(*p, true));
      return actor_loss_node(t, sac, leaves, batch, emb_values, noise);
    };
    worst = std::max(worst, fd_check(actor_params, build_actor).max_rel);

    // Five-step unrolled recurrent encoder.
    EncoderParams enc = make_encoder(3, 2, 4, 2, rng);
    const Trajectory traj = tiny_trajectory(5, 3, 2, rng);
    std::vector<Tensor*> enc_params{&enc.lstm.w_i, &enc.lstm.w_f, &enc.lstm.w_o, &enc.lstm.w_c,
                                    &enc.lstm.b_i, &enc.lstm.b_f, &enc.lstm.b_o, &enc.lstm.b_c,
                                    &enc.head.w,   &enc.head.b};
    const auto build_enc = [&](Tape& t, std::vector<Tape::NodeId>& leaves) {
      for (auto* p : enc_params) leaves.push_back(t.leaf(*p, true));
      EncoderLeaves el;
      el.lstm = {leaves[0], leaves[1], leaves[2], leaves[3],
                 leaves[4], leaves[5], leaves[6], leaves[7]};
      el.head_w = leaves[8];
      el.head_b = leaves[9];
      return t.sum(encode_prefix_node(t, enc, el, traj, 5));
    };
    worst = std::max(worst, fd_check(enc_params, build_enc).max_rel);

    if (worst >= 1e-4)
      return "max relative gradient error " + fmt(worst) + " at seed " + std::to_string(seed);
  }
  return "";
}

// ---------------------------------------------------------------- criterion 5
std::string crit_momentum() {
  RngStream rng(99);
  EncoderParams online = make_encoder(4, 2, 8, 3, rng);
  const EncoderParams start = make_encoder(4, 2, 8, 3, rng);

  const auto diff_norm = [&](EncoderParams& a, EncoderParams& b) {
    auto pa = named_params(a, "e");
    auto pb = named_params(b, "e");
    double sq = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t j = 0; j < pa[i].tensor->numel(); ++j) {
        const double d = (*pa[i].tensor)[j] - (*pb[i].tensor)[j];
        sq += d * d;
      }
    return std::sqrt(sq);
  };

  EncoderParams probe = start;
  const double initial = diff_norm(probe, online);
  std::size_t done = 0;
  for (const std::size_t n : {1, 10, 100}) {
    for (; done < n; ++done) momentum_update(probe, online, 0.05);
    const double bound = std::pow(0.95, static_cast<double>(n)) * initial + 1e-12;
    const double gap = diff_norm(probe, online);
    if (gap > bound)
      return "after " + std::to_string(n) + " updates gap " + fmt(gap) + " above bound " +
             fmt(bound);
  }
  return "";
}

// ---------------------------------------------------------------- criterion 6
Trajectory stub_trajectory(int task, double ret) {
  Trajectory tr;
  tr.task_id = task;
  tr.obs_dim = 1;
  tr.act_dim = 1;
  tr.obs = {0.0, 0.0};
  tr.act = {0.0};
  tr.rew = {ret};
  tr.ret = ret;
  return tr;
}

std::string crit_sampling_contracts() {
  RngStream rng = derive_stream(2024, "acceptance-sampling");
  RankedBuffer buffer(100000);
  std::map<int, std::set<double>> distinct;
  for (int task = 0; task < 6; ++task) {
    const std::size_t n = 2 + rng.integer(29);
    for (std::size_t i = 0; i < n; ++i) {
      const double ret = 0.5 * static_cast<double>(rng.integer(12));  // ties likely
      buffer.push(stub_trajectory(task, ret));
      distinct[task].insert(ret);
    }
  }
  const std::size_t k = 6;
  for (int i = 0; i < 10000; ++i) {
    const int task = static_cast<int>(rng.integer(6));
    const SkillAwareDraw draw = buffer.sample_skill_aware(task, k, rng);
    const double pos_ret = buffer.get(draw.positive).ret;
    if (buffer.get(draw.query).task_id != task || buffer.get(draw.positive).task_id != task)
      return "query or positive left the task";
    for (const auto s : draw.negatives) {
      if (buffer.get(s).task_id != task) return "negative left the task";
      if (distinct[task].size() >= k && pos_ret < buffer.get(s).ret)
        return "positive return " + fmt(pos_ret) + " below a negative " +
               fmt(buffer.get(s).ret);
    }
    const auto cross = buffer.sample_cross_task(task, k, rng);
    for (const auto s : cross)
      if (buffer.get(s).task_id == task) return "cross-task draw returned the current task";
  }
  return "";
}

// ---------------------------------------------------------------- criterion 7
std::string crit_sample_space() {
  RankedBuffer buffer(100000);
  // 3 tasks, 2 skills each, 5 trajectories per (task, skill). High returns
  // carry the positive skill.
  for (int task = 0; task < 3; ++task) {
    for (int i = 0; i < 5; ++i) {
      Trajectory hi = stub_trajectory(task, 10.0 + i);
      hi.skill = Skill::Push;
      buffer.push(hi);
      Trajectory lo = stub_trajectory(task, -10.0 - i);
      lo.skill = Skill::Lift;
      buffer.push(lo);
    }
  }
  for (int task = 0; task < 3; ++task) {
    const RealizedSampleSpace counts = buffer.realized_sample_space(task);
    if (counts.sance != 10)
      return "intra-task count " + std::to_string(counts.sance) + " != 10";
    if (counts.infonce != 30)
      return "all-task count " + std::to_string(counts.infonce) + " != 30";
    if (counts.sa_plus_infonce != 20)
      return "union count " + std::to_string(counts.sa_plus_infonce) + " != 20";
  }
  const SampleSpaceSpec spec{3, 2, 5};
  if (k_star_sance(spec) != 10 || k_star_infonce(spec) != 30 || k_star(spec) != 30)
    return "analytic counts disagree";
  const std::array<std::size_t, 3> negs{2, 2, 2};
  if (k_star_sa_plus_infonce(negs, 1, 5) != 35) return "union formula disagrees";
  return "";
}

// ---------------------------------------------------------------- criterion 8
double scripted_return(const TaskFeatures& f, bool lift, std::uint64_t seed) {
  RngStream rng(seed);
  double total = 0.0;
  for (int ep = 0; ep < 3; ++ep) {
    BlockRelocateState s = reset(f, rng);
    bool done = false;
    while (!done) {
      const auto a = lift ? scripted_lift(s) : scripted_push(s);
      const StepResult res = step(s, a, f);
      total += res.reward;
      s = res.state;
      done = res.done;
    }
  }
  return total / 3.0;
}

std::string crit_skill_structure() {
  std::vector<TaskFeatures> cells;
  for (const auto& split : {train_split(), moderate_split(), extreme_split()})
    cells.insert(cells.end(), split.cells.begin(), split.cells.end());
  int lift_only = 0, push_only = 0;
  for (const auto& f : cells) {
    const double weight = f.mass * env::kGravity;
    const double grip = f.friction * weight;
    const double push_ret = scripted_return(f, false, 11);
    const double lift_ret = scripted_return(f, true, 11);
    if (grip > env::kForceMax && weight <= env::kForceMax) {
      ++lift_only;
      if (!(lift_ret > push_ret))
        return "lift " + fmt(lift_ret) + " does not beat push " + fmt(push_ret) + " at mass " +
               fmt(f.mass) + " friction " + fmt(f.friction);
    } else if (weight > env::kForceMax && grip <= env::kForceMax) {
      ++push_only;
      if (!(push_ret > lift_ret))
        return "push " + fmt(push_ret) + " does not beat lift " + fmt(lift_ret) + " at mass " +
               fmt(f.mass) + " friction " + fmt(f.friction);
    }
  }
  if (lift_only == 0 || push_only == 0) return "feature grid lost its contrasting cells";
  return "";
}

// ---------------------------------------------------------------- criterion 9
ExperimentConfig desk_config() {
  ExperimentConfig cfg;
  cfg.encoder_hidden = 32;
  cfg.sac_hidden = {64, 64};
  cfg.sac_batch = 64;
  cfg.total_timesteps = 200000;
  cfg.train_freq = 128;
  cfg.grad_steps = 16;
  cfg.warmup_steps = 1000;
  cfg.eval_every = 25000;
  cfg.probe_episodes = 2;
  cfg.eval_episodes_per_task = 10;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.out_dir = "acceptance-results";
  return cfg;
}

std::string crit_end_to_end() {
  std::vector<RunResult> results;
  std::map<std::string, std::vector<double>> extreme_success;
  int diverse_seeds = 0;
  for (const std::string variant : {"tesac", "satesac"}) {
    ExperimentConfig cfg = desk_config();
    cfg.variant = variant;
    for (const auto seed : cfg.seeds) {
      const std::string path = run_and_save(cfg, seed);
      const RunResult r = parse_run_result(read_file(path));
      const auto& extreme = r.eval_episodes.at("extreme");
      const double succ = aggregate_success(extreme);
      extreme_success[variant].push_back(succ);
      std::cout << "  " << variant << " seed " << seed << ": extreme success " << fmt(succ);
      if (variant == "satesac") {
        const auto hist = skill_histogram(extreme);
        const bool diverse = hist.at("push") >= 0.10 && hist.at("lift") >= 0.10;
        diverse_seeds += diverse ? 1 : 0;
        std::cout << ", skills push " << fmt(hist.at("push")) << " lift "
                  << fmt(hist.at("lift")) << (diverse ? "" : " (not diverse)");
      }
      std::cout << "\n";
      results.push_back(r);
    }
  }
  std::cout << report(results);
  const double tesac_mean = mean(extreme_success["tesac"]);
  const double sate_mean = mean(extreme_success["satesac"]);
  if (sate_mean < tesac_mean)
    return "mean extreme success " + fmt(sate_mean) + " below baseline " + fmt(tesac_mean);
  if (diverse_seeds < 4)
    return "only " + std::to_string(diverse_seeds) + " of 5 seeds show both skills >= 10%";
  return "";
}

// --------------------------------------------------------------- criterion 10
std::string crit_reductions() {
  ExperimentConfig cfg;
  cfg.encoder_hidden = 16;
  cfg.sac_hidden = {32, 32};
  cfg.sac_batch = 32;
  cfg.total_timesteps = 5000;
  cfg.train_freq = 128;
  cfg.grad_steps = 4;
  cfg.warmup_steps = 500;
  cfg.eval_every = 2500;
  cfg.probe_episodes = 1;
  cfg.eval_episodes_per_task = 1;
  cfg.out_dir = "acceptance-results";

  cfg.variant = "satesac";
  cfg.alpha = 0.0;
  const MetaTrainOutput a = meta_train(cfg, 21);
  cfg.variant = "tesac";
  cfg.alpha = 1.0;
  const MetaTrainOutput b = meta_train(cfg, 21);
  if (behavior_json(a.result) != behavior_json(b.result))
    return "alpha=0 run diverged from the baseline byte stream";

  RngStream rng = derive_stream(2024, "acceptance-reduction");
  for (int i = 0; i < 100; ++i) {
    const EstimatorBatch batch = random_batch(8, 6, rng);
    const SimilarityConfig sim;
    const double with_empty = sa_plus_infonce(batch, {}, sim);
    const double plain = sance(batch, sim);
    if (std::abs(with_empty - plain) > 1e-12)
      return "empty union set shifted the estimate by " + fmt(with_empty - plain);
  }
  return "";
}

// --------------------------------------------------------------- criterion 11
std::string crit_ttest() {
  const std::vector<double> a{30, 31, 34, 38, 40};
  const std::vector<double> b{28, 30, 35, 36, 37};
  const TTestResult r = paired_t_test(a, b);
  if (std::abs(r.t - 2.06418738616856) > 1e-6)
    return "t " + fmt(r.t) + " off reference";
  if (std::abs(r.p - 0.10793882229227654) > 1e-6)
    return "p " + fmt(r.p) + " off reference";
  const TTestResult zero = paired_t_test(a, a);
  if (zero.p != 1.0) return "zero-difference p " + fmt(zero.p) + " != 1";
  return "";
}

struct Criterion {
  int id;
  const char* label;
  std::function<std::string()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "contrastive estimates respect the log K ceiling", crit_bound_chain},
      {2, "optimal-critic estimate is tight on a diagonal joint", crit_optimal_critic},
      {3, "skill-conditioned objective sandwiched by total dependence", crit_sandwich},
      {4, "reverse-mode gradients match finite differences", crit_gradients},
      {5, "momentum encoder converges at the configured rate", crit_momentum},
      {6, "skill-aware sampling contracts hold", crit_sampling_contracts},
      {7, "realized sample-space accounting", crit_sample_space},
      {8, "scripted skills dominate where the physics demands", crit_skill_structure},
      {9, "skill-aware training matches or beats the baseline out of distribution",
       crit_end_to_end},
      {10, "variant reductions are exact", crit_reductions},
      {11, "paired t-test matches reference values", crit_ttest},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail.empty()) {
      std::cout << "[PASS] criterion " << c.id << ": " << c.label << " (" << fmt(secs)
                << "s)\n";
    } else {
      std::cout << "[FAIL] criterion " << c.id << ": " << c.label << ": " << detail << " ("
                << fmt(secs) << "s)\n";
      ++failures;
    }
    std::cout.flush();
  }
  return failures;
}
