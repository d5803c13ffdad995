#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "sami/replay.hpp"
#include "sami/rng.hpp"

using namespace sami;

namespace {

Trajectory traj(int task, double ret, std::size_t len = 1) {
  Trajectory t;
  t.task_id = task;
  t.obs_dim = 1;
  t.act_dim = 1;
  t.obs.assign(len + 1, 0.0);
  t.act.assign(len, 0.0);
  t.rew.assign(len, ret / static_cast<double>(len));
  t.ret = ret;
  return t;
}

}  // namespace

TEST_CASE("capacity counts transitions and evicts oldest first") {
  RankedBuffer buf(3);
  buf.push(traj(0, 1.0));
  buf.push(traj(0, 2.0));
  buf.push(traj(1, 3.0));
  CHECK(buf.size() == 3);
  CHECK(buf.num_trajectories() == 3);
  buf.push(traj(1, 4.0));  // evicts the return-1 trajectory
  CHECK(buf.size() == 3);
  CHECK(buf.ranked(0).size() == 1);
  CHECK(buf.get(buf.ranked(0)[0]).ret == 2.0);

  buf.push(traj(2, 5.0, 2));  // needs two slots: evicts two oldest
  CHECK(buf.size() == 3);
  CHECK_FALSE(buf.has_task(0));
  CHECK(buf.ranked(1).size() == 1);
}

TEST_CASE("oversized and inconsistent trajectories are rejected") {
  RankedBuffer buf(3);
  CHECK_THROWS_WITH_AS(buf.push(traj(0, 1.0, 4)), "trajectory larger than buffer capacity",
                       std::invalid_argument);
  Trajectory bad = traj(0, 1.0);
  bad.ret = 9.0;
  CHECK_THROWS_WITH_AS(buf.push(std::move(bad)), "trajectory return does not match its rewards",
                       std::invalid_argument);
  Trajectory empty;
  empty.obs = {0.0};
  CHECK_THROWS_WITH_AS(buf.push(std::move(empty)), "trajectory has no steps",
                       std::invalid_argument);
  CHECK_THROWS_AS(RankedBuffer(0), std::invalid_argument);
}

TEST_CASE("ranking is return-descending with earlier pushes winning ties") {
  RankedBuffer buf(10);
  buf.push(traj(0, 1.0));  // slot 0
  buf.push(traj(0, 3.0));  // slot 1
  buf.push(traj(0, 3.0));  // slot 2, ties slot 1, ranked after it
  buf.push(traj(0, 2.0));  // slot 3
  const auto& rank = buf.ranked(0);
  REQUIRE(rank.size() == 4);
  CHECK(buf.get(rank[0]).ret == 3.0);
  CHECK(rank[0] == 1);
  CHECK(rank[1] == 2);
  CHECK(buf.get(rank[2]).ret == 2.0);
  CHECK(buf.get(rank[3]).ret == 1.0);
}

TEST_CASE("skill-aware draws honor the ranked pools") {
  RngStream rng(41);
  RankedBuffer buf(1000);
  for (int i = 0; i < 10; ++i) buf.push(traj(0, static_cast<double>(i)));
  for (int i = 0; i < 4; ++i) buf.push(traj(1, static_cast<double>(i)));

  for (int i = 0; i < 500; ++i) {
    const SkillAwareDraw d = buf.sample_skill_aware(0, 4, rng);
    CHECK(buf.get(d.query).ret == 9.0);  // rank 0
    CHECK(buf.get(d.positive).ret >= 8.0);  // top fifth of ten
    REQUIRE(d.negatives.size() == 3);
    for (const auto s : d.negatives) CHECK(buf.get(s).ret <= 4.0);  // bottom half
  }

  SkillAwareConfig distinct;
  distinct.distinct_query = true;
  for (int i = 0; i < 100; ++i) {
    const SkillAwareDraw d = buf.sample_skill_aware(0, 4, rng, distinct);
    CHECK(d.positive != d.query);
  }
}

TEST_CASE("sampling errors name their cause") {
  RngStream rng(42);
  RankedBuffer buf(100);
  CHECK_THROWS_WITH_AS(buf.sample_rl_batch(1, rng), "replay buffer is empty",
                       std::runtime_error);
  buf.push(traj(0, 1.0));
  CHECK_THROWS_WITH_AS(buf.sample_skill_aware(0, 4, rng), "insufficient intra-task samples",
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(buf.sample_cross_task(0, 4, rng), "no other task populated",
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(buf.ranked(7), "task has no stored trajectories", std::out_of_range);
  CHECK_THROWS_AS(buf.sample_skill_aware(0, 1, rng), std::invalid_argument);
}

TEST_CASE("cross-task sampling respects the low-return restriction") {
  RngStream rng(43);
  RankedBuffer buf(1000);
  for (int i = 0; i < 10; ++i) buf.push(traj(0, static_cast<double>(i)));
  for (int i = 0; i < 10; ++i) buf.push(traj(1, static_cast<double>(i)));
  bool saw_high = false;
  for (int i = 0; i < 300; ++i) {
    for (const auto s : buf.sample_cross_task(0, 5, rng, true)) {
      CHECK(buf.get(s).task_id == 1);
      CHECK(buf.get(s).ret <= 4.0);
    }
    for (const auto s : buf.sample_cross_task(0, 5, rng, false))
      saw_high = saw_high || buf.get(s).ret > 4.0;
  }
  CHECK(saw_high);  // the unrestricted pool reaches the top of the ranking
}

TEST_CASE("rl batches draw uniformly over transitions") {
  RngStream rng(44);
  RankedBuffer buf(1000);
  buf.push(traj(0, 4.0, 4));
  buf.push(traj(1, 1.0, 1));
  std::size_t long_hits = 0;
  const std::size_t draws = 20000;
  for (const auto& ref : buf.sample_rl_batch(draws, rng)) {
    const Trajectory& t = buf.get(ref.slot);
    CHECK(ref.t < t.length());
    long_hits += t.length() == 4 ? 1 : 0;
  }
  // 4 of 5 stored transitions live in the long trajectory.
  CHECK(static_cast<double>(long_hits) / draws == doctest::Approx(0.8).epsilon(0.03));
}

TEST_CASE("realized sample spaces count per-skill pools") {
  RankedBuffer buf(1000);
  for (int task = 0; task < 3; ++task)
    for (int i = 0; i < 5; ++i) {
      Trajectory hi = traj(task, 10.0 + i);
      hi.skill = Skill::Push;
      buf.push(hi);
      Trajectory lo = traj(task, -10.0 - i);
      lo.skill = Skill::Lift;
      buf.push(lo);
    }
  const RealizedSampleSpace counts = buf.realized_sample_space(1);
  CHECK(counts.sance == 10);
  CHECK(counts.infonce == 30);
  CHECK(counts.sa_plus_infonce == 20);
}

TEST_CASE("export emits one json object per trajectory in insertion order") {
  RankedBuffer buf(100);
  buf.push(traj(0, 1.0));
  buf.push(traj(1, 2.0));
  std::ostringstream out;
  buf.export_jsonl(out);
  const std::string text = out.str();
  std::size_t lines = 0;
  for (const char c : text) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 2);
  CHECK(text.find("\"task_id\":0") != std::string::npos);
  CHECK(text.find("\"task_id\":1") > text.find("\"task_id\":0"));
}
