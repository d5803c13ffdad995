#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace sami {

enum class Skill { Push, Lift, Other };

const char* skill_name(Skill s);

// Hidden task parameters. The agent never observes these; they exist for the
// environment dynamics, for split bookkeeping and for diagnostics.
struct TaskFeatures {
  double mass = 1.0;
  double friction = 1.0;
  std::array<bool, 3> crippled_mask = {false, false, false};

  bool operator==(const TaskFeatures&) const = default;
};

// One finished episode. Observations are stored flat, one extra row for the
// final observation, so row t of obs pairs with act/rew row t.
struct Trajectory {
  int task_id = -1;
  TaskFeatures features;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<double> obs;  // (length+1) * obs_dim
  std::vector<double> act;  // length * act_dim
  std::vector<double> rew;  // length
  double ret = 0.0;
  Skill skill = Skill::Other;
  bool success = false;

  std::size_t length() const { return rew.size(); }
  const double* obs_at(std::size_t t) const { return obs.data() + t * obs_dim; }
  const double* act_at(std::size_t t) const { return act.data() + t * act_dim; }
};

}  // namespace sami
