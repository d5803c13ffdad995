#include "sami/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sami {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void validate_features(const TaskFeatures& f) {
  if (!(f.mass > 0.0) || !std::isfinite(f.mass)) throw std::invalid_argument("mass must be > 0");
  if (!(f.friction >= 0.0) || !std::isfinite(f.friction))
    throw std::invalid_argument("friction must be >= 0");
}

}  // namespace

const char* skill_name(Skill s) {
  switch (s) {
    case Skill::Push: return "push";
    case Skill::Lift: return "lift";
    default: return "other";
  }
}

BlockRelocateState reset(const TaskFeatures& features, RngStream& rng) {
  validate_features(features);
  BlockRelocateState s;
  s.goal_x = env::kGoalMin + (env::kGoalMax - env::kGoalMin) * rng.uniform();
  return s;
}

double goal_distance(const BlockRelocateState& s) {
  return std::hypot(s.x - s.goal_x, s.z);
}

StepResult step(const BlockRelocateState& s, const std::array<double, 3>& action,
                const TaskFeatures& features) {
  for (double a : action)
    if (!std::isfinite(a)) throw std::invalid_argument("non-finite action");
  if (s.steps_left == 0) throw std::logic_error("episode already finished");
  validate_features(features);

  const double a0 = std::clamp(action[0], -1.0, 1.0);
  const double a1 = std::clamp(action[1], -1.0, 1.0);
  const double a2 = std::clamp(action[2], -1.0, 1.0);
  const double m = features.mass;
  const double mu = features.friction;

  BlockRelocateState n = s;
  n.grasp = a2 > 0.0;

  // Vertical, kinematic: rise while the grasped lift force beats the weight,
  // otherwise sink back to the surface.
  const bool can_lift = n.grasp && a1 * env::kForceMax * env::kLiftGain > m * env::kGravity;
  if (can_lift) {
    n.vz = env::kLiftSpeed;
  } else if (n.z > 0.0) {
    n.vz = -env::kLiftSpeed;
  } else {
    n.vz = 0.0;
  }
  n.z = std::max(0.0, n.z + n.vz * env::kDt);
  if (n.z == 0.0 && n.vz < 0.0) n.vz = 0.0;

  // Horizontal: Coulomb friction on the surface, free flight above it.
  const double fx = a0 * env::kForceMax;
  if (n.z > 0.0) {
    n.vx += fx / m * env::kDt;
  } else {
    const double fr = mu * m * env::kGravity;
    if (n.vx == 0.0) {
      if (std::abs(fx) > fr) n.vx += (fx - fr * sign(fx)) / m * env::kDt;
    } else {
      const double vnew = n.vx + (fx - fr * sign(n.vx)) / m * env::kDt;
      n.vx = (std::abs(fx) <= fr && vnew * n.vx <= 0.0) ? 0.0 : vnew;
    }
  }
  n.x += n.vx * env::kDt;
  n.eff_x = n.x;
  n.eff_z = n.z;
  n.steps_left -= 1;

  StepResult out;
  const double dist = goal_distance(n);
  out.reward = -dist + (dist < env::kSuccessDist ? env::kSuccessBonus : 0.0);
  out.done = n.steps_left == 0;
  out.state = n;
  return out;
}

StepResult crippled_step(const BlockRelocateState& s, const std::array<double, 3>& action,
                         const TaskFeatures& features) {
  std::array<double, 3> masked = action;
  for (std::size_t i = 0; i < masked.size(); ++i)
    if (features.crippled_mask[i]) masked[i] = 0.0;
  return step(s, masked, features);
}

std::vector<double> observe(const BlockRelocateState& s) {
  return {s.x,
          s.z,
          s.vx,
          s.vz,
          s.eff_x,
          s.eff_z,
          s.grasp ? 1.0 : 0.0,
          s.goal_x,
          static_cast<double>(s.steps_left) / static_cast<double>(env::kEpisodeLen)};
}

namespace {

TaskSplit make_split(std::string name, const std::vector<double>& masses,
                     const std::vector<double>& frictions) {
  TaskSplit split;
  split.name = std::move(name);
  for (double m : masses)
    for (double mu : frictions) split.cells.push_back({m, mu, {false, false, false}});
  return split;
}

}  // namespace

TaskSplit train_split() { return make_split("train", {1.0, 5.0, 10.0}, {0.1, 1.0, 5.0}); }

TaskSplit moderate_split() { return make_split("moderate", {2.5, 7.5}, {0.5, 2.5}); }

TaskSplit extreme_split() {
  TaskSplit split;
  split.name = "extreme";
  for (double mu : {0.1, 1.0, 5.0, 30.0}) split.cells.push_back({30.0, mu, {}});
  for (double m : {1.0, 5.0, 10.0}) split.cells.push_back({m, 30.0, {}});
  return split;
}

TaskSplit split_by_name(const std::string& name) {
  if (name == "train") return train_split();
  if (name == "moderate") return moderate_split();
  if (name == "extreme") return extreme_split();
  throw std::invalid_argument("unknown split: " + name);
}

SampledTask sample_task(const TaskSplit& split, RngStream& rng, std::size_t num_crippled) {
  if (split.cells.empty()) throw std::invalid_argument("empty task split");
  if (num_crippled > env::kActDim) throw std::invalid_argument("too many crippled actuators");
  const std::size_t cell = rng.integer(split.cells.size());
  TaskFeatures f = split.cells[cell];
  if (num_crippled > 0) {
    std::array<std::size_t, env::kActDim> idx{0, 1, 2};
    for (std::size_t i = 0; i < num_crippled; ++i) {
      const std::size_t j = i + rng.integer(env::kActDim - i);
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < num_crippled; ++i) f.crippled_mask[idx[i]] = true;
  }
  int mask_bits = 0;
  for (std::size_t i = 0; i < env::kActDim; ++i)
    if (f.crippled_mask[i]) mask_bits |= 1 << i;
  return {static_cast<int>(cell) * 8 + mask_bits, f};
}

Skill classify_skill(const Trajectory& traj) {
  if (traj.length() == 0) return Skill::Other;
  const double gx = traj.obs_at(0)[7];
  const double d0 = std::hypot(traj.obs_at(0)[0] - gx, traj.obs_at(0)[1]);
  const double dT =
      std::hypot(traj.obs_at(traj.length())[0] - gx, traj.obs_at(traj.length())[1]);
  double max_z = 0.0;
  for (std::size_t t = 0; t <= traj.length(); ++t)
    max_z = std::max(max_z, traj.obs_at(t)[1]);
  if (!(dT < d0 - 1e-9)) return Skill::Other;
  return max_z > env::kHeightThreshold ? Skill::Lift : Skill::Push;
}

std::array<double, 3> scripted_push(const BlockRelocateState& s) {
  // Velocity-loop control: track a goal-seeking reference speed, never grasp.
  const double dx = s.goal_x - s.x;
  const double v_ref = std::clamp(2.0 * dx, -1.0, 1.0);
  const double a0 = std::clamp(3.0 * (v_ref - s.vx), -1.0, 1.0);
  return {a0, 0.0, -1.0};
}

std::array<double, 3> scripted_lift(const BlockRelocateState& s) {
  const double dx = s.goal_x - s.x;
  const bool over_goal = std::abs(dx) < 0.02 && std::abs(s.vx) < 0.05;
  if (s.z == 0.0 && std::abs(dx) < env::kSuccessDist && std::abs(s.vx) < 0.2) {
    // Delivered: stay put.
    return {0.0, 0.0, -1.0};
  }
  if (over_goal) {
    // Drop the block onto the goal.
    return {std::clamp(3.0 * (std::clamp(2.0 * dx, -1.0, 1.0) - s.vx), -1.0, 1.0), 0.0, -1.0};
  }
  // Carry: bang-bang altitude hold around the carry band; horizontal control
  // only while airborne, so an unliftable block never gets pushed.
  const double a1 = s.z < 0.2 ? 1.0 : 0.0;
  double a0 = 0.0;
  if (s.z > 0.0) {
    const double v_ref = std::clamp(2.0 * dx, -1.0, 1.0);
    a0 = std::clamp(3.0 * (v_ref - s.vx), -1.0, 1.0);
  }
  return {a0, a1, 1.0};
}

}  // namespace sami
