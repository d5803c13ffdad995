#pragma once

#include <array>
#include <string>
#include <vector>

#include "sami/rng.hpp"
#include "sami/trajectory.hpp"

namespace sami {

// Point-mass block relocation. The block sits on a surface with Coulomb
// friction; the effector rides on the block, can grasp it, and applies forces
// (force_x, force_z, grasp_toggle) in [-1, 1]. Hidden features (mass,
// friction, crippled actuators) never appear in observations, so the same
// policy faces different dynamics per task. Heavy-but-slippery blocks reward
// pushing, light-but-grippy blocks reward grasping and lifting.
namespace env {

inline constexpr double kGravity = 9.8;
inline constexpr double kForceMax = 50.0;
inline constexpr double kLiftGain = 1.0;
inline constexpr double kDt = 0.05;
// One rise step covers the full classifier cutoff, so carrying a block through
// the air for more than a single hop always registers as a lift.
inline constexpr double kLiftSpeed = 2.0;        // kinematic rise/fall rate
inline constexpr double kHeightThreshold = 0.1;  // h*, Lift classifier cutoff
inline constexpr double kSuccessDist = 0.05;
inline constexpr double kSuccessBonus = 10.0;
inline constexpr std::size_t kEpisodeLen = 100;
inline constexpr double kGoalMin = 0.5;
inline constexpr double kGoalMax = 1.5;
inline constexpr std::size_t kObsDim = 9;
inline constexpr std::size_t kActDim = 3;

}  // namespace env

struct BlockRelocateState {
  double x = 0.0;   // block position
  double z = 0.0;   // block height
  double vx = 0.0;
  double vz = 0.0;
  double eff_x = 0.0;  // effector rides the block
  double eff_z = 0.0;
  bool grasp = false;
  double goal_x = 0.0;  // goal sits on the surface (z = 0)
  std::size_t steps_left = env::kEpisodeLen;
};

struct StepResult {
  BlockRelocateState state;
  double reward = 0.0;
  bool done = false;
};

// Block and effector at the origin at rest; goal uniform on the surface.
BlockRelocateState reset(const TaskFeatures& features, RngStream& rng);

// Deterministic dynamics. Sliding on the surface needs |force_x| above the
// Coulomb threshold mu m g; lifting needs grasp plus force_z above the weight;
// airborne motion is friction-free. Reward is -distance(block, goal) plus a
// bonus while within the success radius.
StepResult step(const BlockRelocateState& s, const std::array<double, 3>& action,
                const TaskFeatures& features);

// step with action components zeroed at crippled positions.
StepResult crippled_step(const BlockRelocateState& s, const std::array<double, 3>& action,
                         const TaskFeatures& features);

// Observation: block x, z, vx, vz, effector x, z, grasp, goal x, fraction of
// episode remaining. No task feature enters.
std::vector<double> observe(const BlockRelocateState& s);

double goal_distance(const BlockRelocateState& s);

// Task grids. Train covers both push-optimal and lift-optimal cells; moderate
// interpolates between training values; extreme extrapolates beyond them.
struct TaskSplit {
  std::string name;
  std::vector<TaskFeatures> cells;
};

TaskSplit train_split();
TaskSplit moderate_split();
TaskSplit extreme_split();
TaskSplit split_by_name(const std::string& name);

struct SampledTask {
  int id = 0;  // unique per (cell, crippled mask) combination
  TaskFeatures features;
};

// Uniform over the split's cells; num_crippled actuators (distinct, uniform)
// are masked when positive.
SampledTask sample_task(const TaskSplit& split, RngStream& rng, std::size_t num_crippled = 0);

// Push: block moved toward the goal while staying at or below h*.
// Lift: block raised above h* on the way to the goal.
// Other: no net progress toward the goal.
Skill classify_skill(const Trajectory& traj);

// Feature-blind scripted controllers used as oracles. Push drives the block
// along the surface; Lift grasps, rises to a carry band, ferries the block
// over the goal and releases. Each fails on cells where its skill is
// infeasible.
std::array<double, 3> scripted_push(const BlockRelocateState& s);
std::array<double, 3> scripted_lift(const BlockRelocateState& s);

inline constexpr const char* kEnvVersion = "block-relocate-2";

}  // namespace sami
