#pragma once

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <map>
#include <vector>

#include "sami/rng.hpp"
#include "sami/trajectory.hpp"

namespace sami {

// Reference to one stored transition; the owning trajectory provides the
// prefix needed to recompute its context embedding.
struct TransitionRef {
  std::size_t slot = 0;
  std::size_t t = 0;
};

// Slot ids selected by the skill-aware sampler. The query is the task's
// highest-return trajectory, the positive comes from the top fraction of the
// per-task ranking and the negatives from the bottom fraction.
struct SkillAwareDraw {
  std::size_t query = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

struct SkillAwareConfig {
  double top_fraction = 0.2;
  double bottom_fraction = 0.5;
  bool distinct_query = false;  // force positive != query when possible
};

// Realized provenance counts for the three estimator sample spaces, measured
// on the buffer contents (one entry per stored trajectory).
struct RealizedSampleSpace {
  std::size_t sance = 0;            // requested task only
  std::size_t infonce = 0;          // every task
  std::size_t sa_plus_infonce = 0;  // own positive pool + all tasks' negative pools
};

// Trajectory store with per-task return-ranked views and global FIFO
// eviction. Capacity counts transitions, matching the configured buffer size.
class RankedBuffer {
 public:
  explicit RankedBuffer(std::size_t capacity = 100000);

  void push(Trajectory traj);

  const Trajectory& get(std::size_t slot) const;
  // Slot ids for a task, highest return first; ties rank earlier pushes first.
  const std::vector<std::size_t>& ranked(int task_id) const;
  std::vector<int> task_ids() const;
  bool has_task(int task_id) const;

  std::size_t size() const { return transitions_; }  // stored transitions
  std::size_t capacity() const { return capacity_; }
  std::size_t num_trajectories() const { return fifo_.size(); }

  SkillAwareDraw sample_skill_aware(int task_id, std::size_t k, RngStream& rng,
                                    const SkillAwareConfig& cfg = {}) const;
  // K-1 trajectories from other tasks; low_return_only restricts each task's
  // pool to its bottom fraction.
  std::vector<std::size_t> sample_cross_task(int current_task, std::size_t k, RngStream& rng,
                                             bool low_return_only = false,
                                             double bottom_fraction = 0.5) const;
  std::vector<TransitionRef> sample_rl_batch(std::size_t batch_size, RngStream& rng) const;

  RealizedSampleSpace realized_sample_space(int task_id) const;

  // One JSON object per stored trajectory, insertion order.
  void export_jsonl(std::ostream& out) const;

 private:
  std::size_t pool_size(double fraction, std::size_t n) const;
  void evict_oldest();

  std::size_t capacity_;
  std::size_t transitions_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<Trajectory> slots_;
  std::vector<std::uint64_t> seq_;
  std::vector<std::size_t> free_;
  std::deque<std::size_t> fifo_;  // live slots, oldest first
  std::map<int, std::vector<std::size_t>> by_task_;
  std::size_t max_len_ = 0;
};

}  // namespace sami
