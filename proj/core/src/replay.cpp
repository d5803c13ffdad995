#include "sami/replay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace sami {

RankedBuffer::RankedBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("buffer capacity must be positive");
}

std::size_t RankedBuffer::pool_size(double fraction, std::size_t n) const {
  auto raw = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(raw, 1, n);
}

void RankedBuffer::evict_oldest() {
  const std::size_t slot = fifo_.front();
  fifo_.pop_front();
  auto& rank = by_task_[slots_[slot].task_id];
  rank.erase(std::find(rank.begin(), rank.end(), slot));
  if (rank.empty()) by_task_.erase(slots_[slot].task_id);
  transitions_ -= slots_[slot].length();
  slots_[slot] = Trajectory{};
  free_.push_back(slot);
}

void RankedBuffer::push(Trajectory traj) {
  if (traj.length() == 0) throw std::invalid_argument("trajectory has no steps");
  const double sum = std::accumulate(traj.rew.begin(), traj.rew.end(), 0.0);
  if (std::abs(sum - traj.ret) > 1e-9)
    throw std::invalid_argument("trajectory return does not match its rewards");
  if (traj.length() > capacity_)
    throw std::invalid_argument("trajectory larger than buffer capacity");

  while (transitions_ + traj.length() > capacity_) evict_oldest();

  std::size_t slot;
  if (!free_.empty()) {
    slot = free_.back();
    free_.pop_back();
    slots_[slot] = std::move(traj);
  } else {
    slot = slots_.size();
    slots_.push_back(std::move(traj));
    seq_.resize(slots_.size());
  }
  seq_[slot] = next_seq_++;
  transitions_ += slots_[slot].length();
  max_len_ = std::max(max_len_, slots_[slot].length());
  fifo_.push_back(slot);

  auto& rank = by_task_[slots_[slot].task_id];
  const double r = slots_[slot].ret;
  auto pos = std::find_if(rank.begin(), rank.end(), [&](std::size_t s) {
    return slots_[s].ret < r;  // equal returns keep the earlier push first
  });
  rank.insert(pos, slot);
}

const Trajectory& RankedBuffer::get(std::size_t slot) const {
  if (slot >= slots_.size()) throw std::out_of_range("bad buffer slot");
  return slots_[slot];
}

const std::vector<std::size_t>& RankedBuffer::ranked(int task_id) const {
  auto it = by_task_.find(task_id);
  if (it == by_task_.end()) throw std::out_of_range("task has no stored trajectories");
  return it->second;
}

std::vector<int> RankedBuffer::task_ids() const {
  std::vector<int> ids;
  ids.reserve(by_task_.size());
  for (const auto& [id, rank] : by_task_) ids.push_back(id);
  return ids;
}

bool RankedBuffer::has_task(int task_id) const { return by_task_.count(task_id) > 0; }

SkillAwareDraw RankedBuffer::sample_skill_aware(int task_id, std::size_t k, RngStream& rng,
                                                const SkillAwareConfig& cfg) const {
  if (k < 2) throw std::invalid_argument("contrastive batch needs k >= 2");
  auto it = by_task_.find(task_id);
  if (it == by_task_.end() || it->second.size() < 2)
    throw std::runtime_error("insufficient intra-task samples");
  const auto& rank = it->second;
  const std::size_t n = rank.size();
  const std::size_t top = pool_size(cfg.top_fraction, n);
  const std::size_t bottom = pool_size(cfg.bottom_fraction, n);

  SkillAwareDraw draw;
  draw.query = rank[0];

  std::size_t pos_idx = rng.integer(top);
  if (cfg.distinct_query && pos_idx == 0) {
    // Query is always rank 0; widen to the next rank when the pool is just it.
    pos_idx = top > 1 ? 1 + rng.integer(top - 1) : 1;
  }
  draw.positive = rank[pos_idx];

  std::vector<std::size_t> pool(rank.end() - static_cast<std::ptrdiff_t>(bottom), rank.end());
  pool.erase(std::remove(pool.begin(), pool.end(), draw.positive), pool.end());
  if (pool.empty()) {
    // Degenerate overlap: fall back to everything except the positive.
    for (std::size_t s : rank)
      if (s != draw.positive) pool.push_back(s);
  }
  draw.negatives.reserve(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) draw.negatives.push_back(pool[rng.integer(pool.size())]);
  return draw;
}

std::vector<std::size_t> RankedBuffer::sample_cross_task(int current_task, std::size_t k,
                                                         RngStream& rng, bool low_return_only,
                                                         double bottom_fraction) const {
  if (k < 2) throw std::invalid_argument("contrastive batch needs k >= 2");
  std::vector<std::size_t> pool;
  for (const auto& [id, rank] : by_task_) {
    if (id == current_task) continue;
    const std::size_t take = low_return_only ? pool_size(bottom_fraction, rank.size())
                                             : rank.size();
    pool.insert(pool.end(), rank.end() - static_cast<std::ptrdiff_t>(take), rank.end());
  }
  if (pool.empty()) throw std::runtime_error("no other task populated");
  std::vector<std::size_t> out;
  out.reserve(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(pool[rng.integer(pool.size())]);
  return out;
}

std::vector<TransitionRef> RankedBuffer::sample_rl_batch(std::size_t batch_size,
                                                         RngStream& rng) const {
  if (fifo_.empty()) throw std::runtime_error("replay buffer is empty");
  std::vector<TransitionRef> batch;
  batch.reserve(batch_size);
  // Rejection sampling keeps the draw uniform over transitions when
  // trajectory lengths differ.
  while (batch.size() < batch_size) {
    const std::size_t slot = fifo_[rng.integer(fifo_.size())];
    const std::size_t t = rng.integer(max_len_);
    if (t < slots_[slot].length()) batch.push_back({slot, t});
  }
  return batch;
}

RealizedSampleSpace RankedBuffer::realized_sample_space(int task_id) const {
  auto it = by_task_.find(task_id);
  if (it == by_task_.end()) throw std::out_of_range("task has no stored trajectories");

  RealizedSampleSpace out;
  out.sance = it->second.size();
  for (const auto& [id, rank] : by_task_) {
    out.infonce += rank.size();
    // Positive skill per task = the skill of its highest-return trajectory;
    // every other skill's trajectories form that task's negative pool.
    const Skill positive = slots_[rank[0]].skill;
    for (std::size_t s : rank) {
      if (id == task_id && slots_[s].skill == positive)
        ++out.sa_plus_infonce;
      else if (slots_[s].skill != positive)
        ++out.sa_plus_infonce;
    }
  }
  return out;
}

void RankedBuffer::export_jsonl(std::ostream& out) const {
  for (std::size_t slot : fifo_) {
    const Trajectory& t = slots_[slot];
    nlohmann::json j{{"task_id", t.task_id},
                     {"return", t.ret},
                     {"length", t.length()},
                     {"skill", skill_name(t.skill)},
                     {"success", t.success},
                     {"mass", t.features.mass},
                     {"friction", t.features.friction},
                     {"crippled", t.features.crippled_mask}};
    out << j.dump() << "\n";
  }
}

}  // namespace sami
