#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sami/encoder.hpp"
#include "sami/tape.hpp"

namespace sami {

// Temperature for the exponential similarity critic.
struct SimilarityConfig {
  double beta = 0.1;
};

// One embedded sample plus the provenance needed for sampling-contract
// checks: which task produced it, and its skill label when known.
struct EstimatorSample {
  ContextEmbedding embedding;
  int task_id = -1;
  std::optional<Skill> skill;
};

// A contrastive batch of K = 1 + negatives samples plus the query that pairs
// with each of them.
struct EstimatorBatch {
  EstimatorSample query;
  EstimatorSample positive;
  std::vector<EstimatorSample> negatives;

  std::size_t k() const { return 1 + negatives.size(); }
};

// Noise-contrastive lower bound with the positive inside the K-sample
// denominator. Bounded above by log K for every batch.
double infonce(const EstimatorBatch& batch, const SimilarityConfig& cfg);

// Same per-batch value as infonce; the difference is the sampling contract:
// every sample must come from the query's task. Mixed task ids are an error.
double sance(const EstimatorBatch& batch, const SimilarityConfig& cfg);

// Union sample space: the batch's intra-task negatives plus cross-task
// negatives. With an empty cross-task set this equals sance on the batch.
double sa_plus_infonce(const EstimatorBatch& batch,
                       std::span<const EstimatorSample> cross_task_negatives,
                       const SimilarityConfig& cfg);

struct SoftSanceConfig {
  SimilarityConfig similarity;
  // Distance between mean positive and mean negative embeddings by default;
  // the alternative averages all pairwise positive-negative distances.
  bool pairwise_distance = false;
  // Stops gradient through the distance multiplier when set.
  bool detach_multiplier = false;
};

// Soft contrastive loss: -max(d, 1) * estimate, where d is the embedding
// distance between the positive and negative groups.
double soft_sance_loss(std::span<const ContextEmbedding> positives,
                       std::span<const ContextEmbedding> negatives, const EstimatorBatch& batch,
                       const SoftSanceConfig& cfg);

// Tape-side builders used by the training loop and by the plain wrappers.
// Scores are dot(query, sample)/beta; the estimate is evaluated in log space
// so the log K bound holds to round-off.
Tape::NodeId nce_node(Tape& t, Tape::NodeId query, Tape::NodeId positive,
                      std::span<const Tape::NodeId> negatives, double beta);
Tape::NodeId soft_sance_node(Tape& t, std::span<const Tape::NodeId> positives,
                             std::span<const Tape::NodeId> negatives, Tape::NodeId estimate,
                             const SoftSanceConfig& cfg);

// Definition-2 sample space accounting.
struct SampleSpaceSpec {
  std::size_t num_tasks = 0;       // |c|
  std::size_t num_skills = 0;      // |pi_c| per task
  std::size_t multiplicity = 0;    // M trajectories per (task, skill)
};
std::size_t k_star(const SampleSpaceSpec& s);          // |c| * |pi| * M
std::size_t k_star_sance(const SampleSpaceSpec& s);    // |pi| * M
std::size_t k_star_infonce(const SampleSpaceSpec& s);  // |c| * |pi| * M
// (sum of negative skill counts over tasks + positive skill count) * M.
std::size_t k_star_sa_plus_infonce(std::span<const std::size_t> negative_skills_per_task,
                                   std::size_t positive_skills_current, std::size_t multiplicity);

}  // namespace sami
