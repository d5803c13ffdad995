#include "sami/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace sami {

namespace {

void check_beta(double beta) {
  if (beta <= 0.0) throw std::invalid_argument("estimator: temperature must be positive");
}

void check_dims(const EstimatorBatch& batch) {
  std::size_t d = batch.query.embedding.dim();
  if (d == 0) throw std::invalid_argument("estimator: empty query embedding");
  if (batch.positive.embedding.dim() != d)
    throw std::invalid_argument("estimator: positive embedding dimension mismatch");
  for (const auto& n : batch.negatives)
    if (n.embedding.dim() != d)
      throw std::invalid_argument("estimator: negative embedding dimension mismatch");
}

// log(K f_pos / (f_pos + sum f_neg)) evaluated in log space. scores[0] is the
// positive score; the rest are negatives.
double log_ratio(const std::vector<double>& scores) {
  double k = static_cast<double>(scores.size());
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double lse = 0.0;
  for (double s : scores) lse += std::exp(s - mx);
  lse = mx + std::log(lse);
  return std::log(k) + scores[0] - lse;
}

std::vector<double> batch_scores(const EstimatorBatch& batch,
                                 std::span<const EstimatorSample> extra, double beta) {
  std::vector<double> scores;
  scores.reserve(batch.k() + extra.size());
  scores.push_back(batch.query.embedding.dot(batch.positive.embedding) / beta);
  for (const auto& n : batch.negatives)
    scores.push_back(batch.query.embedding.dot(n.embedding) / beta);
  for (const auto& n : extra)
    scores.push_back(batch.query.embedding.dot(n.embedding) / beta);
  return scores;
}

}  // namespace

double infonce(const EstimatorBatch& batch, const SimilarityConfig& cfg) {
  check_beta(cfg.beta);
  check_dims(batch);
  if (batch.k() < 2) throw std::invalid_argument("infonce: batch needs at least one negative");
  return log_ratio(batch_scores(batch, {}, cfg.beta));
}

double sance(const EstimatorBatch& batch, const SimilarityConfig& cfg) {
  int task = batch.query.task_id;
  if (batch.positive.task_id != task)
    throw std::invalid_argument("SaNCE batch must be intra-task");
  for (const auto& n : batch.negatives)
    if (n.task_id != task) throw std::invalid_argument("SaNCE batch must be intra-task");
  return infonce(batch, cfg);
}

double sa_plus_infonce(const EstimatorBatch& batch,
                       std::span<const EstimatorSample> cross_task_negatives,
                       const SimilarityConfig& cfg) {
  check_beta(cfg.beta);
  check_dims(batch);
  int task = batch.query.task_id;
  if (batch.positive.task_id != task)
    throw std::invalid_argument("SaNCE batch must be intra-task");
  for (const auto& n : batch.negatives)
    if (n.task_id != task) throw std::invalid_argument("SaNCE batch must be intra-task");
  for (const auto& n : cross_task_negatives) {
    if (n.embedding.dim() != batch.query.embedding.dim())
      throw std::invalid_argument("estimator: cross-task embedding dimension mismatch");
    if (n.task_id == task)
      throw std::invalid_argument("sa_plus_infonce: cross-task negative from the query's task");
  }
  if (batch.k() + cross_task_negatives.size() < 2)
    throw std::invalid_argument("sa_plus_infonce: batch needs at least one negative");
  return log_ratio(batch_scores(batch, cross_task_negatives, cfg.beta));
}

namespace {

double group_distance(std::span<const ContextEmbedding> positives,
                      std::span<const ContextEmbedding> negatives, bool pairwise) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("soft_sance_loss: empty positive or negative set");
  std::size_t d = positives[0].dim();
  if (pairwise) {
    double acc = 0.0;
    for (const auto& p : positives)
      for (const auto& n : negatives) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          double diff = p.values[i] - n.values[i];
          s += diff * diff;
        }
        acc += std::sqrt(s);
      }
    return acc / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
  }
  std::vector<double> mp(d, 0.0), mn(d, 0.0);
  for (const auto& p : positives)
    for (std::size_t i = 0; i < d; ++i) mp[i] += p.values[i] / positives.size();
  for (const auto& n : negatives)
    for (std::size_t i = 0; i < d; ++i) mn[i] += n.values[i] / negatives.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double diff = mp[i] - mn[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace

double soft_sance_loss(std::span<const ContextEmbedding> positives,
                       std::span<const ContextEmbedding> negatives, const EstimatorBatch& batch,
                       const SoftSanceConfig& cfg) {
  double estimate = sance(batch, cfg.similarity);
  double d = group_distance(positives, negatives, cfg.pairwise_distance);
  return -std::max(d, 1.0) * estimate;
}

Tape::NodeId nce_node(Tape& t, Tape::NodeId query, Tape::NodeId positive,
                      std::span<const Tape::NodeId> negatives, double beta) {
  check_beta(beta);
  if (negatives.empty()) throw std::invalid_argument("nce_node: batch needs a negative");
  double k = static_cast<double>(1 + negatives.size());
  std::vector<Tape::NodeId> scores;
  scores.reserve(negatives.size() + 1);
  auto score = [&](Tape::NodeId s) { return t.scale(t.sum(t.mul(query, s)), 1.0 / beta); };
  scores.push_back(score(positive));
  for (Tape::NodeId n : negatives) scores.push_back(score(n));
  Tape::NodeId lse = t.logsumexp(t.stack_scalars(scores));
  return t.add(t.constant(Tensor::scalar(std::log(k))), t.sub(scores[0], lse));
}

Tape::NodeId soft_sance_node(Tape& t, std::span<const Tape::NodeId> positives,
                             std::span<const Tape::NodeId> negatives, Tape::NodeId estimate,
                             const SoftSanceConfig& cfg) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("soft_sance_node: empty positive or negative set");
  Tape::NodeId dist;
  if (cfg.pairwise_distance) {
    Tape::NodeId acc = t.constant(Tensor::scalar(0.0));
    for (Tape::NodeId p : positives)
      for (Tape::NodeId n : negatives) acc = t.add(acc, t.l2_norm(t.sub(p, n)));
    dist = t.scale(acc, 1.0 / (static_cast<double>(positives.size()) *
                               static_cast<double>(negatives.size())));
  } else {
    Tape::NodeId mp = positives[0];
    for (std::size_t i = 1; i < positives.size(); ++i) mp = t.add(mp, positives[i]);
    mp = t.scale(mp, 1.0 / static_cast<double>(positives.size()));
    Tape::NodeId mn = negatives[0];
    for (std::size_t i = 1; i < negatives.size(); ++i) mn = t.add(mn, negatives[i]);
    mn = t.scale(mn, 1.0 / static_cast<double>(negatives.size()));
    dist = t.l2_norm(t.sub(mp, mn));
  }
  Tape::NodeId mult = t.clamp(dist, 1.0, 1e308);
  if (cfg.detach_multiplier) mult = t.constant(Tensor::scalar(t.value(mult).item()));
  return t.scale(t.mul(mult, estimate), -1.0);
}

std::size_t k_star(const SampleSpaceSpec& s) {
  return s.num_tasks * s.num_skills * s.multiplicity;
}
std::size_t k_star_sance(const SampleSpaceSpec& s) { return s.num_skills * s.multiplicity; }
std::size_t k_star_infonce(const SampleSpaceSpec& s) { return k_star(s); }

std::size_t k_star_sa_plus_infonce(std::span<const std::size_t> negative_skills_per_task,
                                   std::size_t positive_skills_current,
                                   std::size_t multiplicity) {
  std::size_t total = positive_skills_current;
  for (std::size_t n : negative_skills_per_task) total += n;
  return total * multiplicity;
}

}  // namespace sami
