#pragma once

#include <cstdint>
#include <vector>

#include "sami/rng.hpp"

namespace sami {

// Discrete joint distribution over two variables, row major p(x, y).
// Probabilities must be non-negative and sum to 1 within 1e-12.
struct DiscreteJoint {
  std::size_t nx = 0, ny = 0;
  std::vector<double> p;

  double at(std::size_t x, std::size_t y) const { return p[x * ny + y]; }
  void validate() const;
  std::vector<double> marginal_x() const;
  std::vector<double> marginal_y() const;
};

// Joint over (context c, skill pi, trajectory tau), flattened c-major.
struct DiscreteJoint3 {
  std::size_t nc = 0, npi = 0, nt = 0;
  std::vector<double> p;

  double at(std::size_t c, std::size_t k, std::size_t t) const {
    return p[(c * npi + k) * nt + t];
  }
  void validate() const;
  // Marginal over (c, tau).
  DiscreteJoint marginal_c_tau() const;
  // Marginal over (pi, tau).
  DiscreteJoint marginal_pi_tau() const;
};

// I(x;y) in nats by exact enumeration; zero-probability cells contribute 0.
double exact_mi(const DiscreteJoint& joint);

// Skill-aware mutual information I(c;tau) - I(c;tau|pi) by exact enumeration.
double exact_sami(const DiscreteJoint3& joint);

// Monte-Carlo estimate of the K-sample noise-contrastive estimate under the
// optimal critic f*(x,y) = p(y|x)/p(y). Positives are drawn by Monte Carlo;
// the K-sample set realizes the sample space itself, apportioning the K slots
// over the y symbols by largest remainder on K*p(y) (the tight K -> K*
// regime), with the positive occupying one slot of its own symbol. Converges
// toward I(x;y) capped at the structural log K ceiling as num_mc grows, and
// is exactly 0 for independent joints.
double optimal_critic_infonce(const DiscreteJoint& joint, std::size_t k, std::size_t num_mc,
                              std::uint64_t seed);

// Random joint with the common-cause structure p(c) p(pi|c) p(tau|c).
DiscreteJoint3 random_common_cause_joint(std::size_t nc, std::size_t npi, std::size_t nt,
                                         RngStream& rng);

}  // namespace sami
