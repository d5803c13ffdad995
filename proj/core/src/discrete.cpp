#include "sami/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sami {

namespace {

void check_pmf(const std::vector<double>& p, std::size_t expect) {
  if (p.size() != expect) throw std::invalid_argument("joint table size mismatch");
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("joint has negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("joint does not sum to 1");
}

double plogp_ratio(double pxy, double px, double py) {
  if (pxy <= 0.0) return 0.0;
  return pxy * std::log(pxy / (px * py));
}

}  // namespace

void DiscreteJoint::validate() const {
  if (nx == 0 || ny == 0) throw std::invalid_argument("joint must have positive dimensions");
  check_pmf(p, nx * ny);
}

std::vector<double> DiscreteJoint::marginal_x() const {
  std::vector<double> m(nx, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) m[x] += at(x, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_y() const {
  std::vector<double> m(ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) m[y] += at(x, y);
  return m;
}

void DiscreteJoint3::validate() const {
  if (nc == 0 || npi == 0 || nt == 0)
    throw std::invalid_argument("joint must have positive dimensions");
  check_pmf(p, nc * npi * nt);
}

DiscreteJoint DiscreteJoint3::marginal_c_tau() const {
  DiscreteJoint j;
  j.nx = nc;
  j.ny = nt;
  j.p.assign(nc * nt, 0.0);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t k = 0; k < npi; ++k)
      for (std::size_t t = 0; t < nt; ++t) j.p[c * nt + t] += at(c, k, t);
  return j;
}

DiscreteJoint DiscreteJoint3::marginal_pi_tau() const {
  DiscreteJoint j;
  j.nx = npi;
  j.ny = nt;
  j.p.assign(npi * nt, 0.0);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t k = 0; k < npi; ++k)
      for (std::size_t t = 0; t < nt; ++t) j.p[k * nt + t] += at(c, k, t);
  return j;
}

double exact_mi(const DiscreteJoint& joint) {
  joint.validate();
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();
  double mi = 0.0;
  for (std::size_t x = 0; x < joint.nx; ++x)
    for (std::size_t y = 0; y < joint.ny; ++y) mi += plogp_ratio(joint.at(x, y), px[x], py[y]);
  return mi;
}

double exact_sami(const DiscreteJoint3& joint) {
  joint.validate();
  const double unconditional = exact_mi(joint.marginal_c_tau());

  // I(c;tau|pi) = sum_pi p(pi) I(c;tau | pi).
  double conditional = 0.0;
  for (std::size_t k = 0; k < joint.npi; ++k) {
    double ppi = 0.0;
    for (std::size_t c = 0; c < joint.nc; ++c)
      for (std::size_t t = 0; t < joint.nt; ++t) ppi += joint.at(c, k, t);
    if (ppi <= 0.0) continue;
    DiscreteJoint cond;
    cond.nx = joint.nc;
    cond.ny = joint.nt;
    cond.p.resize(joint.nc * joint.nt);
    for (std::size_t c = 0; c < joint.nc; ++c)
      for (std::size_t t = 0; t < joint.nt; ++t) cond.p[c * joint.nt + t] = joint.at(c, k, t) / ppi;
    conditional += ppi * exact_mi(cond);
  }
  return unconditional - conditional;
}

double optimal_critic_infonce(const DiscreteJoint& joint, std::size_t k, std::size_t num_mc,
                              std::uint64_t seed) {
  joint.validate();
  if (k < 2) throw std::invalid_argument("contrastive estimate needs k >= 2");
  if (num_mc == 0) throw std::invalid_argument("num_mc must be positive");
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();

  // Apportion the k slots over y symbols: floor(k * p(y)) each, remaining
  // slots to the largest remainders.
  std::vector<std::size_t> slots(joint.ny, 0);
  std::vector<std::pair<double, std::size_t>> remainders(joint.ny);
  std::size_t assigned = 0;
  for (std::size_t y = 0; y < joint.ny; ++y) {
    const double exact = static_cast<double>(k) * py[y];
    slots[y] = static_cast<std::size_t>(std::floor(exact));
    assigned += slots[y];
    remainders[y] = {exact - std::floor(exact), y};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < k; ++i, ++assigned) ++slots[remainders[i % joint.ny].second];

  RngStream rng(seed);
  const double log_k = std::log(static_cast<double>(k));
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t trial = 0; trial < num_mc; ++trial) {
    // Draw (x, y+) from the joint.
    double u = rng.uniform();
    std::size_t x = 0, ypos = 0;
    double acc = 0.0;
    bool found = false;
    for (std::size_t xi = 0; xi < joint.nx && !found; ++xi)
      for (std::size_t yi = 0; yi < joint.ny && !found; ++yi) {
        acc += joint.at(xi, yi);
        if (u <= acc) {
          x = xi;
          ypos = yi;
          found = true;
        }
      }
    if (!found) {
      // Rounding pushed u past the cumulative sum; take the likeliest cell.
      double best = -1.0;
      for (std::size_t xi = 0; xi < joint.nx; ++xi)
        for (std::size_t yi = 0; yi < joint.ny; ++yi)
          if (joint.at(xi, yi) > best) {
            best = joint.at(xi, yi);
            x = xi;
            ypos = yi;
          }
    }

    // The positive occupies one slot of its own symbol; the tiling covers it.
    auto critic = [&](std::size_t y) {
      if (py[y] <= 0.0) return 0.0;
      return joint.at(x, y) / (px[x] * py[y]);
    };
    double denom = 0.0;
    for (std::size_t y = 0; y < joint.ny; ++y) {
      std::size_t n = slots[y];
      if (y == ypos && n == 0) n = 1;  // positive always present
      denom += static_cast<double>(n) * critic(y);
    }
    const double fpos = critic(ypos);
    if (fpos <= 0.0 || denom <= 0.0) continue;  // zero-probability conditioning: skip
    total += log_k + std::log(fpos) - std::log(denom);
    ++counted;
  }
  if (counted == 0) return 0.0;
  return total / static_cast<double>(counted);
}

DiscreteJoint3 random_common_cause_joint(std::size_t nc, std::size_t npi, std::size_t nt,
                                         RngStream& rng) {
  auto random_pmf = [&](std::size_t n) {
    std::vector<double> v(n);
    double total = 0.0;
    for (double& x : v) {
      x = -std::log(std::max(rng.uniform(), 1e-300));
      total += x;
    }
    for (double& x : v) x /= total;
    return v;
  };

  const auto pc = random_pmf(nc);
  DiscreteJoint3 j;
  j.nc = nc;
  j.npi = npi;
  j.nt = nt;
  j.p.resize(nc * npi * nt);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto ppi = random_pmf(npi);
    const auto pt = random_pmf(nt);
    for (std::size_t k = 0; k < npi; ++k)
      for (std::size_t t = 0; t < nt; ++t) j.p[(c * npi + k) * nt + t] = pc[c] * ppi[k] * pt[t];
  }
  // Renormalize to absorb rounding.
  double total = std::accumulate(j.p.begin(), j.p.end(), 0.0);
  for (double& v : j.p) v /= total;
  return j;
}

}  // namespace sami
