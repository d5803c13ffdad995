#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sami/nn.hpp"
#include "sami/rng.hpp"
#include "sami/tape.hpp"

using namespace sami;

TEST_CASE("backward on a reused node visits each node once") {
  Tape t;
  const auto x = t.leaf(Tensor::vector({1.0, 2.0}));
  const auto y = t.mul(x, x);       // x^2
  const auto z = t.add(y, y);       // 2 x^2, y used twice
  const auto root = t.sum(z);
  const auto stats = t.backward(root);
  CHECK(stats.nodes_visited <= t.size());
  const Tensor& g = t.grad(x);      // d/dx sum(2 x^2) = 4x
  CHECK(g[0] == doctest::Approx(4.0));
  CHECK(g[1] == doctest::Approx(8.0));
}

TEST_CASE("composite gradient matches the hand derivative") {
  Tape t;
  const auto x = t.leaf(Tensor::scalar(0.7));
  // f = log(exp(x) + 1) has derivative sigmoid(x).
  const auto f = t.log(t.add(t.exp(x), t.constant(Tensor::scalar(1.0))));
  t.backward(f);
  CHECK(t.grad(x).item() == doctest::Approx(1.0 / (1.0 + std::exp(-0.7))));
}

TEST_CASE("backward requires a scalar root") {
  Tape t;
  const auto x = t.leaf(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("constants never accumulate gradient") {
  Tape t;
  const auto c = t.constant(Tensor::scalar(2.0));
  const auto x = t.leaf(Tensor::scalar(3.0));
  t.backward(t.mul(c, x));
  CHECK(t.grad(c).numel() == 0);
  CHECK(t.grad(x).item() == doctest::Approx(2.0));
}

TEST_CASE("logsumexp is stable and differentiates to softmax") {
  Tape t;
  const auto x = t.leaf(Tensor::vector({1000.0, 1000.0, 999.0}));
  const auto l = t.logsumexp(x);
  CHECK(std::isfinite(t.value(l).item()));
  t.backward(l);
  const Tensor& g = t.grad(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) sum += g[i];
  CHECK(sum == doctest::Approx(1.0));
  CHECK(g[0] == doctest::Approx(g[1]));
  CHECK(g[2] < g[0]);
}

TEST_CASE("concat and slice route gradients to their segments") {
  Tape t;
  const auto a = t.leaf(Tensor::vector({1.0, 2.0}));
  const auto b = t.leaf(Tensor::vector({3.0}));
  const auto cat = t.concat(a, b);
  const auto tail = t.slice(cat, 2, 1);
  t.backward(t.sum(tail));
  // The sliced-away segment receives an explicit zero gradient.
  CHECK(t.grad(a)[0] == 0.0);
  CHECK(t.grad(a)[1] == 0.0);
  CHECK(t.grad(b)[0] == doctest::Approx(1.0));
}

TEST_CASE("fused lstm step matches the value-only kernel") {
  RngStream rng(5);
  const LstmCellParams p = make_lstm(3, 4, rng);
  std::vector<double> x(3), h(4, 0.0), c(4, 0.0);
  for (auto& v : x) v = rng.normal();
  std::vector<double> h_ref(4), c_ref(4);
  lstm_step_value(p, x.data(), h.data(), c.data(), h_ref.data(), c_ref.data());

  Tape t;
  Tape::LstmNodeIds ids{t.constant(p.w_i), t.constant(p.w_f), t.constant(p.w_o),
                        t.constant(p.w_c), t.constant(p.b_i), t.constant(p.b_f),
                        t.constant(p.b_o), t.constant(p.b_c)};
  const auto xs = t.constant(Tensor::vector(x));
  const auto hs = t.constant(Tensor::vector(h));
  const auto cs = t.constant(Tensor::vector(c));
  const auto out = t.lstm_step(ids, xs, hs, cs);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t.value(out.h)[i] == doctest::Approx(h_ref[i]).epsilon(1e-12));
    CHECK(t.value(out.c)[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tape t;
  const auto a = t.constant(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}));
  const auto b = t.constant(Tensor::from({2, 2}, {1, 2, 3, 4}));
  CHECK_THROWS_AS(t.matmul(a, b), std::invalid_argument);
}

TEST_CASE("clamp blocks gradient outside the active range") {
  Tape t;
  const auto x = t.leaf(Tensor::vector({-5.0, 0.5, 5.0}));
  t.backward(t.sum(t.clamp(x, -1.0, 1.0)));
  const Tensor& g = t.grad(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
}

TEST_CASE("reset clears the tape for reuse") {
  Tape t;
  t.leaf(Tensor::scalar(1.0));
  CHECK(t.size() == 1);
  t.reset();
  CHECK(t.size() == 0);
}
