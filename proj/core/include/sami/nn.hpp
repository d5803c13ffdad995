#pragma once

#include <string>
#include <vector>

#include "sami/rng.hpp"
#include "sami/tape.hpp"
#include "sami/tensor.hpp"

namespace sami {

// Gate weights are (input_dim + hidden_dim, hidden_dim) row major, biases are
// (hidden_dim). Gate order everywhere is input, forget, output, candidate.
struct LstmCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_i, w_f, w_o, w_c;
  Tensor b_i, b_f, b_o, b_c;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights; forget gate bias 1.
LstmCellParams make_lstm(std::size_t input_dim, std::size_t hidden_dim, RngStream& rng);

// Value-only step. h, c, h_out, c_out are hidden_dim buffers; h_out/c_out may
// alias h/c.
void lstm_step_value(const LstmCellParams& p, const double* x, const double* h, const double* c,
                     double* h_out, double* c_out);

struct Dense {
  Tensor w;  // (in, out)
  Tensor b;  // (out)
};
Dense make_dense(std::size_t in, std::size_t out, RngStream& rng);
void dense_value(const Dense& d, const double* x, double* y);

// Feed-forward stack with ReLU between layers, linear final layer.
struct Mlp {
  std::vector<Dense> layers;
  std::size_t in_dim() const { return layers.front().w.dim(0); }
  std::size_t out_dim() const { return layers.back().w.dim(1); }
};
Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
             RngStream& rng);
void mlp_value(const Mlp& m, const double* x, double* y);
// Builds the MLP forward on the tape for a (B, in) or (in,) input node.
Tape::NodeId mlp_node(Tape& t, const std::vector<Tape::NodeId>& layer_nodes, Tape::NodeId x);
// Inserts every layer tensor as a leaf (or constant); order is w0, b0, w1, b1, ...
std::vector<Tape::NodeId> mlp_leaves(Tape& t, const Mlp& m, bool requires_grad);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moment buffers parallel to one fixed parameter list.
struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam(const std::vector<Tensor*>& params, AdamConfig cfg = {});
// Bias-corrected update in place. grads[i] may be null (treated as zero).
void adam_step(AdamState& st, const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads);

// Named views over parameter tensors, used by optimizers, the momentum
// update, checkpoints and finite-difference tests.
struct NamedParam {
  std::string name;
  Tensor* tensor;
};
std::vector<NamedParam> named_params(LstmCellParams& p, const std::string& prefix);
std::vector<NamedParam> named_params(Mlp& m, const std::string& prefix);

}  // namespace sami
