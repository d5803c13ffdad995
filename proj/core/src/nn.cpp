#include "sami/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sami/kernels.hpp"

namespace sami {

namespace {
Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng) {
  Tensor t(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}
}  // namespace

LstmCellParams make_lstm(std::size_t input_dim, std::size_t hidden_dim, RngStream& rng) {
  LstmCellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  std::size_t fan_in = input_dim + hidden_dim;
  p.w_i = uniform_init({fan_in, hidden_dim}, fan_in, rng);
  p.w_f = uniform_init({fan_in, hidden_dim}, fan_in, rng);
  p.w_o = uniform_init({fan_in, hidden_dim}, fan_in, rng);
  p.w_c = uniform_init({fan_in, hidden_dim}, fan_in, rng);
  p.b_i = Tensor::zeros({hidden_dim});
  p.b_f = Tensor::full({hidden_dim}, 1.0);
  p.b_o = Tensor::zeros({hidden_dim});
  p.b_c = Tensor::zeros({hidden_dim});
  return p;
}

void lstm_step_value(const LstmCellParams& p, const double* x, const double* h, const double* c,
                     double* h_out, double* c_out) {
  kernels::lstm_forward(p.input_dim, p.hidden_dim, x, h, c, p.w_i.data(), p.w_f.data(),
                        p.w_o.data(), p.w_c.data(), p.b_i.data(), p.b_f.data(), p.b_o.data(),
                        p.b_c.data(), h_out, c_out, nullptr);
}

Dense make_dense(std::size_t in, std::size_t out, RngStream& rng) {
  Dense d;
  d.w = uniform_init({in, out}, in, rng);
  d.b = uniform_init({out}, in, rng);
  return d;
}

void dense_value(const Dense& d, const double* x, double* y) {
  std::size_t in = d.w.dim(0), out = d.w.dim(1);
  for (std::size_t j = 0; j < out; ++j) y[j] = d.b[j];
  kernels::matmul(1, in, out, x, d.w.data(), y, true);
}

Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
             RngStream& rng) {
  Mlp m;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    m.layers.push_back(make_dense(prev, h, rng));
    prev = h;
  }
  m.layers.push_back(make_dense(prev, out, rng));
  return m;
}

void mlp_value(const Mlp& m, const double* x, double* y) {
  std::vector<double> cur(x, x + m.in_dim());
  std::vector<double> next;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const Dense& d = m.layers[l];
    next.assign(d.w.dim(1), 0.0);
    dense_value(d, cur.data(), next.data());
    if (l + 1 < m.layers.size())
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), y);
}

Tape::NodeId mlp_node(Tape& t, const std::vector<Tape::NodeId>& layer_nodes, Tape::NodeId x) {
  if (layer_nodes.size() % 2 != 0 || layer_nodes.empty())
    throw std::invalid_argument("mlp_node: layer node list must hold (w, b) pairs");
  Tape::NodeId cur = x;
  std::size_t n_layers = layer_nodes.size() / 2;
  for (std::size_t l = 0; l < n_layers; ++l) {
    cur = t.affine(cur, layer_nodes[2 * l], layer_nodes[2 * l + 1]);
    if (l + 1 < n_layers) cur = t.relu(cur);
  }
  return cur;
}

std::vector<Tape::NodeId> mlp_leaves(Tape& t, const Mlp& m, bool requires_grad) {
  std::vector<Tape::NodeId> ids;
  ids.reserve(m.layers.size() * 2);
  for (const Dense& d : m.layers) {
    ids.push_back(t.leaf(d.w, requires_grad));
    ids.push_back(t.leaf(d.b, requires_grad));
  }
  return ids;
}

AdamState make_adam(const std::vector<Tensor*>& params, AdamConfig cfg) {
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor* p : params) {
    st.m.push_back(Tensor::zeros(p->shape()));
    st.v.push_back(Tensor::zeros(p->shape()));
  }
  return st;
}

void adam_step(AdamState& st, const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads) {
  if (params.size() != st.m.size() || grads.size() != params.size())
    throw std::invalid_argument("adam_step: parameter/gradient list size mismatch");
  st.step += 1;
  double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    if (!m.same_shape(p))
      throw std::invalid_argument("adam_step: state/parameter shape mismatch at index " +
                                  std::to_string(i));
    for (std::size_t j = 0; j < p.numel(); ++j) {
      double g = grads[i] ? (*grads[i])[j] : 0.0;
      if (!std::isfinite(g))
        throw std::invalid_argument("adam_step: non-finite gradient in parameter block " +
                                    std::to_string(i));
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      double mh = m[j] / bc1;
      double vh = v[j] / bc2;
      p[j] -= st.cfg.lr * mh / (std::sqrt(vh) + st.cfg.eps);
    }
  }
}

std::vector<NamedParam> named_params(LstmCellParams& p, const std::string& prefix) {
  return {{prefix + ".w_i", &p.w_i}, {prefix + ".w_f", &p.w_f}, {prefix + ".w_o", &p.w_o},
          {prefix + ".w_c", &p.w_c}, {prefix + ".b_i", &p.b_i}, {prefix + ".b_f", &p.b_f},
          {prefix + ".b_o", &p.b_o}, {prefix + ".b_c", &p.b_c}};
}

std::vector<NamedParam> named_params(Mlp& m, const std::string& prefix) {
  std::vector<NamedParam> out;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    out.push_back({prefix + ".l" + std::to_string(l) + ".w", &m.layers[l].w});
    out.push_back({prefix + ".l" + std::to_string(l) + ".b", &m.layers[l].b});
  }
  return out;
}

}  // namespace sami
