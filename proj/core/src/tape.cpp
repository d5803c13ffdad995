#include "sami/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sami/kernels.hpp"

namespace sami {

namespace kernels {

void matmul(std::size_t m, std::size_t k, std::size_t n, const double* x, const double* w,
            double* y, bool acc) {
  if (!acc)
    for (std::size_t i = 0; i < m * n; ++i) y[i] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x + i * k;
    double* yi = y + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double xv = xi[p];
      if (xv == 0.0) continue;
      const double* wp = w + p * n;
      for (std::size_t j = 0; j < n; ++j) yi[j] += xv * wp[j];
    }
  }
}

void lstm_forward(std::size_t in_dim, std::size_t hid, const double* x, const double* h,
                  const double* c, const double* wi, const double* wf, const double* wo,
                  const double* wc, const double* bi, const double* bf, const double* bo,
                  const double* bc, double* h_out, double* c_out, double* save) {
  std::vector<double> pre(4 * hid);
  double* pi = pre.data();
  double* pf = pi + hid;
  double* po = pf + hid;
  double* pc = po + hid;
  for (std::size_t j = 0; j < hid; ++j) {
    pi[j] = bi[j];
    pf[j] = bf[j];
    po[j] = bo[j];
    pc[j] = bc[j];
  }
  auto accum = [&](const double* z, std::size_t len, std::size_t row0) {
    for (std::size_t p = 0; p < len; ++p) {
      double zv = z[p];
      if (zv == 0.0) continue;
      std::size_t r = (row0 + p) * hid;
      for (std::size_t j = 0; j < hid; ++j) {
        pi[j] += zv * wi[r + j];
        pf[j] += zv * wf[r + j];
        po[j] += zv * wo[r + j];
        pc[j] += zv * wc[r + j];
      }
    }
  };
  accum(x, in_dim, 0);
  accum(h, hid, in_dim);
  for (std::size_t j = 0; j < hid; ++j) {
    double ig = sigmoid(pi[j]);
    double fg = sigmoid(pf[j]);
    double og = sigmoid(po[j]);
    double gg = std::tanh(pc[j]);
    double cn = fg * c[j] + ig * gg;
    double tc = std::tanh(cn);
    c_out[j] = cn;
    h_out[j] = og * tc;
    if (save) {
      save[j] = ig;
      save[hid + j] = fg;
      save[2 * hid + j] = og;
      save[3 * hid + j] = gg;
      save[4 * hid + j] = tc;
    }
  }
}

void lstm_backward(std::size_t in_dim, std::size_t hid, const double* x, const double* h,
                   const double* c, const double* wi, const double* wf, const double* wo,
                   const double* wc, const double* save, const double* dh_out,
                   const double* dc_out, double* dx, double* dh, double* dc, double* dwi,
                   double* dwf, double* dwo, double* dwc, double* dbi, double* dbf, double* dbo,
                   double* dbc) {
  const double* ig = save;
  const double* fg = save + hid;
  const double* og = save + 2 * hid;
  const double* gg = save + 3 * hid;
  const double* tc = save + 4 * hid;
  std::vector<double> dpre(4 * hid);
  double* dpi = dpre.data();
  double* dpf = dpi + hid;
  double* dpo = dpf + hid;
  double* dpc = dpo + hid;
  for (std::size_t j = 0; j < hid; ++j) {
    double dho = dh_out ? dh_out[j] : 0.0;
    double dcn = (dc_out ? dc_out[j] : 0.0) + dho * og[j] * (1.0 - tc[j] * tc[j]);
    double di = dcn * gg[j];
    double df = dcn * c[j];
    double dg = dcn * ig[j];
    double dov = dho * tc[j];
    if (dc) dc[j] += dcn * fg[j];
    dpi[j] = di * ig[j] * (1.0 - ig[j]);
    dpf[j] = df * fg[j] * (1.0 - fg[j]);
    dpo[j] = dov * og[j] * (1.0 - og[j]);
    dpc[j] = dg * (1.0 - gg[j] * gg[j]);
    if (dbi) dbi[j] += dpi[j];
    if (dbf) dbf[j] += dpf[j];
    if (dbo) dbo[j] += dpo[j];
    if (dbc) dbc[j] += dpc[j];
  }
  auto backprop = [&](const double* z, double* dz, std::size_t len, std::size_t row0,
                      double* dwig, double* dwfg, double* dwog, double* dwcg) {
    for (std::size_t p = 0; p < len; ++p) {
      std::size_t r = (row0 + p) * hid;
      double acc = 0.0;
      double zv = z[p];
      for (std::size_t j = 0; j < hid; ++j) {
        acc += dpi[j] * wi[r + j] + dpf[j] * wf[r + j] + dpo[j] * wo[r + j] + dpc[j] * wc[r + j];
        if (dwig) dwig[r + j] += zv * dpi[j];
        if (dwfg) dwfg[r + j] += zv * dpf[j];
        if (dwog) dwog[r + j] += zv * dpo[j];
        if (dwcg) dwcg[r + j] += zv * dpc[j];
      }
      if (dz) dz[p] += acc;
    }
  };
  backprop(x, dx, in_dim, 0, dwi, dwf, dwo, dwc);
  backprop(h, dh, hid, in_dim, dwi, dwf, dwo, dwc);
}

}  // namespace kernels

Tape::NodeId Tape::push(Op op, Tensor value, std::initializer_list<NodeId> ins, double p0,
                        double p1) {
  return push(op, std::move(value), std::span<const NodeId>(ins.begin(), ins.size()), p0, p1);
}

Tape::NodeId Tape::push(Op op, Tensor value, std::span<const NodeId> ins, double p0, double p1) {
  bool req = false;
  for (NodeId i : ins) req = req || nodes_[i].requires_grad;
  Node n;
  n.op = op;
  n.requires_grad = (op == Op::Leaf) ? (p0 != 0.0) : req;
  n.in_begin = static_cast<std::uint32_t>(inputs_pool_.size());
  n.in_count = static_cast<std::uint32_t>(ins.size());
  n.p0 = p0;
  n.p1 = p1;
  n.value = std::move(value);
  inputs_pool_.insert(inputs_pool_.end(), ins.begin(), ins.end());
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  return push(Op::Leaf, std::move(value), {}, requires_grad ? 1.0 : 0.0);
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (B.rank() != 2 || (A.rank() != 1 && A.rank() != 2) || A.last_dim() != B.dim(0))
    throw_shape_error("matmul", A, B);
  std::size_t m = A.rank() == 2 ? A.dim(0) : 1;
  std::size_t k = B.dim(0);
  std::size_t n = B.dim(1);
  Tensor out = A.rank() == 2 ? Tensor::zeros({m, n}) : Tensor::zeros({n});
  kernels::matmul(m, k, n, A.data(), B.data(), out.data(), false);
  return push(Op::Matmul, std::move(out), {a, b});
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) throw_shape_error("add", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  return push(Op::Add, std::move(out), {a, b});
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) throw_shape_error("sub", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
  return push(Op::Sub, std::move(out), {a, b});
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) throw_shape_error("mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
  return push(Op::Mul, std::move(out), {a, b});
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return push(Op::Scale, std::move(out), {a}, s);
}

Tape::NodeId Tape::tanh(NodeId a) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return push(Op::Tanh, std::move(out), {a});
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = kernels::sigmoid(out[i]);
  return push(Op::Sigmoid, std::move(out), {a});
}

Tape::NodeId Tape::relu(NodeId a) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return push(Op::Relu, std::move(out), {a});
}

Tape::NodeId Tape::exp(NodeId a) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
  return push(Op::Exp, std::move(out), {a});
}

Tape::NodeId Tape::log(NodeId a) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (out[i] <= 0.0)
      throw std::domain_error("log: non-positive input " + std::to_string(out[i]));
    out[i] = std::log(out[i]);
  }
  return push(Op::Log, std::move(out), {a});
}

Tape::NodeId Tape::softplus(NodeId a) {
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double x = out[i];
    out[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  return push(Op::Softplus, std::move(out), {a});
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  Tensor out = nodes_[a].value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
  return push(Op::Clamp, std::move(out), {a}, lo, hi);
}

Tape::NodeId Tape::minimum(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B)) throw_shape_error("minimum", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::min(out[i], B[i]);
  return push(Op::Minimum, std::move(out), {a, b});
}

Tape::NodeId Tape::mul_scalar(NodeId a, NodeId s) {
  const Tensor& A = nodes_[a].value;
  const Tensor& S = nodes_[s].value;
  if (S.numel() != 1) throw_shape_error("mul_scalar", A, S);
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= S[0];
  return push(Op::MulScalar, std::move(out), {a, s});
}

Tape::NodeId Tape::sum(NodeId a) {
  double s = 0.0;
  const Tensor& A = nodes_[a].value;
  for (std::size_t i = 0; i < A.numel(); ++i) s += A[i];
  return push(Op::Sum, Tensor::scalar(s), {a});
}

Tape::NodeId Tape::mean(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.numel() == 0) throw_shape_error("mean", A);
  double s = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) s += A[i];
  return push(Op::Mean, Tensor::scalar(s / static_cast<double>(A.numel())), {a});
}

Tape::NodeId Tape::l2_norm(NodeId a) {
  const Tensor& A = nodes_[a].value;
  double s = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) s += A[i] * A[i];
  return push(Op::L2Norm, Tensor::scalar(std::sqrt(s)), {a});
}

Tape::NodeId Tape::row_sum(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.rank() != 2) throw_shape_error("row_sum", A);
  Tensor out = Tensor::zeros({A.dim(0), 1});
  for (std::size_t r = 0; r < A.dim(0); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < A.dim(1); ++c) s += A[r * A.dim(1) + c];
    out[r] = s;
  }
  return push(Op::RowSum, std::move(out), {a});
}

Tape::NodeId Tape::logsumexp(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.rank() != 1 || A.numel() == 0) throw_shape_error("logsumexp", A);
  double mx = A[0];
  for (std::size_t i = 1; i < A.numel(); ++i) mx = std::max(mx, A[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) s += std::exp(A[i] - mx);
  return push(Op::LogSumExp, Tensor::scalar(mx + std::log(s)), {a});
}

Tape::NodeId Tape::softmax(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.rank() == 0 || A.last_dim() == 0) throw_shape_error("softmax", A);
  Tensor out = A;
  std::size_t cols = A.last_dim();
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double* row = out.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      s += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= s;
  }
  return push(Op::Softmax, std::move(out), {a});
}

Tape::NodeId Tape::concat(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.rank() == 1 && B.rank() == 1) {
    Tensor out = Tensor::zeros({A.numel() + B.numel()});
    std::copy(A.data(), A.data() + A.numel(), out.data());
    std::copy(B.data(), B.data() + B.numel(), out.data() + A.numel());
    return push(Op::Concat, std::move(out), {a, b}, static_cast<double>(A.numel()));
  }
  if (A.rank() == 2 && B.rank() == 2 && A.dim(0) == B.dim(0)) {
    std::size_t r = A.dim(0), ca = A.dim(1), cb = B.dim(1);
    Tensor out = Tensor::zeros({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
      std::copy(A.data() + i * ca, A.data() + (i + 1) * ca, out.data() + i * (ca + cb));
      std::copy(B.data() + i * cb, B.data() + (i + 1) * cb, out.data() + i * (ca + cb) + ca);
    }
    return push(Op::Concat, std::move(out), {a, b}, static_cast<double>(ca));
  }
  throw_shape_error("concat", A, B);
}

Tape::NodeId Tape::slice(NodeId a, std::size_t begin, std::size_t len) {
  const Tensor& A = nodes_[a].value;
  if (A.rank() == 0 || begin + len > A.last_dim())
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," +
                                std::to_string(begin + len) + ") exceeds shape " + A.shape_str());
  std::size_t cols = A.last_dim();
  Tensor out = A.rank() == 1 ? Tensor::zeros({len}) : Tensor::zeros({A.dim(0), len});
  for (std::size_t r = 0; r < A.rows(); ++r)
    std::copy(A.data() + r * cols + begin, A.data() + r * cols + begin + len,
              out.data() + r * len);
  return push(Op::Slice, std::move(out), {a}, static_cast<double>(begin),
              static_cast<double>(len));
}

Tape::NodeId Tape::stack_rows(std::span<const NodeId> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty row list");
  std::size_t d = nodes_[rows[0]].value.numel();
  for (NodeId r : rows)
    if (nodes_[r].value.rank() != 1 || nodes_[r].value.numel() != d)
      throw_shape_error("stack_rows", nodes_[rows[0]].value, nodes_[r].value);
  Tensor out = Tensor::zeros({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& R = nodes_[rows[i]].value;
    std::copy(R.data(), R.data() + d, out.data() + i * d);
  }
  return push(Op::StackRows, std::move(out), rows);
}

Tape::NodeId Tape::stack_scalars(std::span<const NodeId> scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars: empty list");
  Tensor out = Tensor::zeros({scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& s = nodes_[scalars[i]].value;
    if (s.numel() != 1) throw_shape_error("stack_scalars", s);
    out[i] = s[0];
  }
  return push(Op::StackScalars, std::move(out), scalars);
}

Tape::NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  const Tensor& X = nodes_[x].value;
  const Tensor& W = nodes_[w].value;
  const Tensor& B = nodes_[b].value;
  if (W.rank() != 2 || (X.rank() != 1 && X.rank() != 2) || X.last_dim() != W.dim(0))
    throw_shape_error("affine", X, W);
  if (B.rank() != 1 || B.numel() != W.dim(1)) throw_shape_error("affine", W, B);
  std::size_t m = X.rank() == 2 ? X.dim(0) : 1;
  std::size_t k = W.dim(0);
  std::size_t n = W.dim(1);
  Tensor out = X.rank() == 2 ? Tensor::zeros({m, n}) : Tensor::zeros({n});
  for (std::size_t i = 0; i < m; ++i) std::copy(B.data(), B.data() + n, out.data() + i * n);
  kernels::matmul(m, k, n, X.data(), W.data(), out.data(), true);
  return push(Op::Affine, std::move(out), {x, w, b});
}

Tape::LstmStepOut Tape::lstm_step(const LstmNodeIds& p, NodeId x, NodeId h, NodeId c) {
  const Tensor& X = nodes_[x].value;
  const Tensor& H = nodes_[h].value;
  const Tensor& C = nodes_[c].value;
  const Tensor& WI = nodes_[p.w_i].value;
  if (X.rank() != 1 || H.rank() != 1 || C.rank() != 1 || WI.rank() != 2 ||
      WI.dim(0) != X.numel() + H.numel() || WI.dim(1) != H.numel() || C.numel() != H.numel())
    throw_shape_error("lstm_step", X, H);
  std::size_t in_dim = X.numel();
  std::size_t hid = H.numel();
  Tensor out = Tensor::zeros({2 * hid});
  std::vector<double> save(5 * hid);
  kernels::lstm_forward(in_dim, hid, X.data(), H.data(), C.data(), WI.data(),
                        nodes_[p.w_f].value.data(), nodes_[p.w_o].value.data(),
                        nodes_[p.w_c].value.data(), nodes_[p.b_i].value.data(),
                        nodes_[p.b_f].value.data(), nodes_[p.b_o].value.data(),
                        nodes_[p.b_c].value.data(), out.data(), out.data() + hid, save.data());
  NodeId ins[] = {x, h, c, p.w_i, p.w_f, p.w_o, p.w_c, p.b_i, p.b_f, p.b_o, p.b_c};
  NodeId gates = push(Op::LstmGates, std::move(out), std::span<const NodeId>(ins, 11));
  nodes_[gates].aux = std::move(save);
  return {slice(gates, 0, hid), slice(gates, hid, hid)};
}

Tensor& Tape::grad_buffer(NodeId id) {
  Tensor& g = grads_[id];
  if (g.numel() == 0) g = Tensor::zeros(nodes_[id].value.shape());
  return g;
}

Tape::BackwardStats Tape::backward(NodeId root) {
  if (nodes_[root].value.numel() != 1 || nodes_[root].value.rank() != 0)
    throw std::invalid_argument("backward: root must be scalar, got shape " +
                                nodes_[root].value.shape_str());
  grads_.assign(nodes_.size(), Tensor());
  grad_buffer(root)[0] = 1.0;
  BackwardStats stats;
  for (NodeId id = root; id >= 0; --id) {
    ++stats.nodes_visited;
    if (!nodes_[id].requires_grad || grads_[id].numel() == 0) continue;
    dispatch_backward(id);
  }
  return stats;
}

void Tape::dispatch_backward(NodeId id) {
  Node& n = nodes_[id];
  const Tensor& g = grads_[id];
  auto ins = inputs(n);
  auto want = [&](std::size_t i) { return nodes_[ins[i]].requires_grad; };
  auto gbuf = [&](std::size_t i) -> Tensor& { return grad_buffer(ins[i]); };
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Matmul: {
      const Tensor& A = nodes_[ins[0]].value;
      const Tensor& B = nodes_[ins[1]].value;
      std::size_t m = A.rank() == 2 ? A.dim(0) : 1;
      std::size_t k = B.dim(0);
      std::size_t nn = B.dim(1);
      if (want(0)) {
        Tensor& da = gbuf(0);
        // da (m,k) += g (m,n) @ B^T (n,k)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < nn; ++j) {
            double gv = g[i * nn + j];
            if (gv == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) da[i * k + p] += gv * B[p * nn + j];
          }
      }
      if (want(1)) {
        Tensor& db = gbuf(1);
        // db (k,n) += A^T (k,m) @ g (m,n)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double av = A[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < nn; ++j) db[p * nn + j] += av * g[i * nn + j];
          }
      }
      break;
    }
    case Op::Add:
      for (int s = 0; s < 2; ++s)
        if (want(s)) {
          Tensor& d = gbuf(s);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
        }
      break;
    case Op::Sub: {
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
      }
      if (want(1)) {
        Tensor& d = gbuf(1);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i];
      }
      break;
    }
    case Op::Mul: {
      const Tensor& A = nodes_[ins[0]].value;
      const Tensor& B = nodes_[ins[1]].value;
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * B[i];
      }
      if (want(1)) {
        Tensor& d = gbuf(1);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * A[i];
      }
      break;
    }
    case Op::Scale:
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * n.p0;
      }
      break;
    case Op::Tanh:
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      }
      break;
    case Op::Sigmoid:
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      }
      break;
    case Op::Relu:
      if (want(0)) {
        Tensor& d = gbuf(0);
        const Tensor& A = nodes_[ins[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += A[i] > 0.0 ? g[i] : 0.0;
      }
      break;
    case Op::Exp:
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * n.value[i];
      }
      break;
    case Op::Log:
      if (want(0)) {
        Tensor& d = gbuf(0);
        const Tensor& A = nodes_[ins[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] / A[i];
      }
      break;
    case Op::Softplus:
      if (want(0)) {
        Tensor& d = gbuf(0);
        const Tensor& A = nodes_[ins[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * kernels::sigmoid(A[i]);
      }
      break;
    case Op::Clamp:
      if (want(0)) {
        Tensor& d = gbuf(0);
        const Tensor& A = nodes_[ins[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (A[i] >= n.p0 && A[i] <= n.p1) d[i] += g[i];
      }
      break;
    case Op::Minimum: {
      const Tensor& A = nodes_[ins[0]].value;
      const Tensor& B = nodes_[ins[1]].value;
      for (std::size_t i = 0; i < g.numel(); ++i) {
        std::size_t s = A[i] <= B[i] ? 0 : 1;
        if (want(s)) gbuf(s)[i] += g[i];
      }
      break;
    }
    case Op::MulScalar: {
      const Tensor& A = nodes_[ins[0]].value;
      const Tensor& S = nodes_[ins[1]].value;
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * S[0];
      }
      if (want(1)) {
        Tensor& d = gbuf(1);
        for (std::size_t i = 0; i < g.numel(); ++i) d[0] += g[i] * A[i];
      }
      break;
    }
    case Op::Sum:
      if (want(0)) {
        Tensor& d = gbuf(0);
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[0];
      }
      break;
    case Op::Mean:
      if (want(0)) {
        Tensor& d = gbuf(0);
        double s = g[0] / static_cast<double>(d.numel());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += s;
      }
      break;
    case Op::L2Norm:
      if (want(0) && n.value[0] > 0.0) {
        Tensor& d = gbuf(0);
        const Tensor& A = nodes_[ins[0]].value;
        double s = g[0] / n.value[0];
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += s * A[i];
      }
      break;
    case Op::RowSum:
      if (want(0)) {
        Tensor& d = gbuf(0);
        std::size_t cols = d.last_dim();
        for (std::size_t r = 0; r < d.rows(); ++r)
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r];
      }
      break;
    case Op::LogSumExp:
      if (want(0)) {
        Tensor& d = gbuf(0);
        const Tensor& A = nodes_[ins[0]].value;
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[0] * std::exp(A[i] - n.value[0]);
      }
      break;
    case Op::Softmax:
      if (want(0)) {
        Tensor& d = gbuf(0);
        std::size_t cols = n.value.last_dim();
        for (std::size_t r = 0; r < n.value.rows(); ++r) {
          const double* y = n.value.data() + r * cols;
          const double* gy = g.data() + r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += y[c] * (gy[c] - dot);
        }
      }
      break;
    case Op::Concat: {
      std::size_t ca = static_cast<std::size_t>(n.p0);
      std::size_t cols = n.value.last_dim();
      std::size_t cb = cols - ca;
      for (std::size_t r = 0; r < n.value.rows(); ++r) {
        if (want(0)) {
          Tensor& d = gbuf(0);
          for (std::size_t c = 0; c < ca; ++c) d[r * ca + c] += g[r * cols + c];
        }
        if (want(1)) {
          Tensor& d = gbuf(1);
          for (std::size_t c = 0; c < cb; ++c) d[r * cb + c] += g[r * cols + ca + c];
        }
      }
      break;
    }
    case Op::Slice:
      if (want(0)) {
        Tensor& d = gbuf(0);
        std::size_t begin = static_cast<std::size_t>(n.p0);
        std::size_t len = static_cast<std::size_t>(n.p1);
        std::size_t cols = d.last_dim();
        for (std::size_t r = 0; r < n.value.rows(); ++r)
          for (std::size_t c = 0; c < len; ++c) d[r * cols + begin + c] += g[r * len + c];
      }
      break;
    case Op::StackRows: {
      std::size_t d = n.value.last_dim();
      for (std::size_t r = 0; r < n.in_count; ++r)
        if (want(r)) {
          Tensor& dr = gbuf(r);
          for (std::size_t c = 0; c < d; ++c) dr[c] += g[r * d + c];
        }
      break;
    }
    case Op::StackScalars:
      for (std::size_t r = 0; r < n.in_count; ++r)
        if (want(r)) gbuf(r)[0] += g[r];
      break;
    case Op::Affine: {
      const Tensor& X = nodes_[ins[0]].value;
      const Tensor& W = nodes_[ins[1]].value;
      std::size_t m = X.rank() == 2 ? X.dim(0) : 1;
      std::size_t k = W.dim(0);
      std::size_t nn = W.dim(1);
      if (want(0)) {
        Tensor& dx = gbuf(0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < nn; ++j) {
            double gv = g[i * nn + j];
            if (gv == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) dx[i * k + p] += gv * W[p * nn + j];
          }
      }
      if (want(1)) {
        Tensor& dw = gbuf(1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double xv = X[i * k + p];
            if (xv == 0.0) continue;
            for (std::size_t j = 0; j < nn; ++j) dw[p * nn + j] += xv * g[i * nn + j];
          }
      }
      if (want(2)) {
        Tensor& db = gbuf(2);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < nn; ++j) db[j] += g[i * nn + j];
      }
      break;
    }
    case Op::LstmGates: {
      const Tensor& X = nodes_[ins[0]].value;
      const Tensor& H = nodes_[ins[1]].value;
      const Tensor& C = nodes_[ins[2]].value;
      std::size_t in_dim = X.numel();
      std::size_t hid = H.numel();
      kernels::lstm_backward(
          in_dim, hid, X.data(), H.data(), C.data(), nodes_[ins[3]].value.data(),
          nodes_[ins[4]].value.data(), nodes_[ins[5]].value.data(), nodes_[ins[6]].value.data(),
          n.aux.data(), g.data(), g.data() + hid, want(0) ? gbuf(0).data() : nullptr,
          want(1) ? gbuf(1).data() : nullptr, want(2) ? gbuf(2).data() : nullptr,
          want(3) ? gbuf(3).data() : nullptr, want(4) ? gbuf(4).data() : nullptr,
          want(5) ? gbuf(5).data() : nullptr, want(6) ? gbuf(6).data() : nullptr,
          want(7) ? gbuf(7).data() : nullptr, want(8) ? gbuf(8).data() : nullptr,
          want(9) ? gbuf(9).data() : nullptr, want(10) ? gbuf(10).data() : nullptr);
      break;
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  inputs_pool_.clear();
}

}  // namespace sami
