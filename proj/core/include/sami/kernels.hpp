#pragma once

#include <cstddef>

// Raw value-level math shared by the tape ops and the no-gradient forward
// paths (rollout, evaluation, momentum encoder), so both run the same code.
namespace sami::kernels {

inline double sigmoid(double x) { return 1.0 / (1.0 + __builtin_exp(-x)); }

// y (m,n) = x (m,k) @ w (k,n), accumulating into y when acc is true.
void matmul(std::size_t m, std::size_t k, std::size_t n, const double* x, const double* w,
            double* y, bool acc);

// One LSTM cell step on a single row. Weights are (in+hid, hid) row major,
// gate order i, f, o, c. If save is non-null it receives i, f, o, g, tanh(c')
// as five consecutive blocks of hid doubles for the backward pass.
void lstm_forward(std::size_t in_dim, std::size_t hid, const double* x, const double* h,
                  const double* c, const double* wi, const double* wf, const double* wo,
                  const double* wc, const double* bi, const double* bf, const double* bo,
                  const double* bc, double* h_out, double* c_out, double* save);

// Reverse pass matching lstm_forward. dh_out/dc_out are the adjoints of h'/c'.
// All d* output buffers are accumulated into.
void lstm_backward(std::size_t in_dim, std::size_t hid, const double* x, const double* h,
                   const double* c, const double* wi, const double* wf, const double* wo,
                   const double* wc, const double* save, const double* dh_out,
                   const double* dc_out, double* dx, double* dh, double* dc, double* dwi,
                   double* dwf, double* dwo, double* dwc, double* dbi, double* dbf, double* dbo,
                   double* dbc);

}  // namespace sami::kernels
