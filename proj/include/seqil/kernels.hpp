#pragma once

#include <cstddef>

// Dense kernels used by the autodiff graph. Each kernel has a serial
// reference implementation and an OpenMP variant. The OpenMP variants
// parallelize only across independent output elements and keep every
// per-element reduction serial, so results are bit-identical to the
// serial reference for any thread count.

namespace seqil::kernels {

// C[n,m] = A[n,k] * B[k,m]
void matmul_serial(const double* a, const double* b, double* c, long n, long k, long m);
void matmul_omp(const double* a, const double* b, double* c, long n, long k, long m);

// C[n,m] = A[n,k] * B[m,k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, long n, long k, long m);
void matmul_nt_omp(const double* a, const double* b, double* c, long n, long k, long m);

// C[k,m] = A[n,k]^T * B[n,m]
void matmul_tn_serial(const double* a, const double* b, double* c, long n, long k, long m);
void matmul_tn_omp(const double* a, const double* b, double* c, long n, long k, long m);

// out[i] = log(sum_j exp(x[i,j])), max-shifted for stability.
void logsumexp_rows_serial(const double* x, double* out, long rows, long cols);
void logsumexp_rows_omp(const double* x, double* out, long rows, long cols);

// out[i,j] = x[i,j] - logsumexp(x[i,:])
void log_softmax_rows_serial(const double* x, double* out, long rows, long cols);
void log_softmax_rows_omp(const double* x, double* out, long rows, long cols);

// out[i,j] = exp(x[i,j] - logsumexp(x[i,:]))
void softmax_rows_serial(const double* x, double* out, long rows, long cols);
void softmax_rows_omp(const double* x, double* out, long rows, long cols);

// Dispatchers used by the graph; they call the OpenMP variants.
inline void matmul(const double* a, const double* b, double* c, long n, long k, long m) {
  matmul_omp(a, b, c, n, k, m);
}
inline void matmul_nt(const double* a, const double* b, double* c, long n, long k, long m) {
  matmul_nt_omp(a, b, c, n, k, m);
}
inline void matmul_tn(const double* a, const double* b, double* c, long n, long k, long m) {
  matmul_tn_omp(a, b, c, n, k, m);
}
inline void logsumexp_rows(const double* x, double* out, long rows, long cols) {
  logsumexp_rows_omp(x, out, rows, cols);
}
inline void log_softmax_rows(const double* x, double* out, long rows, long cols) {
  log_softmax_rows_omp(x, out, rows, cols);
}
inline void softmax_rows(const double* x, double* out, long rows, long cols) {
  softmax_rows_omp(x, out, rows, cols);
}

}  // namespace seqil::kernels
