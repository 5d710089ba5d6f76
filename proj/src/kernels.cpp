#include "seqil/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace seqil::kernels {

void matmul_serial(const double* a, const double* b, double* c, long n, long k, long m) {
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) {
      double acc = 0.0;
      for (long p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      c[i * m + j] = acc;
    }
}

void matmul_omp(const double* a, const double* b, double* c, long n, long k, long m) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) {
      double acc = 0.0;
      for (long p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      c[i * m + j] = acc;
    }
}

void matmul_nt_serial(const double* a, const double* b, double* c, long n, long k, long m) {
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) {
      double acc = 0.0;
      for (long p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * m + j] = acc;
    }
}

void matmul_nt_omp(const double* a, const double* b, double* c, long n, long k, long m) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) {
      double acc = 0.0;
      for (long p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * m + j] = acc;
    }
}

void matmul_tn_serial(const double* a, const double* b, double* c, long n, long k, long m) {
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < m; ++j) {
      double acc = 0.0;
      for (long p = 0; p < n; ++p) acc += a[p * k + i] * b[p * m + j];
      c[i * m + j] = acc;
    }
}

void matmul_tn_omp(const double* a, const double* b, double* c, long n, long k, long m) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < m; ++j) {
      double acc = 0.0;
      for (long p = 0; p < n; ++p) acc += a[p * k + i] * b[p * m + j];
      c[i * m + j] = acc;
    }
}

static inline double row_logsumexp(const double* row, long cols) {
  double mx = row[0];
  for (long j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
  double acc = 0.0;
  for (long j = 0; j < cols; ++j) acc += std::exp(row[j] - mx);
  return mx + std::log(acc);
}

void logsumexp_rows_serial(const double* x, double* out, long rows, long cols) {
  for (long i = 0; i < rows; ++i) out[i] = row_logsumexp(x + i * cols, cols);
}

void logsumexp_rows_omp(const double* x, double* out, long rows, long cols) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) out[i] = row_logsumexp(x + i * cols, cols);
}

void log_softmax_rows_serial(const double* x, double* out, long rows, long cols) {
  for (long i = 0; i < rows; ++i) {
    double lse = row_logsumexp(x + i * cols, cols);
    for (long j = 0; j < cols; ++j) out[i * cols + j] = x[i * cols + j] - lse;
  }
}

void log_softmax_rows_omp(const double* x, double* out, long rows, long cols) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    double lse = row_logsumexp(x + i * cols, cols);
    for (long j = 0; j < cols; ++j) out[i * cols + j] = x[i * cols + j] - lse;
  }
}

void softmax_rows_serial(const double* x, double* out, long rows, long cols) {
  for (long i = 0; i < rows; ++i) {
    double lse = row_logsumexp(x + i * cols, cols);
    for (long j = 0; j < cols; ++j) out[i * cols + j] = std::exp(x[i * cols + j] - lse);
  }
}

void softmax_rows_omp(const double* x, double* out, long rows, long cols) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    double lse = row_logsumexp(x + i * cols, cols);
    for (long j = 0; j < cols; ++j) out[i * cols + j] = std::exp(x[i * cols + j] - lse);
  }
}

}  // namespace seqil::kernels
