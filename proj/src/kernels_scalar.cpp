#include "urlb/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

// Scalar reference backend. The striped accumulator order below *defines*
// the semantics of the reductions; the AVX2 backend reproduces it lane for
// lane so the two are interchangeable bit for bit.

namespace urlb::kernels::scalar {

double dot(const double* a, const double* b, size_t n) {
  double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (size_t i = n4; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sq_dist(const double* a, const double* b, size_t n) {
  double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    double d0 = a[i] - b[i];
    double d1 = a[i + 1] - b[i + 1];
    double d2 = a[i + 2] - b[i + 2];
    double d3 = a[i + 3] - b[i + 3];
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (size_t i = n4; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double sum(const double* a, size_t n) {
  double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    acc0 += a[i];
    acc1 += a[i + 1];
    acc2 += a[i + 2];
    acc3 += a[i + 3];
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (size_t i = n4; i < n; ++i) s += a[i];
  return s;
}

void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = dot(ai, b + j * k, k);
  }
}

void matmul_nn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      double av = ai[p];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  // c[K x N] += a[M x K]^T * b[M x N]; row-of-b broadcast keeps the
  // per-entry accumulation order identical across backends.
  for (size_t r = 0; r < m; ++r) {
    const double* ar = a + r * k;
    const double* br = b + r * n;
    for (size_t p = 0; p < k; ++p) {
      double av = ar[p];
      double* cp = c + p * n;
      for (size_t j = 0; j < n; ++j) cp[j] += av * br[j];
    }
  }
}

void relu(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* act, double* grad, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (!(act[i] > 0.0)) grad[i] = 0.0;
}

void tanh_bwd(const double* act, double* grad, size_t n) {
  for (size_t i = 0; i < n; ++i) grad[i] *= 1.0 - act[i] * act[i];
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void clamp(double* x, size_t n, double lo, double hi) {
  for (size_t i = 0; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void ema(double tau, const double* online, double* target, size_t n) {
  for (size_t i = 0; i < n; ++i) target[i] = tau * online[i] + (1.0 - tau) * target[i];
}

void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace urlb::kernels::scalar
