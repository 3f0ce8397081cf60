#include "urlb/kernels.hpp"

#ifdef URLB_AVX2_BUILD

#include <immintrin.h>

#include <algorithm>
#include <cmath>

// AVX2 backend. Each 4-wide vector accumulator lane carries the same stripe
// as the matching scalar accumulator, and lanes are combined in the same
// (l0+l1)+(l2+l3) order, so results match the scalar backend bit for bit.
// mul and add stay separate instructions; this TU is built without -mfma.

namespace urlb::kernels::avx2 {

namespace {

inline double combine_lanes(__m256d acc) {
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  return (l[0] + l[1]) + (l[2] + l[3]);
}

}  // namespace

double dot(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  double s = combine_lanes(acc);
  for (size_t i = n4; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sq_dist(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = combine_lanes(acc);
  for (size_t i = n4; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double sum(const double* a, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = combine_lanes(acc);
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
  size_t j4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      double av = ai[p];
      const double* bp = b + p * n;
      __m256d vav = _mm256_set1_pd(av);
      for (size_t j = 0; j < j4; j += 4) {
        __m256d vc = _mm256_loadu_pd(ci + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(vav, _mm256_loadu_pd(bp + j)));
        _mm256_storeu_pd(ci + j, vc);
      }
      for (size_t j = j4; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  size_t j4 = n & ~size_t(3);
  for (size_t r = 0; r < m; ++r) {
    const double* ar = a + r * k;
    const double* br = b + r * n;
    for (size_t p = 0; p < k; ++p) {
      double av = ar[p];
      double* cp = c + p * n;
      __m256d vav = _mm256_set1_pd(av);
      for (size_t j = 0; j < j4; j += 4) {
        __m256d vc = _mm256_loadu_pd(cp + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(vav, _mm256_loadu_pd(br + j)));
        _mm256_storeu_pd(cp + j, vc);
      }
      for (size_t j = j4; j < n; ++j) cp[j] += av * br[j];
    }
  }
}

void relu(double* x, size_t n) {
  __m256d zero = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  // maxpd returns the second operand when the first is NaN, matching the
  // scalar branch that maps NaN to zero.
  for (size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (size_t i = n4; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* act, double* grad, size_t n) {
  __m256d zero = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad + i, _mm256_and_pd(_mm256_loadu_pd(grad + i), mask));
  }
  for (size_t i = n4; i < n; ++i)
    if (!(act[i] > 0.0)) grad[i] = 0.0;
}

void tanh_bwd(const double* act, double* grad, size_t n) {
  __m256d one = _mm256_set1_pd(1.0);
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d va = _mm256_loadu_pd(act + i);
    __m256d t = _mm256_sub_pd(one, _mm256_mul_pd(va, va));
    _mm256_storeu_pd(grad + i, _mm256_mul_pd(_mm256_loadu_pd(grad + i), t));
  }
  for (size_t i = n4; i < n; ++i) grad[i] *= 1.0 - act[i] * act[i];
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (size_t i = n4; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (size_t i = n4; i < n; ++i) x[i] *= alpha;
}

void clamp(double* x, size_t n, double lo, double hi) {
  __m256d vlo = _mm256_set1_pd(lo);
  __m256d vhi = _mm256_set1_pd(hi);
  size_t n4 = n & ~size_t(3);
  // max(x, lo) then min(., hi); NaN input collapses to lo on both backends.
  for (size_t i = 0; i < n4; i += 4) {
    __m256d v = _mm256_max_pd(_mm256_loadu_pd(x + i), vlo);
    _mm256_storeu_pd(x + i, _mm256_min_pd(v, vhi));
  }
  for (size_t i = n4; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void ema(double tau, const double* online, double* target, size_t n) {
  __m256d vt = _mm256_set1_pd(tau);
  __m256d vomt = _mm256_set1_pd(1.0 - tau);
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d r = _mm256_add_pd(_mm256_mul_pd(vt, _mm256_loadu_pd(online + i)),
                              _mm256_mul_pd(vomt, _mm256_loadu_pd(target + i)));
    _mm256_storeu_pd(target + i, r);
  }
  for (size_t i = n4; i < n; ++i) target[i] = tau * online[i] + (1.0 - tau) * target[i];
}

void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  __m256d vb1 = _mm256_set1_pd(beta1);
  __m256d vomb1 = _mm256_set1_pd(1.0 - beta1);
  __m256d vb2 = _mm256_set1_pd(beta2);
  __m256d vomb2 = _mm256_set1_pd(1.0 - beta2);
  __m256d vbc1 = _mm256_set1_pd(bc1);
  __m256d vbc2 = _mm256_set1_pd(bc2);
  __m256d vlr = _mm256_set1_pd(lr);
  __m256d veps = _mm256_set1_pd(eps);
  size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < n4; i += 4) {
    __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(vomb1, vg));
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(vomb2, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    __m256d mhat = _mm256_div_pd(vm, vbc1);
    __m256d vhat = _mm256_div_pd(vv, vbc2);
    __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), den);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (size_t i = n4; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace urlb::kernels::avx2

#endif  // URLB_AVX2_BUILD
