#pragma once

#include <cstddef>

namespace urlb::kernels {

// Data-parallel inner loops behind the network and entropy-estimator code.
// Two backends: a scalar reference and an AVX2 variant selected at runtime.
//
// Both backends are bit-identical by construction. Reductions (dot, sq_dist,
// sum) accumulate in a fixed 4-lane striped order, lanes combined as
// (l0+l1)+(l2+l3) with a sequential tail; elementwise ops have no ordering
// freedom. No FMA on either path. tanh stays on libm for both backends.

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);  // throws if the backend is unavailable
bool avx2_available();
const char* backend_name(Backend b);
// Honors URLB_KERNELS=scalar|avx2, else picks the widest available.
void init_backend_from_env();

// ---- reductions (striped order) ----
double dot(const double* a, const double* b, size_t n);
double sq_dist(const double* a, const double* b, size_t n);
double sum(const double* a, size_t n);

// ---- matrix products (row-major) ----
// C[M x N] = A[M x K] * B[N x K]^T
void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
// C[M x N] += A[M x K] * B[K x N]
void matmul_nn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
// C[K x N] += A[M x K]^T * B[M x N]
void matmul_tn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);

// ---- elementwise ----
void add_row_bias(double* y, const double* bias, size_t rows, size_t cols);
void col_sums_acc(const double* a, double* out, size_t rows, size_t cols);
void relu(double* x, size_t n);
void relu_bwd(const double* act, double* grad, size_t n);   // grad *= (act > 0)
void tanh_act(double* x, size_t n);
void tanh_bwd(const double* act, double* grad, size_t n);   // grad *= 1 - act^2
void axpy(double alpha, const double* x, double* y, size_t n);
void scale(double alpha, double* x, size_t n);
void clamp(double* x, size_t n, double lo, double hi);
// target = tau * online + (1 - tau) * target
void ema(double tau, const double* online, double* target, size_t n);
// Adam with precomputed bias corrections bc1 = 1-b1^t, bc2 = 1-b2^t.
void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);

// Per-backend entry points, exposed for equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, size_t n);
double sq_dist(const double* a, const double* b, size_t n);
double sum(const double* a, size_t n);
void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
void matmul_nn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
void matmul_tn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
void relu(double* x, size_t n);
void relu_bwd(const double* act, double* grad, size_t n);
void tanh_bwd(const double* act, double* grad, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);
void scale(double alpha, double* x, size_t n);
void clamp(double* x, size_t n, double lo, double hi);
void ema(double tau, const double* online, double* target, size_t n);
void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
}  // namespace scalar

#ifdef URLB_AVX2_BUILD
namespace avx2 {
double dot(const double* a, const double* b, size_t n);
double sq_dist(const double* a, const double* b, size_t n);
double sum(const double* a, size_t n);
void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
void matmul_nn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
void matmul_tn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k);
void relu(double* x, size_t n);
void relu_bwd(const double* act, double* grad, size_t n);
void tanh_bwd(const double* act, double* grad, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);
void scale(double alpha, double* x, size_t n);
void clamp(double* x, size_t n, double lo, double hi);
void ema(double tau, const double* online, double* target, size_t n);
void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
}  // namespace avx2
#endif

}  // namespace urlb::kernels
