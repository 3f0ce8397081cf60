#include "urlb/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace urlb::kernels {

namespace {

Backend pick_widest() {
#ifdef URLB_AVX2_BUILD
  if (__builtin_cpu_supports("avx2")) return Backend::avx2;
#endif
  return Backend::scalar;
}

Backend initial_backend() {
  // Lazy default: honor the env var when it parses, otherwise fall back
  // quietly. init_backend_from_env() is the strict entry point.
  const char* env = std::getenv("URLB_KERNELS");
  if (env) {
    std::string s(env);
    if (s == "scalar") return Backend::scalar;
    if (s == "avx2" && avx2_available()) return Backend::avx2;
  }
  return pick_widest();
}

Backend& backend_ref() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

Backend active_backend() { return backend_ref(); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_available())
    throw std::runtime_error("kernels: avx2 backend requested but unavailable on this host");
  backend_ref() = b;
}

bool avx2_available() {
#ifdef URLB_AVX2_BUILD
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

void init_backend_from_env() {
  const char* env = std::getenv("URLB_KERNELS");
  if (!env) {
    backend_ref() = pick_widest();
    return;
  }
  std::string s(env);
  if (s == "scalar") {
    backend_ref() = Backend::scalar;
  } else if (s == "avx2") {
    set_backend(Backend::avx2);
  } else {
    throw std::runtime_error("URLB_KERNELS must be 'scalar' or 'avx2', got '" + s + "'");
  }
}

#ifdef URLB_AVX2_BUILD
#define URLB_DISPATCH(fn, ...) \
  (active_backend() == Backend::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define URLB_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double dot(const double* a, const double* b, size_t n) { return URLB_DISPATCH(dot, a, b, n); }

double sq_dist(const double* a, const double* b, size_t n) {
  return URLB_DISPATCH(sq_dist, a, b, n);
}

double sum(const double* a, size_t n) { return URLB_DISPATCH(sum, a, n); }

void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  URLB_DISPATCH(matmul_nt, a, b, c, m, n, k);
}

void matmul_nn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  URLB_DISPATCH(matmul_nn_acc, a, b, c, m, n, k);
}

void matmul_tn_acc(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  URLB_DISPATCH(matmul_tn_acc, a, b, c, m, n, k);
}

void relu(double* x, size_t n) { URLB_DISPATCH(relu, x, n); }

void relu_bwd(const double* act, double* grad, size_t n) {
  URLB_DISPATCH(relu_bwd, act, grad, n);
}

void tanh_bwd(const double* act, double* grad, size_t n) {
  URLB_DISPATCH(tanh_bwd, act, grad, n);
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  URLB_DISPATCH(axpy, alpha, x, y, n);
}

void scale(double alpha, double* x, size_t n) { URLB_DISPATCH(scale, alpha, x, n); }

void clamp(double* x, size_t n, double lo, double hi) { URLB_DISPATCH(clamp, x, n, lo, hi); }

void ema(double tau, const double* online, double* target, size_t n) {
  URLB_DISPATCH(ema, tau, online, target, n);
}

void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  URLB_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

#undef URLB_DISPATCH

// Single-implementation helpers; no accumulation-order freedom worth a
// second backend. tanh stays on libm so both kernel paths share it.

void add_row_bias(double* y, const double* bias, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    double* yr = y + r * cols;
    for (size_t c = 0; c < cols; ++c) yr[c] += bias[c];
  }
}

void col_sums_acc(const double* a, double* out, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    const double* ar = a + r * cols;
    for (size_t c = 0; c < cols; ++c) out[c] += ar[c];
  }
}

void tanh_act(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

}  // namespace urlb::kernels
