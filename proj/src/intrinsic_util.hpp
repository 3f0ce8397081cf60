#pragma once

// Internal helpers for the intrinsic-reward modules; not installed.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "urlb/intrinsic.hpp"
#include "urlb/mat.hpp"
#include "urlb/mlp.hpp"

namespace urlb::intrinsic {

// One trainable MLP: spec, parameters, and its Adam moments.
struct NetBundle {
  net::MLPSpec spec;
  net::ParamSet params;
  net::AdamState adam;

  NetBundle() = default;
  NetBundle(net::MLPSpec s, RngStream& rng) : spec(std::move(s)) {
    params = net::init_params(spec, rng);
    adam = net::AdamState::like(params);
  }

  Mat fwd(const Mat& x, net::Tape* tape = nullptr) const {
    return net::forward(spec, params, x, tape);
  }
  void step(const net::ParamSet& grads, double lr) { net::adam_step(params, grads, adam, lr); }
};

inline void add_grads(net::ParamSet& into, const net::ParamSet& other) {
  if (!into.same_layout(other)) throw std::logic_error("add_grads: layout mismatch");
  for (size_t e = 0; e < into.entries.size(); ++e)
    for (size_t i = 0; i < into.entries[e].second.size(); ++i)
      into.entries[e].second.v[i] += other.entries[e].second.v[i];
}

inline Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    double mx = logits(r, 0);
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, logits(r, c));
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) sum += std::exp(logits(r, c) - mx);
    double lse = mx + std::log(sum);
    for (int c = 0; c < logits.cols; ++c) out(r, c) = logits(r, c) - lse;
  }
  return out;
}

inline Mat softmax_rows(const Mat& logits) {
  Mat out = log_softmax_rows(logits);
  for (auto& v : out.v) v = std::exp(v);
  return out;
}

inline int argmax_row(const Mat& m, int r) {
  int best = 0;
  for (int c = 1; c < m.cols; ++c)
    if (m(r, c) > m(r, best)) best = c;
  return best;
}

// Normalize each row to unit L2 norm; zero rows stay zero. If jac_norm is
// non-null it receives the per-row norms for the backward pass.
Mat normalize_rows(const Mat& m, std::vector<double>* norms = nullptr);
// Backward through normalize_rows: d_raw = (I - u u^T) / |x| d_unit.
Mat normalize_rows_bwd(const Mat& raw, const Mat& unit, const std::vector<double>& norms,
                       const Mat& d_unit);

std::unique_ptr<Module> make_icm(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng);
std::unique_ptr<Module> make_disagreement(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                          RngStream rng);
std::unique_ptr<Module> make_rnd(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng);
std::unique_ptr<Module> make_apt(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng);
std::unique_ptr<Module> make_proto(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                   RngStream rng);
std::unique_ptr<Module> make_smm(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng);
std::unique_ptr<Module> make_diayn(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                   RngStream rng);
std::unique_ptr<Module> make_aps(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng);

}  // namespace urlb::intrinsic
