#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "urlb/mat.hpp"
#include "urlb/rng.hpp"

namespace urlb::net {

enum class Activation { relu, tanh, identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& s);

// Fully connected stack: widths = {in, h1, ..., out}. Hidden layers share
// one activation; the output layer gets its own.
struct MLPSpec {
  std::vector<int> widths;
  Activation hidden = Activation::relu;
  Activation output = Activation::identity;

  int layers() const { return int(widths.size()) - 1; }
  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
};

// Named matrices in insertion order. Layout (names + shapes, in order) is
// the identity used when pairing parameters with grads or moments.
struct ParamSet {
  std::vector<std::pair<std::string, Mat>> entries;

  void add(const std::string& name, Mat m);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  const Mat* find(const std::string& name) const;
  size_t total_values() const;
  bool same_layout(const ParamSet& o) const;
  ParamSet zeros_like() const;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const ParamSet& params);
};

// Post-activation record from a forward pass, consumed by backward().
struct Tape {
  Mat input;
  std::vector<Mat> acts;
};

// Orthogonal [rows x cols] matrix scaled by gain; the smaller dimension is
// orthonormal (W W^T or W^T W equals gain^2 I).
Mat orthogonal(int rows, int cols, double gain, RngStream& rng);

// Orthogonal weights (gain 5/3 on tanh hidden layers), zero biases.
// Entry names: w0, b0, w1, b1, ... with wL shaped [out x in].
ParamSet init_params(const MLPSpec& spec, RngStream& rng);

Mat forward(const MLPSpec& spec, const ParamSet& params, const Mat& x, Tape* tape = nullptr);

// dY is the loss gradient at the output. Returns parameter grads in the
// layout of `params`; if dx is non-null it receives the input gradient.
ParamSet backward(const MLPSpec& spec, const ParamSet& params, const Tape& tape,
                  const Mat& dy, Mat* dx = nullptr);

// Throws on non-finite grads without touching params or moments.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr);

void ema_update(const ParamSet& online, ParamSet& target, double tau);

void copy_values(const ParamSet& src, ParamSet& dst);

}  // namespace urlb::net
