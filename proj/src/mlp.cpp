#include "urlb/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "urlb/kernels.hpp"

namespace urlb::net {

namespace k = urlb::kernels;

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void ParamSet::add(const std::string& name, Mat m) {
  if (find(name)) throw std::invalid_argument("ParamSet: duplicate entry '" + name + "'");
  entries.emplace_back(name, std::move(m));
}

Mat& ParamSet::at(const std::string& name) {
  for (auto& [n, m] : entries)
    if (n == name) return m;
  throw std::out_of_range("ParamSet: no entry '" + name + "'");
}

const Mat& ParamSet::at(const std::string& name) const {
  for (auto& [n, m] : entries)
    if (n == name) return m;
  throw std::out_of_range("ParamSet: no entry '" + name + "'");
}

const Mat* ParamSet::find(const std::string& name) const {
  for (auto& [n, m] : entries)
    if (n == name) return &m;
  return nullptr;
}

size_t ParamSet::total_values() const {
  size_t n = 0;
  for (auto& [name, m] : entries) n += m.size();
  return n;
}

bool ParamSet::same_layout(const ParamSet& o) const {
  if (entries.size() != o.entries.size()) return false;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != o.entries[i].first) return false;
    if (!entries[i].second.same_shape(o.entries[i].second)) return false;
  }
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (auto& [name, m] : entries) z.add(name, Mat(m.rows, m.cols));
  return z;
}

AdamState AdamState::like(const ParamSet& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

Mat orthogonal(int rows, int cols, double gain, RngStream& rng) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("orthogonal: empty shape");
  int n = std::max(rows, cols);
  int m = std::min(rows, cols);

  // Tall gaussian [n x m], columns orthonormalized by modified Gram-Schmidt
  // with one reorthogonalization pass.
  Mat g(n, m);
  for (auto& x : g.v) x = rng.gaussian();

  for (int j = 0; j < m; ++j) {
    for (int attempt = 0;; ++attempt) {
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < j; ++i) {
          double proj = 0.0;
          for (int r = 0; r < n; ++r) proj += g(r, i) * g(r, j);
          for (int r = 0; r < n; ++r) g(r, j) -= proj * g(r, i);
        }
      }
      double norm_sq = 0.0;
      for (int r = 0; r < n; ++r) norm_sq += g(r, j) * g(r, j);
      if (norm_sq > 1e-20 * n) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (int r = 0; r < n; ++r) g(r, j) *= inv;
        break;
      }
      if (attempt > 8) throw std::runtime_error("orthogonal: degenerate basis");
      for (int r = 0; r < n; ++r) g(r, j) = rng.gaussian();
    }
  }

  Mat w(rows, cols);
  if (rows >= cols) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = gain * g(r, c);
  } else {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = gain * g(c, r);
  }
  return w;
}

ParamSet init_params(const MLPSpec& spec, RngStream& rng) {
  if (spec.widths.size() < 2) throw std::invalid_argument("MLPSpec: needs at least 2 widths");
  for (int w : spec.widths)
    if (w <= 0) throw std::invalid_argument("MLPSpec: widths must be positive");

  ParamSet p;
  int last = spec.layers() - 1;
  for (int l = 0; l <= last; ++l) {
    Activation act = l < last ? spec.hidden : spec.output;
    double gain = (l < last && act == Activation::tanh) ? 5.0 / 3.0 : 1.0;
    p.add("w" + std::to_string(l),
          orthogonal(spec.widths[size_t(l) + 1], spec.widths[size_t(l)], gain, rng));
    p.add("b" + std::to_string(l), Mat(1, spec.widths[size_t(l) + 1]));
  }
  return p;
}

namespace {

void apply_activation(Activation a, Mat& x) {
  switch (a) {
    case Activation::relu: k::relu(x.v.data(), x.size()); break;
    case Activation::tanh: k::tanh_act(x.v.data(), x.size()); break;
    case Activation::identity: break;
  }
}

void activation_bwd(Activation a, const Mat& act, Mat& grad) {
  switch (a) {
    case Activation::relu: k::relu_bwd(act.v.data(), grad.v.data(), grad.size()); break;
    case Activation::tanh: k::tanh_bwd(act.v.data(), grad.v.data(), grad.size()); break;
    case Activation::identity: break;
  }
}

}  // namespace

Mat forward(const MLPSpec& spec, const ParamSet& params, const Mat& x, Tape* tape) {
  if (x.cols != spec.in_dim())
    throw std::invalid_argument("forward: input width " + std::to_string(x.cols) +
                                " does not match spec " + std::to_string(spec.in_dim()));
  if (tape) {
    tape->input = x;
    tape->acts.clear();
  }

  Mat cur = x;
  int last = spec.layers() - 1;
  for (int l = 0; l <= last; ++l) {
    const Mat& w = params.at("w" + std::to_string(l));
    const Mat& b = params.at("b" + std::to_string(l));
    Mat next(cur.rows, w.rows);
    k::matmul_nt(cur.v.data(), w.v.data(), next.v.data(), size_t(cur.rows), size_t(w.rows),
                 size_t(cur.cols));
    k::add_row_bias(next.v.data(), b.v.data(), size_t(next.rows), size_t(next.cols));
    apply_activation(l < last ? spec.hidden : spec.output, next);
    if (tape) tape->acts.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

ParamSet backward(const MLPSpec& spec, const ParamSet& params, const Tape& tape,
                  const Mat& dy, Mat* dx) {
  int last = spec.layers() - 1;
  if (int(tape.acts.size()) != last + 1)
    throw std::invalid_argument("backward: tape does not match spec");
  if (!dy.same_shape(tape.acts.back()))
    throw std::invalid_argument("backward: dy shape " + dy.shape_str() + " vs output " +
                                tape.acts.back().shape_str());

  ParamSet grads;
  for (auto& [name, m] : params.entries) grads.add(name, Mat(m.rows, m.cols));

  Mat da = dy;
  for (int l = last; l >= 0; --l) {
    const Mat& act = tape.acts[size_t(l)];
    activation_bwd(l < last ? spec.hidden : spec.output, act, da);

    const Mat& in = l == 0 ? tape.input : tape.acts[size_t(l) - 1];
    const Mat& w = params.at("w" + std::to_string(l));
    Mat& dw = grads.at("w" + std::to_string(l));
    Mat& db = grads.at("b" + std::to_string(l));

    size_t batch = size_t(da.rows), out = size_t(da.cols), in_w = size_t(in.cols);
    k::matmul_tn_acc(da.v.data(), in.v.data(), dw.v.data(), batch, in_w, out);
    k::col_sums_acc(da.v.data(), db.v.data(), batch, out);

    if (l > 0 || dx) {
      Mat din(static_cast<int>(batch), static_cast<int>(in_w));
      k::matmul_nn_acc(da.v.data(), w.v.data(), din.v.data(), batch, in_w, out);
      da = std::move(din);
    }
  }
  if (dx) *dx = std::move(da);
  return grads;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v))
    throw std::invalid_argument("adam_step: layout mismatch");
  for (auto& [name, g] : grads.entries)
    if (!all_finite(g))
      throw std::runtime_error("adam_step: non-finite gradient in '" + name + "'");

  state.step_count += 1;
  double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
  double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));
  for (size_t i = 0; i < params.entries.size(); ++i) {
    Mat& p = params.entries[i].second;
    const Mat& g = grads.entries[i].second;
    Mat& m = state.m.entries[i].second;
    Mat& v = state.v.entries[i].second;
    k::adam_update(p.v.data(), g.v.data(), m.v.data(), v.v.data(), p.size(), lr,
                   state.beta1, state.beta2, state.eps, bc1, bc2);
  }
}

void ema_update(const ParamSet& online, ParamSet& target, double tau) {
  if (!online.same_layout(target)) throw std::invalid_argument("ema_update: layout mismatch");
  for (size_t i = 0; i < online.entries.size(); ++i)
    k::ema(tau, online.entries[i].second.v.data(), target.entries[i].second.v.data(),
           online.entries[i].second.size());
}

void copy_values(const ParamSet& src, ParamSet& dst) {
  if (!src.same_layout(dst)) throw std::invalid_argument("copy_values: layout mismatch");
  for (size_t i = 0; i < src.entries.size(); ++i)
    dst.entries[i].second.v = src.entries[i].second.v;
}

}  // namespace urlb::net
