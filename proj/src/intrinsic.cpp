#include "urlb/intrinsic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "intrinsic_util.hpp"

namespace urlb::intrinsic {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::icm: return "icm";
    case Kind::disagreement: return "disagreement";
    case Kind::rnd: return "rnd";
    case Kind::apt: return "apt";
    case Kind::proto: return "proto";
    case Kind::smm: return "smm";
    case Kind::diayn: return "diayn";
    case Kind::aps: return "aps";
  }
  throw std::logic_error("kind_name: bad kind");
}

Kind kind_from_name(const std::string& s) {
  for (Kind k : all_kinds())
    if (s == kind_name(k)) return k;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

Category category_of(Kind k) {
  switch (k) {
    case Kind::icm:
    case Kind::disagreement:
    case Kind::rnd: return Category::knowledge;
    case Kind::apt:
    case Kind::proto: return Category::data;
    case Kind::smm:
    case Kind::diayn:
    case Kind::aps: return Category::competence;
  }
  throw std::logic_error("category_of: bad kind");
}

const char* category_name(Category c) {
  switch (c) {
    case Category::knowledge: return "knowledge";
    case Category::data: return "data";
    case Category::competence: return "competence";
  }
  throw std::logic_error("category_name: bad category");
}

std::vector<Kind> all_kinds() {
  return {Kind::icm, Kind::disagreement, Kind::rnd,   Kind::apt,
          Kind::proto, Kind::smm,        Kind::diayn, Kind::aps};
}

Module::Module(Kind kind, int obs_width, int action_width)
    : kind_(kind), obs_width_(obs_width), action_width_(action_width) {
  if (obs_width < 1 || action_width < 1)
    throw std::invalid_argument("Module: widths must be positive");
}

std::vector<double> Module::sample_skill(RngStream&) const { return {}; }

std::vector<double> Module::infer_task(const Mat&, const std::vector<double>&) {
  throw std::logic_error(std::string(kind_name(kind_)) + " does not infer tasks");
}

double Module::skill_accuracy(const replay::NStepBatch&) const {
  throw std::logic_error(std::string(kind_name(kind_)) + " has no skill discriminator");
}

Mat Module::reward_components(const replay::NStepBatch&) const {
  throw std::logic_error(std::string(kind_name(kind_)) + " has no reward components");
}

void Module::register_net(const std::string& name, net::ParamSet* params) {
  registry_.push_back({name, params});
}

std::vector<ser::Section> Module::sections() const {
  std::vector<ser::Section> out;
  for (const auto& [name, params] : registry_) out.push_back({name, *params});
  return out;
}

void Module::restore(const std::vector<ser::Section>& sections) {
  for (auto& [name, params] : registry_) {
    bool found = false;
    for (const auto& s : sections) {
      if (s.name != name) continue;
      if (!params->same_layout(s.params))
        throw std::invalid_argument("restore: layout mismatch in section '" + name + "'");
      net::copy_values(s.params, *params);
      found = true;
      break;
    }
    if (!found) throw std::invalid_argument("restore: missing section '" + name + "'");
  }
}

net::ParamSet* Module::mutable_params(const std::string& name) {
  for (auto& [n, params] : registry_)
    if (n == name) return params;
  return nullptr;
}

std::unique_ptr<Module> make_module(Kind kind, int obs_width, int action_width,
                                    const IntrinsicConfig& cfg, RngStream rng) {
  switch (kind) {
    case Kind::icm: return make_icm(obs_width, action_width, cfg, rng);
    case Kind::disagreement: return make_disagreement(obs_width, action_width, cfg, rng);
    case Kind::rnd: return make_rnd(obs_width, action_width, cfg, rng);
    case Kind::apt: return make_apt(obs_width, action_width, cfg, rng);
    case Kind::proto: return make_proto(obs_width, action_width, cfg, rng);
    case Kind::smm: return make_smm(obs_width, action_width, cfg, rng);
    case Kind::diayn: return make_diayn(obs_width, action_width, cfg, rng);
    case Kind::aps: return make_aps(obs_width, action_width, cfg, rng);
  }
  throw std::logic_error("make_module: bad kind");
}

std::vector<double> ridge_solve(const Mat& psi, const std::vector<double>& rewards,
                                double lambda) {
  if (psi.rows != int(rewards.size())) throw std::invalid_argument("ridge_solve: row mismatch");
  if (psi.rows == 0 || psi.cols == 0) throw std::invalid_argument("ridge_solve: empty system");
  int d = psi.cols;

  // Normal equations G w = b with G = psi^T psi + lambda I.
  Mat g(d, d);
  std::vector<double> b(size_t(d), 0.0);
  for (int r = 0; r < psi.rows; ++r) {
    for (int i = 0; i < d; ++i) {
      b[size_t(i)] += psi(r, i) * rewards[size_t(r)];
      for (int j = i; j < d; ++j) g(i, j) += psi(r, i) * psi(r, j);
    }
  }
  for (int i = 0; i < d; ++i) {
    g(i, i) += lambda;
    for (int j = 0; j < i; ++j) g(i, j) = g(j, i);
  }

  // Cholesky G = L L^T, then two triangular solves.
  Mat l(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = g(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(s > 0.0)) throw std::runtime_error("ridge_solve: matrix not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  std::vector<double> y(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    double s = b[size_t(i)];
    for (int k = 0; k < i; ++k) s -= l(i, k) * y[size_t(k)];
    y[size_t(i)] = s / l(i, i);
  }
  std::vector<double> w(static_cast<size_t>(d));
  for (int i = d - 1; i >= 0; --i) {
    double s = y[size_t(i)];
    for (int k = i + 1; k < d; ++k) s -= l(k, i) * w[size_t(k)];
    w[size_t(i)] = s / l(i, i);
  }
  return w;
}

Mat sinkhorn_targets(const Mat& logits, int iters) {
  int b = logits.rows, k = logits.cols;
  if (b == 0 || k == 0) throw std::invalid_argument("sinkhorn_targets: empty scores");
  Mat q(b, k);
  double mx = logits.v[0];
  for (double v : logits.v) mx = std::max(mx, v);
  double total = 0.0;
  for (size_t i = 0; i < q.v.size(); ++i) {
    q.v[i] = std::exp(logits.v[i] - mx);
    total += q.v[i];
  }
  for (auto& v : q.v) v /= total;

  for (int it = 0; it < iters; ++it) {
    for (int c = 0; c < k; ++c) {  // each prototype takes mass 1/k
      double s = 0.0;
      for (int r = 0; r < b; ++r) s += q(r, c);
      if (s > 0.0)
        for (int r = 0; r < b; ++r) q(r, c) /= s * double(k);
    }
    for (int r = 0; r < b; ++r) {  // each sample takes mass 1/b
      double s = 0.0;
      for (int c = 0; c < k; ++c) s += q(r, c);
      if (s > 0.0)
        for (int c = 0; c < k; ++c) q(r, c) /= s * double(b);
    }
  }
  for (auto& v : q.v) v *= double(b);  // rows now sum to 1
  return q;
}

Mat normalize_rows(const Mat& m, std::vector<double>* norms) {
  Mat out(m.rows, m.cols);
  if (norms) norms->assign(size_t(m.rows), 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) s += m(r, c) * m(r, c);
    double n = std::sqrt(s);
    if (norms) (*norms)[size_t(r)] = n;
    double inv = n > 0.0 ? 1.0 / n : 0.0;
    for (int c = 0; c < m.cols; ++c) out(r, c) = m(r, c) * inv;
  }
  return out;
}

Mat normalize_rows_bwd(const Mat& raw, const Mat& unit, const std::vector<double>& norms,
                       const Mat& d_unit) {
  (void)raw;
  Mat out(unit.rows, unit.cols);
  for (int r = 0; r < unit.rows; ++r) {
    double n = norms[size_t(r)];
    if (!(n > 0.0)) continue;  // zero rows have zero gradient
    double dot = 0.0;
    for (int c = 0; c < unit.cols; ++c) dot += d_unit(r, c) * unit(r, c);
    for (int c = 0; c < unit.cols; ++c) out(r, c) = (d_unit(r, c) - dot * unit(r, c)) / n;
  }
  return out;
}

}  // namespace urlb::intrinsic
