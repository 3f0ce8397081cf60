#include "urlb/selftest.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <vector>

#include "urlb/envs.hpp"
#include "urlb/intrinsic.hpp"
#include "urlb/kernels.hpp"
#include "urlb/knn.hpp"
#include "urlb/normalizer.hpp"
#include "urlb/protocol.hpp"
#include "urlb/rng.hpp"
#include "urlb/serialize.hpp"

namespace urlb::selftest {

namespace {

struct Reporter {
  std::ostream& os;
  int failures = 0;

  void check(const char* name, bool ok) {
    os << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  }
};

bool kernel_backends_agree() {
  RngStream rng(99);
  std::vector<double> a(257), b(257);
  for (auto& v : a) v = rng.gaussian();
  for (auto& v : b) v = rng.gaussian();
  bool ok = true;
  for (size_t n : {size_t(1), size_t(7), size_t(64), size_t(257)}) {
    double d1 = kernels::scalar::dot(a.data(), b.data(), n);
    double d2 = kernels::dot(a.data(), b.data(), n);
    double s1 = kernels::scalar::sq_dist(a.data(), b.data(), n);
    double s2 = kernels::sq_dist(a.data(), b.data(), n);
    ok = ok && d1 == d2 && s1 == s2;
  }
  return ok;
}

bool particle_fixture() {
  Mat z(4, 1);
  z.v = {0.0, 1.0, 3.0, 6.0};
  auto r = knn::particle_entropy_reward(z, 2);
  return std::abs(r[0] - std::log(3.0)) <= 1e-12;
}

bool sinkhorn_uniform() {
  Mat logits(8, 16, 0.0);
  Mat q = intrinsic::sinkhorn_targets(logits, 3);
  for (double v : q.v)
    if (std::abs(v - 1.0 / 16.0) > 1e-12) return false;
  return true;
}

bool normalizer_clip() {
  intrinsic::RunningNormalizer norm(1);
  net::ParamSet s = norm.state();
  s.at("meta")(0, 0) = 1000.0;
  s.at("mean")(0, 0) = 0.0;
  s.at("m2")(0, 0) = 1000.0;
  norm.restore(s);
  Mat x(1, 1);
  x.v = {10.0};
  return norm.normalize(x)(0, 0) == 5.0;
}

bool ridge_identity() {
  Mat psi(10, 10);
  for (int i = 0; i < 10; ++i) psi(i, i) = 1.0;
  std::vector<double> r(10, 0.0);
  r[2] = 1.0;
  auto w = intrinsic::ridge_solve(psi, r, 1e-6);
  for (int i = 0; i < 10; ++i)
    if (std::abs(w[size_t(i)] - (i == 2 ? 1.0 : 0.0)) > 1e-5) return false;
  return true;
}

bool disagreement_variance() {
  // Population variance of {1, 2, 3}.
  double mean = 2.0, var = 0.0;
  for (double v : {1.0, 2.0, 3.0}) var += (v - mean) * (v - mean) / 3.0;
  return std::abs(var - 2.0 / 3.0) <= 1e-12;
}

bool smm_cancellation() {
  double v = intrinsic::smm_combine(-std::log(4.0), -std::log(4.0), -std::log(4.0),
                                    std::log(0.25));
  return std::abs(v) <= 1e-12;
}

bool tolerance_shape() {
  bool ok = envs::tolerance_reward(0.0, 0.1, 0.5) == 1.0;
  ok = ok && envs::tolerance_reward(0.1, 0.1, 0.5) == 1.0;
  ok = ok && std::abs(envs::tolerance_reward(0.6, 0.1, 0.5) - 0.1) <= 1e-12;
  return ok;
}

bool aggregate_fixture() {
  std::vector<results::EvalRecord> recs(2);
  for (auto& r : recs) {
    r.algorithm = "apt";
    r.category = "data";
    r.snapshot_step = 5000;
  }
  recs[0].normalized = 0.4;
  recs[1].normalized = 0.6;
  auto rows = protocol::aggregate(recs, protocol::GroupBy::category);
  return rows.size() == 1 && std::abs(rows[0].mean - 0.5) <= 1e-12 &&
         std::abs(rows[0].std_error - 0.1) <= 1e-12 && rows[0].n == 2;
}

bool serialize_round_trip() {
  RngStream rng(5);
  net::ParamSet p;
  p.entries.push_back({"w", Mat(3, 5)});
  p.entries.push_back({"b", Mat(1, 5)});
  for (auto& [name, m] : p.entries)
    for (auto& v : m.v) v = rng.gaussian();
  std::ostringstream os(std::ios::binary);
  ser::write_container(os, {{"net", p}});
  std::istringstream is(os.str(), std::ios::binary);
  auto back = ser::read_container(is);
  if (back.size() != 1 || back[0].name != "net") return false;
  std::ostringstream os2(std::ios::binary);
  ser::write_container(os2, back);
  return os.str() == os2.str();
}

bool diayn_chance_level() {
  intrinsic::IntrinsicConfig cfg;
  cfg.rep_dim = 4;
  cfg.hidden = 8;
  auto mod = intrinsic::make_module(intrinsic::Kind::diayn, 2, 1, cfg, RngStream(6));
  for (const char* net : {"trunk", "head"}) {
    net::ParamSet* p = mod->mutable_params(net);
    for (auto& [name, m] : p->entries)
      for (auto& v : m.v) v = 0.0;
  }
  replay::NStepBatch b;
  b.obs = Mat(3, 2);
  b.action = Mat(3, 1);
  b.obs_after_n = Mat(3, 2);
  b.skill = Mat(3, 16);
  RngStream rng(7);
  for (auto& v : b.obs_after_n.v) v = rng.gaussian();
  for (int i = 0; i < 3; ++i) b.skill(i, i) = 1.0;
  b.reward_sum.assign(3, 0.0);
  b.effective_n.assign(3, 1);
  for (double v : mod->compute_rewards(b))
    if (v != 0.0) return false;
  return true;
}

}  // namespace

int run(std::ostream& os) {
  Reporter rep{os};
  rep.check("kernel backends agree bitwise", kernel_backends_agree());
  rep.check("particle estimator line fixture", particle_fixture());
  rep.check("sinkhorn uniform targets", sinkhorn_uniform());
  rep.check("running normalizer clips at 5", normalizer_clip());
  rep.check("ridge recovers a basis reward", ridge_identity());
  rep.check("ensemble variance arithmetic", disagreement_variance());
  rep.check("state-matching reward cancellation", smm_cancellation());
  rep.check("tolerance reward shape", tolerance_shape());
  rep.check("aggregation mean and stderr", aggregate_fixture());
  rep.check("parameter container round trip", serialize_round_trip());
  rep.check("uniform discriminator chance level", diayn_chance_level());
  os << (rep.failures == 0 ? "selftest: all checks passed\n"
                           : "selftest: " + std::to_string(rep.failures) + " check(s) failed\n");
  return rep.failures;
}

}  // namespace urlb::selftest
