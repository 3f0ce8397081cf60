#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "intrinsic_util.hpp"
#include "urlb/intrinsic.hpp"

namespace urlb::intrinsic {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::vector<double> onehot(int idx, int width) {
  std::vector<double> w(size_t(width), 0.0);
  w[size_t(idx)] = 1.0;
  return w;
}

int active_skill(const Mat& skill, int row) {
  int best = 0;
  for (int c = 1; c < skill.cols; ++c)
    if (skill(row, c) > skill(row, best)) best = c;
  return best;
}

// Discriminator trunk shared by DIAYN and SMM: obs -> representation ->
// skill logits, trained jointly by cross-entropy.
struct SkillDiscriminator {
  bool identity = false;
  NetBundle trunk;
  NetBundle head;

  SkillDiscriminator() = default;
  SkillDiscriminator(int obs_w, int rep, int hidden, int skills,
                     const std::vector<int>& head_hidden, RngStream& rng) {
    identity = rep == 0;
    int width = identity ? obs_w : rep;
    if (!identity) {
      RngStream rt = rng.fork("trunk");
      trunk = NetBundle({{obs_w, hidden, width}}, rt);
    }
    std::vector<int> widths = {width};
    for (int h : head_hidden) widths.push_back(h);
    widths.push_back(skills);
    RngStream rh = rng.fork("head");
    head = NetBundle({widths}, rh);
  }

  Mat logits(const Mat& x) const { return head.fwd(identity ? x : trunk.fwd(x)); }

  // One cross-entropy step; returns (loss, training accuracy).
  std::pair<double, double> train(const Mat& x, const Mat& skill, double lr) {
    int n = x.rows;
    net::Tape tt, th;
    Mat rep = identity ? x : trunk.fwd(x, &tt);
    Mat lg = head.fwd(rep, &th);
    Mat logp = log_softmax_rows(lg);
    Mat dlg(n, lg.cols);
    double loss = 0.0;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      int w = active_skill(skill, i);
      loss -= logp(i, w);
      if (argmax_row(lg, i) == w) ++hits;
      for (int c = 0; c < lg.cols; ++c)
        dlg(i, c) = (std::exp(logp(i, c)) - (c == w ? 1.0 : 0.0)) / double(n);
    }
    loss /= double(n);
    Mat drep;
    net::ParamSet hg = net::backward(head.spec, head.params, th, dlg, &drep);
    if (!identity) trunk.step(net::backward(trunk.spec, trunk.params, tt, drep), lr);
    head.step(hg, lr);
    return {loss, double(hits) / double(n)};
  }

  double accuracy(const Mat& x, const Mat& skill) const {
    Mat lg = logits(x);
    int hits = 0;
    for (int i = 0; i < x.rows; ++i)
      if (argmax_row(lg, i) == active_skill(skill, i)) ++hits;
    return double(hits) / double(x.rows);
  }
};

// State-marginal matching: reward combines a uniform target density, a
// skill-conditioned VAE density estimate, the skill prior, and the
// discriminator posterior.
class SmmModule final : public Module {
 public:
  SmmModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::smm, obs_w, act_w), cfg_(cfg), rng_(rng.fork("vae_noise")) {
    disc_ = SkillDiscriminator(obs_w, cfg.rep_dim, cfg.hidden, cfg.smm_skills, {cfg.hidden}, rng);
    RngStream re = rng.fork("vae_enc");
    venc_ = NetBundle({{obs_w + cfg.smm_skills, cfg.hidden, 2 * cfg.smm_latent}}, re);
    RngStream rd = rng.fork("vae_dec");
    vdec_ = NetBundle({{cfg.smm_latent + cfg.smm_skills, cfg.hidden, obs_w}}, rd);
    if (!disc_.identity) register_net("trunk", &disc_.trunk.params);
    register_net("head", &disc_.head.params);
    register_net("vae_enc", &venc_.params);
    register_net("vae_dec", &vdec_.params);
  }

  int skill_width() const override { return cfg_.smm_skills; }
  SkillForm skill_form() const override { return SkillForm::box; }

  std::vector<double> sample_skill(RngStream& rng) const override {
    return onehot(int(rng.uniform_index(uint64_t(cfg_.smm_skills))), cfg_.smm_skills);
  }

  std::vector<std::vector<double>> candidate_skills() const override {
    std::vector<std::vector<double>> out;
    for (int i = 0; i < cfg_.smm_skills; ++i) out.push_back(onehot(i, cfg_.smm_skills));
    return out;
  }

  Mat reward_components(const replay::NStepBatch& batch) const override {
    const Mat& x = batch.obs_after_n;
    int n = batch.size();
    Mat out(n, 4);

    std::vector<double> elbo = vae_log_density(x, batch.skill);
    Mat logd = log_softmax_rows(disc_.logits(x));
    for (int i = 0; i < n; ++i) {
      out(i, 0) = -std::log(cfg_.smm_box_volume);    // log p*
      out(i, 1) = elbo[size_t(i)];                   // log q_w
      out(i, 2) = -std::log(double(cfg_.smm_skills));  // log p(w)
      out(i, 3) = logd(i, active_skill(batch.skill, i));
    }
    return out;
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat t = reward_components(batch);
    std::vector<double> r(static_cast<size_t>(batch.size()));
    for (int i = 0; i < batch.size(); ++i)
      r[size_t(i)] = smm_combine(t(i, 0), t(i, 1), t(i, 2), t(i, 3));
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    const Mat& x = batch.obs_after_n;
    int n = batch.size();
    int lat = cfg_.smm_latent;

    // VAE step with a reparametrized latent sample.
    net::Tape te;
    Mat eout = venc_.fwd(hconcat(x, batch.skill), &te);
    Mat h(n, lat), eps(n, lat);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < lat; ++c) {
        eps(i, c) = rng_.gaussian();
        h(i, c) = eout(i, c) + std::exp(0.5 * eout(i, c + lat)) * eps(i, c);
      }
    net::Tape td;
    Mat recon = vdec_.fwd(hconcat(h, batch.skill), &td);

    double vae_loss = 0.0;
    Mat drecon(n, obs_width());
    for (size_t i = 0; i < recon.v.size(); ++i) {
      double e = recon.v[i] - x.v[i];
      vae_loss += 0.5 * e * e;
      drecon.v[i] = e / double(n);
    }
    Mat deout(n, 2 * lat);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < lat; ++c) {
        double mu = eout(i, c), logvar = eout(i, c + lat);
        vae_loss += 0.5 * (mu * mu + std::exp(logvar) - 1.0 - logvar);
        deout(i, c) = mu / double(n);
        deout(i, c + lat) = 0.5 * (std::exp(logvar) - 1.0) / double(n);
      }
    vae_loss /= double(n);

    Mat ddec_in;
    net::ParamSet dg = net::backward(vdec_.spec, vdec_.params, td, drecon, &ddec_in);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < lat; ++c) {
        double dh = ddec_in(i, c);
        deout(i, c) += dh;  // through the mean
        deout(i, c + lat) += dh * eps(i, c) * 0.5 * std::exp(0.5 * eout(i, c + lat));
      }
    net::ParamSet eg = net::backward(venc_.spec, venc_.params, te, deout);
    venc_.step(eg, cfg_.smm_vae_lr);
    vdec_.step(dg, cfg_.smm_vae_lr);

    auto [ce, acc] = disc_.train(x, batch.skill, cfg_.smm_disc_lr);
    return {{"vae", vae_loss}, {"discrim", ce}, {"discrim_acc", acc}};
  }

  double skill_accuracy(const replay::NStepBatch& batch) const override {
    return disc_.accuracy(batch.obs_after_n, batch.skill);
  }

 private:
  // Deterministic evidence lower bound at the mean latent, used as the
  // per-skill log-density estimate.
  std::vector<double> vae_log_density(const Mat& x, const Mat& skill) const {
    int n = x.rows;
    int lat = cfg_.smm_latent;
    Mat eout = venc_.fwd(hconcat(x, skill));
    Mat mu(n, lat);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < lat; ++c) mu(i, c) = eout(i, c);
    Mat recon = vdec_.fwd(hconcat(mu, skill));
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      double logp = -0.5 * double(obs_width()) * kLog2Pi;
      for (int c = 0; c < obs_width(); ++c) {
        double e = x(i, c) - recon(i, c);
        logp -= 0.5 * e * e;
      }
      double kl = 0.0;
      for (int c = 0; c < lat; ++c) {
        double m = eout(i, c), logvar = eout(i, c + lat);
        kl += 0.5 * (m * m + std::exp(logvar) - 1.0 - logvar);
      }
      out[size_t(i)] = logp - kl;
    }
    return out;
  }

  IntrinsicConfig cfg_;
  RngStream rng_;
  SkillDiscriminator disc_;
  NetBundle venc_, vdec_;
};

// Skill discrimination: reward is the discriminator's log-probability of
// the active skill, shifted by the uniform prior so chance level scores 0.
class DiaynModule final : public Module {
 public:
  DiaynModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::diayn, obs_w, act_w), cfg_(cfg) {
    disc_ = SkillDiscriminator(obs_w, cfg.rep_dim, cfg.hidden, cfg.diayn_skills,
                               {cfg.hidden, cfg.hidden}, rng);
    if (!disc_.identity) register_net("trunk", &disc_.trunk.params);
    register_net("head", &disc_.head.params);
  }

  int skill_width() const override { return cfg_.diayn_skills; }
  SkillForm skill_form() const override { return SkillForm::onehot; }

  std::vector<double> sample_skill(RngStream& rng) const override {
    return onehot(int(rng.uniform_index(uint64_t(cfg_.diayn_skills))), cfg_.diayn_skills);
  }

  std::vector<std::vector<double>> candidate_skills() const override {
    std::vector<std::vector<double>> out;
    for (int i = 0; i < cfg_.diayn_skills; ++i) out.push_back(onehot(i, cfg_.diayn_skills));
    return out;
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat logp = log_softmax_rows(disc_.logits(batch.obs_after_n));
    std::vector<double> r(static_cast<size_t>(batch.size()));
    for (int i = 0; i < batch.size(); ++i)
      r[size_t(i)] = logp(i, active_skill(batch.skill, i)) + std::log(double(cfg_.diayn_skills));
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    auto [ce, acc] = disc_.train(batch.obs_after_n, batch.skill, cfg_.lr);
    return {{"discrim", ce}, {"discrim_acc", acc}};
  }

  double skill_accuracy(const replay::NStepBatch& batch) const override {
    return disc_.accuracy(batch.obs_after_n, batch.skill);
  }

 private:
  IntrinsicConfig cfg_;
  SkillDiscriminator disc_;
};

// Successor features: particle entropy over psi outputs plus the cosine
// between psi and the active task vector.
class ApsModule final : public Module {
 public:
  ApsModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::aps, obs_w, act_w), cfg_(cfg), rng_(rng.fork("fallback")) {
    RngStream rp = rng.fork("psi");
    psi_ = NetBundle({{obs_w, cfg.hidden, cfg.hidden, cfg.aps_sf_dim}}, rp);
    register_net("psi", &psi_.params);
  }

  int skill_width() const override { return cfg_.aps_sf_dim; }
  SkillForm skill_form() const override { return SkillForm::unit_sphere; }

  std::vector<double> sample_skill(RngStream& rng) const override {
    std::vector<double> w(static_cast<size_t>(cfg_.aps_sf_dim));
    double norm = 0.0;
    while (!(norm > 0.0)) {
      for (auto& v : w) v = rng.gaussian();
      norm = 0.0;
      for (double v : w) norm += v * v;
      norm = std::sqrt(norm);
    }
    for (auto& v : w) v /= norm;
    return w;
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat f = psi_.fwd(batch.obs_after_n);
    auto form = cfg_.particle_sum_logs ? knn::ParticleForm::sum_log1p
                                       : knn::ParticleForm::log1p_mean;
    std::vector<double> r = knn::particle_entropy_reward(f, cfg_.knn_k, form);
    for (int i = 0; i < batch.size(); ++i) {
      double norm = 0.0, dot = 0.0;
      for (int c = 0; c < f.cols; ++c) {
        norm += f(i, c) * f(i, c);
        dot += batch.skill(i, c) * f(i, c);
      }
      norm = std::sqrt(norm);
      r[size_t(i)] += norm > 0.0 ? dot / norm : 0.0;
    }
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    int n = batch.size();
    net::Tape tape;
    Mat f = psi_.fwd(batch.obs, &tape);
    Mat fn = psi_.fwd(batch.obs_after_n);

    Mat df(n, f.cols);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      double norm = 0.0, pred = 0.0, boot = 0.0;
      for (int c = 0; c < f.cols; ++c) {
        norm += f(i, c) * f(i, c);
        pred += batch.skill(i, c) * f(i, c);
        boot += batch.skill(i, c) * fn(i, c);
      }
      norm = std::sqrt(norm);
      double cond = norm > 0.0 ? pred / norm : 0.0;
      double target =
          cond + std::pow(cfg_.gamma, double(batch.effective_n[size_t(i)])) * boot;
      double e = pred - target;
      loss += e * e;
      for (int c = 0; c < f.cols; ++c) df(i, c) = 2.0 * e / double(n) * batch.skill(i, c);
    }
    loss /= double(n);
    psi_.step(net::backward(psi_.spec, psi_.params, tape, df), cfg_.lr);
    return {{"sf", loss}};
  }

  std::vector<double> infer_task(const Mat& obs, const std::vector<double>& rewards) override {
    Mat psi = psi_.fwd(obs);
    std::vector<double> w = ridge_solve(psi, rewards, cfg_.aps_lsq_lambda);
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) return sample_skill(rng_);  // degenerate solution
    for (auto& v : w) v /= norm;
    return w;
  }

 private:
  IntrinsicConfig cfg_;
  RngStream rng_;
  NetBundle psi_;
};

}  // namespace

std::unique_ptr<Module> make_smm(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                 RngStream rng) {
  return std::make_unique<SmmModule>(obs_w, act_w, cfg, rng);
}
std::unique_ptr<Module> make_diayn(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                   RngStream rng) {
  return std::make_unique<DiaynModule>(obs_w, act_w, cfg, rng);
}
std::unique_ptr<Module> make_aps(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                 RngStream rng) {
  return std::make_unique<ApsModule>(obs_w, act_w, cfg, rng);
}

}  // namespace urlb::intrinsic
