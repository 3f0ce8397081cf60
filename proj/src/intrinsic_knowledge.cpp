#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "intrinsic_util.hpp"
#include "urlb/intrinsic.hpp"

namespace urlb::intrinsic {

namespace {

// Curiosity by forward-model error in a learned representation. The encoder
// trains only through the inverse-dynamics head so it cannot erase reward
// by collapsing.
class IcmModule final : public Module {
 public:
  IcmModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::icm, obs_w, act_w),
        cfg_(cfg),
        identity_enc_(cfg.rep_dim == 0),
        rep_(identity_enc_ ? obs_w : cfg.rep_dim) {
    if (!identity_enc_) {
      RngStream r = rng.fork("encoder");
      enc_ = NetBundle({{obs_w, cfg.hidden, rep_}}, r);
      register_net("encoder", &enc_.params);
    }
    RngStream rf = rng.fork("forward");
    fwd_ = NetBundle({{rep_ + act_w, cfg.hidden, cfg.hidden, rep_}}, rf);
    RngStream ri = rng.fork("inverse");
    inv_ = NetBundle({{2 * rep_, cfg.hidden, cfg.hidden, act_w}}, ri);
    register_net("forward", &fwd_.params);
    register_net("inverse", &inv_.params);
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat z = encode(batch.obs);
    Mat zn = encode(batch.obs_after_n);
    Mat pred = fwd_.fwd(hconcat(z, batch.action));
    std::vector<double> r(static_cast<size_t>(batch.size()));
    for (int i = 0; i < batch.size(); ++i) {
      double raw = 0.0;
      for (int c = 0; c < rep_; ++c) {
        double d = pred(i, c) - zn(i, c);
        raw += d * d;
      }
      r[size_t(i)] = std::log1p(raw);
    }
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    int n = batch.size();
    net::Tape tz, tzn;
    Mat z = identity_enc_ ? batch.obs : enc_.fwd(batch.obs, &tz);
    Mat zn = identity_enc_ ? batch.obs_after_n : enc_.fwd(batch.obs_after_n, &tzn);

    // Forward head: representations enter as constants.
    net::Tape tf;
    Mat pred = fwd_.fwd(hconcat(z, batch.action), &tf);
    Mat df(n, rep_);
    double forward_loss = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
      double e = pred.v[i] - zn.v[i];
      forward_loss += e * e;
      df.v[i] = 2.0 * e / double(n);
    }
    forward_loss /= double(n);
    fwd_.step(net::backward(fwd_.spec, fwd_.params, tf, df), cfg_.lr);

    // Inverse head; its input gradient trains the encoder.
    net::Tape ti;
    Mat ahat = inv_.fwd(hconcat(z, zn), &ti);
    Mat da(n, action_width());
    double inverse_loss = 0.0;
    for (size_t i = 0; i < ahat.v.size(); ++i) {
      double e = ahat.v[i] - batch.action.v[i];
      inverse_loss += e * e;
      da.v[i] = 2.0 * e / double(n);
    }
    inverse_loss /= double(n);
    Mat din;
    net::ParamSet ig = net::backward(inv_.spec, inv_.params, ti, da, &din);
    if (!identity_enc_) {
      net::ParamSet eg = net::backward(enc_.spec, enc_.params, tz, col_slice(din, 0, rep_));
      add_grads(eg, net::backward(enc_.spec, enc_.params, tzn, col_slice(din, rep_, 2 * rep_)));
      enc_.step(eg, cfg_.lr);
    }
    inv_.step(ig, cfg_.lr);
    return {{"forward", forward_loss}, {"inverse", inverse_loss}};
  }

 private:
  Mat encode(const Mat& x) const { return identity_enc_ ? x : enc_.fwd(x); }

  IntrinsicConfig cfg_;
  bool identity_enc_;
  int rep_;
  NetBundle enc_, fwd_, inv_;
};

// Novelty as prediction variance across an ensemble of forward models that
// differ only by initialization.
class DisagreementModule final : public Module {
 public:
  DisagreementModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::disagreement, obs_w, act_w), cfg_(cfg) {
    if (cfg.ensemble < 2) throw std::invalid_argument("disagreement: ensemble must be >= 2");
    members_.reserve(size_t(cfg.ensemble));  // registry keeps pointers into the vector
    for (int m = 0; m < cfg.ensemble; ++m) {
      RngStream r = rng.fork("member" + std::to_string(m));
      members_.push_back(NetBundle({{obs_w + act_w, cfg.hidden, cfg.hidden, obs_w}}, r));
      register_net("member" + std::to_string(m), &members_.back().params);
    }
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat in = hconcat(batch.obs, batch.action);
    std::vector<Mat> preds;
    preds.reserve(members_.size());
    for (const auto& m : members_) preds.push_back(m.fwd(in));

    int nm = int(members_.size());
    std::vector<double> r(size_t(batch.size()), 0.0);
    for (int i = 0; i < batch.size(); ++i) {
      double acc = 0.0;
      for (int c = 0; c < obs_width(); ++c) {
        double mean = 0.0;
        for (const auto& p : preds) mean += p(i, c);
        mean /= double(nm);
        double var = 0.0;
        for (const auto& p : preds) {
          double d = p(i, c) - mean;
          var += d * d;
        }
        acc += var / double(nm);
      }
      r[size_t(i)] = acc / double(obs_width());
    }
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    Mat in = hconcat(batch.obs, batch.action);
    int n = batch.size();
    double total = 0.0;
    for (auto& m : members_) {
      net::Tape tape;
      Mat pred = m.fwd(in, &tape);
      Mat dy(n, obs_width());
      double loss = 0.0;
      for (size_t i = 0; i < pred.v.size(); ++i) {
        double e = pred.v[i] - batch.obs_after_n.v[i];
        loss += e * e;
        dy.v[i] = 2.0 * e / double(n);
      }
      loss /= double(n);
      total += loss;
      m.step(net::backward(m.spec, m.params, tape, dy), cfg_.lr);
    }
    return {{"model", total / double(members_.size())}};
  }

 private:
  IntrinsicConfig cfg_;
  std::vector<NetBundle> members_;
};

// Prediction error against a frozen randomly initialized target net, on
// observations standardized by running statistics.
class RndModule final : public Module {
 public:
  RndModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::rnd, obs_w, act_w), cfg_(cfg), norm_(obs_w, 5.0) {
    int rep = cfg.rep_dim == 0 ? obs_w : cfg.rep_dim;
    RngStream rp = rng.fork("predictor");
    predictor_ = NetBundle({{obs_w, cfg.hidden, cfg.hidden, rep}}, rp);
    RngStream rt = rng.fork("target");
    target_ = NetBundle({{obs_w, cfg.hidden, cfg.hidden, rep}}, rt);
    register_net("predictor", &predictor_.params);
    register_net("target", &target_.params);
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat x = norm_.normalize(batch.obs_after_n);
    Mat p = predictor_.fwd(x);
    Mat t = target_.fwd(x);
    std::vector<double> r(size_t(batch.size()), 0.0);
    for (int i = 0; i < batch.size(); ++i)
      for (int c = 0; c < p.cols; ++c) {
        double d = p(i, c) - t(i, c);
        r[size_t(i)] += d * d;
      }
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    int n = batch.size();
    Mat x = norm_.normalize(batch.obs_after_n);
    Mat t = target_.fwd(x);
    net::Tape tape;
    Mat p = predictor_.fwd(x, &tape);
    Mat dy(n, p.cols);
    double loss = 0.0;
    for (size_t i = 0; i < p.v.size(); ++i) {
      double e = p.v[i] - t.v[i];
      loss += e * e;
      dy.v[i] = 2.0 * e / double(n);
    }
    loss /= double(n);
    predictor_.step(net::backward(predictor_.spec, predictor_.params, tape, dy), cfg_.lr);
    norm_.update(batch.obs_after_n);
    return {{"predict", loss}};
  }

  std::vector<ser::Section> sections() const override {
    auto out = Module::sections();
    out.push_back({"normalizer", norm_.state()});
    return out;
  }

  void restore(const std::vector<ser::Section>& sections) override {
    Module::restore(sections);
    for (const auto& s : sections)
      if (s.name == "normalizer") {
        norm_.restore(s.params);
        return;
      }
    throw std::invalid_argument("restore: missing section 'normalizer'");
  }

  RunningNormalizer& normalizer() { return norm_; }

 private:
  IntrinsicConfig cfg_;
  NetBundle predictor_, target_;
  RunningNormalizer norm_;
};

}  // namespace

std::unique_ptr<Module> make_icm(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                 RngStream rng) {
  return std::make_unique<IcmModule>(obs_w, act_w, cfg, rng);
}
std::unique_ptr<Module> make_disagreement(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                          RngStream rng) {
  return std::make_unique<DisagreementModule>(obs_w, act_w, cfg, rng);
}
std::unique_ptr<Module> make_rnd(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                 RngStream rng) {
  return std::make_unique<RndModule>(obs_w, act_w, cfg, rng);
}

}  // namespace urlb::intrinsic
