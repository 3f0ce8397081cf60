#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "intrinsic_util.hpp"
#include "urlb/intrinsic.hpp"
#include "urlb/kernels.hpp"

namespace urlb::intrinsic {

namespace {

// Batch-entropy maximization: particle rewards over a representation
// trained with forward and inverse dynamics heads.
class AptModule final : public Module {
 public:
  AptModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::apt, obs_w, act_w),
        cfg_(cfg),
        identity_enc_(cfg.rep_dim == 0),
        rep_(identity_enc_ ? obs_w : cfg.rep_dim) {
    if (!identity_enc_) {
      RngStream r = rng.fork("encoder");
      enc_ = NetBundle({{obs_w, cfg.hidden, rep_}}, r);
      register_net("encoder", &enc_.params);
    }
    RngStream rf = rng.fork("forward");
    fwd_ = NetBundle({{rep_ + act_w, cfg.hidden, rep_}}, rf);
    RngStream ri = rng.fork("inverse");
    inv_ = NetBundle({{2 * rep_, cfg.hidden, act_w}}, ri);
    register_net("forward", &fwd_.params);
    register_net("inverse", &inv_.params);
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat z = identity_enc_ ? batch.obs_after_n : enc_.fwd(batch.obs_after_n);
    auto form = cfg_.particle_sum_logs ? knn::ParticleForm::sum_log1p
                                       : knn::ParticleForm::log1p_mean;
    return knn::particle_entropy_reward(z, cfg_.knn_k, form);
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    int n = batch.size();
    net::Tape tz, tzn;
    Mat z = identity_enc_ ? batch.obs : enc_.fwd(batch.obs, &tz);
    Mat zn = identity_enc_ ? batch.obs_after_n : enc_.fwd(batch.obs_after_n, &tzn);

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

    Mat dinf, dini;
    net::ParamSet fg = net::backward(fwd_.spec, fwd_.params, tf, df, &dinf);
    net::ParamSet ig = net::backward(inv_.spec, inv_.params, ti, da, &dini);
    if (!identity_enc_) {
      // Unlike ICM, the encoder trains through both heads.
      Mat dz = col_slice(dinf, 0, rep_);
      Mat dz_i = col_slice(dini, 0, rep_);
      for (size_t i = 0; i < dz.v.size(); ++i) dz.v[i] += dz_i.v[i];
      net::ParamSet eg = net::backward(enc_.spec, enc_.params, tz, dz);
      add_grads(eg, net::backward(enc_.spec, enc_.params, tzn, col_slice(dini, rep_, 2 * rep_)));
      enc_.step(eg, cfg_.lr);
    }
    fwd_.step(fg, cfg_.lr);
    inv_.step(ig, cfg_.lr);
    return {{"forward", forward_loss}, {"inverse", inverse_loss}};
  }

 private:
  IntrinsicConfig cfg_;
  bool identity_enc_;
  int rep_;
  NetBundle enc_, fwd_, inv_;
};

// Prototype clustering in a projected space; rewards are particle distances
// to candidate embeddings drawn from a queue of recent target projections.
class ProtoModule final : public Module {
 public:
  ProtoModule(int obs_w, int act_w, const IntrinsicConfig& cfg, RngStream rng)
      : Module(Kind::proto, obs_w, act_w),
        cfg_(cfg),
        identity_enc_(cfg.rep_dim == 0),
        proj_(identity_enc_ ? obs_w : cfg.rep_dim),
        queue_(cfg.proto_queue, proj_) {
    if (!identity_enc_) {
      RngStream r = rng.fork("encoder");
      enc_ = NetBundle({{obs_w, cfg.hidden, proj_}}, r);
      enc_target_ = enc_.params;
      register_net("encoder", &enc_.params);
      register_net("encoder_target", &enc_target_);
    }
    RngStream rp = rng.fork("predictor");
    pred_ = NetBundle({{proj_, cfg.proto_pred_dim, proj_}}, rp);
    register_net("predictor", &pred_.params);

    RngStream rc = rng.fork("prototypes");
    Mat c(cfg.proto_count, proj_);
    for (auto& v : c.v) v = rc.gaussian();
    protos_.add("c", normalize_rows(c));
    proto_adam_ = net::AdamState::like(protos_);
    register_net("prototypes", &protos_);
  }

  std::vector<double> compute_rewards(const replay::NStepBatch& batch) const override {
    Mat z = embed(batch.obs_after_n);
    auto form = cfg_.particle_sum_logs ? knn::ParticleForm::sum_log1p
                                       : knn::ParticleForm::log1p_mean;
    Mat cand = candidate_set();
    if (cand.rows < cfg_.proto_knn_k)
      return knn::particle_entropy_reward(z, cfg_.proto_knn_k, form);

    auto near = knn::knn_distances(z, cand, cfg_.proto_knn_k);
    std::vector<double> r(near.size());
    for (size_t i = 0; i < near.size(); ++i) {
      if (form == knn::ParticleForm::log1p_mean) {
        double sum = 0.0;
        for (double d : near[i]) sum += d;
        r[i] = std::log1p(sum / double(cfg_.proto_knn_k));
      } else {
        double sum = 0.0;
        for (double d : near[i]) sum += std::log1p(d);
        r[i] = sum;
      }
    }
    return r;
  }

  std::map<std::string, double> update(const replay::NStepBatch& batch) override {
    const Mat& x = batch.obs_after_n;
    int n = batch.size();
    int kproto = cfg_.proto_count;

    net::Tape tz, tp;
    Mat s = identity_enc_ ? x : enc_.fwd(x, &tz);
    Mat u = pred_.fwd(s, &tp);
    std::vector<double> norms;
    Mat uhat = normalize_rows(u, &norms);

    const Mat& c = protos_.at("c");
    Mat scores(n, kproto);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < kproto; ++k)
        scores(i, k) = kernels::dot(uhat.row(i), c.row(k), proj_) / cfg_.proto_temp;
    Mat logp = log_softmax_rows(scores);
    Mat p = logp;
    for (auto& v : p.v) v = std::exp(v);

    Mat st = embed(x);
    Mat sthat = normalize_rows(st);
    Mat tscores(n, kproto);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < kproto; ++k)
        tscores(i, k) = kernels::dot(sthat.row(i), c.row(k), proj_) / cfg_.proto_temp;
    Mat targets = sinkhorn_targets(tscores, cfg_.sinkhorn_iters);

    double loss = 0.0;
    Mat dscore(n, kproto);
    for (size_t i = 0; i < p.v.size(); ++i) {
      loss -= targets.v[i] * logp.v[i];
      dscore.v[i] = (p.v[i] - targets.v[i]) / double(n);
    }
    loss /= double(n);

    Mat duhat(n, proj_);
    net::ParamSet cg = protos_.zeros_like();
    Mat& dc = cg.at("c");
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < kproto; ++k) {
        double g = dscore(i, k) / cfg_.proto_temp;
        for (int j = 0; j < proj_; ++j) {
          duhat(i, j) += g * c(k, j);
          dc(k, j) += g * uhat(i, j);
        }
      }

    Mat du = normalize_rows_bwd(u, uhat, norms, duhat);
    Mat ds;
    net::ParamSet pg = net::backward(pred_.spec, pred_.params, tp, du, &ds);
    if (!identity_enc_) {
      net::ParamSet eg = net::backward(enc_.spec, enc_.params, tz, ds);
      enc_.step(eg, cfg_.lr);
    }
    pred_.step(pg, cfg_.lr);
    net::adam_step(protos_, cg, proto_adam_, cfg_.lr);
    protos_.at("c") = normalize_rows(protos_.at("c"));

    if (!identity_enc_) net::ema_update(enc_.params, enc_target_, cfg_.proto_ema);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < proj_; ++j) queue_(queue_next_, j) = st(i, j);
      queue_next_ = (queue_next_ + 1) % queue_.rows;
      queue_count_ = std::min(queue_count_ + 1, queue_.rows);
    }
    return {{"cluster", loss}};
  }

  std::vector<ser::Section> sections() const override {
    auto out = Module::sections();
    net::ParamSet qs;
    qs.add("data", queue_);
    Mat meta(1, 2);
    meta(0, 0) = double(queue_count_);
    meta(0, 1) = double(queue_next_);
    qs.add("meta", meta);
    out.push_back({"queue", qs});
    return out;
  }

  void restore(const std::vector<ser::Section>& sections) override {
    Module::restore(sections);
    for (const auto& s : sections)
      if (s.name == "queue") {
        queue_ = s.params.at("data");
        queue_count_ = int(s.params.at("meta")(0, 0));
        queue_next_ = int(s.params.at("meta")(0, 1));
        return;
      }
    throw std::invalid_argument("restore: missing section 'queue'");
  }

 private:
  Mat embed(const Mat& x) const {
    return identity_enc_ ? x : net::forward(enc_.spec, enc_target_, x);
  }

  // Union of the nearest queue entries per prototype, deduplicated.
  Mat candidate_set() const {
    if (queue_count_ == 0) return Mat(0, proj_);
    int per = std::min(cfg_.proto_candidates, queue_count_);
    Mat stored(queue_count_, proj_);
    for (int i = 0; i < queue_count_; ++i)
      for (int j = 0; j < proj_; ++j) stored(i, j) = queue_(i, j);

    std::vector<bool> picked(size_t(queue_count_), false);
    const Mat& c = protos_.at("c");
    std::vector<std::pair<double, int>> cand(static_cast<size_t>(queue_count_));
    for (int k = 0; k < c.rows; ++k) {
      for (int i = 0; i < queue_count_; ++i)
        cand[size_t(i)] = {std::sqrt(kernels::sq_dist(c.row(k), stored.row(i), proj_)), i};
      std::sort(cand.begin(), cand.end());
      for (int i = 0; i < per; ++i) picked[size_t(cand[size_t(i)].second)] = true;
    }
    int m = 0;
    for (bool b : picked) m += b ? 1 : 0;
    Mat out(m, proj_);
    int r = 0;
    for (int i = 0; i < queue_count_; ++i) {
      if (!picked[size_t(i)]) continue;
      for (int j = 0; j < proj_; ++j) out(r, j) = stored(i, j);
      ++r;
    }
    return out;
  }

  IntrinsicConfig cfg_;
  bool identity_enc_;
  int proj_;
  NetBundle enc_, pred_;
  net::ParamSet enc_target_;
  net::ParamSet protos_;
  net::AdamState proto_adam_;
  Mat queue_;
  int queue_count_ = 0;
  int queue_next_ = 0;
};

}  // namespace

std::unique_ptr<Module> make_apt(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                 RngStream rng) {
  return std::make_unique<AptModule>(obs_w, act_w, cfg, rng);
}
std::unique_ptr<Module> make_proto(int obs_w, int act_w, const IntrinsicConfig& cfg,
                                   RngStream rng) {
  return std::make_unique<ProtoModule>(obs_w, act_w, cfg, rng);
}

}  // namespace urlb::intrinsic
