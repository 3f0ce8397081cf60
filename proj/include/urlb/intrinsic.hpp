#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "urlb/knn.hpp"
#include "urlb/mat.hpp"
#include "urlb/mlp.hpp"
#include "urlb/normalizer.hpp"
#include "urlb/replay.hpp"
#include "urlb/rng.hpp"
#include "urlb/serialize.hpp"

namespace urlb::intrinsic {

enum class Kind { icm, disagreement, rnd, apt, proto, smm, diayn, aps };
enum class Category { knowledge, data, competence };
enum class SkillForm { none, onehot, box, unit_sphere };

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& s);
Category category_of(Kind k);
const char* category_name(Category c);
std::vector<Kind> all_kinds();

struct IntrinsicConfig {
  // Shared widths; shrink these for small-scale runs.
  int rep_dim = 512;  // 0 selects the identity encoder where one exists
  int hidden = 1024;
  double lr = 1e-4;
  int knn_k = 12;
  bool particle_sum_logs = false;

  int ensemble = 5;  // disagreement forward models

  int proto_count = 512;
  int proto_pred_dim = 128;
  int proto_candidates = 4;  // per prototype
  int proto_knn_k = 3;
  int proto_queue = 2048;
  double proto_temp = 0.1;
  double proto_ema = 0.05;
  int sinkhorn_iters = 3;

  int diayn_skills = 16;
  int skill_every = 50;  // environment steps between skill resamples

  int smm_skills = 4;
  int smm_latent = 16;
  double smm_vae_lr = 1e-2;
  double smm_disc_lr = 1e-3;
  double smm_box_volume = 64.0;  // observation bounding-box volume

  int aps_sf_dim = 10;
  double aps_lsq_lambda = 1e-6;
  double gamma = 0.99;  // successor-feature TD discount
};

// One pluggable intrinsic-reward algorithm: batch reward computation plus a
// self-supervised update, and skill handling where the algorithm uses one.
// compute_rewards never mutates module state; running statistics move only
// inside update().
class Module {
 public:
  Module(Kind kind, int obs_width, int action_width);
  virtual ~Module() = default;

  Kind kind() const { return kind_; }
  Category category() const { return category_of(kind_); }
  int obs_width() const { return obs_width_; }
  int action_width() const { return action_width_; }

  virtual int skill_width() const { return 0; }
  virtual SkillForm skill_form() const { return SkillForm::none; }
  virtual std::vector<double> sample_skill(RngStream& rng) const;
  // Enumerable skills for finetune selection; empty when not applicable.
  virtual std::vector<std::vector<double>> candidate_skills() const { return {}; }

  virtual std::vector<double> compute_rewards(const replay::NStepBatch& batch) const = 0;
  virtual std::map<std::string, double> update(const replay::NStepBatch& batch) = 0;

  // APS only: least-squares task vector from reward-labelled observations.
  virtual std::vector<double> infer_task(const Mat& obs, const std::vector<double>& rewards);
  // DIAYN/SMM: discriminator accuracy against the batch's active skills.
  virtual double skill_accuracy(const replay::NStepBatch& batch) const;
  // SMM: per-row additive reward terms, for auditing the combination rule.
  virtual Mat reward_components(const replay::NStepBatch& batch) const;

  virtual std::vector<ser::Section> sections() const;
  virtual void restore(const std::vector<ser::Section>& sections);
  // Direct access to a named net for tests and snapshot audits.
  net::ParamSet* mutable_params(const std::string& name);

 protected:
  void register_net(const std::string& name, net::ParamSet* params);

 private:
  Kind kind_;
  int obs_width_;
  int action_width_;
  std::vector<std::pair<std::string, net::ParamSet*>> registry_;
};

std::unique_ptr<Module> make_module(Kind kind, int obs_width, int action_width,
                                    const IntrinsicConfig& cfg, RngStream rng);

// min_w |psi w - r|^2 + lambda |w|^2 via the normal equations (Cholesky).
std::vector<double> ridge_solve(const Mat& psi, const std::vector<double>& rewards,
                                double lambda);

// Balanced soft assignments from similarity logits: rows sum to 1, column
// masses equalized by the given number of Sinkhorn-Knopp sweeps.
Mat sinkhorn_targets(const Mat& logits, int iters);

// The four-term state-marginal-matching reward combination.
inline double smm_combine(double log_p_star, double log_q, double log_p_w, double log_d) {
  return log_p_star - log_q - log_p_w + log_d;
}

}  // namespace urlb::intrinsic
