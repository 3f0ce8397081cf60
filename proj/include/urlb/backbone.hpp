#pragma once

#include <functional>
#include <string>
#include <vector>

#include "urlb/mat.hpp"
#include "urlb/mlp.hpp"
#include "urlb/replay.hpp"
#include "urlb/rng.hpp"
#include "urlb/serialize.hpp"

namespace urlb::backbone {

struct BackboneConfig {
  double gamma = 0.99;
  double lr = 1e-4;
  double tau_q = 0.01;
  int batch = 1024;
  int nstep = 3;
  int update_every = 2;
  int seed_frames = 4000;
  int hidden_dim = 1024;
  int feature_dim = 1024;
  double stddev = 0.2;
  double stddev_clip = 0.3;
  // The stddev_clip hyperparameter is read as TD3-style target-smoothing
  // noise. This switch isolates that interpretation; off means plain
  // noiseless bootstrap actions.
  bool target_noise = true;
};

enum class ActMode { explore, eval };

struct UpdateStats {
  bool updated = false;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double reward_mean = 0.0;
};

// Deterministic-actor agent: tanh actor, twin critics with min-backup
// against EMA target copies, optional skill conditioning by concatenating
// the skill after the (identity) state encoder.
class Agent {
 public:
  Agent(const BackboneConfig& cfg, int obs_width, int action_width, int skill_width,
        const RngStream& root_rng);

  const BackboneConfig& config() const { return cfg_; }
  int obs_width() const { return obs_width_; }
  int action_width() const { return action_width_; }
  int skill_width() const { return skill_width_; }

  std::vector<double> act(const std::vector<double>& obs, const std::vector<double>& skill,
                          ActMode mode, int global_step);

  // Deterministic policy on a batch of (obs || skill) rows.
  Mat policy(const Mat& obs, const Mat& skill) const;
  // Min over the twin critics at explicit actions.
  Mat critic_min(const Mat& obs, const Mat& skill, const Mat& action) const;

  std::vector<double> critic_target_value(const replay::NStepBatch& batch);
  double update_critic(const replay::NStepBatch& batch);
  double update_actor(const replay::NStepBatch& batch);

  // Rewards for the sampled batch: intrinsic during pretraining, stored
  // n-step sums during finetuning.
  using RewardSource = std::function<std::vector<double>(const replay::NStepBatch&)>;

  UpdateStats agent_update_tick(const replay::ReplayBuffer& buffer, int global_step,
                                const RewardSource& rewards);

  void ema_tick();

  std::vector<ser::Section> sections() const;
  void restore(const std::vector<ser::Section>& sections);

  const net::ParamSet& actor_params() const { return actor_; }
  const net::ParamSet& critic1_params() const { return critic1_; }
  const net::ParamSet& critic2_params() const { return critic2_; }
  const net::ParamSet& critic1_target_params() const { return critic1_target_; }
  net::ParamSet& mutable_critic1_target() { return critic1_target_; }
  net::ParamSet& mutable_critic2_target() { return critic2_target_; }
  net::ParamSet& mutable_critic1() { return critic1_; }
  net::ParamSet& mutable_critic2() { return critic2_; }
  net::ParamSet& mutable_actor() { return actor_; }
  const net::MLPSpec& actor_spec() const { return actor_spec_; }
  const net::MLPSpec& critic_spec() const { return critic_spec_; }

 private:
  Mat critic_forward(const net::ParamSet& params, const Mat& input, net::Tape* tape) const;

  BackboneConfig cfg_;
  int obs_width_;
  int action_width_;
  int skill_width_;

  net::MLPSpec actor_spec_;
  net::MLPSpec critic_spec_;
  net::ParamSet actor_;
  net::ParamSet critic1_;
  net::ParamSet critic2_;
  net::ParamSet critic1_target_;
  net::ParamSet critic2_target_;
  net::AdamState actor_opt_;
  net::AdamState critic1_opt_;
  net::AdamState critic2_opt_;

  RngStream act_rng_;
  RngStream sample_rng_;
  RngStream target_noise_rng_;
};

}  // namespace urlb::backbone
