#include "urlb/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace urlb::backbone {

Agent::Agent(const BackboneConfig& cfg, int obs_width, int action_width, int skill_width,
             const RngStream& root_rng)
    : cfg_(cfg), obs_width_(obs_width), action_width_(action_width), skill_width_(skill_width) {
  if (obs_width <= 0 || action_width <= 0 || skill_width < 0)
    throw std::invalid_argument("Agent: bad widths");

  int in = obs_width_ + skill_width_;
  actor_spec_ = {{in, cfg_.feature_dim, cfg_.hidden_dim, action_width_},
                 net::Activation::relu, net::Activation::tanh};
  critic_spec_ = {{in + action_width_, cfg_.feature_dim, cfg_.hidden_dim, 1},
                  net::Activation::relu, net::Activation::identity};

  RngStream init = root_rng.fork("init");
  auto actor_init = init.fork("actor");
  actor_ = net::init_params(actor_spec_, actor_init);
  auto c1_init = init.fork("critic1");
  critic1_ = net::init_params(critic_spec_, c1_init);
  auto c2_init = init.fork("critic2");
  critic2_ = net::init_params(critic_spec_, c2_init);
  critic1_target_ = critic1_;
  critic2_target_ = critic2_;

  actor_opt_ = net::AdamState::like(actor_);
  critic1_opt_ = net::AdamState::like(critic1_);
  critic2_opt_ = net::AdamState::like(critic2_);

  act_rng_ = root_rng.fork("act");
  sample_rng_ = root_rng.fork("sample");
  target_noise_rng_ = root_rng.fork("target_noise");
}

Mat Agent::policy(const Mat& obs, const Mat& skill) const {
  return net::forward(actor_spec_, actor_, hconcat(obs, skill));
}

Mat Agent::critic_forward(const net::ParamSet& params, const Mat& input, net::Tape* tape) const {
  return net::forward(critic_spec_, params, input, tape);
}

Mat Agent::critic_min(const Mat& obs, const Mat& skill, const Mat& action) const {
  Mat input = hconcat(hconcat(obs, skill), action);
  Mat q1 = net::forward(critic_spec_, critic1_, input);
  Mat q2 = net::forward(critic_spec_, critic2_, input);
  Mat out(q1.rows, 1);
  for (int r = 0; r < q1.rows; ++r) out(r, 0) = std::min(q1(r, 0), q2(r, 0));
  return out;
}

std::vector<double> Agent::act(const std::vector<double>& obs, const std::vector<double>& skill,
                               ActMode mode, int global_step) {
  if (int(obs.size()) != obs_width_) throw std::invalid_argument("act: obs width mismatch");
  if (int(skill.size()) != skill_width_) throw std::invalid_argument("act: skill width mismatch");

  if (mode == ActMode::explore && global_step < cfg_.seed_frames) {
    std::vector<double> a(static_cast<size_t>(action_width_));
    for (auto& v : a) v = act_rng_.uniform(-1.0, 1.0);
    return a;
  }

  Mat in(1, obs_width_ + skill_width_);
  for (int c = 0; c < obs_width_; ++c) in(0, c) = obs[size_t(c)];
  for (int c = 0; c < skill_width_; ++c) in(0, obs_width_ + c) = skill[size_t(c)];
  Mat out = net::forward(actor_spec_, actor_, in);

  std::vector<double> a(static_cast<size_t>(action_width_));
  for (int c = 0; c < action_width_; ++c) a[size_t(c)] = out(0, c);
  if (mode == ActMode::explore) {
    for (auto& v : a)
      v = std::clamp(v + cfg_.stddev * act_rng_.gaussian(), -1.0, 1.0);
  }
  return a;
}

std::vector<double> Agent::critic_target_value(const replay::NStepBatch& batch) {
  int n = batch.size();
  Mat next_in = hconcat(batch.obs_after_n, batch.skill);
  Mat a_next = net::forward(actor_spec_, actor_, next_in);

  if (cfg_.target_noise) {
    for (auto& v : a_next.v) {
      double noise = std::clamp(cfg_.stddev * target_noise_rng_.gaussian(), -cfg_.stddev_clip,
                                cfg_.stddev_clip);
      v = std::clamp(v + noise, -1.0, 1.0);
    }
  }

  Mat qin = hconcat(next_in, a_next);
  Mat q1 = critic_forward(critic1_target_, qin, nullptr);
  Mat q2 = critic_forward(critic2_target_, qin, nullptr);

  std::vector<double> y(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    double bootstrap = std::min(q1(r, 0), q2(r, 0));
    double discount = std::pow(cfg_.gamma, double(batch.effective_n[size_t(r)]));
    y[size_t(r)] = batch.reward_sum[size_t(r)] + discount * bootstrap;
  }
  return y;
}

double Agent::update_critic(const replay::NStepBatch& batch) {
  int n = batch.size();
  std::vector<double> y = critic_target_value(batch);

  Mat input = hconcat(hconcat(batch.obs, batch.skill), batch.action);

  net::Tape tape1, tape2;
  Mat q1 = critic_forward(critic1_, input, &tape1);
  Mat q2 = critic_forward(critic2_, input, &tape2);

  double loss = 0.0;
  Mat dy1(n, 1), dy2(n, 1);
  for (int r = 0; r < n; ++r) {
    double e1 = q1(r, 0) - y[size_t(r)];
    double e2 = q2(r, 0) - y[size_t(r)];
    loss += (e1 * e1 + e2 * e2) / n;
    dy1(r, 0) = 2.0 * e1 / n;
    dy2(r, 0) = 2.0 * e2 / n;
  }
  if (!std::isfinite(loss)) throw std::runtime_error("update_critic: non-finite loss");

  net::ParamSet g1 = net::backward(critic_spec_, critic1_, tape1, dy1);
  net::ParamSet g2 = net::backward(critic_spec_, critic2_, tape2, dy2);
  net::adam_step(critic1_, g1, critic1_opt_, cfg_.lr);
  net::adam_step(critic2_, g2, critic2_opt_, cfg_.lr);
  return loss;
}

double Agent::update_actor(const replay::NStepBatch& batch) {
  int n = batch.size();
  Mat state = hconcat(batch.obs, batch.skill);

  net::Tape actor_tape;
  Mat action = net::forward(actor_spec_, actor_, state, &actor_tape);

  Mat input = hconcat(state, action);
  net::Tape tape1, tape2;
  Mat q1 = critic_forward(critic1_, input, &tape1);
  Mat q2 = critic_forward(critic2_, input, &tape2);

  // Ascend E[min(Q1, Q2)]; each row's gradient flows through whichever
  // critic attains the min (ties fall to the first).
  double objective = 0.0;
  Mat dq1(n, 1), dq2(n, 1);
  for (int r = 0; r < n; ++r) {
    bool first = q1(r, 0) <= q2(r, 0);
    objective += std::min(q1(r, 0), q2(r, 0)) / n;
    (first ? dq1 : dq2)(r, 0) = -1.0 / n;
  }
  if (!std::isfinite(objective)) throw std::runtime_error("update_actor: non-finite objective");

  Mat dx1, dx2;
  net::backward(critic_spec_, critic1_, tape1, dq1, &dx1);
  net::backward(critic_spec_, critic2_, tape2, dq2, &dx2);

  int state_w = state.cols;
  Mat da(n, action_width_);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < action_width_; ++c)
      da(r, c) = dx1(r, state_w + c) + dx2(r, state_w + c);

  net::ParamSet ga = net::backward(actor_spec_, actor_, actor_tape, da);
  net::adam_step(actor_, ga, actor_opt_, cfg_.lr);
  return -objective;
}

void Agent::ema_tick() {
  net::ema_update(critic1_, critic1_target_, cfg_.tau_q);
  net::ema_update(critic2_, critic2_target_, cfg_.tau_q);
}

UpdateStats Agent::agent_update_tick(const replay::ReplayBuffer& buffer, int global_step,
                                     const RewardSource& rewards) {
  UpdateStats stats;
  if (global_step < cfg_.seed_frames) return stats;
  if (global_step % cfg_.update_every != 0) return stats;
  if (buffer.size() == 0) return stats;

  replay::NStepBatch batch =
      buffer.sample_nstep(cfg_.batch, cfg_.nstep, cfg_.gamma, sample_rng_);
  std::vector<double> r = rewards(batch);
  if (r.size() != batch.reward_sum.size())
    throw std::invalid_argument("agent_update_tick: reward source returned wrong size");
  batch.reward_sum = std::move(r);

  double mean = 0.0;
  for (double v : batch.reward_sum) mean += v / double(batch.size());

  stats.updated = true;
  stats.reward_mean = mean;
  stats.critic_loss = update_critic(batch);
  stats.actor_loss = update_actor(batch);
  ema_tick();
  return stats;
}

std::vector<ser::Section> Agent::sections() const {
  return {{"actor", actor_},
          {"critic1", critic1_},
          {"critic2", critic2_},
          {"critic1_target", critic1_target_},
          {"critic2_target", critic2_target_}};
}

void Agent::restore(const std::vector<ser::Section>& sections) {
  auto pick = [&](const std::string& name) -> const net::ParamSet& {
    for (const auto& s : sections)
      if (s.name == name) return s.params;
    throw std::runtime_error("Agent::restore: missing section '" + name + "'");
  };
  net::copy_values(pick("actor"), actor_);
  net::copy_values(pick("critic1"), critic1_);
  net::copy_values(pick("critic2"), critic2_);
  net::copy_values(pick("critic1_target"), critic1_target_);
  net::copy_values(pick("critic2_target"), critic2_target_);
}

}  // namespace urlb::backbone
