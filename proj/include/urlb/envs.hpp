#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "urlb/rng.hpp"

namespace urlb::envs {

// 1 when distance <= target_size, then a Gaussian tail scaled so the value
// at target_size + margin is exactly 0.1.
double tolerance_reward(double distance, double target_size, double margin);

struct DomainSpec {
  std::string name;
  int obs_width = 0;
  int action_width = 0;
  int episode_length = 250;
  double dt = 0.02;
};

struct EnvState {
  std::vector<double> x;  // domain-specific coordinates
  int step = 0;
};

// Deterministic analytic domain with four named extrinsic tasks. Stepping
// is a pure function of (state, action, constants); every episode runs
// exactly episode_length steps with no early termination.
class Domain {
 public:
  virtual ~Domain() = default;
  virtual const DomainSpec& spec() const = 0;
  virtual std::vector<std::string> task_names() const = 0;
  virtual EnvState reset(RngStream& rng) const = 0;
  virtual void step(EnvState& state, const std::vector<double>& action) const = 0;
  virtual std::vector<double> observe(const EnvState& state) const = 0;
  virtual double task_reward(const EnvState& state, const std::string& task) const = 0;
  // Componentwise observation bounds (used as the uniform reference density).
  virtual void obs_bounds(std::vector<double>& lo, std::vector<double>& hi) const = 0;
};

std::vector<std::string> domain_names();
std::unique_ptr<Domain> make_domain(const std::string& name, int episode_length = 250,
                                    double dt = 0.02);

struct PointMassParams {
  double mass = 1.0;
  double damping = 0.5;
  double f_max = 2.0;
  double v_max = 2.0;
};

std::unique_ptr<Domain> make_pointmass(int episode_length, double dt, PointMassParams p);

// "pointmass/reach_top_left" -> {"pointmass", "reach_top_left"}; throws on
// unknown domain or task.
std::pair<std::string, std::string> split_task_id(const std::string& task_id);
std::vector<std::string> all_task_ids();

// Episode driver that meters extrinsic-reward access. step() computes and
// caches all task rewards; they become visible only through read_reward,
// which counts every call. A pretraining loop that stays reward-free
// leaves the counter at zero.
class EnvSession {
 public:
  EnvSession(const Domain& domain, RngStream env_rng);

  std::vector<double> reset();
  std::vector<double> step(const std::vector<double>& action);
  double read_reward(const std::string& task);

  uint64_t reward_reads() const { return reward_reads_; }
  int step_in_episode() const { return state_.step; }
  bool episode_done() const { return state_.step >= domain_.spec().episode_length; }
  const EnvState& state() const { return state_; }

 private:
  const Domain& domain_;
  RngStream rng_;
  EnvState state_;
  std::map<std::string, double> last_rewards_;
  uint64_t reward_reads_ = 0;
  bool in_episode_ = false;
};

}  // namespace urlb::envs
