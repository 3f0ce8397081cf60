#include "urlb/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace urlb::envs {

namespace {

double clamp(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

double wrap_pi(double a) {
  // Wrap to (-pi, pi].
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a > std::numbers::pi) a -= two_pi;
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

void check_finite(const EnvState& s, const char* who) {
  for (double v : s.x)
    if (!std::isfinite(v)) throw std::runtime_error(std::string(who) + ": non-finite state");
}

// ---- pointmass -----------------------------------------------------------
// Planar point in the [-1,1]^2 arena. State: px, py, vx, vy.

class PointMass final : public Domain {
 public:
  PointMass(int episode_length, double dt, PointMassParams p) : p_(p) {
    spec_ = {"pointmass", 4, 2, episode_length, dt};
  }

  const DomainSpec& spec() const override { return spec_; }

  std::vector<std::string> task_names() const override {
    return {"reach_top_left", "reach_top_right", "reach_bottom_left", "reach_bottom_right"};
  }

  EnvState reset(RngStream& rng) const override {
    EnvState s;
    // Start anywhere in the central quarter of the arena, at rest.
    s.x = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.0, 0.0};
    return s;
  }

  void step(EnvState& s, const std::vector<double>& action) const override {
    double ax = clamp(action.at(0), -1.0, 1.0);
    double ay = clamp(action.at(1), -1.0, 1.0);
    double dt = spec_.dt;
    s.x[2] = clamp(s.x[2] + dt * (p_.f_max * ax - p_.damping * s.x[2]) / p_.mass, -p_.v_max,
                   p_.v_max);
    s.x[3] = clamp(s.x[3] + dt * (p_.f_max * ay - p_.damping * s.x[3]) / p_.mass, -p_.v_max,
                   p_.v_max);
    s.x[0] = clamp(s.x[0] + dt * s.x[2], -kHalf, kHalf);
    s.x[1] = clamp(s.x[1] + dt * s.x[3], -kHalf, kHalf);
    s.step += 1;
    check_finite(s, "pointmass");
  }

  std::vector<double> observe(const EnvState& s) const override { return s.x; }

  double task_reward(const EnvState& s, const std::string& task) const override {
    double tx, ty;
    target_of(task, tx, ty);
    double d = std::hypot(s.x[0] - tx, s.x[1] - ty);
    // Tight margin keeps the reward local to the corner: reaching is an
    // exploration problem, not a slope to descend from anywhere.
    return tolerance_reward(d, 0.1, 0.3);
  }

  void obs_bounds(std::vector<double>& lo, std::vector<double>& hi) const override {
    lo = {-kHalf, -kHalf, -p_.v_max, -p_.v_max};
    hi = {kHalf, kHalf, p_.v_max, p_.v_max};
  }

 private:
  static constexpr double kHalf = 1.0;

  static void target_of(const std::string& task, double& tx, double& ty) {
    if (task == "reach_top_left") {
      tx = -0.8;
      ty = 0.8;
    } else if (task == "reach_top_right") {
      tx = 0.8;
      ty = 0.8;
    } else if (task == "reach_bottom_left") {
      tx = -0.8;
      ty = -0.8;
    } else if (task == "reach_bottom_right") {
      tx = 0.8;
      ty = -0.8;
    } else {
      throw std::invalid_argument("pointmass: unknown task '" + task + "'");
    }
  }

  DomainSpec spec_;
  PointMassParams p_;
};

// ---- planar_arm ----------------------------------------------------------
// Two-link arm with torque control and joint damping. State: theta1,
// theta2, omega1, omega2. Observation exposes angles as cos/sin pairs.

class PlanarArm final : public Domain {
 public:
  PlanarArm(int episode_length, double dt) {
    spec_ = {"planar_arm", 6, 2, episode_length, dt};
  }

  const DomainSpec& spec() const override { return spec_; }

  std::vector<std::string> task_names() const override {
    return {"reach_top_left", "reach_top_right", "reach_bottom_left", "reach_bottom_right"};
  }

  EnvState reset(RngStream& rng) const override {
    EnvState s;
    s.x = {rng.uniform(-std::numbers::pi, std::numbers::pi),
           rng.uniform(-std::numbers::pi, std::numbers::pi), 0.0, 0.0};
    return s;
  }

  void step(EnvState& s, const std::vector<double>& action) const override {
    double dt = spec_.dt;
    for (int j = 0; j < 2; ++j) {
      double torque = kTorque * clamp(action.at(size_t(j)), -1.0, 1.0);
      s.x[size_t(2 + j)] =
          clamp(s.x[size_t(2 + j)] + dt * (torque - kDamping * s.x[size_t(2 + j)]) / kInertia,
                -kOmegaMax, kOmegaMax);
      s.x[size_t(j)] = wrap_pi(s.x[size_t(j)] + dt * s.x[size_t(2 + j)]);
    }
    s.step += 1;
    check_finite(s, "planar_arm");
  }

  std::vector<double> observe(const EnvState& s) const override {
    return {std::cos(s.x[0]), std::sin(s.x[0]), std::cos(s.x[1]),
            std::sin(s.x[1]), s.x[2],          s.x[3]};
  }

  double task_reward(const EnvState& s, const std::string& task) const override {
    double fx = kLink1 * std::cos(s.x[0]) + kLink2 * std::cos(s.x[0] + s.x[1]);
    double fy = kLink1 * std::sin(s.x[0]) + kLink2 * std::sin(s.x[0] + s.x[1]);
    double tx, ty;
    target_of(task, tx, ty);
    double d = std::hypot(fx - tx, fy - ty);
    return tolerance_reward(d, 0.1, 0.8);
  }

  void obs_bounds(std::vector<double>& lo, std::vector<double>& hi) const override {
    lo = {-1, -1, -1, -1, -kOmegaMax, -kOmegaMax};
    hi = {1, 1, 1, 1, kOmegaMax, kOmegaMax};
  }

 private:
  static constexpr double kLink1 = 0.5;
  static constexpr double kLink2 = 0.5;
  static constexpr double kTorque = 1.0;
  static constexpr double kDamping = 0.5;
  static constexpr double kInertia = 1.0;
  static constexpr double kOmegaMax = 4.0;

  static void target_of(const std::string& task, double& tx, double& ty) {
    // Corner targets on the radius-0.8 circle, well inside the arm's reach.
    double r = 0.8 / std::numbers::sqrt2;
    if (task == "reach_top_left") {
      tx = -r;
      ty = r;
    } else if (task == "reach_top_right") {
      tx = r;
      ty = r;
    } else if (task == "reach_bottom_left") {
      tx = -r;
      ty = -r;
    } else if (task == "reach_bottom_right") {
      tx = r;
      ty = -r;
    } else {
      throw std::invalid_argument("planar_arm: unknown task '" + task + "'");
    }
  }

  DomainSpec spec_;
};

// ---- slider --------------------------------------------------------------
// One-dimensional cart on a rail. State: p, v, phase velocity. The phase
// angle lives in the (p, v) plane; its angular rate drives the flip task.
// Observation is just (p, v).

class Slider final : public Domain {
 public:
  Slider(int episode_length, double dt) {
    spec_ = {"slider", 2, 1, episode_length, dt};
  }

  const DomainSpec& spec() const override { return spec_; }

  std::vector<std::string> task_names() const override {
    return {"stand", "walk", "run", "flip"};
  }

  EnvState reset(RngStream&) const override {
    EnvState s;
    s.x = {0.0, 0.0, 0.0};
    return s;
  }

  void step(EnvState& s, const std::vector<double>& action) const override {
    double a = clamp(action.at(0), -1.0, 1.0);
    double dt = spec_.dt;
    double phase_before = std::atan2(s.x[0] / kHalf, s.x[1] / kVMax);
    s.x[1] = clamp(s.x[1] + dt * (kForce * a - kDamping * s.x[1]) / kMass, -kVMax, kVMax);
    s.x[0] = clamp(s.x[0] + dt * s.x[1], -kHalf, kHalf);
    double phase_after = std::atan2(s.x[0] / kHalf, s.x[1] / kVMax);
    s.x[2] = wrap_pi(phase_after - phase_before) / dt;
    s.step += 1;
    check_finite(s, "slider");
  }

  std::vector<double> observe(const EnvState& s) const override { return {s.x[0], s.x[1]}; }

  double task_reward(const EnvState& s, const std::string& task) const override {
    double v = s.x[1];
    if (task == "stand") return tolerance_reward(std::abs(v), 0.1, 2.0);
    if (task == "walk") return tolerance_reward(std::abs(v - 0.5 * kVMax), 0.1, 1.0);
    if (task == "run") return tolerance_reward(std::abs(v - kVMax), 0.1, 2.0);
    if (task == "flip") return tolerance_reward(std::abs(s.x[2] - kFlipRate), 0.5, 2.5);
    throw std::invalid_argument("slider: unknown task '" + task + "'");
  }

  void obs_bounds(std::vector<double>& lo, std::vector<double>& hi) const override {
    lo = {-kHalf, -kVMax};
    hi = {kHalf, kVMax};
  }

 private:
  static constexpr double kHalf = 1.0;
  static constexpr double kVMax = 2.0;
  static constexpr double kMass = 1.0;
  static constexpr double kDamping = 0.5;
  static constexpr double kForce = 2.0;
  static constexpr double kFlipRate = 2.5;

  DomainSpec spec_;
};

}  // namespace

double tolerance_reward(double distance, double target_size, double margin) {
  if (distance < 0 || target_size <= 0 || margin <= 0)
    throw std::invalid_argument("tolerance_reward: bad arguments");
  if (distance <= target_size) return 1.0;
  double s = margin / std::sqrt(2.0 * std::log(10.0));
  double z = (distance - target_size) / s;
  return std::exp(-0.5 * z * z);
}

std::vector<std::string> domain_names() { return {"pointmass", "planar_arm", "slider"}; }

std::unique_ptr<Domain> make_domain(const std::string& name, int episode_length, double dt) {
  if (episode_length <= 0 || dt <= 0)
    throw std::invalid_argument("make_domain: bad episode length or dt");
  if (name == "pointmass") return std::make_unique<PointMass>(episode_length, dt, PointMassParams{});
  if (name == "planar_arm") return std::make_unique<PlanarArm>(episode_length, dt);
  if (name == "slider") return std::make_unique<Slider>(episode_length, dt);
  throw std::invalid_argument("unknown domain '" + name + "'");
}

std::unique_ptr<Domain> make_pointmass(int episode_length, double dt, PointMassParams p) {
  return std::make_unique<PointMass>(episode_length, dt, p);
}

std::pair<std::string, std::string> split_task_id(const std::string& task_id) {
  auto slash = task_id.find('/');
  if (slash == std::string::npos)
    throw std::invalid_argument("task id '" + task_id + "' must look like domain/task");
  std::string domain = task_id.substr(0, slash);
  std::string task = task_id.substr(slash + 1);
  auto d = make_domain(domain);
  auto names = d->task_names();
  if (std::find(names.begin(), names.end(), task) == names.end())
    throw std::invalid_argument("domain '" + domain + "' has no task '" + task + "'");
  return {domain, task};
}

std::vector<std::string> all_task_ids() {
  std::vector<std::string> out;
  for (const auto& dn : domain_names()) {
    auto d = make_domain(dn);
    for (const auto& t : d->task_names()) out.push_back(dn + "/" + t);
  }
  return out;
}

EnvSession::EnvSession(const Domain& domain, RngStream env_rng)
    : domain_(domain), rng_(env_rng) {}

std::vector<double> EnvSession::reset() {
  state_ = domain_.reset(rng_);
  last_rewards_.clear();
  in_episode_ = true;
  return domain_.observe(state_);
}

std::vector<double> EnvSession::step(const std::vector<double>& action) {
  if (!in_episode_) throw std::logic_error("EnvSession::step before reset");
  if (episode_done()) throw std::logic_error("EnvSession::step past episode end");
  domain_.step(state_, action);
  last_rewards_.clear();
  for (const auto& t : domain_.task_names()) last_rewards_[t] = domain_.task_reward(state_, t);
  return domain_.observe(state_);
}

double EnvSession::read_reward(const std::string& task) {
  auto it = last_rewards_.find(task);
  if (it == last_rewards_.end())
    throw std::logic_error("EnvSession::read_reward: no reward for '" + task +
                           "' (no step taken yet?)");
  reward_reads_ += 1;
  return it->second;
}

}  // namespace urlb::envs
