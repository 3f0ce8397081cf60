#pragma once

#include <cstddef>
#include <vector>

#include "urlb/mat.hpp"
#include "urlb/rng.hpp"

namespace urlb::replay {

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  int step_in_episode = 0;  // 0-based position within its episode
  std::vector<double> skill;  // empty when the algorithm is skill-free
};

// Minibatch of n-step windows. obs/action/skill are the window starts;
// obs_after_n is the observation effective_n steps later. reward_sum holds
// sum over i < effective_n of gamma^i * r_{t+i} from the stored rewards.
struct NStepBatch {
  Mat obs;
  Mat action;
  Mat skill;  // 0 cols when skill-free
  Mat obs_after_n;
  std::vector<double> reward_sum;
  std::vector<int> effective_n;
  int size() const { return obs.rows; }
};

// Fixed-capacity FIFO ring. Windows never cross episode boundaries: the
// stored step_in_episode caps how far a window may extend.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, int episode_length, int obs_width, int action_width);

  void push(Transition t);
  void reset();
  size_t size() const { return full_ ? store_.size() : next_; }
  size_t capacity() const { return cap_; }
  int episode_length() const { return episode_length_; }

  // Logical index 0 is the oldest stored transition.
  const Transition& at(size_t i) const;

  NStepBatch sample_nstep(int batch, int n, double gamma, RngStream& rng) const;

 private:
  size_t cap_;
  int episode_length_;
  int obs_width_;
  int action_width_;
  std::vector<Transition> store_;
  size_t next_ = 0;
  bool full_ = false;
};

}  // namespace urlb::replay
