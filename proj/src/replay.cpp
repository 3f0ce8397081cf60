#include "urlb/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace urlb::replay {

ReplayBuffer::ReplayBuffer(size_t capacity, int episode_length, int obs_width, int action_width)
    : cap_(capacity),
      episode_length_(episode_length),
      obs_width_(obs_width),
      action_width_(action_width) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (episode_length <= 0) throw std::invalid_argument("ReplayBuffer: bad episode length");
  store_.reserve(std::min(capacity, size_t(1) << 20));
}

void ReplayBuffer::push(Transition t) {
  if (int(t.obs.size()) != obs_width_ || int(t.next_obs.size()) != obs_width_)
    throw std::invalid_argument("ReplayBuffer::push: obs width " + std::to_string(t.obs.size()) +
                                " does not match buffer width " + std::to_string(obs_width_));
  if (int(t.action.size()) != action_width_)
    throw std::invalid_argument("ReplayBuffer::push: action width mismatch");
  if (t.step_in_episode < 0 || t.step_in_episode >= episode_length_)
    throw std::invalid_argument("ReplayBuffer::push: step_in_episode out of range");

  if (full_) {
    store_[next_] = std::move(t);
  } else if (next_ < store_.size()) {
    store_[next_] = std::move(t);
  } else {
    store_.push_back(std::move(t));
  }
  next_ += 1;
  if (next_ == cap_) {
    next_ = 0;
    full_ = true;
  }
}

void ReplayBuffer::reset() {
  store_.clear();
  next_ = 0;
  full_ = false;
}

const Transition& ReplayBuffer::at(size_t i) const {
  if (i >= size()) throw std::out_of_range("ReplayBuffer::at: index past end");
  size_t phys = full_ ? (next_ + i) % cap_ : i;
  return store_[phys];
}

NStepBatch ReplayBuffer::sample_nstep(int batch, int n, double gamma, RngStream& rng) const {
  if (size() == 0) throw std::runtime_error("ReplayBuffer::sample_nstep: buffer is empty");
  if (batch <= 0 || n <= 0) throw std::invalid_argument("sample_nstep: batch and n must be positive");

  size_t count = size();
  int skill_width = int(at(0).skill.size());

  NStepBatch b;
  b.obs = Mat(batch, obs_width_);
  b.action = Mat(batch, action_width_);
  b.skill = Mat(batch, skill_width);
  b.obs_after_n = Mat(batch, obs_width_);
  b.reward_sum.resize(size_t(batch));
  b.effective_n.resize(size_t(batch));

  for (int row = 0; row < batch; ++row) {
    size_t start = rng.uniform_index(count);
    const Transition& first = at(start);

    // Steps remaining in this episode, capped by what the buffer holds.
    int remaining = episode_length_ - first.step_in_episode;
    int eff = std::min(n, remaining);
    eff = std::min(eff, int(count - start));

    double r = 0.0;
    double g = 1.0;
    size_t last = start;
    for (int i = 0; i < eff; ++i) {
      const Transition& t = at(start + size_t(i));
      if (t.step_in_episode != first.step_in_episode + i)
        throw std::logic_error("sample_nstep: window crosses an episode boundary");
      r += g * t.reward;
      g *= gamma;
      last = start + size_t(i);
    }

    const Transition& tail = at(last);
    for (int c = 0; c < obs_width_; ++c) {
      b.obs(row, c) = first.obs[size_t(c)];
      b.obs_after_n(row, c) = tail.next_obs[size_t(c)];
    }
    for (int c = 0; c < action_width_; ++c) b.action(row, c) = first.action[size_t(c)];
    if (skill_width > 0) {
      if (int(first.skill.size()) != skill_width)
        throw std::logic_error("sample_nstep: inconsistent skill widths in buffer");
      for (int c = 0; c < skill_width; ++c) b.skill(row, c) = first.skill[size_t(c)];
    }
    b.reward_sum[size_t(row)] = r;
    b.effective_n[size_t(row)] = eff;
  }
  return b;
}

}  // namespace urlb::replay
