#pragma once

#include <cstdint>
#include <vector>

#include "urlb/mat.hpp"
#include "urlb/mlp.hpp"

namespace urlb::intrinsic {

// Per-component running mean/variance with clipped standardization.
// Before any update it behaves as mean 0, variance 1.
class RunningNormalizer {
 public:
  explicit RunningNormalizer(int width, double clip = 5.0);

  void update(const Mat& batch);
  Mat normalize(const Mat& batch) const;

  int width() const { return width_; }
  std::int64_t count() const { return count_; }
  double clip() const { return clip_; }
  double mean(int c) const { return mean_[size_t(c)]; }
  double variance(int c) const;

  net::ParamSet state() const;
  void restore(const net::ParamSet& s);

 private:
  int width_;
  double clip_;
  std::int64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;  // sum of squared deviations from the mean
};

}  // namespace urlb::intrinsic
