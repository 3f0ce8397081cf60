#include "urlb/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace urlb::intrinsic {

RunningNormalizer::RunningNormalizer(int width, double clip) : width_(width), clip_(clip) {
  if (width < 1) throw std::invalid_argument("RunningNormalizer: width must be positive");
  if (!(clip > 0.0)) throw std::invalid_argument("RunningNormalizer: clip must be positive");
  mean_.assign(size_t(width), 0.0);
  m2_.assign(size_t(width), 0.0);
}

double RunningNormalizer::variance(int c) const {
  if (count_ == 0) return 1.0;
  return m2_[size_t(c)] / double(count_);
}

void RunningNormalizer::update(const Mat& batch) {
  if (batch.cols != width_) throw std::invalid_argument("RunningNormalizer: width mismatch");
  if (batch.rows == 0) return;
  if (!all_finite(batch)) throw std::invalid_argument("RunningNormalizer: non-finite batch");

  double nb = double(batch.rows);
  for (int c = 0; c < width_; ++c) {
    double bmean = 0.0;
    for (int r = 0; r < batch.rows; ++r) bmean += batch(r, c);
    bmean /= nb;
    double bm2 = 0.0;
    for (int r = 0; r < batch.rows; ++r) {
      double d = batch(r, c) - bmean;
      bm2 += d * d;
    }
    // Chan-style merge of (count_, mean_, m2_) with the batch moments.
    double total = double(count_) + nb;
    double delta = bmean - mean_[size_t(c)];
    mean_[size_t(c)] += delta * nb / total;
    m2_[size_t(c)] += bm2 + delta * delta * double(count_) * nb / total;
  }
  count_ += batch.rows;
}

Mat RunningNormalizer::normalize(const Mat& batch) const {
  if (batch.cols != width_) throw std::invalid_argument("RunningNormalizer: width mismatch");
  Mat out(batch.rows, batch.cols);
  for (int c = 0; c < width_; ++c) {
    double denom = std::sqrt(variance(c) + 1e-8);
    for (int r = 0; r < batch.rows; ++r)
      out(r, c) = std::clamp((batch(r, c) - mean_[size_t(c)]) / denom, -clip_, clip_);
  }
  return out;
}

net::ParamSet RunningNormalizer::state() const {
  net::ParamSet s;
  Mat meta(1, 2);
  meta(0, 0) = double(count_);
  meta(0, 1) = clip_;
  s.add("meta", meta);
  Mat mean(1, width_), m2(1, width_);
  mean.v = mean_;
  m2.v = m2_;
  s.add("mean", mean);
  s.add("m2", m2);
  return s;
}

void RunningNormalizer::restore(const net::ParamSet& s) {
  const Mat& meta = s.at("meta");
  const Mat& mean = s.at("mean");
  const Mat& m2 = s.at("m2");
  if (mean.cols != width_ || m2.cols != width_)
    throw std::invalid_argument("RunningNormalizer: restore width mismatch");
  count_ = std::int64_t(meta(0, 0));
  clip_ = meta(0, 1);
  mean_ = mean.v;
  m2_ = m2.v;
}

}  // namespace urlb::intrinsic
