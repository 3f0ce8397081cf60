#include "urlb/knn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "urlb/kernels.hpp"

namespace urlb::knn {

namespace {

// Ascending distance, ties by lower row index. Sorting the full candidate
// list keeps the summation order identical to the brute-force oracle.
std::vector<double> nearest_sorted(const std::vector<std::pair<double, int>>& cand, int k) {
  std::vector<std::pair<double, int>> sorted = cand;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(size_t(k));
  for (int i = 0; i < k; ++i) out.push_back(sorted[size_t(i)].first);
  return out;
}

}  // namespace

std::vector<std::vector<double>> knn_distances(const Mat& queries, const Mat& keys, int k) {
  if (k < 1) throw std::invalid_argument("knn_distances: k must be positive");
  if (keys.rows < k) throw std::invalid_argument("knn_distances: fewer keys than k");
  if (queries.cols != keys.cols) throw std::invalid_argument("knn_distances: width mismatch");

  std::vector<std::vector<double>> out(size_t(queries.rows));
  std::vector<std::pair<double, int>> cand(static_cast<size_t>(keys.rows));
  for (int i = 0; i < queries.rows; ++i) {
    for (int j = 0; j < keys.rows; ++j)
      cand[size_t(j)] = {std::sqrt(kernels::sq_dist(queries.row(i), keys.row(j), queries.cols)), j};
    out[size_t(i)] = nearest_sorted(cand, k);
  }
  return out;
}

std::vector<double> knn_mean_distance(const Mat& queries, const Mat& keys, int k) {
  auto near = knn_distances(queries, keys, k);
  std::vector<double> out(near.size());
  for (size_t i = 0; i < near.size(); ++i) {
    double sum = 0.0;
    for (double d : near[i]) sum += d;
    out[i] = sum / double(k);
  }
  return out;
}

std::vector<double> particle_entropy_reward(const Mat& z, int k, ParticleForm form) {
  if (k < 1) throw std::invalid_argument("particle_entropy_reward: k must be positive");
  if (z.rows <= k) throw std::invalid_argument("particle_entropy_reward: batch must exceed k");

  std::vector<double> out(size_t(z.rows));
  std::vector<std::pair<double, int>> cand;
  cand.reserve(size_t(z.rows - 1));
  for (int i = 0; i < z.rows; ++i) {
    cand.clear();
    for (int j = 0; j < z.rows; ++j) {
      if (j == i) continue;
      cand.push_back({std::sqrt(kernels::sq_dist(z.row(i), z.row(j), z.cols)), j});
    }
    auto near = nearest_sorted(cand, k);
    if (form == ParticleForm::log1p_mean) {
      double sum = 0.0;
      for (double d : near) sum += d;
      out[size_t(i)] = std::log1p(sum / double(k));
    } else {
      double sum = 0.0;
      for (double d : near) sum += std::log1p(d);
      out[size_t(i)] = sum;
    }
  }
  return out;
}

}  // namespace urlb::knn
