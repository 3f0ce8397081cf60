#pragma once

#include <vector>

#include "urlb/mat.hpp"

namespace urlb::knn {

// Shape of the particle-entropy proxy. The mean form is the default; the
// sum form exists for ablation runs.
enum class ParticleForm { log1p_mean, sum_log1p };

// Per-query Euclidean distances to the k nearest key rows, ascending.
// Distance ties prefer the lower key index.
std::vector<std::vector<double>> knn_distances(const Mat& queries, const Mat& keys, int k);

// Per-query mean Euclidean distance to the k nearest key rows.
// Distance ties prefer the lower key index; the k selected distances are
// summed in ascending (distance, index) order.
std::vector<double> knn_mean_distance(const Mat& queries, const Mat& keys, int k);

// Nonparametric entropy proxy over a batch: each row is scored against its
// k nearest other rows. log1p_mean gives log(1 + mean distance); sum_log1p
// gives the sum of log(1 + d) over the k neighbors.
std::vector<double> particle_entropy_reward(const Mat& z, int k,
                                            ParticleForm form = ParticleForm::log1p_mean);

}  // namespace urlb::knn
