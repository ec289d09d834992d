#include "tricir/train/curriculum.hpp"

#include <algorithm>
#include <cmath>

namespace tricir::train {

double hard_negative_ratio(int m, int big_m, double alpha0, double alpha_max) {
  if (big_m < 2) throw BadEpochIndex("curriculum needs at least 2 epochs");
  if (m < 1 || m > big_m)
    throw BadEpochIndex("epoch " + std::to_string(m) + " outside [1," +
                        std::to_string(big_m) + "]");
  double a = alpha0 + (static_cast<double>(m - 1) / static_cast<double>(big_m - 1)) *
                          (alpha_max - alpha0);
  return std::min(alpha_max, a);
}

std::vector<int> sample_batch(const std::vector<int>& dataset, int batch_size,
                              double alpha, const std::vector<int>& cluster_of,
                              int num_clusters, std::uint64_t& rng_state) {
  const int n = static_cast<int>(dataset.size());
  if (n < batch_size)
    throw DatasetTooSmall("dataset of " + std::to_string(n) + " cannot fill a batch of " +
                          std::to_string(batch_size));
  if (cluster_of.size() != dataset.size())
    throw DatasetTooSmall("cluster assignment must cover the dataset");

  auto draw = [&](int upper) {
    return static_cast<int>(splitmix64(rng_state) % static_cast<std::uint64_t>(upper));
  };

  const int anchor = num_clusters > 0 ? draw(num_clusters) : 0;
  std::vector<int> in_cluster, rest;
  for (int i = 0; i < n; ++i)
    (cluster_of[static_cast<std::size_t>(i)] == anchor ? in_cluster : rest).push_back(i);

  // round-half-up of alpha * B, capped at the cluster size
  int n_hard = static_cast<int>(std::floor(alpha * batch_size + 0.5));
  n_hard = std::min({n_hard, static_cast<int>(in_cluster.size()), batch_size});

  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(batch_size));
  auto take = [&](std::vector<int>& pool, int count) {
    for (int c = 0; c < count && !pool.empty(); ++c) {
      int j = draw(static_cast<int>(pool.size()));
      picked.push_back(pool[static_cast<std::size_t>(j)]);
      pool[static_cast<std::size_t>(j)] = pool.back();
      pool.pop_back();
    }
  };
  take(in_cluster, n_hard);
  take(rest, batch_size - static_cast<int>(picked.size()));
  // tiny datasets: the complement may not cover the batch; fall back to the
  // anchor cluster's leftovers
  take(in_cluster, batch_size - static_cast<int>(picked.size()));

  std::vector<int> out;
  out.reserve(picked.size());
  for (int i : picked) out.push_back(dataset[static_cast<std::size_t>(i)]);
  return out;
}

PhaseConfig resolve_phase(int epoch, int p1, int p2, int p3) {
  if (epoch < 1 || epoch > p1 + p2 + p3)
    throw BadEpochIndex("epoch " + std::to_string(epoch) + " outside the schedule");
  PhaseConfig c;
  if (epoch <= p1) {
    c.phase = 1;
    c.first_epoch = 1;
    c.last_epoch = p1;
    c.trainable_groups = {"graph", "objective"};
    c.directions.assign(obj::kCodeDirections.begin(), obj::kCodeDirections.end());
    c.curriculum_sampling = false;
  } else if (epoch <= p1 + p2) {
    c.phase = 2;
    c.first_epoch = p1 + 1;
    c.last_epoch = p1 + p2;
    c.trainable_groups = {"graph", "objective", "text", "image"};
    c.directions.assign(obj::kAllDirections.begin(), obj::kAllDirections.end());
    c.curriculum_sampling = false;
    c.rebuild_optimizer_on_entry = epoch == p1 + 1;
  } else {
    c.phase = 3;
    c.first_epoch = p1 + p2 + 1;
    c.last_epoch = p1 + p2 + p3;
    c.trainable_groups = {"graph", "objective", "text", "image"};
    c.directions.assign(obj::kAllDirections.begin(), obj::kAllDirections.end());
    c.curriculum_sampling = true;
  }
  return c;
}

}  // namespace tricir::train
