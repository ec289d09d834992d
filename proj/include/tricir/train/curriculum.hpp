#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/core/common.hpp"
#include "tricir/obj/objective.hpp"

namespace tricir::train {

class BadEpochIndex : public std::runtime_error {
 public:
  explicit BadEpochIndex(const std::string& msg) : std::runtime_error(msg) {}
};

class DatasetTooSmall : public std::runtime_error {
 public:
  explicit DatasetTooSmall(const std::string& msg) : std::runtime_error(msg) {}
};

// alpha_m = min(alpha_max, alpha0 + (m-1)/(M-1) * (alpha_max - alpha0)),
// m = epoch within the curriculum phase, 1-based.
double hard_negative_ratio(int m, int big_m, double alpha0, double alpha_max);

// One curriculum batch: an anchor cluster chosen uniformly, round(alpha*B)
// distinct ids from it (capped at the cluster size, shortfall backfilled),
// the rest drawn uniformly from the other clusters without replacement.
// `cluster_of[i]` is the cluster of dataset[i]; returns B ids from `dataset`.
std::vector<int> sample_batch(const std::vector<int>& dataset, int batch_size,
                              double alpha, const std::vector<int>& cluster_of,
                              int num_clusters, std::uint64_t& rng_state);

struct PhaseConfig {
  int phase = 1;                       // 1, 2 or 3
  int first_epoch = 1, last_epoch = 1; // inclusive, 1-based
  std::vector<std::string> trainable_groups;
  std::vector<obj::Direction> directions;
  bool curriculum_sampling = false;
  bool rebuild_optimizer_on_entry = false;
};

// Maps a 1-based epoch onto the three-phase schedule.
PhaseConfig resolve_phase(int epoch, int epochs_phase1, int epochs_phase2,
                          int epochs_phase3);

}  // namespace tricir::train
