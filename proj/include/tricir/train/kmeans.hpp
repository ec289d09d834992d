#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/core/common.hpp"

namespace tricir::train {

class TooFewSamples : public std::runtime_error {
 public:
  explicit TooFewSamples(const std::string& msg) : std::runtime_error(msg) {}
};

struct KMeansResult {
  std::vector<int> assignment;  // one cluster id per row
  MatD centroids;               // k x d
  double inertia = 0.0;
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding; deterministic under the seed.
// Stops after max_iter sweeps or when the total centroid shift drops below
// tol. Empty clusters take over the point farthest from its centroid.
KMeansResult kmeans(const MatD& points, int k, std::uint64_t seed, int max_iter = 100,
                    double tol = 1e-6);

// Hashed caption features for clustering: character 3-gram plus word-unigram
// term frequencies, folded into `dim` buckets and l2-normalized.
MatD caption_feature_matrix(const std::vector<std::string>& captions, int dim = 512);

struct ClusterAssignment {
  std::vector<int> cluster_of;  // sample index -> cluster id
  MatD centroids;
  double inertia = 0.0;
};

// K-means over hashed caption features (the curriculum's functional clusters).
ClusterAssignment cluster_captions(const std::vector<std::string>& captions, int k,
                                   std::uint64_t seed);

}  // namespace tricir::train
