#include "tricir/train/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tricir::train {

namespace {

double sq_dist(const MatD& pts, int i, const MatD& centroids, int c) {
  return (pts.row(i) - centroids.row(c)).squaredNorm();
}

}  // namespace

KMeansResult kmeans(const MatD& points, int k, std::uint64_t seed, int max_iter,
                    double tol) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw TooFewSamples("k must be >= 1");
  if (n < k)
    throw TooFewSamples("kmeans needs at least k=" + std::to_string(k) + " samples, got " +
                        std::to_string(n));
  std::uint64_t state = seed ^ 0x9b97f4a7c15ull;

  // k-means++ seeding
  MatD centroids(k, points.cols());
  std::vector<double> d2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::infinity());
  int first = static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(n));
  centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], sq_dist(points, i, centroids, c - 1));
      total += d2[static_cast<std::size_t>(i)];
    }
    int pick = n - 1;
    if (total > 0.0) {
      double target = unit_uniform(state) * total;
      double accum = 0.0;
      for (int i = 0; i < n; ++i) {
        accum += d2[static_cast<std::size_t>(i)];
        if (accum >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(n));
    }
    centroids.row(c) = points.row(pick);
  }

  KMeansResult res;
  res.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    // assignment sweep
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points, i, centroids, 0);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(points, i, centroids, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assignment[static_cast<std::size_t>(i)] = best;
    }
    // update sweep
    MatD next = MatD::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      next.row(res.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= counts[static_cast<std::size_t>(c)];
      } else {
        // empty cluster: take the point farthest from its current centroid
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          double d = sq_dist(points, i, centroids,
                             res.assignment[static_cast<std::size_t>(i)]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next.row(c) = points.row(far);
      }
    }
    double shift = (next - centroids).rowwise().norm().sum();
    centroids = next;
    if (shift < tol) break;
  }

  res.centroids = centroids;
  res.inertia = 0.0;
  for (int i = 0; i < n; ++i)
    res.inertia += sq_dist(points, i, centroids, res.assignment[static_cast<std::size_t>(i)]);
  return res;
}

MatD caption_feature_matrix(const std::vector<std::string>& captions, int dim) {
  MatD out = MatD::Zero(static_cast<Eigen::Index>(captions.size()), dim);
  for (std::size_t r = 0; r < captions.size(); ++r) {
    std::string norm;
    norm.reserve(captions[r].size());
    for (char c : captions[r]) {
      unsigned char u = static_cast<unsigned char>(c);
      norm += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ';
    }
    // collapse runs of spaces so the 3-gram stream is spacing-invariant
    std::string text;
    for (char c : norm)
      if (c != ' ' || (!text.empty() && text.back() != ' ')) text += c;
    // word unigrams
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && text[i] == ' ') ++i;
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ') ++j;
      if (j > i) {
        std::uint64_t h = fnv1a(std::string_view(text.data() + i, j - i), 0x77ull);
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(h % dim)) += 1.0;
      }
      i = j;
    }
    // character 3-grams
    for (std::size_t p = 0; p + 3 <= text.size(); ++p) {
      std::uint64_t h = fnv1a(std::string_view(text.data() + p, 3), 0x33ull);
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(h % dim)) += 1.0;
    }
    double nrm = out.row(static_cast<Eigen::Index>(r)).norm();
    if (nrm > 0) out.row(static_cast<Eigen::Index>(r)) /= nrm;
  }
  return out;
}

ClusterAssignment cluster_captions(const std::vector<std::string>& captions, int k,
                                   std::uint64_t seed) {
  if (static_cast<int>(captions.size()) < k)
    throw TooFewSamples("need at least k=" + std::to_string(k) + " captions, got " +
                        std::to_string(captions.size()));
  MatD feats = caption_feature_matrix(captions);
  KMeansResult km = kmeans(feats, k, seed);
  return ClusterAssignment{std::move(km.assignment), std::move(km.centroids), km.inertia};
}

}  // namespace tricir::train
