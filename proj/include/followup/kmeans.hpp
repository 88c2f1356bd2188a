#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace followup {

struct KMeansOptions {
  int max_iterations = 100;
  /// Stop once no centroid moves farther than this (Euclidean).
  double tolerance = 1e-6;
};

struct KMeansResult {
  std::vector<std::size_t> assignment;  // point -> cluster
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;  // within-cluster sum of squares
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Ties go to the lower cluster index, and a
/// cluster that empties is re-seeded with the point farthest from its centroid, so every
/// cluster ends non-empty. Deterministic for a given seed on every platform.
KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                    KMeansOptions options = {});

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace followup
