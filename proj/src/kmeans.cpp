#include "followup/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "followup/errors.hpp"
#include "followup/rng.hpp"

namespace followup {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

std::vector<std::vector<double>> seed_plus_plus(std::span<const std::vector<double>> points,
                                                std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[rng.index(n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      // Every point coincides with a centroid already; take the lowest unused index.
      pick = centroids.size() % n;
    } else {
      double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                    KMeansOptions options) {
  const std::size_t n = points.size();
  if (k < 1 || k > n)
    throw ValidationError("k-means: cluster count " + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ValidationError("k-means: points have mixed dimensions");
  }

  Rng rng(seed);
  KMeansResult r;
  r.centroids = seed_plus_plus(points, k, rng);
  r.assignment.assign(n, 0);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    r.iterations = iter;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double d = squared_distance(points[i], r.centroids[c]);
        if (d < best) {
          best = d;
          r.assignment[i] = c;
        }
      }
    }

    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) next[r.assignment[i]][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (auto& x : next[c]) x /= static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // Steal the point farthest from its own centroid, from a cluster that can spare it.
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[r.assignment[i]] < 2) continue;
        double d = squared_distance(points[i], next[r.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      counts[c] = 1;
      next[c] = points[far];
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(squared_distance(next[c], r.centroids[c])));
    r.centroids = std::move(next);
    if (shift <= options.tolerance) break;
  }

  // Final assignment against the final centroids, keeping every cluster non-empty.
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = r.assignment[i];
    for (std::size_t c = 0; c < k; ++c) {
      double d = squared_distance(points[i], r.centroids[c]);
      if (d < best) {
        best = d;
        pick = c;
      }
    }
    r.assignment[i] = pick;
    ++counts[pick];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    // Coincident points can leave a cluster empty; hand it the last point of a larger cluster.
    for (std::size_t i = n; i-- > 0;) {
      if (counts[r.assignment[i]] > 1) {
        --counts[r.assignment[i]];
        r.assignment[i] = c;
        counts[c] = 1;
        break;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) std::fill(r.centroids[c].begin(), r.centroids[c].end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) r.centroids[r.assignment[i]][d] += points[i][d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (auto& x : r.centroids[c]) x /= static_cast<double>(counts[c]);
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    r.inertia += squared_distance(points[i], r.centroids[r.assignment[i]]);
  return r;
}

}  // namespace followup
