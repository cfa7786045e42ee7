#pragma once

#include "frugalnn/types.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace frugalnn {

/// L2 distance between `p` and `q` restricted to the revealed coordinates.
/// Works on any pair of Eigen vector expressions (rows or columns).
template <typename DerivedP, typename DerivedQ>
double partial_distance(const Eigen::DenseBase<DerivedP>& p, const Eigen::DenseBase<DerivedQ>& q,
                        const FeatureSet& revealed) {
  double sum = 0.0;
  for (int f = 0; f < revealed.universe(); ++f) {
    if (!revealed.contains(f)) continue;
    const double d = static_cast<double>(q(f)) - static_cast<double>(p(f));
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// k-means partition of a training set.
struct Clustering {
  Matrix centroids;             // K x n
  std::vector<int> assignment;  // cluster index per training row
  std::uint64_t seed = 0;
  int iterations = 0;

  int k() const { return static_cast<int>(centroids.rows()); }
  int n_features() const { return static_cast<int>(centroids.cols()); }
};

inline constexpr int kMaxKmeansIterations = 300;

/// Lloyd iterations from k-means++ seeding until the assignment stops
/// changing (or the iteration cap). Empty clusters take the point farthest
/// from its current centroid.
Clustering kmeans(const Matrix& train, int k, std::uint64_t seed, int max_iterations = kMaxKmeansIterations);

/// rank[i] is the 1-based rank of cluster i; ascending partial distance to
/// its centroid, ties by cluster index.
std::vector<int> rank_clusters(PointRef p, const FeatureSet& revealed, const Clustering& cl);

/// Mean squared difference between the ranking under `revealed` and the
/// ranking under all features.
double score(const FeatureSet& revealed, PointRef p, const Clustering& cl);

void to_json(nlohmann::json& j, const Clustering& cl);
void from_json(const nlohmann::json& j, Clustering& cl);

}  // namespace frugalnn
