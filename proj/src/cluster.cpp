#include "frugalnn/cluster.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace frugalnn {

namespace {

std::vector<int> assign_nearest(const Matrix& data, const Matrix& centroids, std::vector<double>& dist2) {
  const Eigen::Index n = data.rows();
  std::vector<int> assignment(static_cast<std::size_t>(n));
  dist2.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    const double d = (centroids.rowwise() - data.row(i)).rowwise().squaredNorm().minCoeff(&best);
    assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
    dist2[static_cast<std::size_t>(i)] = d;
  }
  return assignment;
}

// Give every empty cluster the point farthest from its centroid, taken from
// a cluster that can spare one.
void repair_empty(const Matrix& data, Matrix& centroids, std::vector<int>& assignment, std::vector<double>& dist2) {
  const int k = static_cast<int>(centroids.rows());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    int far = -1;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (counts[static_cast<std::size_t>(assignment[i])] < 2) continue;
      if (far < 0 || dist2[i] > dist2[static_cast<std::size_t>(far)]) far = static_cast<int>(i);
    }
    if (far < 0) break;  // k > number of points; kmeans() rejects this
    --counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(far)])];
    assignment[static_cast<std::size_t>(far)] = c;
    counts[static_cast<std::size_t>(c)] = 1;
    dist2[static_cast<std::size_t>(far)] = 0.0;
    centroids.row(c) = data.row(far);
  }
}

}  // namespace

Clustering kmeans(const Matrix& train, int k, std::uint64_t seed, int max_iterations) {
  const int n = static_cast<int>(train.rows());
  if (k < 1) throw UsageError("k-means needs K >= 1");
  if (k > n) throw UsageError("k-means K=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " training rows");

  std::mt19937_64 rng(seed);
  Matrix centroids(k, train.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);

  // k-means++ seeding
  int first = std::uniform_int_distribution<int>(0, n - 1)(rng);
  centroids.row(0) = train.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  Vector nearest = (train.rowwise() - train.row(first)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    int pick = -1;
    const double total = nearest.sum();
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (int i = 0; i < n; ++i) {
        r -= nearest(i);
        if (r <= 0.0 && nearest(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (int i = n - 1; i >= 0; --i)
          if (nearest(i) > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      // All remaining points coincide with a chosen centroid.
      std::vector<int> free;
      for (int i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    centroids.row(c) = train.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
    nearest = nearest.cwiseMin((train.rowwise() - train.row(pick)).rowwise().squaredNorm());
  }

  std::vector<double> dist2;
  std::vector<int> assignment = assign_nearest(train, centroids, dist2);
  repair_empty(train, centroids, assignment, dist2);

  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    centroids.setZero();
    Vector counts = Vector::Zero(k);
    for (int i = 0; i < n; ++i) {
      centroids.row(assignment[static_cast<std::size_t>(i)]) += train.row(i);
      counts(assignment[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) centroids.row(c) /= counts(c);

    std::vector<int> next = assign_nearest(train, centroids, dist2);
    repair_empty(train, centroids, next, dist2);
    if (next == assignment) break;
    assignment = std::move(next);
  }

  Clustering out;
  out.centroids = std::move(centroids);
  out.assignment = std::move(assignment);
  out.seed = seed;
  out.iterations = iter;
  return out;
}

std::vector<int> rank_clusters(PointRef p, const FeatureSet& revealed, const Clustering& cl) {
  const int k = cl.k();
  std::vector<double> dist(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) dist[static_cast<std::size_t>(c)] = partial_distance(p, cl.centroids.row(c), revealed);

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)]; });

  std::vector<int> rank(static_cast<std::size_t>(k));
  for (int r = 0; r < k; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r + 1;
  return rank;
}

double score(const FeatureSet& revealed, PointRef p, const Clustering& cl) {
  if (revealed.full()) return 0.0;
  const auto predicted = rank_clusters(p, revealed, cl);
  const auto truth = rank_clusters(p, FeatureSet::all(cl.n_features()), cl);
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    sum += d * d;
  }
  return sum / cl.k();
}

void to_json(nlohmann::json& j, const Clustering& cl) {
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < cl.k(); ++c) {
    const RowVector r = cl.centroids.row(c);
    rows.emplace_back(r.data(), r.data() + r.size());
  }
  j = {{"k", cl.k()}, {"seed", cl.seed}, {"iterations", cl.iterations}, {"centroids", rows},
       {"assignment", cl.assignment}};
}

void from_json(const nlohmann::json& j, Clustering& cl) {
  const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
  const int k = j.at("k").get<int>();
  if (static_cast<int>(rows.size()) != k || k < 1) throw DataError("clustering file: centroid count does not match k");
  const auto width = rows.front().size();
  cl.centroids.resize(k, static_cast<Eigen::Index>(width));
  for (int c = 0; c < k; ++c) {
    if (rows[static_cast<std::size_t>(c)].size() != width) throw DataError("clustering file: ragged centroids");
    cl.centroids.row(c) = Eigen::Map<const RowVector>(rows[static_cast<std::size_t>(c)].data(),
                                                      static_cast<Eigen::Index>(width));
  }
  cl.seed = j.at("seed").get<std::uint64_t>();
  cl.iterations = j.value("iterations", 0);
  cl.assignment = j.value("assignment", std::vector<int>{});
}

}  // namespace frugalnn
