#pragma once

#include "frugalnn/cluster.hpp"
#include "frugalnn/data.hpp"
#include "frugalnn/synthetic.hpp"

#include <filesystem>
#include <initializer_list>
#include <memory>
#include <random>
#include <string>

namespace frugalnn::testing {

inline Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline std::shared_ptr<const Matrix> shared(Matrix m) { return std::make_shared<const Matrix>(std::move(m)); }

// Four blobs of ten points stacked along y; x only carries jitter.
inline Matrix fig3_points() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::uniform_real_distribution<double> x(0.45, 0.55);
  const double ys[] = {0.1, 0.37, 0.63, 0.9};
  Matrix m(40, 2);
  for (int b = 0; b < 4; ++b)
    for (int i = 0; i < 10; ++i) {
      m(b * 10 + i, 0) = x(rng);
      m(b * 10 + i, 1) = ys[b] + jitter(rng);
    }
  return m;
}

inline Clustering clustering_from(Matrix centroids) {
  Clustering cl;
  cl.centroids = std::move(centroids);
  return cl;
}

inline Matrix random_points(int n, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Split blob_split(std::uint64_t seed, int n_points = 500) {
  BlobSpec spec;
  spec.seed = seed;
  spec.n_points = n_points;
  return split(make_blobs(spec), SplitSpec{0.8, seed});
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("frugalnn-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace frugalnn::testing
