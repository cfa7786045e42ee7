#include "frugalnn/synthetic.hpp"

#include <random>

namespace frugalnn {

Dataset make_blobs(const BlobSpec& spec) {
  if (spec.n_points < 1 || spec.n_clusters < 1 || spec.n_informative < 0 || spec.n_noise < 0 ||
      spec.n_informative + spec.n_noise < 1)
    throw UsageError("invalid blob specification");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> center(0.1, 0.9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, spec.cluster_std);

  Matrix centers(spec.n_clusters, spec.n_informative);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = center(rng);

  const int n = spec.n_informative + spec.n_noise;
  Dataset ds;
  ds.rows.resize(spec.n_points, n);
  for (int r = 0; r < spec.n_points; ++r) {
    const int c = r % spec.n_clusters;
    for (int f = 0; f < spec.n_informative; ++f) ds.rows(r, f) = centers(c, f) + jitter(rng);
    for (int f = spec.n_informative; f < n; ++f) ds.rows(r, f) = unit(rng);
  }
  for (int f = 0; f < n; ++f) ds.feature_names.push_back(f < spec.n_informative ? "x" + std::to_string(f)
                                                                                   : "noise" + std::to_string(f - spec.n_informative));
  return ds;
}

}  // namespace frugalnn
