#pragma once

#include "frugalnn/data.hpp"

#include <cstdint>

namespace frugalnn {

/// Gaussian blobs over the informative features, uniform noise elsewhere.
/// Informative features come first.
struct BlobSpec {
  int n_points = 500;
  int n_informative = 4;
  int n_noise = 4;
  int n_clusters = 5;
  double cluster_std = 0.05;
  std::uint64_t seed = 0;
};

/// Raw (unnormalized) dataset; cluster centers are drawn in [0.1, 0.9].
Dataset make_blobs(const BlobSpec& spec);

}  // namespace frugalnn
