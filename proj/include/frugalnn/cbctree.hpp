#pragma once

#include "frugalnn/data.hpp"
#include "frugalnn/env.hpp"
#include "frugalnn/types.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace frugalnn {

struct Boundary {
  int feature = -1;
  double value = 0.0;
};

struct TreeParams {
  int tau = 10;        // nodes with at most tau points become leaves
  double alpha = 1.0;  // cost scaler in the split reward
  int ell = 20;        // candidate thresholds per feature and node
  // Forbid splitting again on a feature already used on the path instead of
  // reusing it at zero cost.
  bool exclude_path_features = false;
};

/// Node of a Cost Balancing Clustering Tree. Left child holds p.f < value,
/// right child p.f >= value. Every node keeps its data subset.
struct TreeNode {
  Boundary boundary;
  int left = -1;
  int right = -1;
  std::vector<int> points;
  RowVector centroid;
  double avg_dist = 0.0;
  double reward = 0.0;  // reward of the chosen boundary (internal nodes)

  bool is_leaf() const { return left < 0; }
};

/// Average L2 distance between the rows in `subset` and their centroid.
double average_centroid_distance(const Matrix& data, std::span<const int> subset);

/// delta_D - (p_l delta_l + p_r delta_r); nullopt when one side is empty.
std::optional<double> split_score(const Matrix& data, std::span<const int> subset, Boundary b);

/// (1 - alpha c(f)) * split_score, with c(f) taken as 0 for features already
/// split on along the path.
std::optional<double> split_reward(const Matrix& data, std::span<const int> subset, Boundary b,
                                   const CostSchedule& schedule, double alpha, const FeatureSet& path_used);

/// The ell evenly spaced interior thresholds over [lo, hi], endpoints excluded.
std::vector<double> candidate_thresholds(double lo, double hi, int ell);

class CBCTree {
 public:
  static CBCTree build(std::shared_ptr<const Matrix> train, const CostSchedule& schedule, const TreeParams& params);
  static CBCTree from_json(const nlohmann::json& j, std::shared_ptr<const Matrix> train);

  /// Nodes reachable knowing `revealed` plus a hypothetical value of `f`.
  std::vector<int> reachable_with_feature(PointRef p, const FeatureSet& revealed, int f) const;
  /// Nodes reachable when every unknown split feature may go either way.
  std::vector<int> reachable_all(PointRef p, const FeatureSet& revealed) const;

  /// Reciprocal of the size-weighted summed partial distance from p to the
  /// node's points; `total` is the point count over the candidate node set.
  double similarity(int node, PointRef p, const FeatureSet& revealed, int total) const;
  double similarity_sum(std::span<const int> nodes, PointRef p, const FeatureSet& revealed) const;

  Action suggest(PointRef p, const FeatureSet& revealed, const CostSchedule& schedule, double budget_left) const;
  int predict_cluster(PointRef p, const FeatureSet& revealed) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const TreeNode& root() const { return nodes_.front(); }
  std::vector<int> leaves() const;
  int depth() const;
  const Matrix& data() const { return *data_; }
  const TreeParams& params() const { return params_; }

  nlohmann::json to_json() const;
  /// Indented listing, one line per node.
  std::string pretty(const std::vector<std::string>& feature_names = {}) const;

 private:
  int build_node(std::vector<int> subset, const CostSchedule& schedule, FeatureSet path_used);
  void collect(int node, PointRef p, const FeatureSet& revealed, int branch_feature, std::vector<int>& out) const;
  void finalize_node(TreeNode& node) const;

  std::shared_ptr<const Matrix> data_;
  TreeParams params_;
  std::vector<TreeNode> nodes_;  // pre-order, root at 0
};

inline constexpr double kSimilarityFloor = 1e-9;

}  // namespace frugalnn
