#include "frugalnn/cbctree.hpp"

#include "frugalnn/cluster.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

namespace frugalnn {

namespace {

RowVector centroid_of(const Matrix& data, std::span<const int> subset) {
  RowVector c = RowVector::Zero(data.cols());
  for (int i : subset) c += data.row(i);
  return c / static_cast<double>(subset.size());
}

double average_distance_to(const Matrix& data, std::span<const int> subset, const RowVector& c) {
  double sum = 0.0;
  for (int i : subset) sum += (data.row(i) - c).norm();
  return sum / static_cast<double>(subset.size());
}

void partition(const Matrix& data, std::span<const int> subset, Boundary b, std::vector<int>& left,
               std::vector<int>& right) {
  left.clear();
  right.clear();
  for (int i : subset) (data(i, b.feature) < b.value ? left : right).push_back(i);
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double average_centroid_distance(const Matrix& data, std::span<const int> subset) {
  if (subset.size() < 2) return 0.0;
  return average_distance_to(data, subset, centroid_of(data, subset));
}

std::optional<double> split_score(const Matrix& data, std::span<const int> subset, Boundary b) {
  std::vector<int> left, right;
  partition(data, subset, b, left, right);
  if (left.empty() || right.empty()) return std::nullopt;
  const double n = static_cast<double>(subset.size());
  const double p_left = static_cast<double>(left.size()) / n;
  const double p_right = static_cast<double>(right.size()) / n;
  return average_centroid_distance(data, subset) -
         (p_left * average_centroid_distance(data, left) + p_right * average_centroid_distance(data, right));
}

std::optional<double> split_reward(const Matrix& data, std::span<const int> subset, Boundary b,
                                   const CostSchedule& schedule, double alpha, const FeatureSet& path_used) {
  const auto s = split_score(data, subset, b);
  if (!s) return std::nullopt;
  const double cost = path_used.contains(b.feature) ? 0.0 : schedule.cost(b.feature);
  return (1.0 - alpha * cost) * *s;
}

std::vector<double> candidate_thresholds(double lo, double hi, int ell) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(ell));
  for (int j = 1; j <= ell; ++j) out.push_back(lo + (hi - lo) * j / (ell + 1));
  return out;
}

CBCTree CBCTree::build(std::shared_ptr<const Matrix> train, const CostSchedule& schedule, const TreeParams& params) {
  if (!train || train->rows() < 1) throw UsageError("tree induction needs at least one training point");
  if (params.tau < 1 || params.alpha < 0.0 || params.ell < 2) throw UsageError("invalid tree parameters");
  if (schedule.n_features() != train->cols()) throw DataError("cost schedule does not match the feature count");

  CBCTree tree;
  tree.data_ = std::move(train);
  tree.params_ = params;
  std::vector<int> all(static_cast<std::size_t>(tree.data_->rows()));
  std::iota(all.begin(), all.end(), 0);
  tree.build_node(std::move(all), schedule, FeatureSet(static_cast<int>(tree.data_->cols())));
  return tree;
}

void CBCTree::finalize_node(TreeNode& node) const {
  node.centroid = centroid_of(*data_, node.points);
  node.avg_dist = node.points.size() < 2 ? 0.0 : average_distance_to(*data_, node.points, node.centroid);
}

int CBCTree::build_node(std::vector<int> subset, const CostSchedule& schedule, FeatureSet path_used) {
  const Matrix& data = *data_;
  const int idx = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  nodes_.back().points = subset;
  finalize_node(nodes_.back());
  if (static_cast<int>(subset.size()) <= params_.tau) return idx;

  std::optional<Boundary> best;
  double best_reward = 0.0;
  for (int f = 0; f < data.cols(); ++f) {
    if (params_.exclude_path_features && path_used.contains(f)) continue;
    double lo = data(subset.front(), f), hi = lo;
    for (int i : subset) {
      lo = std::min(lo, data(i, f));
      hi = std::max(hi, data(i, f));
    }
    if (!(hi > lo)) continue;
    for (double v : candidate_thresholds(lo, hi, params_.ell)) {
      const Boundary b{f, v};
      const auto r = split_reward(data, subset, b, schedule, params_.alpha, path_used);
      if (r && *r > best_reward) {
        best_reward = *r;
        best = b;
      }
    }
  }
  if (!best) return idx;

  std::vector<int> left, right;
  partition(data, subset, *best, left, right);
  path_used.insert(best->feature);
  const int l = build_node(std::move(left), schedule, path_used);
  const int r = build_node(std::move(right), schedule, path_used);
  TreeNode& node = nodes_[static_cast<std::size_t>(idx)];
  node.boundary = *best;
  node.reward = best_reward;
  node.left = l;
  node.right = r;
  return idx;
}

void CBCTree::collect(int index, PointRef p, const FeatureSet& revealed, int branch_feature,
                      std::vector<int>& out) const {
  const TreeNode& n = node(index);
  if (n.is_leaf()) {
    out.push_back(index);
    return;
  }
  const int f = n.boundary.feature;
  if (revealed.contains(f)) {
    collect(p(f) < n.boundary.value ? n.left : n.right, p, revealed, branch_feature, out);
  } else if (branch_feature < 0 || f == branch_feature) {
    collect(n.left, p, revealed, branch_feature, out);
    collect(n.right, p, revealed, branch_feature, out);
  } else {
    out.push_back(index);
  }
}

std::vector<int> CBCTree::reachable_with_feature(PointRef p, const FeatureSet& revealed, int f) const {
  std::vector<int> out;
  collect(0, p, revealed, f, out);
  return out;
}

std::vector<int> CBCTree::reachable_all(PointRef p, const FeatureSet& revealed) const {
  std::vector<int> out;
  collect(0, p, revealed, -1, out);
  return out;
}

double CBCTree::similarity(int index, PointRef p, const FeatureSet& revealed, int total) const {
  const TreeNode& n = node(index);
  double sum = 0.0;
  for (int i : n.points) sum += partial_distance(p, data_->row(i), revealed);
  const double weight = static_cast<double>(n.points.size()) / static_cast<double>(total);
  return 1.0 / std::max(weight * sum, kSimilarityFloor);
}

double CBCTree::similarity_sum(std::span<const int> nodes, PointRef p, const FeatureSet& revealed) const {
  int total = 0;
  for (int i : nodes) total += static_cast<int>(node(i).points.size());
  double sum = 0.0;
  for (int i : nodes) sum += similarity(i, p, revealed, total);
  return sum;
}

Action CBCTree::suggest(PointRef p, const FeatureSet& revealed, const CostSchedule& schedule,
                        double budget_left) const {
  int index = 0;
  while (true) {
    const TreeNode& n = node(index);
    if (n.is_leaf()) return Action::terminate();
    const int f = n.boundary.feature;
    if (!revealed.contains(f)) {
      if (schedule.cost(f) <= budget_left + kCostTolerance) return Action::reveal(f);
      break;
    }
    index = p(f) < n.boundary.value ? n.left : n.right;
  }

  // The tree's next feature is unaffordable: take the affordable unknown
  // feature with the largest expected similarity.
  int best = -1;
  double best_sum = 0.0;
  for (int f = 0; f < schedule.n_features(); ++f) {
    if (revealed.contains(f) || schedule.cost(f) > budget_left + kCostTolerance) continue;
    const auto nodes = reachable_with_feature(p, revealed, f);
    const double s = similarity_sum(nodes, p, revealed);
    if (best < 0 || s > best_sum) {
      best = f;
      best_sum = s;
    }
  }
  return best < 0 ? Action::terminate() : Action::reveal(best);
}

int CBCTree::predict_cluster(PointRef p, const FeatureSet& revealed) const {
  const auto nodes = reachable_all(p, revealed);
  int total = 0;
  for (int i : nodes) total += static_cast<int>(node(i).points.size());
  int best = -1;
  double best_sim = 0.0;
  for (int i : nodes) {
    const double s = similarity(i, p, revealed, total);
    if (best < 0 || s > best_sim ||
        (s == best_sim && node(i).points.size() > node(best).points.size())) {
      best = i;
      best_sim = s;
    }
  }
  return best;
}

std::vector<int> CBCTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  return out;
}

int CBCTree::depth() const {
  std::function<int(int)> rec = [&](int i) -> int {
    const TreeNode& n = node(i);
    return n.is_leaf() ? 0 : 1 + std::max(rec(n.left), rec(n.right));
  };
  return rec(0);
}

nlohmann::json CBCTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json j;
    if (n.is_leaf()) {
      j = {{"leaf", true}, {"points", n.points}};
    } else {
      j = {{"leaf", false},        {"feature", n.boundary.feature}, {"value", n.boundary.value},
           {"reward", n.reward},   {"left", n.left},               {"right", n.right}};
    }
    nodes.push_back(std::move(j));
  }
  return {{"format", "cbctree"},
          {"version", 1},
          {"n_points", data_->rows()},
          {"n_features", data_->cols()},
          {"params",
           {{"tau", params_.tau},
            {"alpha", params_.alpha},
            {"ell", params_.ell},
            {"exclude_path_features", params_.exclude_path_features}}},
          {"nodes", nodes}};
}

CBCTree CBCTree::from_json(const nlohmann::json& j, std::shared_ptr<const Matrix> train) {
  CBCTree tree;
  try {
    if (j.at("format").get<std::string>() != "cbctree" || j.at("version").get<int>() != 1)
      throw DataError("unsupported tree file format");
    if (!train || j.at("n_points").get<Eigen::Index>() != train->rows() ||
        j.at("n_features").get<Eigen::Index>() != train->cols())
      throw DataError("tree file does not match the training data");
    tree.data_ = std::move(train);
    const auto& p = j.at("params");
    tree.params_.tau = p.at("tau").get<int>();
    tree.params_.alpha = p.at("alpha").get<double>();
    tree.params_.ell = p.at("ell").get<int>();
    tree.params_.exclude_path_features = p.at("exclude_path_features").get<bool>();

    const auto& nodes = j.at("nodes");
    const int count = static_cast<int>(nodes.size());
    if (count == 0) throw DataError("tree file has no nodes");
    tree.nodes_.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const auto& jn = nodes.at(static_cast<std::size_t>(i));
      TreeNode& n = tree.nodes_[static_cast<std::size_t>(i)];
      if (jn.at("leaf").get<bool>()) {
        n.points = jn.at("points").get<std::vector<int>>();
        std::sort(n.points.begin(), n.points.end());
        if (n.points.empty()) throw DataError("tree file has an empty leaf");
        for (int q : n.points)
          if (q < 0 || q >= tree.data_->rows()) throw DataError("tree file leaf point out of range");
      } else {
        n.boundary = {jn.at("feature").get<int>(), jn.at("value").get<double>()};
        n.reward = jn.at("reward").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        if (n.boundary.feature < 0 || n.boundary.feature >= tree.data_->cols() || n.left <= i || n.right <= i ||
            n.left >= count || n.right >= count)
          throw DataError("tree file node " + std::to_string(i) + " is malformed");
      }
    }
    // Children follow their parent in pre-order, so a reverse sweep fills
    // internal point sets from already complete children.
    for (int i = count - 1; i >= 0; --i) {
      TreeNode& n = tree.nodes_[static_cast<std::size_t>(i)];
      if (!n.is_leaf()) {
        const auto& l = tree.nodes_[static_cast<std::size_t>(n.left)].points;
        const auto& r = tree.nodes_[static_cast<std::size_t>(n.right)].points;
        n.points.clear();
        std::merge(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(n.points));
      }
      tree.finalize_node(n);
    }
    std::vector<int> expected(static_cast<std::size_t>(tree.data_->rows()));
    std::iota(expected.begin(), expected.end(), 0);
    if (tree.nodes_.front().points != expected) throw DataError("tree leaves do not partition the training data");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt tree file: ") + e.what());
  }
  return tree;
}

std::string CBCTree::pretty(const std::vector<std::string>& feature_names) const {
  std::ostringstream out;
  auto name = [&](int f) {
    return static_cast<std::size_t>(f) < feature_names.size() ? feature_names[static_cast<std::size_t>(f)]
                                                              : "f" + std::to_string(f);
  };
  std::function<void(int, int)> rec = [&](int i, int indent) {
    const TreeNode& n = node(i);
    out << std::string(static_cast<std::size_t>(indent * 2), ' ');
    if (n.is_leaf()) {
      out << "leaf #" << i << " size=" << n.points.size() << " avg_dist=" << format_value(n.avg_dist) << '\n';
      return;
    }
    out << "split #" << i << " " << name(n.boundary.feature) << " < " << format_value(n.boundary.value)
        << " size=" << n.points.size() << " reward=" << format_value(n.reward) << '\n';
    rec(n.left, indent + 1);
    rec(n.right, indent + 1);
  };
  rec(0, 0);
  return out.str();
}

}  // namespace frugalnn
