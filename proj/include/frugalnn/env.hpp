#pragma once

#include "frugalnn/cluster.hpp"
#include "frugalnn/data.hpp"
#include "frugalnn/types.hpp"

#include <memory>

namespace frugalnn {

/// Reveal(feature) or Terminate. As a flat index, features are 0..n-1 and
/// Terminate is n.
class Action {
 public:
  static Action reveal(int feature) { return Action(feature); }
  static Action terminate() { return Action(-1); }
  static Action from_index(int index, int n_features) {
    return index == n_features ? terminate() : reveal(index);
  }

  bool is_terminate() const { return feature_ < 0; }
  int feature() const { return feature_; }
  int index(int n_features) const { return is_terminate() ? n_features : feature_; }

  friend bool operator==(Action a, Action b) { return a.feature_ == b.feature_; }

 private:
  explicit Action(int feature) : feature_(feature) {}
  int feature_;
};

struct EnvState {
  int point_index = 0;
  FeatureSet revealed;
  double accrued_cost = 0.0;
  double budget = 0.0;
  bool done = false;
};

struct StepResult {
  EnvState next_state;
  double reward = 0.0;
  bool done = false;
};

/// The budgeted feature-revealing MDP over a fixed set of complete points.
///
/// Revealing f charges c(f) (reward -alpha*c(f)) and reveals f's whole group.
/// Terminating pays -S(revealed, p). When a reveal leaves nothing affordable
/// the episode ends on that same step with both terms in the reward.
class Environment {
 public:
  Environment(std::shared_ptr<const Matrix> points, std::shared_ptr<const Clustering> clustering,
              CostSchedule schedule, double alpha);

  EnvState reset(int point_index, double budget) const;
  StepResult step(const EnvState& s, Action a) const;

  /// n+1 entries; entry n (Terminate) is always set.
  ActionMask mask(const EnvState& s) const;
  bool is_terminal(const EnvState& s) const;
  bool affordable(const EnvState& s, int feature) const;

  /// Multi-hot revealed indicator followed by the accrued cost.
  Vector encode(const EnvState& s) const;

  double terminal_score(const EnvState& s) const;

  int n_features() const { return static_cast<int>(points_->cols()); }
  int n_actions() const { return n_features() + 1; }
  int n_points() const { return static_cast<int>(points_->rows()); }
  double alpha() const { return alpha_; }
  const CostSchedule& schedule() const { return schedule_; }
  const Clustering& clustering() const { return *clustering_; }
  const Matrix& points() const { return *points_; }
  auto point(int i) const { return points_->row(i); }

 private:
  std::shared_ptr<const Matrix> points_;
  std::shared_ptr<const Clustering> clustering_;
  CostSchedule schedule_;
  double alpha_;
};

}  // namespace frugalnn
