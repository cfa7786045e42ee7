#include "frugalnn/env.hpp"

#include <string>

namespace frugalnn {

Environment::Environment(std::shared_ptr<const Matrix> points, std::shared_ptr<const Clustering> clustering,
                         CostSchedule schedule, double alpha)
    : points_(std::move(points)), clustering_(std::move(clustering)), schedule_(std::move(schedule)), alpha_(alpha) {
  if (!points_ || !clustering_) throw UsageError("environment needs points and a clustering");
  if (schedule_.n_features() != n_features() || clustering_->n_features() != n_features())
    throw DataError("environment: points, clustering and cost schedule disagree on the feature count");
  if (alpha_ < 0.0) throw UsageError("alpha must be non-negative");
}

EnvState Environment::reset(int point_index, double budget) const {
  if (point_index < 0 || point_index >= n_points())
    throw UsageError("point index " + std::to_string(point_index) + " out of range");
  if (!(budget > 0.0)) throw UsageError("budget must be positive");
  EnvState s;
  s.point_index = point_index;
  s.revealed = FeatureSet(n_features());
  s.budget = budget;
  return s;
}

bool Environment::affordable(const EnvState& s, int feature) const {
  return !s.revealed.contains(feature) && s.accrued_cost + schedule_.cost(feature) <= s.budget + kCostTolerance;
}

ActionMask Environment::mask(const EnvState& s) const {
  ActionMask m(n_actions());
  for (int f = 0; f < n_features(); ++f) m(f) = affordable(s, f);
  m(n_features()) = true;
  return m;
}

bool Environment::is_terminal(const EnvState& s) const {
  for (int f = 0; f < n_features(); ++f)
    if (affordable(s, f)) return false;
  return true;
}

Vector Environment::encode(const EnvState& s) const {
  Vector x = Vector::Zero(n_actions());
  for (int f = 0; f < n_features(); ++f)
    if (s.revealed.contains(f)) x(f) = 1.0;
  x(n_features()) = s.accrued_cost;
  return x;
}

double Environment::terminal_score(const EnvState& s) const {
  return score(s.revealed, point(s.point_index), *clustering_);
}

StepResult Environment::step(const EnvState& s, Action a) const {
  if (s.done) throw UsageError("step() on a finished episode");
  StepResult r;
  r.next_state = s;
  if (a.is_terminate()) {
    r.reward = -terminal_score(s);
    r.done = true;
    r.next_state.done = true;
    return r;
  }
  const int f = a.feature();
  if (f < 0 || f >= n_features()) throw UsageError("feature index " + std::to_string(f) + " out of range");
  if (s.revealed.contains(f)) throw UsageError("feature " + std::to_string(f) + " already revealed");
  if (!affordable(s, f)) throw UsageError("feature " + std::to_string(f) + " exceeds the remaining budget");

  const double cost = schedule_.cost(f);
  r.reward = -alpha_ * cost;
  for (int g : schedule_.group_of(f)) r.next_state.revealed.insert(g);
  r.next_state.accrued_cost += cost;
  if (is_terminal(r.next_state)) {
    r.reward -= terminal_score(r.next_state);
    r.done = true;
    r.next_state.done = true;
  }
  return r;
}

}  // namespace frugalnn
