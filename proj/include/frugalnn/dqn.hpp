#pragma once

#include "frugalnn/env.hpp"
#include "frugalnn/qnetwork.hpp"
#include "frugalnn/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace frugalnn {

// Training runs in single precision; QNetwork<double> shares the same code
// and is what the gradient checks exercise.
using QNet = QNetwork<float>;

enum class OptimizerKind { Sgd, Adam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct DqnHyper {
  int episodes = 4000;
  double lr = 0.01;
  double gamma = 0.8;
  double eps0 = 1.0;
  double eps_decay = 0.999;
  std::vector<int> hidden{128, 256};
  int buffer_capacity = 50000;
  int batch_size = 64;
  int sync_interval = 100;  // train steps between hard target copies
  OptimizerKind optimizer = OptimizerKind::Sgd;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const DqnHyper& h);
void from_json(const nlohmann::json& j, DqnHyper& h);

struct Transition {
  Vector state;
  int action = 0;
  double reward = 0.0;
  Vector next_state;
  ActionMask next_mask;
  bool done = false;
};

/// Fixed-capacity ring buffer of transitions, sampled uniformly with
/// replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

/// Plain SGD or Adam over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}
  void apply(QNet::Vec& params, const QNet::Vec& gradient);

 private:
  OptimizerKind kind_;
  double lr_;
  QNet::Vec m_, v_;
  long step_ = 0;
};

/// Double-DQN targets: R + gamma * Q_target(s', argmax_{a in mask} Q_online(s', a)),
/// or R alone for terminal transitions.
Vector double_targets(std::span<const Transition* const> batch, const QNet& online, const QNet& target, double gamma);

/// One optimizer update of `online` on the Bellman squared error against
/// double-DQN targets. Returns the loss before the update; throws
/// DivergenceError if it is not finite.
double train_step(QNet& online, const QNet& target, std::span<const Transition* const> batch, double gamma,
                  Optimizer& optimizer);

/// Epsilon-greedy over the allowed actions; greedy ties go to the lowest index.
int act(const QNet& net, const Vector& state, const ActionMask& mask, double eps, std::mt19937_64& rng);

QNet make_network(int n_features, const DqnHyper& hyper, std::uint64_t seed);

double epsilon_after(const DqnHyper& hyper, int episodes);

struct TrainResult {
  QNet net;
  std::vector<double> reward_trace;  // mean episode return per block of 100 episodes
  double final_epsilon = 0.0;
  long train_steps = 0;
  long env_steps = 0;
};

struct TrainObserver {
  std::function<void(int episode, double epsilon)> on_episode;
  // Called for every environment step with the mask the action was chosen under.
  std::function<void(const EnvState& s, const ActionMask& mask, int action, const StepResult& r)> on_step;
};

/// Episodic training on uniformly sampled points of `env` at a fixed budget.
TrainResult train_dqn(const Environment& env, double budget, const DqnHyper& hyper, const TrainObserver& observer = {});

/// Trained network plus what is needed to reuse it elsewhere.
struct DqnModel {
  QNet net;
  DqnHyper hyper;
  double budget = 0.0;
  double alpha = 1.0;
  nlohmann::json context;  // normalization stats, clustering, schedule, config hash
};

nlohmann::json model_to_json(const DqnModel& model);
DqnModel model_from_json(const nlohmann::json& j);

void write_reward_trace_csv(std::span<const double> trace, std::ostream& out);

}  // namespace frugalnn
