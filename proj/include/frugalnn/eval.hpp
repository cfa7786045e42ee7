#pragma once

#include "frugalnn/cbctree.hpp"
#include "frugalnn/data.hpp"
#include "frugalnn/dqn.hpp"
#include "frugalnn/env.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace frugalnn {

/// Uniform over every available action, Terminate included.
struct RandomAgent {};

/// Greedy masked argmax of a trained Q-network.
struct DqnAgent {
  std::shared_ptr<const QNet> net;
};

/// Tree traversal suggestion; retrieval restricted to the predicted node.
struct TreeAgent {
  std::shared_ptr<const CBCTree> tree;
};

using Agent = std::variant<RandomAgent, DqnAgent, TreeAgent>;

enum class AgentType { Random, Dqn, Tree };

AgentType parse_agent_type(const std::string& name);
std::string to_string(AgentType type);
AgentType type_of(const Agent& agent);

/// The agent's action in state `s`; always allowed by env.mask(s).
Action choose(const Agent& agent, const Environment& env, const EnvState& s, std::mt19937_64& rng);

struct EpisodeOutcome {
  FeatureSet revealed;
  double cost = 0.0;
  double score = 0.0;
  double total_reward = 0.0;
  int steps = 0;
};

/// Rolls `agent` from the empty state to termination. A budget of zero or
/// less admits no reveal; the outcome is then the empty set.
EpisodeOutcome run_episode(const Agent& agent, const Environment& env, int point_index, double budget,
                           std::mt19937_64& rng);

/// The k points of `train` (or of `restriction`) nearest to p on the
/// revealed features, ties by ascending index. Fewer than k when the
/// candidate set is smaller.
std::vector<int> knn_retrieve(const Matrix& train, PointRef p, const FeatureSet& revealed, int k,
                              std::optional<std::span<const int>> restriction = std::nullopt);

/// Sum of full-feature distances from p to the retrieved points.
double true_distance_sum(const Matrix& train, PointRef p, std::span<const int> retrieved);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Deterministic 64-bit mixing of a seed with stream identifiers.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0);

struct SweepConfig {
  std::vector<AgentType> agents{AgentType::Random, AgentType::Dqn, AgentType::Tree};
  std::vector<double> budgets{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::uint64_t> seeds{0};
  int k_neighbors = 5;
  int n_clusters = 5;
  double alpha = 1.0;
  TreeParams tree;
  DqnHyper dqn;
  int jobs = 1;
  bool collect_trace = false;
  std::function<void(const std::string&)> log;
};

struct SweepRow {
  std::string agent;
  double budget = 0.0;
  std::uint64_t seed = 0;
  double mean_sum_true_distance = 0.0;
  double mean_score = 0.0;
  double mean_cost = 0.0;
  int n_test = 0;
  int retrieval_shortfall = 0;  // test points whose candidate set held fewer than k points
};

struct TraceRow {
  int point_id = 0;
  std::string agent;
  double budget = 0.0;
  std::uint64_t seed = 0;
  std::string revealed_bitmask;
  double cost = 0.0;
  double score = 0.0;
  double sum_true_distance = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ordered by seed, budget, agent
  std::vector<TraceRow> trace;
};

/// Every requested agent at every budget and seed, evaluated on all test
/// points. k-means and the DQN are fit per seed (the DQN per budget too);
/// the tree is built once.
SweepReport budget_sweep(const Dataset& train, const Dataset& test, const CostSchedule& schedule,
                         const SweepConfig& config);

void write_report_csv(const SweepReport& report, std::ostream& out);
void write_trace_csv(const SweepReport& report, std::ostream& out);

}  // namespace frugalnn
