#include "frugalnn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace frugalnn {

AgentType parse_agent_type(const std::string& name) {
  if (name == "random") return AgentType::Random;
  if (name == "dqn") return AgentType::Dqn;
  if (name == "tree" || name == "cbctree") return AgentType::Tree;
  throw UsageError("unknown agent '" + name + "' (expected random, dqn or tree)");
}

std::string to_string(AgentType type) {
  switch (type) {
    case AgentType::Random: return "random";
    case AgentType::Dqn: return "dqn";
    case AgentType::Tree: return "tree";
  }
  return "?";
}

AgentType type_of(const Agent& agent) { return static_cast<AgentType>(agent.index()); }

Action choose(const Agent& agent, const Environment& env, const EnvState& s, std::mt19937_64& rng) {
  const ActionMask mask = env.mask(s);
  const int n = env.n_features();
  if (std::holds_alternative<RandomAgent>(agent)) {
    std::vector<int> allowed;
    for (int a = 0; a <= n; ++a)
      if (mask(a)) allowed.push_back(a);
    return Action::from_index(allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)], n);
  }
  if (const auto* dqn = std::get_if<DqnAgent>(&agent)) {
    return Action::from_index(masked_argmax(dqn->net->forward_one(env.encode(s).cast<float>()), mask), n);
  }
  const auto& tree = *std::get<TreeAgent>(agent).tree;
  const Action a = tree.suggest(env.point(s.point_index), s.revealed, env.schedule(), s.budget - s.accrued_cost);
  return mask(a.index(n)) ? a : Action::terminate();
}

EpisodeOutcome run_episode(const Agent& agent, const Environment& env, int point_index, double budget,
                           std::mt19937_64& rng) {
  EpisodeOutcome out;
  if (!(budget > 0.0)) {
    out.revealed = FeatureSet(env.n_features());
    out.score = score(out.revealed, env.point(point_index), env.clustering());
    out.total_reward = -out.score;
    return out;
  }
  EnvState s = env.reset(point_index, budget);
  while (!s.done) {
    const StepResult r = env.step(s, choose(agent, env, s, rng));
    out.total_reward += r.reward;
    ++out.steps;
    s = r.next_state;
  }
  out.revealed = s.revealed;
  out.cost = s.accrued_cost;
  out.score = env.terminal_score(s);
  return out;
}

std::vector<int> knn_retrieve(const Matrix& train, PointRef p, const FeatureSet& revealed, int k,
                              std::optional<std::span<const int>> restriction) {
  if (k < 1) throw UsageError("k must be at least 1");
  std::vector<std::pair<double, int>> candidates;
  auto consider = [&](int i) { candidates.emplace_back(partial_distance(p, train.row(i), revealed), i); };
  if (restriction) {
    for (int i : *restriction) consider(i);
  } else {
    for (int i = 0; i < train.rows(); ++i) consider(i);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end());
  std::vector<int> out(take);
  for (std::size_t i = 0; i < take; ++i) out[i] = candidates[i].second;
  return out;
}

double true_distance_sum(const Matrix& train, PointRef p, std::span<const int> retrieved) {
  double sum = 0.0;
  for (int i : retrieved) sum += (train.row(i) - p).norm();
  return sum;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw UsageError("spearman needs two equal-length series");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const Eigen::Map<const Vector> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Vector> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Vector dx = x.array() - x.mean();
  const Vector dy = y.array() - y.mean();
  const double denom = std::sqrt(dx.squaredNorm() * dy.squaredNorm());
  return denom > 0.0 ? dx.dot(dy) / denom : 0.0;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b) {
  // splitmix64 finalizer over a combination of the inputs
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream_a) ^ stream_b);
}

namespace {

struct CellResult {
  std::vector<SweepRow> rows;
  std::vector<TraceRow> trace;
};

CellResult run_cell(const Dataset& train, const Dataset& test, const CostSchedule& schedule,
                    const SweepConfig& config, std::shared_ptr<const Matrix> train_points,
                    std::shared_ptr<const Matrix> test_points, std::shared_ptr<const CBCTree> tree,
                    std::uint64_t seed, std::size_t budget_index) {
  const double budget = config.budgets[budget_index];
  auto clustering = std::make_shared<const Clustering>(kmeans(train.rows, config.n_clusters, derive_seed(seed, 1)));
  const Environment train_env(train_points, clustering, schedule, config.alpha);
  const Environment test_env(test_points, clustering, schedule, config.alpha);

  CellResult cell;
  for (std::size_t a = 0; a < config.agents.size(); ++a) {
    const AgentType type = config.agents[a];
    Agent agent = RandomAgent{};
    if (type == AgentType::Dqn) {
      DqnHyper hyper = config.dqn;
      hyper.seed = derive_seed(seed, 2, budget_index);
      if (budget > 0.0) {
        if (config.log) {
          char msg[96];
          std::snprintf(msg, sizeof msg, "training dqn: seed %llu budget %g", static_cast<unsigned long long>(seed), budget);
          config.log(msg);
        }
        agent = DqnAgent{std::make_shared<const QNet>(train_dqn(train_env, budget, hyper).net)};
      } else {
        agent = DqnAgent{std::make_shared<const QNet>(make_network(train.n_features(), hyper, hyper.seed))};
      }
    } else if (type == AgentType::Tree) {
      agent = TreeAgent{tree};
    }

    std::mt19937_64 rng(derive_seed(seed, 3, budget_index * 16 + a));
    SweepRow row;
    row.agent = to_string(type);
    row.budget = budget;
    row.seed = seed;
    row.n_test = test.size();
    for (int i = 0; i < test.size(); ++i) {
      const EpisodeOutcome ep = run_episode(agent, test_env, i, budget, rng);
      const auto p = test.rows.row(i);
      std::vector<int> retrieved;
      if (type == AgentType::Tree) {
        const auto& members = tree->node(tree->predict_cluster(p, ep.revealed)).points;
        retrieved = knn_retrieve(train.rows, p, ep.revealed, config.k_neighbors, std::span<const int>(members));
      } else {
        retrieved = knn_retrieve(train.rows, p, ep.revealed, config.k_neighbors);
      }
      if (static_cast<int>(retrieved.size()) < config.k_neighbors) ++row.retrieval_shortfall;
      const double dist = true_distance_sum(train.rows, p, retrieved);
      row.mean_sum_true_distance += dist;
      row.mean_score += ep.score;
      row.mean_cost += ep.cost;
      if (config.collect_trace) {
        cell.trace.push_back(TraceRow{i, row.agent, budget, seed, ep.revealed.to_hex(), ep.cost, ep.score, dist});
      }
    }
    if (row.n_test > 0) {
      row.mean_sum_true_distance /= row.n_test;
      row.mean_score /= row.n_test;
      row.mean_cost /= row.n_test;
    }
    cell.rows.push_back(std::move(row));
  }
  return cell;
}

}  // namespace

SweepReport budget_sweep(const Dataset& train, const Dataset& test, const CostSchedule& schedule,
                         const SweepConfig& config) {
  if (config.agents.empty() || config.budgets.empty() || config.seeds.empty())
    throw UsageError("sweep needs at least one agent, budget and seed");
  if (train.n_features() != test.n_features() || schedule.n_features() != train.n_features())
    throw DataError("train, test and cost schedule disagree on the feature count");
  if (test.size() < 1) throw DataError("sweep needs a non-empty test set");
  for (double b : config.budgets)
    if (!(b >= 0.0)) throw UsageError("budgets must be non-negative");

  auto train_points = std::make_shared<const Matrix>(train.rows);
  auto test_points = std::make_shared<const Matrix>(test.rows);
  std::shared_ptr<const CBCTree> tree;
  if (std::find(config.agents.begin(), config.agents.end(), AgentType::Tree) != config.agents.end()) {
    TreeParams params = config.tree;
    params.alpha = config.alpha;
    tree = std::make_shared<const CBCTree>(CBCTree::build(train_points, schedule, params));
  }

  const std::size_t n_cells = config.seeds.size() * config.budgets.size();
  std::vector<CellResult> cells(n_cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < n_cells; c = next++) {
      try {
        cells[c] = run_cell(train, test, schedule, config, train_points, test_points, tree,
                            config.seeds[c / config.budgets.size()], c % config.budgets.size());
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(n_cells)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepReport report;
  for (auto& cell : cells) {
    for (auto& r : cell.rows) report.rows.push_back(std::move(r));
    for (auto& t : cell.trace) report.trace.push_back(std::move(t));
  }
  return report;
}

void write_report_csv(const SweepReport& report, std::ostream& out) {
  out << "agent,budget,seed,mean_sum_true_distance,mean_score,mean_cost,n_test\n";
  for (const auto& r : report.rows) {
    out << r.agent << ',' << fmt(r.budget) << ',' << r.seed << ',' << fmt(r.mean_sum_true_distance) << ','
        << fmt(r.mean_score) << ',' << fmt(r.mean_cost) << ',' << r.n_test << '\n';
  }
}

void write_trace_csv(const SweepReport& report, std::ostream& out) {
  out << "point_id,agent,budget,revealed_bitmask,cost,score,sum_true_distance\n";
  for (const auto& t : report.trace) {
    out << t.point_id << ',' << t.agent << ',' << fmt(t.budget) << ',' << t.revealed_bitmask << ',' << fmt(t.cost)
        << ',' << fmt(t.score) << ',' << fmt(t.sum_true_distance) << '\n';
  }
}

}  // namespace frugalnn
