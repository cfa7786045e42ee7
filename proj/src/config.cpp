#include "frugalnn/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace frugalnn {

TreeParams RunConfig::tree_params() const {
  TreeParams p;
  p.tau = tau;
  p.alpha = alpha;
  p.ell = ell;
  p.exclude_path_features = exclude_path_features;
  return p;
}

std::vector<std::uint64_t> RunConfig::sweep_seeds() const { return seeds.empty() ? std::vector{seed} : seeds; }

SweepConfig RunConfig::sweep_config() const {
  SweepConfig s;
  s.agents = agents;
  s.budgets = budgets;
  s.seeds = sweep_seeds();
  s.k_neighbors = k_neighbors;
  s.n_clusters = n_clusters;
  s.alpha = alpha;
  s.tree = tree_params();
  s.dqn = dqn;
  s.jobs = jobs;
  s.collect_trace = trace;
  return s;
}

nlohmann::json to_json(const RunConfig& c) {
  std::vector<std::string> agents;
  for (auto a : c.agents) agents.push_back(to_string(a));
  return {{"dataset", c.dataset},
          {"header", c.header},
          {"costs", c.costs ? nlohmann::json(*c.costs) : nlohmann::json(nullptr)},
          {"train_fraction", c.train_fraction},
          {"norm", to_string(c.norm)},
          {"n_clusters", c.n_clusters},
          {"alpha", c.alpha},
          {"budget", c.budget},
          {"budgets", c.budgets},
          {"tau", c.tau},
          {"ell", c.ell},
          {"exclude_path_features", c.exclude_path_features},
          {"dqn", c.dqn},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"agents", agents},
          {"k_neighbors", c.k_neighbors},
          {"trace", c.trace}};
}

void merge_json(const nlohmann::json& j, RunConfig& c) {
  try {
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("header")) c.header = j.at("header").get<bool>();
    if (j.contains("costs"))
      c.costs = j.at("costs").is_null() ? std::nullopt : std::optional(j.at("costs").get<std::string>());
    if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("norm")) c.norm = parse_norm_mode(j.at("norm").get<std::string>());
    if (j.contains("n_clusters")) c.n_clusters = j.at("n_clusters").get<int>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("budget")) c.budget = j.at("budget").get<double>();
    if (j.contains("budgets")) c.budgets = j.at("budgets").get<std::vector<double>>();
    if (j.contains("tau")) c.tau = j.at("tau").get<int>();
    if (j.contains("ell")) c.ell = j.at("ell").get<int>();
    if (j.contains("exclude_path_features")) c.exclude_path_features = j.at("exclude_path_features").get<bool>();
    if (j.contains("dqn")) {
      nlohmann::json merged = c.dqn;
      merged.update(j.at("dqn"));
      c.dqn = merged.get<DqnHyper>();
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("agents")) {
      c.agents.clear();
      for (const auto& a : j.at("agents")) c.agents.push_back(parse_agent_type(a.get<std::string>()));
    }
    if (j.contains("k_neighbors")) c.k_neighbors = j.at("k_neighbors").get<int>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    if (j.contains("trace")) c.trace = j.at("trace").get<bool>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  RunConfig c;
  merge_json(j, c);
  return c;
}

std::string config_hash(const RunConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

}  // namespace frugalnn
