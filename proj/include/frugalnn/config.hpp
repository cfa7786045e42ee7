#pragma once

#include "frugalnn/data.hpp"
#include "frugalnn/dqn.hpp"
#include "frugalnn/eval.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace frugalnn {

/// Everything a pipeline run depends on. Serialized into every artifact.
struct RunConfig {
  std::string dataset;
  bool header = true;
  std::optional<std::string> costs;
  double train_fraction = 0.8;
  NormMode norm = NormMode::MinMax;

  int n_clusters = 5;
  double alpha = 1.0;
  double budget = 0.5;  // train-dqn
  std::vector<double> budgets{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int tau = 10;
  int ell = 20;
  bool exclude_path_features = false;
  DqnHyper dqn;

  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // sweep; empty means {seed}
  std::vector<AgentType> agents{AgentType::Random, AgentType::Dqn, AgentType::Tree};
  int k_neighbors = 5;
  int jobs = 1;
  bool trace = false;
  std::string out_dir = "out";

  TreeParams tree_params() const;
  SweepConfig sweep_config() const;
  std::vector<std::uint64_t> sweep_seeds() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Keys absent from `j` keep the values already in `c`.
void merge_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::string& path);

/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& c);

std::vector<double> parse_real_list(const std::string& text);

}  // namespace frugalnn
