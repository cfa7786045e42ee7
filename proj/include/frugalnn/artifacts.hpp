#pragma once

#include "frugalnn/cbctree.hpp"
#include "frugalnn/cluster.hpp"
#include "frugalnn/data.hpp"
#include "frugalnn/dqn.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>

// File names and readers for the artifacts a pipeline run leaves in its
// output directory. JSON artifacts carry "config" and "config_hash" keys;
// CSVs get a "<name>.meta.json" sidecar with the same two keys.
namespace frugalnn::artifacts {

inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kStats = "stats.json";
inline constexpr const char* kCosts = "costs.json";
inline constexpr const char* kClustering = "clustering.json";
inline constexpr const char* kTree = "tree.json";
inline constexpr const char* kDqnModel = "dqn_model.json";
inline constexpr const char* kRewardTrace = "reward_trace.csv";
inline constexpr const char* kReport = "report.csv";
inline constexpr const char* kTrace = "trace.csv";

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes to a temporary next to `path` and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_meta(const std::filesystem::path& artifact, const nlohmann::json& provenance);

/// Train and test splits as written by `prepare`, with their statistics.
struct Prepared {
  Dataset train;
  Dataset test;
  CostSchedule schedule;
};

Prepared load_prepared(const std::filesystem::path& dir, bool need_test = true);
Clustering load_clustering(const std::filesystem::path& path, int n_features);
CBCTree load_tree(const std::filesystem::path& path, std::shared_ptr<const Matrix> train);
DqnModel load_dqn(const std::filesystem::path& path, int n_features);

}  // namespace frugalnn::artifacts
