#pragma once

#include "frugalnn/cbctree.hpp"
#include "frugalnn/cluster.hpp"
#include "frugalnn/data.hpp"
#include "frugalnn/dqn.hpp"
#include "frugalnn/env.hpp"
#include "frugalnn/eval.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace frugalnn {

/// Everything the service reads; shared read-only by all sessions.
struct AdvisorModels {
  std::vector<std::string> feature_names;
  std::vector<FeatureStats> stats;
  NormMode mode = NormMode::MinMax;
  CostSchedule schedule;
  std::shared_ptr<const Matrix> train;  // normalized
  std::shared_ptr<const Clustering> clustering;
  std::shared_ptr<const QNet> dqn;       // optional
  std::shared_ptr<const CBCTree> tree;   // optional
  double alpha = 1.0;
  int k_neighbors = 5;

  int n_features() const { return static_cast<int>(feature_names.size()); }
};

/// Reads the artifacts a pipeline run leaves in `dir` (train.csv, stats.json,
/// costs.json, clustering.json and whichever of tree.json / dqn_model.json
/// exist).
AdvisorModels load_advisor_models(const std::filesystem::path& dir, int k_neighbors);

/// Client-visible failure: HTTP status plus a machine-readable code.
class ApiError : public Error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  nlohmann::json body() const { return {{"code", code_}, {"message", what()}}; }

 private:
  int status_;
  std::string code_;
};

struct HistoryEntry {
  std::string action;  // "reveal" or "terminate"
  int feature = -1;
  double raw_value = 0.0;
  double cost = 0.0;   // charged by this entry
};

struct Session {
  std::string id;
  AgentType policy = AgentType::Dqn;
  double budget = 0.0;
  FeatureSet charged;  // paid for, alone or through a group
  FeatureSet valued;   // value supplied by the user; subset of charged
  RowVector values;    // normalized, zero where not valued
  double accrued_cost = 0.0;
  bool terminated = false;
  std::vector<HistoryEntry> history;
  std::chrono::steady_clock::time_point last_used;
  std::mutex mutex;
};

/// Session logic without any transport. Every method returns the JSON body
/// of a successful response or throws ApiError.
class AdvisorService {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit AdvisorService(std::shared_ptr<const AdvisorModels> models,
                          std::chrono::seconds ttl = std::chrono::hours(1), Clock clock = {});

  nlohmann::json create(const nlohmann::json& request);
  nlohmann::json get(const std::string& id);
  nlohmann::json reveal(const std::string& id, const nlohmann::json& request);
  nlohmann::json terminate(const std::string& id);
  nlohmann::json remove(const std::string& id);

  std::size_t session_count();
  const AdvisorModels& models() const { return *models_; }

  /// Policy suggestion for the given partial state, exactly as the batch
  /// evaluation would choose it.
  Action suggestion(const Session& s) const;

 private:
  std::shared_ptr<Session> find(const std::string& id);
  void evict_expired();
  nlohmann::json advice(const Session& s) const;
  std::string new_id();

  std::shared_ptr<const AdvisorModels> models_;
  Environment env_;
  std::chrono::seconds ttl_;
  Clock clock_;
  std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_rng_;
};

/// Registers the session routes (and static files under `ui_dir` if given).
void mount_routes(httplib::Server& server, AdvisorService& service,
                  const std::optional<std::filesystem::path>& ui_dir = std::nullopt);

}  // namespace frugalnn
