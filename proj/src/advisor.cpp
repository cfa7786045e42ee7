#include "frugalnn/advisor.hpp"

#include "frugalnn/artifacts.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace frugalnn {

namespace fs = std::filesystem;

AdvisorModels load_advisor_models(const fs::path& dir, int k_neighbors) {
  if (k_neighbors < 1) throw UsageError("k must be at least 1");
  const auto prepared = artifacts::load_prepared(dir, false);
  AdvisorModels m;
  m.feature_names = prepared.train.feature_names;
  m.stats = prepared.train.stats;
  m.mode = prepared.train.mode;
  m.schedule = prepared.schedule;
  m.train = std::make_shared<const Matrix>(prepared.train.rows);
  m.clustering = std::make_shared<const Clustering>(
      artifacts::load_clustering(dir / artifacts::kClustering, m.n_features()));
  m.k_neighbors = k_neighbors;
  if (fs::exists(dir / artifacts::kTree))
    m.tree = std::make_shared<const CBCTree>(artifacts::load_tree(dir / artifacts::kTree, m.train));
  if (fs::exists(dir / artifacts::kDqnModel)) {
    DqnModel model = artifacts::load_dqn(dir / artifacts::kDqnModel, m.n_features());
    m.alpha = model.alpha;
    m.dqn = std::make_shared<const QNet>(std::move(model.net));
  } else if (m.tree) {
    m.alpha = m.tree->params().alpha;
  }
  if (!m.dqn && !m.tree) throw DataError("no tree.json or dqn_model.json in '" + dir.string() + "'");
  return m;
}

namespace {

ApiError bad_request(const std::string& message) { return ApiError(400, "bad_request", message); }

nlohmann::json action_json(Action a, const AdvisorModels& m) {
  if (a.is_terminate()) return {{"action", "terminate"}};
  return {{"action", "reveal"},
          {"feature", m.feature_names[static_cast<std::size_t>(a.feature())]},
          {"index", a.feature()},
          {"cost", m.schedule.cost(a.feature())}};
}

}  // namespace

AdvisorService::AdvisorService(std::shared_ptr<const AdvisorModels> models, std::chrono::seconds ttl, Clock clock)
    : models_(std::move(models)),
      env_(models_->train, models_->clustering, models_->schedule, models_->alpha),
      ttl_(ttl),
      clock_(clock ? std::move(clock) : Clock([] { return std::chrono::steady_clock::now(); })),
      id_rng_(std::random_device{}()) {}

std::string AdvisorService::new_id() {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(id_rng_()),
                static_cast<unsigned long long>(id_rng_()));
  return buf;
}

void AdvisorService::evict_expired() {
  const auto now = clock_();
  std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_used > ttl_; });
}

std::size_t AdvisorService::session_count() {
  std::lock_guard<std::mutex> lock(store_mutex_);
  evict_expired();
  return sessions_.size();
}

std::shared_ptr<Session> AdvisorService::find(const std::string& id) {
  std::lock_guard<std::mutex> lock(store_mutex_);
  evict_expired();
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "unknown_session", "no session '" + id + "'");
  it->second->last_used = clock_();
  return it->second;
}

Action AdvisorService::suggestion(const Session& s) const {
  if (s.terminated) return Action::terminate();
  const EnvState state{0, s.charged, s.accrued_cost, s.budget, false};
  if (s.policy == AgentType::Dqn) {
    std::mt19937_64 unused;
    return choose(DqnAgent{models_->dqn}, env_, state, unused);
  }
  const Action a = models_->tree->suggest(s.values, s.valued, models_->schedule, s.budget - s.accrued_cost);
  // A group member already paid for only needs its value.
  if (!a.is_terminate() && s.charged.contains(a.feature())) return a;
  return env_.mask(state)(a.index(env_.n_features())) ? a : Action::terminate();
}

nlohmann::json AdvisorService::advice(const Session& s) const {
  const AdvisorModels& m = *models_;
  nlohmann::json out;
  out["id"] = s.id;
  out["policy"] = to_string(s.policy);
  out["budget"] = s.budget;
  out["accrued_cost"] = s.accrued_cost;
  out["remaining_budget"] = std::max(0.0, s.budget - s.accrued_cost);
  out["terminated"] = s.terminated;

  std::vector<std::optional<double>> raw(static_cast<std::size_t>(m.n_features()));
  for (const auto& h : s.history)
    if (h.action == "reveal") raw[static_cast<std::size_t>(h.feature)] = h.raw_value;
  nlohmann::json revealed = nlohmann::json::array();
  nlohmann::json pending = nlohmann::json::array();
  for (int f : s.charged.indices()) {
    const auto& name = m.feature_names[static_cast<std::size_t>(f)];
    nlohmann::json r = {{"feature", name}, {"index", f}};
    if (s.valued.contains(f)) {
      r["value"] = *raw[static_cast<std::size_t>(f)];
      r["normalized"] = s.values(f);
    } else {
      r["value"] = nullptr;
      pending.push_back(name);
    }
    revealed.push_back(std::move(r));
  }
  out["revealed"] = std::move(revealed);
  out["pending"] = std::move(pending);
  out["suggestion"] = action_json(suggestion(s), m);

  const auto ranks = rank_clusters(s.values, s.valued, *m.clustering);
  std::vector<int> order(ranks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ranks[a] < ranks[b]; });
  nlohmann::json ranking = nlohmann::json::array();
  for (int c : order)
    ranking.push_back({{"cluster", c},
                       {"rank", ranks[static_cast<std::size_t>(c)]},
                       {"distance", partial_distance(s.values, m.clustering->centroids.row(c), s.valued)}});
  out["cluster_ranking"] = std::move(ranking);

  std::vector<int> neighbors;
  if (s.policy == AgentType::Tree) {
    const int node = m.tree->predict_cluster(s.values, s.valued);
    out["predicted_cluster"] = {{"kind", "tree_node"}, {"id", node}};
    neighbors = knn_retrieve(*m.train, s.values, s.valued, m.k_neighbors,
                             std::span<const int>(m.tree->node(node).points));
  } else {
    out["predicted_cluster"] = {{"kind", "kmeans"}, {"id", order.front()}};
    neighbors = knn_retrieve(*m.train, s.values, s.valued, m.k_neighbors);
  }
  nlohmann::json nb = nlohmann::json::array();
  for (int i : neighbors) nb.push_back({{"id", i}, {"distance", partial_distance(s.values, m.train->row(i), s.valued)}});
  out["neighbors"] = std::move(nb);

  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : s.history) {
    nlohmann::json e = {{"action", h.action}, {"cost", h.cost}};
    if (h.action == "reveal") {
      e["feature"] = m.feature_names[static_cast<std::size_t>(h.feature)];
      e["value"] = h.raw_value;
    }
    history.push_back(std::move(e));
  }
  out["history"] = std::move(history);
  return out;
}

nlohmann::json AdvisorService::create(const nlohmann::json& request) {
  if (!request.is_object()) throw bad_request("request body must be a JSON object");
  if (!request.contains("model") || !request["model"].is_string()) throw bad_request("'model' must be a string");
  if (!request.contains("budget") || !request["budget"].is_number()) throw bad_request("'budget' must be a number");
  const auto model = request["model"].get<std::string>();
  AgentType policy;
  if (model == "dqn" && models_->dqn) {
    policy = AgentType::Dqn;
  } else if ((model == "tree" || model == "cbctree") && models_->tree) {
    policy = AgentType::Tree;
  } else {
    throw ApiError(400, "unknown_model", "model '" + model + "' is not loaded");
  }
  const double budget = request["budget"].get<double>();
  if (!std::isfinite(budget) || budget <= 0.0) throw ApiError(400, "invalid_budget", "budget must be positive");

  auto s = std::make_shared<Session>();
  const int n = models_->n_features();
  s->policy = policy;
  s->budget = budget;
  s->charged = FeatureSet(n);
  s->valued = FeatureSet(n);
  s->values = RowVector::Zero(n);
  {
    std::lock_guard<std::mutex> lock(store_mutex_);
    evict_expired();
    do s->id = new_id();
    while (sessions_.count(s->id));
    s->last_used = clock_();
    sessions_.emplace(s->id, s);
  }

  std::lock_guard<std::mutex> lock(s->mutex);
  nlohmann::json out = advice(*s);
  nlohmann::json features = nlohmann::json::array();
  for (int f = 0; f < n; ++f)
    features.push_back({{"name", models_->feature_names[static_cast<std::size_t>(f)]},
                        {"index", f},
                        {"cost", models_->schedule.cost(f)}});
  out["features"] = std::move(features);
  out["costs"] = models_->schedule.costs;
  out["groups"] = models_->schedule.groups;
  return out;
}

nlohmann::json AdvisorService::get(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mutex);
  return advice(*s);
}

nlohmann::json AdvisorService::reveal(const std::string& id, const nlohmann::json& request) {
  if (!request.is_object()) throw bad_request("request body must be a JSON object");
  if (!request.contains("feature") || !request["feature"].is_string()) throw bad_request("'feature' must be a string");
  if (!request.contains("value") || !request["value"].is_number()) throw bad_request("'value' must be a number");
  const auto name = request["feature"].get<std::string>();
  const double raw = request["value"].get<double>();
  if (!std::isfinite(raw)) throw bad_request("'value' must be finite");

  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mutex);
  const AdvisorModels& m = *models_;
  const auto it = std::find(m.feature_names.begin(), m.feature_names.end(), name);
  if (it == m.feature_names.end()) throw ApiError(400, "unknown_feature", "no feature named '" + name + "'");
  const int f = static_cast<int>(it - m.feature_names.begin());
  if (s->terminated) throw ApiError(409, "session_terminated", "session has terminated");
  if (s->valued.contains(f)) throw ApiError(409, "already_revealed", "feature '" + name + "' is already revealed");

  double charge = 0.0;
  if (!s->charged.contains(f)) {
    charge = m.schedule.cost(f);
    if (s->accrued_cost + charge > s->budget + kCostTolerance)
      throw ApiError(409, "unaffordable", "feature '" + name + "' costs more than the remaining budget");
    for (int g : m.schedule.group_of(f)) s->charged.insert(g);
    s->accrued_cost += charge;
  }
  const auto& st = m.stats[static_cast<std::size_t>(f)];
  s->values(f) = normalize_value(std::clamp(raw, st.min, st.max), st, m.mode);
  s->valued.insert(f);
  s->history.push_back(HistoryEntry{"reveal", f, raw, charge});
  return advice(*s);
}

nlohmann::json AdvisorService::terminate(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mutex);
  if (!s->terminated) {
    s->terminated = true;
    s->history.push_back(HistoryEntry{"terminate", -1, 0.0, 0.0});
  }
  return advice(*s);
}

nlohmann::json AdvisorService::remove(const std::string& id) {
  std::lock_guard<std::mutex> lock(store_mutex_);
  evict_expired();
  if (sessions_.erase(id) == 0) throw ApiError(404, "unknown_session", "no session '" + id + "'");
  return {{"id", id}, {"deleted", true}};
}

namespace {

void send(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, int ok_status, F&& f) {
  try {
    send(res, ok_status, f());
  } catch (const ApiError& e) {
    send(res, e.status(), e.body());
  } catch (const nlohmann::json::exception& e) {
    send(res, 400, {{"code", "bad_request"}, {"message", std::string("malformed JSON: ") + e.what()}});
  } catch (const std::exception& e) {
    send(res, 500, {{"code", "internal"}, {"message", e.what()}});
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  return req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
}

}  // namespace

void mount_routes(httplib::Server& server, AdvisorService& service, const std::optional<fs::path>& ui_dir) {
  server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 201, [&] { return service.create(parse_body(req)); });
  });
  server.Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 200, [&] { return service.get(req.matches[1]); });
  });
  server.Post(R"(/sessions/([^/]+)/reveal)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 200, [&] { return service.reveal(req.matches[1], parse_body(req)); });
  });
  server.Post(R"(/sessions/([^/]+)/terminate)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 200, [&] { return service.terminate(req.matches[1]); });
  });
  server.Delete(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 200, [&] { return service.remove(req.matches[1]); });
  });
  if (ui_dir) {
    if (!fs::is_directory(*ui_dir)) throw UsageError("UI directory '" + ui_dir->string() + "' does not exist");
    server.set_mount_point("/", ui_dir->string());
  }
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send(res, res.status, {{"code", "not_found"}, {"message", "no such resource"}});
  });
}

}  // namespace frugalnn
