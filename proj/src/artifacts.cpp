#include "frugalnn/artifacts.hpp"

#include <fstream>
#include <sstream>

namespace frugalnn::artifacts {

namespace fs = std::filesystem;

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw DataError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

void write_meta(const fs::path& artifact, const nlohmann::json& provenance) {
  fs::path meta = artifact;
  meta += ".meta.json";
  write_json(meta, provenance);
}

namespace {

Dataset load_split(const fs::path& path, const nlohmann::json& stats_json) {
  Dataset ds = load_dataset(path, true);
  const auto names = stats_json.at("features").get<std::vector<std::string>>();
  if (ds.feature_names != names) throw DataError("'" + path.string() + "' columns do not match stats.json");
  ds.stats = stats_json.at("stats").get<std::vector<FeatureStats>>();
  ds.mode = parse_norm_mode(stats_json.at("mode").get<std::string>());
  if (static_cast<int>(ds.stats.size()) != ds.n_features()) throw DataError("stats.json has the wrong feature count");
  return ds;
}

}  // namespace

Prepared load_prepared(const fs::path& dir, bool need_test) {
  const auto stats_json = read_json(dir / kStats);
  Prepared p;
  try {
    p.train = load_split(dir / kTrain, stats_json);
    if (need_test) p.test = load_split(dir / kTest, stats_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed stats.json: ") + e.what());
  }
  p.schedule = cost_schedule_from_json(read_json(dir / kCosts), p.train.n_features());
  return p;
}

Clustering load_clustering(const fs::path& path, int n_features) {
  Clustering cl;
  try {
    cl = read_json(path).get<Clustering>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt clustering file '" + path.string() + "': " + e.what());
  }
  if (cl.n_features() != n_features) throw DataError("clustering and data disagree on the feature count");
  return cl;
}

CBCTree load_tree(const fs::path& path, std::shared_ptr<const Matrix> train) {
  return CBCTree::from_json(read_json(path), std::move(train));
}

DqnModel load_dqn(const fs::path& path, int n_features) {
  DqnModel m = model_from_json(read_json(path));
  if (m.net.input_dim() != n_features + 1 || m.net.n_actions() != n_features + 1)
    throw DataError("model '" + path.string() + "' does not fit " + std::to_string(n_features) + " features");
  return m;
}

}  // namespace frugalnn::artifacts
