#include "frugalnn/advisor.hpp"
#include "frugalnn/artifacts.hpp"
#include "frugalnn/config.hpp"
#include "frugalnn/eval.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

using namespace frugalnn;
namespace fs = std::filesystem;

namespace {

using Overrides = std::vector<std::function<void(RunConfig&)>>;

// Binds a command-line option that, when given, overrides the config value.
template <typename T, typename Set>
CLI::Option* option_override(CLI::App& app, Overrides& ov, const std::string& name, const std::string& desc, Set set) {
  auto value = std::make_shared<T>();
  CLI::Option* o = app.add_option(name, *value, desc);
  ov.push_back([o, value, set](RunConfig& c) {
    if (o->count() > 0) set(c, *value);
  });
  return o;
}

template <typename Set>
void flag_override(CLI::App& app, Overrides& ov, const std::string& name, const std::string& desc, Set set) {
  CLI::Option* o = app.add_flag(name, desc);
  ov.push_back([o, set](RunConfig& c) {
    if (o->count() > 0) set(c);
  });
}

nlohmann::json provenance(const RunConfig& c) { return {{"config", to_json(c)}, {"config_hash", config_hash(c)}}; }

nlohmann::json with_provenance(nlohmann::json j, const RunConfig& c) {
  j["config"] = to_json(c);
  j["config_hash"] = config_hash(c);
  return j;
}

void write_csv_artifact(const fs::path& path, const std::string& text, const RunConfig& c) {
  artifacts::write_text(path, text);
  artifacts::write_meta(path, provenance(c));
}

void log(const std::string& msg) { std::cerr << msg << std::endl; }

int cmd_prepare(const RunConfig& c) {
  if (c.dataset.empty()) throw UsageError("prepare needs --dataset");
  const Dataset raw = load_dataset(c.dataset, c.header);
  const CostSchedule schedule =
      load_cost_schedule(c.costs ? std::optional<fs::path>(*c.costs) : std::nullopt, raw.n_features());
  const Split sp = split(raw, SplitSpec{c.train_fraction, c.seed}, c.norm);
  const fs::path out(c.out_dir);

  std::ostringstream train, test;
  write_dataset_csv(sp.train, train);
  write_dataset_csv(sp.test, test);
  write_csv_artifact(out / artifacts::kTrain, train.str(), c);
  write_csv_artifact(out / artifacts::kTest, test.str(), c);
  artifacts::write_json(out / artifacts::kStats, with_provenance({{"format", "frugalnn-stats"},
                                                                  {"features", sp.train.feature_names},
                                                                  {"mode", to_string(sp.train.mode)},
                                                                  {"stats", sp.train.stats},
                                                                  {"train_index", sp.train_index},
                                                                  {"test_index", sp.test_index}},
                                                                 c));
  artifacts::write_json(out / artifacts::kCosts, with_provenance(nlohmann::json(schedule), c));
  std::cout << "train " << sp.train.size() << " / test " << sp.test.size() << " rows, " << raw.n_features()
            << " features -> " << out.string() << "\n";
  return 0;
}

int cmd_cluster(const RunConfig& c) {
  const auto prepared = artifacts::load_prepared(c.out_dir, false);
  const Clustering cl = kmeans(prepared.train.rows, c.n_clusters, derive_seed(c.seed, 1));
  artifacts::write_json(fs::path(c.out_dir) / artifacts::kClustering, with_provenance(nlohmann::json(cl), c));
  std::cout << "k-means K=" << cl.k() << " converged after " << cl.iterations << " iterations\n";
  return 0;
}

int cmd_build_tree(const RunConfig& c) {
  const auto prepared = artifacts::load_prepared(c.out_dir, false);
  auto train = std::make_shared<const Matrix>(prepared.train.rows);
  const CBCTree tree = CBCTree::build(train, prepared.schedule, c.tree_params());
  artifacts::write_json(fs::path(c.out_dir) / artifacts::kTree, with_provenance(tree.to_json(), c));
  std::cout << "tree: " << tree.nodes().size() << " nodes, " << tree.leaves().size() << " leaves, depth "
            << tree.depth() << "\n";
  return 0;
}

int cmd_train_dqn(const RunConfig& c) {
  const fs::path out(c.out_dir);
  const auto prepared = artifacts::load_prepared(out, false);
  if (!fs::exists(out / artifacts::kClustering)) throw DataError("no clustering.json in '" + c.out_dir + "'; run cluster first");
  auto clustering = std::make_shared<const Clustering>(
      artifacts::load_clustering(out / artifacts::kClustering, prepared.train.n_features()));
  const Environment env(std::make_shared<const Matrix>(prepared.train.rows), clustering, prepared.schedule, c.alpha);

  DqnHyper hyper = c.dqn;
  hyper.seed = derive_seed(c.seed, 2);
  TrainObserver observer;
  observer.on_episode = [](int episode, double eps) {
    if ((episode + 1) % 500 == 0) log("episode " + std::to_string(episode + 1) + " epsilon " + std::to_string(eps));
  };
  const TrainResult res = train_dqn(env, c.budget, hyper, observer);

  DqnModel model{res.net, hyper, c.budget, c.alpha, provenance(c)};
  artifacts::write_json(out / artifacts::kDqnModel, model_to_json(model));
  std::ostringstream trace;
  write_reward_trace_csv(res.reward_trace, trace);
  write_csv_artifact(out / artifacts::kRewardTrace, trace.str(), c);
  std::cout << "dqn: " << res.train_steps << " updates over " << hyper.episodes << " episodes, final epsilon "
            << res.final_epsilon << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& c) {
  const fs::path out(c.out_dir);
  if (!fs::exists(out / artifacts::kTrain) || !fs::exists(out / artifacts::kTest))
    throw DataError("no prepared data in '" + c.out_dir + "'; run prepare first");
  const auto prepared = artifacts::load_prepared(out, true);
  SweepConfig sc = c.sweep_config();
  sc.log = log;
  const SweepReport report = budget_sweep(prepared.train, prepared.test, prepared.schedule, sc);
  std::ostringstream csv;
  write_report_csv(report, csv);
  write_csv_artifact(out / artifacts::kReport, csv.str(), c);
  if (c.trace) {
    std::ostringstream trace;
    write_trace_csv(report, trace);
    write_csv_artifact(out / artifacts::kTrace, trace.str(), c);
  }
  std::cout << "sweep: " << report.rows.size() << " rows -> " << (out / artifacts::kReport).string() << "\n";
  return 0;
}

int cmd_print_tree(const RunConfig& c, std::string tree_path, std::string train_path) {
  if (tree_path.empty()) tree_path = (fs::path(c.out_dir) / artifacts::kTree).string();
  if (train_path.empty()) train_path = (fs::path(c.out_dir) / artifacts::kTrain).string();
  const Dataset train = load_dataset(train_path, true);
  const CBCTree tree = artifacts::load_tree(tree_path, std::make_shared<const Matrix>(train.rows));
  std::cout << tree.pretty(train.feature_names);
  return 0;
}

int cmd_serve(const RunConfig& c, const std::string& host, int port, const std::string& ui_dir) {
  auto models = std::make_shared<const AdvisorModels>(load_advisor_models(c.out_dir, c.k_neighbors));
  AdvisorService service(models);
  httplib::Server server;
  mount_routes(server, service, ui_dir.empty() ? std::nullopt : std::optional<fs::path>(ui_dir));
  log("serving " + c.out_dir + " on http://" + host + ":" + std::to_string(port) +
      (models->dqn ? " [dqn]" : "") + (models->tree ? " [tree]" : ""));
  if (!server.listen(host, port)) throw UsageError("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted feature acquisition for nearest-neighbor retrieval"};
  app.require_subcommand(1);
  Overrides ov;

  std::string config_file;
  app.add_option("--config", config_file, "JSON run configuration; flags override it")->check(CLI::ExistingFile);
  option_override<std::string>(app, ov, "--dataset", "input CSV", [](RunConfig& c, const std::string& v) { c.dataset = v; });
  flag_override(app, ov, "--no-header", "input CSV has no header row", [](RunConfig& c) { c.header = false; });
  option_override<std::string>(app, ov, "--costs", "cost schedule JSON", [](RunConfig& c, const std::string& v) { c.costs = v; });
  option_override<double>(app, ov, "--train-fraction", "", [](RunConfig& c, double v) { c.train_fraction = v; });
  option_override<std::string>(app, ov, "--norm", "minmax or mean-range",
                    [](RunConfig& c, const std::string& v) { c.norm = parse_norm_mode(v); });
  option_override<int>(app, ov, "-K,--clusters", "k-means clusters", [](RunConfig& c, int v) { c.n_clusters = v; });
  option_override<double>(app, ov, "--alpha", "cost scaler", [](RunConfig& c, double v) { c.alpha = v; });
  option_override<double>(app, ov, "--budget", "train-dqn budget", [](RunConfig& c, double v) { c.budget = v; });
  option_override<std::vector<double>>(app, ov, "--budgets", "sweep budgets, comma separated",
                            [](RunConfig& c, const std::vector<double>& v) { c.budgets = v; })
      ->delimiter(',');
  option_override<int>(app, ov, "--tau", "leaf size", [](RunConfig& c, int v) { c.tau = v; });
  option_override<int>(app, ov, "--ell", "thresholds per feature", [](RunConfig& c, int v) { c.ell = v; });
  flag_override(app, ov, "--exclude-path-features", "never split twice on a feature along a path",
            [](RunConfig& c) { c.exclude_path_features = true; });
  option_override<int>(app, ov, "--episodes", "", [](RunConfig& c, int v) { c.dqn.episodes = v; });
  option_override<double>(app, ov, "--lr", "", [](RunConfig& c, double v) { c.dqn.lr = v; });
  option_override<double>(app, ov, "--gamma", "", [](RunConfig& c, double v) { c.dqn.gamma = v; });
  option_override<double>(app, ov, "--eps-decay", "", [](RunConfig& c, double v) { c.dqn.eps_decay = v; });
  option_override<std::vector<int>>(app, ov, "--hidden", "hidden layer widths",
                         [](RunConfig& c, const std::vector<int>& v) { c.dqn.hidden = v; })
      ->delimiter(',');
  option_override<int>(app, ov, "--buffer", "replay capacity", [](RunConfig& c, int v) { c.dqn.buffer_capacity = v; });
  option_override<int>(app, ov, "--batch", "", [](RunConfig& c, int v) { c.dqn.batch_size = v; });
  option_override<int>(app, ov, "--sync-interval", "", [](RunConfig& c, int v) { c.dqn.sync_interval = v; });
  option_override<std::string>(app, ov, "--optimizer", "sgd or adam",
                    [](RunConfig& c, const std::string& v) { c.dqn.optimizer = parse_optimizer(v); });
  option_override<std::uint64_t>(app, ov, "--seed", "falls back to FRUGALNN_SEED", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
  option_override<std::vector<std::uint64_t>>(app, ov, "--seeds", "sweep seeds",
                                   [](RunConfig& c, const std::vector<std::uint64_t>& v) { c.seeds = v; })
      ->delimiter(',');
  option_override<std::vector<std::string>>(app, ov, "--agents", "random,dqn,tree", [](RunConfig& c, const std::vector<std::string>& v) {
    c.agents.clear();
    for (const auto& a : v) c.agents.push_back(parse_agent_type(a));
  })->delimiter(',');
  option_override<int>(app, ov, "-k,--neighbors", "retrieved neighbors", [](RunConfig& c, int v) { c.k_neighbors = v; });
  option_override<int>(app, ov, "-j,--jobs", "parallel sweep cells", [](RunConfig& c, int v) { c.jobs = v; });
  flag_override(app, ov, "--trace", "also write trace.csv", [](RunConfig& c) { c.trace = true; });
  option_override<std::string>(app, ov, "-o,--out", "artifact directory", [](RunConfig& c, const std::string& v) { c.out_dir = v; });

  auto* prepare = app.add_subcommand("prepare", "split and normalize a dataset");
  auto* cluster = app.add_subcommand("cluster", "fit k-means on the train split");
  auto* build_tree = app.add_subcommand("build-tree", "build the cost-balancing clustering tree");
  auto* train = app.add_subcommand("train-dqn", "train the Q-network at --budget");
  auto* sweep = app.add_subcommand("sweep", "evaluate agents over budgets and seeds");
  auto* print_tree = app.add_subcommand("print-tree", "render a tree file");
  std::string tree_path, train_path;
  print_tree->add_option("tree", tree_path, "tree file (default <out>/tree.json)");
  print_tree->add_option("--train", train_path, "train CSV the tree was built on (default <out>/train.csv)");
  auto* serve = app.add_subcommand("serve", "run the interactive advisor");
  std::string host = "127.0.0.1", ui_dir;
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--ui-dir", ui_dir, "static UI bundle");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig c;
    if (const char* env = std::getenv("FRUGALNN_SEED")) {
      try {
        c.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw UsageError(std::string("FRUGALNN_SEED='") + env + "' is not an unsigned integer");
      }
    }
    if (!config_file.empty()) {
      nlohmann::json file;
      try {
        file = artifacts::read_json(config_file);
      } catch (const DataError& e) {
        throw UsageError(e.what());
      }
      merge_json(file, c);
    }
    for (auto& apply : ov) apply(c);

    if (prepare->parsed()) return cmd_prepare(c);
    if (cluster->parsed()) return cmd_cluster(c);
    if (build_tree->parsed()) return cmd_build_tree(c);
    if (train->parsed()) return cmd_train_dqn(c);
    if (sweep->parsed()) return cmd_sweep(c);
    if (print_tree->parsed()) return cmd_print_tree(c, tree_path, train_path);
    if (serve->parsed()) return cmd_serve(c, host, port, ui_dir);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
