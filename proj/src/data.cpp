#include "frugalnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace frugalnn {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

NormMode parse_norm_mode(const std::string& name) {
  if (name == "minmax") return NormMode::MinMax;
  if (name == "mean-range") return NormMode::MeanRange;
  throw UsageError("unknown normalization mode '" + name + "' (expected minmax or mean-range)");
}

std::string to_string(NormMode mode) { return mode == NormMode::MinMax ? "minmax" : "mean-range"; }

int Dataset::feature_index(const std::string& name) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), name);
  return it == feature_names.end() ? -1 : static_cast<int>(it - feature_names.begin());
}

Dataset parse_dataset(std::istream& in, bool header, const std::string& source) {
  Dataset ds;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t arity = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (header && !have_header) {
      ds.feature_names = std::move(cells);
      arity = ds.feature_names.size();
      have_header = true;
      continue;
    }
    if (arity == 0) arity = cells.size();
    if (cells.size() != arity) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(arity) +
                      " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row(arity);
    for (std::size_t c = 0; c < arity; ++c) {
      if (!parse_double(cells[c], row[c])) {
        throw DataError(source + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) +
                        ": non-numeric cell '" + cells[c] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source + ": no data rows");

  ds.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(arity));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < arity; ++c)
      ds.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (!have_header) {
    for (std::size_t c = 0; c < arity; ++c) ds.feature_names.push_back("f" + std::to_string(c));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path.string() + "'");
  return parse_dataset(in, header, path.string());
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  for (int c = 0; c < ds.n_features(); ++c) out << (c ? "," : "") << ds.feature_names[c];
  out << '\n';
  for (int r = 0; r < ds.size(); ++r) {
    for (int c = 0; c < ds.n_features(); ++c) out << (c ? "," : "") << format_double(ds.rows(r, c));
    out << '\n';
  }
}

std::vector<FeatureStats> compute_stats(const Matrix& rows, const std::vector<std::string>& names) {
  std::vector<FeatureStats> stats(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    auto& s = stats[static_cast<std::size_t>(c)];
    s.min = rows.col(c).minCoeff();
    s.max = rows.col(c).maxCoeff();
    s.mean = rows.col(c).mean();
    s.range = s.max - s.min;
    if (!(s.range > 0.0)) {
      const std::string name =
          static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)] : "f" + std::to_string(c);
      throw DataError("constant feature '" + name + "' cannot be normalized");
    }
  }
  return stats;
}

double normalize_value(double raw, const FeatureStats& s, NormMode mode) {
  if (mode == NormMode::MeanRange) return (raw - s.mean) / s.range;
  return std::clamp((raw - s.min) / s.range, 0.0, 1.0);
}

Dataset apply_normalization(const Dataset& raw, const std::vector<FeatureStats>& stats, NormMode mode) {
  if (static_cast<int>(stats.size()) != raw.n_features())
    throw DataError("normalization statistics do not match the feature count");
  Dataset out;
  out.feature_names = raw.feature_names;
  out.stats = stats;
  out.mode = mode;
  out.rows = raw.rows;
  for (int c = 0; c < raw.n_features(); ++c) {
    const auto& s = stats[static_cast<std::size_t>(c)];
    out.rows.col(c) = raw.rows.col(c).unaryExpr([&](double v) { return normalize_value(v, s, mode); });
  }
  return out;
}

Dataset normalize(const Dataset& raw, NormMode mode) {
  return apply_normalization(raw, compute_stats(raw.rows, raw.feature_names), mode);
}

Matrix denormalize(const Dataset& ds) {
  if (!ds.normalized()) return ds.rows;
  Matrix out = ds.rows;
  for (int c = 0; c < ds.n_features(); ++c) {
    const auto& s = ds.stats[static_cast<std::size_t>(c)];
    const double offset = ds.mode == NormMode::MinMax ? s.min : s.mean;
    out.col(c) = (ds.rows.col(c).array() * s.range + offset).matrix();
  }
  return out;
}

Split split(const Dataset& ds, const SplitSpec& spec, NormMode mode) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw UsageError("train_fraction must lie in (0, 1)");
  if (ds.size() < 2) throw DataError("need at least two rows to split");

  const Matrix raw = denormalize(ds);
  const int n = ds.size();
  // ceil (with slack for representation error) so 303 rows at 0.8 give 243/60.
  const int n_train = std::clamp(static_cast<int>(std::ceil(spec.train_fraction * n - 1e-9)), 1, n - 1);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Split out;
  out.train_index.assign(order.begin(), order.begin() + n_train);
  out.test_index.assign(order.begin() + n_train, order.end());

  auto gather = [&](const std::vector<int>& idx) {
    Dataset part;
    part.feature_names = ds.feature_names;
    part.rows.resize(static_cast<Eigen::Index>(idx.size()), raw.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) part.rows.row(static_cast<Eigen::Index>(i)) = raw.row(idx[i]);
    return part;
  };
  const Dataset train_raw = gather(out.train_index);
  const Dataset test_raw = gather(out.test_index);
  const auto stats = compute_stats(train_raw.rows, ds.feature_names);
  out.train = apply_normalization(train_raw, stats, mode);
  out.test = apply_normalization(test_raw, stats, mode);
  return out;
}

CostSchedule CostSchedule::uniform(int n) {
  if (n < 1) throw UsageError("cost schedule needs at least one feature");
  CostSchedule c;
  c.costs.assign(static_cast<std::size_t>(n), 1.0 / n);
  return c;
}

double CostSchedule::min_cost() const { return *std::min_element(costs.begin(), costs.end()); }

double CostSchedule::total_cost() const { return std::accumulate(costs.begin(), costs.end(), 0.0); }

std::vector<int> CostSchedule::group_of(int f) const {
  for (const auto& g : groups)
    if (std::find(g.begin(), g.end(), f) != g.end()) return g;
  return {f};
}

CostSchedule make_cost_schedule(std::vector<double> costs, std::vector<std::vector<int>> groups) {
  if (costs.empty()) throw DataError("cost schedule is empty");
  for (double c : costs) {
    if (!std::isfinite(c)) throw DataError("non-finite cost in schedule");
    if (c < 0.0) throw DataError("negative cost in schedule");
  }
  const double max_cost = *std::max_element(costs.begin(), costs.end());
  if (max_cost > 1.0)
    for (double& c : costs) c /= max_cost;

  const int n = static_cast<int>(costs.size());
  std::set<int> seen;
  for (const auto& g : groups) {
    for (int f : g) {
      if (f < 0 || f >= n) throw DataError("group member " + std::to_string(f) + " is not a feature index");
      if (!seen.insert(f).second) throw DataError("overlapping groups: feature " + std::to_string(f));
    }
  }
  return CostSchedule{std::move(costs), std::move(groups)};
}

CostSchedule cost_schedule_from_json(const nlohmann::json& j, int n) {
  std::vector<double> costs;
  std::vector<std::vector<int>> groups;
  try {
    costs = j.at("costs").get<std::vector<double>>();
    if (j.contains("groups")) groups = j.at("groups").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed cost schedule: ") + e.what());
  }
  if (static_cast<int>(costs.size()) != n)
    throw DataError("cost schedule lists " + std::to_string(costs.size()) + " costs for " + std::to_string(n) +
                    " features");
  return make_cost_schedule(std::move(costs), std::move(groups));
}

CostSchedule load_cost_schedule(const std::optional<std::filesystem::path>& path, int n) {
  if (!path) return CostSchedule::uniform(n);
  std::ifstream in(*path);
  if (!in) throw DataError("cannot open cost schedule '" + path->string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cost schedule '" + path->string() + "' is not valid JSON: " + e.what());
  }
  return cost_schedule_from_json(j, n);
}

void to_json(nlohmann::json& j, const FeatureStats& s) {
  j = {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"range", s.range}};
}

void from_json(const nlohmann::json& j, FeatureStats& s) {
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.mean = j.at("mean").get<double>();
  s.range = j.at("range").get<double>();
}

void to_json(nlohmann::json& j, const CostSchedule& c) { j = {{"costs", c.costs}, {"groups", c.groups}}; }

}  // namespace frugalnn
