#pragma once

#include "frugalnn/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace frugalnn {

enum class NormMode {
  MinMax,     // (v - min) / (max - min), clamped to [0, 1]
  MeanRange,  // (v - mean) / (max - min), unclamped
};

NormMode parse_norm_mode(const std::string& name);
std::string to_string(NormMode mode);

struct FeatureStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double range = 0.0;
};

/// A complete numeric table. `stats` is empty while the values are raw and
/// holds the statistics the values were normalized with otherwise.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix rows;
  std::vector<FeatureStats> stats;
  NormMode mode = NormMode::MinMax;

  int n_features() const { return static_cast<int>(rows.cols()); }
  int size() const { return static_cast<int>(rows.rows()); }
  bool normalized() const { return !stats.empty(); }
  int feature_index(const std::string& name) const;  // -1 if absent
};

Dataset load_dataset(const std::filesystem::path& path, bool header);
Dataset parse_dataset(std::istream& in, bool header, const std::string& source = "<stream>");
void write_dataset_csv(const Dataset& ds, std::ostream& out);

/// Per-feature statistics; throws DataError naming the first constant feature.
std::vector<FeatureStats> compute_stats(const Matrix& rows, const std::vector<std::string>& names);

Dataset normalize(const Dataset& raw, NormMode mode = NormMode::MinMax);
Dataset apply_normalization(const Dataset& raw, const std::vector<FeatureStats>& stats, NormMode mode);
double normalize_value(double raw, const FeatureStats& s, NormMode mode);
Matrix denormalize(const Dataset& ds);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<int> train_index;  // row indices into the source dataset
  std::vector<int> test_index;
};

/// Random train/test partition. Normalization statistics come from the train
/// rows only and are applied to both sides.
Split split(const Dataset& ds, const SplitSpec& spec, NormMode mode = NormMode::MinMax);

struct CostSchedule {
  std::vector<double> costs;
  std::vector<std::vector<int>> groups;

  static CostSchedule uniform(int n);

  int n_features() const { return static_cast<int>(costs.size()); }
  double cost(int f) const { return costs[static_cast<std::size_t>(f)]; }
  double min_cost() const;
  double total_cost() const;
  /// Members of the group containing `f`, or just {f}.
  std::vector<int> group_of(int f) const;
};

/// Validates and rescales (divide by max when any cost exceeds 1).
CostSchedule make_cost_schedule(std::vector<double> costs, std::vector<std::vector<int>> groups);
CostSchedule load_cost_schedule(const std::optional<std::filesystem::path>& path, int n);

void to_json(nlohmann::json& j, const FeatureStats& s);
void from_json(const nlohmann::json& j, FeatureStats& s);
void to_json(nlohmann::json& j, const CostSchedule& c);
CostSchedule cost_schedule_from_json(const nlohmann::json& j, int n);

}  // namespace frugalnn
