#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace frugalnn {

// Row-major so that one data point is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using ActionMask = Eigen::Array<bool, Eigen::Dynamic, 1>;
// A data point viewed in place (a row of a Matrix, or a RowVector).
using PointRef = Eigen::Ref<const RowVector>;

// Slack used when comparing accumulated costs against a budget, so that
// e.g. three reveals at cost 0.1 fit in a budget of 0.3.
inline constexpr double kCostTolerance = 1e-9;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, schedules, dimensions).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or call sequence from the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Q-network training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A subset of the feature indices {0, ..., n-1}.
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(int n) : bits_(static_cast<std::size_t>(n), 0) {}

  static FeatureSet all(int n) {
    FeatureSet s(n);
    std::fill(s.bits_.begin(), s.bits_.end(), 1);
    s.count_ = n;
    return s;
  }

  static FeatureSet of(int n, std::initializer_list<int> features) {
    FeatureSet s(n);
    for (int f : features) s.insert(f);
    return s;
  }

  int universe() const { return static_cast<int>(bits_.size()); }
  int count() const { return count_; }
  bool empty() const { return count_ == 0; }
  bool full() const { return count_ == universe(); }

  bool contains(int f) const { return bits_[static_cast<std::size_t>(f)] != 0; }

  void insert(int f) {
    auto& b = bits_[static_cast<std::size_t>(f)];
    if (!b) {
      b = 1;
      ++count_;
    }
  }

  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (int f = 0; f < universe(); ++f)
      if (contains(f)) out.push_back(f);
    return out;
  }

  bool is_subset_of(const FeatureSet& other) const {
    for (int f = 0; f < universe(); ++f)
      if (contains(f) && !other.contains(f)) return false;
    return true;
  }

  // Hex bitmask, bit i = feature i, most significant nibble first.
  std::string to_hex() const {
    static const char* digits = "0123456789abcdef";
    const int nibbles = std::max(1, (universe() + 3) / 4);
    std::string out(static_cast<std::size_t>(nibbles), '0');
    for (int i = 0; i < nibbles; ++i) {
      int v = 0;
      for (int b = 0; b < 4; ++b) {
        const int f = i * 4 + b;
        if (f < universe() && contains(f)) v |= 1 << b;
      }
      out[static_cast<std::size_t>(nibbles - 1 - i)] = digits[v];
    }
    return "0x" + out;
  }

  friend bool operator==(const FeatureSet& a, const FeatureSet& b) { return a.bits_ == b.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
  int count_ = 0;
};

}  // namespace frugalnn
