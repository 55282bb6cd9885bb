#pragma once

// Continual-learning scoreboards over the lower-triangular grid a(i, j):
// the performance of the model trained through timestamp i on batch j.

#include "hullreplay/core.hpp"

#include <optional>

namespace hullreplay {

enum class Direction { Positive, Negative };

inline constexpr std::string_view to_string(Direction d) {
  return d == Direction::Positive ? "positive" : "negative";
}

class PerformanceMatrix {
 public:
  PerformanceMatrix() = default;
  PerformanceMatrix(std::string metric_name, Direction direction, int num_timestamps)
      : name_(std::move(metric_name)), direction_(direction), size_(num_timestamps) {
    if (num_timestamps < 1) throw Error(ErrorKind::InvalidArgument, "matrix needs T >= 1");
    rows_.resize(static_cast<std::size_t>(num_timestamps));
    for (int i = 0; i < num_timestamps; ++i) rows_[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(i) + 1);
  }

  /// Builds a matrix from explicit rows; row i (1-based) must have i entries.
  static PerformanceMatrix from_rows(std::string metric_name, Direction direction,
                                     const std::vector<std::vector<double>>& rows) {
    PerformanceMatrix m(std::move(metric_name), direction, static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != i + 1) {
        throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(i + 1) + " must have " +
                                                    std::to_string(i + 1) + " entries");
      }
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        m.set(static_cast<int>(i) + 1, static_cast<int>(j) + 1, rows[i][j]);
      }
    }
    return m;
  }

  const std::string& metric_name() const noexcept { return name_; }
  Direction direction() const noexcept { return direction_; }
  int num_timestamps() const noexcept { return size_; }

  void set(int i, int j, double value) {
    check_index(i, j);
    rows_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = value;
  }

  bool has(int i, int j) const {
    if (i < 1 || i > size_ || j < 1 || j > i) return false;
    return rows_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)].has_value();
  }

  double at(int i, int j) const {
    check_index(i, j);
    const auto& v = rows_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
    if (!v) {
      throw Error(ErrorKind::MissingEntry, name_ + ": a(" + std::to_string(i) + ", " +
                                               std::to_string(j) + ") was never evaluated");
    }
    return *v;
  }

  bool complete() const {
    for (const auto& row : rows_) {
      for (const auto& v : row) {
        if (!v) return false;
      }
    }
    return true;
  }

 private:
  void check_index(int i, int j) const {
    if (i < 1 || i > size_ || j < 1 || j > i) {
      throw Error(ErrorKind::InvalidArgument, name_ + ": index (" + std::to_string(i) + ", " +
                                                  std::to_string(j) +
                                                  ") is outside the lower triangle");
    }
  }

  std::string name_;
  Direction direction_ = Direction::Negative;
  int size_ = 0;
  std::vector<std::vector<std::optional<double>>> rows_;
};

/// A_t: mean of row t over j = 1..t.
inline double average_at(const PerformanceMatrix& m, int t) {
  double sum = 0.0;
  for (int j = 1; j <= t; ++j) sum += m.at(t, j);
  return sum / t;
}

/// Average incremental performance: mean of A_1..A_T.
inline double aip(const PerformanceMatrix& m) {
  double sum = 0.0;
  for (int t = 1; t <= m.num_timestamps(); ++t) sum += average_at(m, t);
  return sum / m.num_timestamps();
}

struct Forgetting {
  std::vector<double> per_timestamp;  // f_j for j = 1..T-1
  double mean = 0.0;
};

/// Gap between the best earlier evaluation of batch j (l = j..T-1) and the
/// final model's evaluation, oriented so positive means forgotten. Negative
/// values (backward transfer) are kept as-is.
inline Forgetting forgetting(const PerformanceMatrix& m) {
  const int T = m.num_timestamps();
  if (T < 2) throw Error(ErrorKind::InvalidArgument, "forgetting needs T >= 2");
  Forgetting f;
  for (int j = 1; j <= T - 1; ++j) {
    const double last = m.at(T, j);
    double best = m.at(j, j);
    for (int l = j + 1; l <= T - 1; ++l) {
      best = m.direction() == Direction::Positive ? std::max(best, m.at(l, j))
                                                  : std::min(best, m.at(l, j));
    }
    f.per_timestamp.push_back(m.direction() == Direction::Positive ? best - last : last - best);
  }
  for (double v : f.per_timestamp) f.mean += v;
  f.mean /= static_cast<double>(f.per_timestamp.size());
  return f;
}

struct MetricSummary {
  PerformanceMatrix matrix;
  std::vector<double> average_at;
  double aip = 0.0;
  double forgetting = 0.0;
  std::vector<double> per_timestamp_forgetting;
};

struct MetricsReport {
  std::map<std::string, MetricSummary> per_metric;
};

/// With a single timestamp there is nothing to forget: F is reported as 0
/// with an empty per-timestamp vector.
inline MetricSummary summarize(const PerformanceMatrix& m) {
  MetricSummary s;
  s.matrix = m;
  for (int t = 1; t <= m.num_timestamps(); ++t) s.average_at.push_back(average_at(m, t));
  s.aip = aip(m);
  if (m.num_timestamps() >= 2) {
    auto f = forgetting(m);
    s.forgetting = f.mean;
    s.per_timestamp_forgetting = std::move(f.per_timestamp);
  }
  return s;
}

inline MetricsReport make_report(std::span<const PerformanceMatrix> matrices) {
  MetricsReport r;
  for (const auto& m : matrices) r.per_metric.emplace(m.metric_name(), summarize(m));
  return r;
}

}  // namespace hullreplay
