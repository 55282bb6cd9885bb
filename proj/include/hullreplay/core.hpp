#pragma once

// Domain types shared by every module: latent codes, timed samples, batches,
// replay buffers and the validated sequential stream.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hullreplay {

enum class ErrorKind {
  DimensionMismatch,
  NonConsecutiveTimestamps,
  EmptyTrainSet,
  DuplicateSample,
  NonFiniteValue,
  EmptyAnchorSet,
  InvalidArgument,
  NoAdmissibleCandidate,
  EmptyTrainingSet,
  ZeroVector,
  InsufficientSamples,
  MissingEntry,
  InvalidSpec,
  ParseError,
  InvalidConfig,
  IoError,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonConsecutiveTimestamps: return "NonConsecutiveTimestamps";
    case ErrorKind::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorKind::DuplicateSample: return "DuplicateSample";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::EmptyAnchorSet: return "EmptyAnchorSet";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NoAdmissibleCandidate: return "NoAdmissibleCandidate";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::MissingEntry: return "MissingEntry";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a kind that
/// callers (and the CLI's error record) can dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Immutable latent vector. Copies share storage, so buffers and models hold
/// references to the stream's codes rather than duplicating them.
class LatentCode {
 public:
  LatentCode() = default;

  explicit LatentCode(Eigen::VectorXd values)
      : values_(std::make_shared<const Eigen::VectorXd>(std::move(values))) {
    if (values_->size() < 1) {
      throw Error(ErrorKind::InvalidArgument, "latent code must have dimension >= 1");
    }
    if (!values_->allFinite()) {
      throw Error(ErrorKind::NonFiniteValue, "latent code contains NaN or Inf");
    }
  }

  LatentCode(std::initializer_list<double> values)
      : LatentCode(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
            values.begin(), static_cast<Eigen::Index>(values.size())))) {}

  static LatentCode from(std::span<const double> values) {
    return LatentCode(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size()))));
  }

  int dim() const noexcept { return values_ ? static_cast<int>(values_->size()) : 0; }
  bool empty() const noexcept { return !values_; }
  double operator[](int i) const { return (*values_)[i]; }
  const Eigen::VectorXd& values() const { return *values_; }

  friend bool operator==(const LatentCode& a, const LatentCode& b) {
    if (a.values_ == b.values_) return true;
    if (!a.values_ || !b.values_) return false;
    return a.values_->size() == b.values_->size() && *a.values_ == *b.values_;
  }

 private:
  std::shared_ptr<const Eigen::VectorXd> values_;
};

enum class Split { Train, Test };

inline constexpr std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

/// Identity of a sample inside a stream.
struct SampleId {
  int timestamp = 0;
  int index = 0;
  Split split = Split::Train;

  friend auto operator<=>(const SampleId&, const SampleId&) = default;
  friend bool operator==(const SampleId&, const SampleId&) = default;
};

inline std::string describe(const SampleId& id) {
  return "(t=" + std::to_string(id.timestamp) + ", i=" + std::to_string(id.index) +
         ", split=" + std::string(to_string(id.split)) + ")";
}

struct TimedSample {
  SampleId id;
  LatentCode code;

  int timestamp() const noexcept { return id.timestamp; }
};

struct Batch {
  int timestamp = 0;
  std::vector<TimedSample> train;
  std::vector<TimedSample> test;

  friend bool operator==(const Batch& a, const Batch& b) {
    auto same = [](const std::vector<TimedSample>& x, const std::vector<TimedSample>& y) {
      return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                        [](const TimedSample& p, const TimedSample& q) {
                          return p.id == q.id && p.code == q.code;
                        });
    };
    return a.timestamp == b.timestamp && same(a.train, b.train) && same(a.test, b.test);
  }
};

/// The bounded replay set R_t. Members are train samples from earlier timestamps.
struct ReplayBuffer {
  int capacity = 0;
  std::vector<TimedSample> members;

  std::set<SampleId> identities() const {
    std::set<SampleId> ids;
    for (const auto& m : members) ids.insert(m.id);
    return ids;
  }

  std::set<int> timestamps() const {
    std::set<int> ts;
    for (const auto& m : members) ts.insert(m.timestamp());
    return ts;
  }

  // Buffers are equal iff they hold the same sample identities.
  friend bool operator==(const ReplayBuffer& a, const ReplayBuffer& b) {
    return a.capacity == b.capacity && a.identities() == b.identities();
  }
};

struct StreamConfig {
  int num_timestamps = 10;
  int train_per_batch = 20;
  int test_per_batch = 10;
  int latent_dim = 16;
  std::uint64_t seed = 0;
};

/// A validated, immutable sequence of batches with timestamps 1..T.
class Stream {
 public:
  const std::vector<Batch>& batches() const noexcept { return *batches_; }
  const Batch& batch(int t) const { return batches_->at(static_cast<std::size_t>(t - 1)); }
  int num_timestamps() const noexcept { return static_cast<int>(batches_->size()); }
  int latent_dim() const noexcept { return dim_; }

 private:
  friend Stream validate_stream(std::vector<Batch> batches, const StreamConfig& config);
  Stream(std::vector<Batch> batches, int dim)
      : batches_(std::make_shared<const std::vector<Batch>>(std::move(batches))), dim_(dim) {}

  std::shared_ptr<const std::vector<Batch>> batches_;
  int dim_ = 0;
};

/// Checks that timestamps run 1..T without gaps, dimensions agree, every batch
/// has train data and sample identities are unique. A config dimension or
/// timestamp count of 0 means "infer from the batches".
inline Stream validate_stream(std::vector<Batch> batches, const StreamConfig& config) {
  if (batches.empty()) {
    throw Error(ErrorKind::EmptyTrainSet, "stream has no batches");
  }
  std::sort(batches.begin(), batches.end(),
            [](const Batch& a, const Batch& b) { return a.timestamp < b.timestamp; });
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const int expected = static_cast<int>(b) + 1;
    if (batches[b].timestamp != expected) {
      throw Error(ErrorKind::NonConsecutiveTimestamps,
                  "batch with timestamp " + std::to_string(batches[b].timestamp) +
                      " found where timestamp " + std::to_string(expected) + " was expected");
    }
  }
  if (config.num_timestamps > 0 && static_cast<int>(batches.size()) != config.num_timestamps) {
    throw Error(ErrorKind::NonConsecutiveTimestamps,
                "expected " + std::to_string(config.num_timestamps) + " timestamps, got " +
                    std::to_string(batches.size()));
  }

  int dim = config.latent_dim;
  std::set<SampleId> seen;
  for (const auto& batch : batches) {
    const std::string where = "batch " + std::to_string(batch.timestamp);
    if (batch.train.empty()) {
      throw Error(ErrorKind::EmptyTrainSet, where + " has an empty train set");
    }
    auto check = [&](const TimedSample& s, Split split) {
      if (s.code.empty()) throw Error(ErrorKind::InvalidArgument, where + " holds an empty code");
      if (dim <= 0) dim = s.code.dim();
      if (s.code.dim() != dim) {
        throw Error(ErrorKind::DimensionMismatch,
                    where + ": sample " + describe(s.id) + " has dimension " +
                        std::to_string(s.code.dim()) + ", expected " + std::to_string(dim));
      }
      if (s.id.timestamp != batch.timestamp || s.id.split != split) {
        throw Error(ErrorKind::InvalidArgument,
                    where + ": sample " + describe(s.id) + " is misplaced");
      }
      if (!seen.insert(s.id).second) {
        throw Error(ErrorKind::DuplicateSample, where + ": duplicate sample " + describe(s.id));
      }
    };
    for (const auto& s : batch.train) check(s, Split::Train);
    for (const auto& s : batch.test) check(s, Split::Test);
  }
  return Stream(std::move(batches), dim);
}

inline std::vector<LatentCode> codes_of(std::span<const TimedSample> samples) {
  std::vector<LatentCode> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.code);
  return out;
}

/// Stacks codes as the columns of a d x m matrix.
inline Eigen::MatrixXd stack_columns(std::span<const LatentCode> codes) {
  if (codes.empty()) return {};
  const int d = codes.front().dim();
  Eigen::MatrixXd m(d, static_cast<Eigen::Index>(codes.size()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].dim() != d) {
      throw Error(ErrorKind::DimensionMismatch,
                  "code " + std::to_string(i) + " has dimension " + std::to_string(codes[i].dim()) +
                      ", expected " + std::to_string(d));
    }
    m.col(static_cast<Eigen::Index>(i)) = codes[i].values();
  }
  return m;
}

inline Eigen::MatrixXd stack_columns(std::span<const TimedSample> samples) {
  const auto codes = codes_of(samples);
  return stack_columns(std::span<const LatentCode>(codes));
}

// splitmix64 finalizer; used to derive independent seeds from (seed, tags).
inline constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                           std::uint64_t b = 0) noexcept {
  return mix_seed(seed ^ mix_seed(a * 0x100000001b3ULL + mix_seed(b)));
}

}  // namespace hullreplay
