#pragma once

// Replay-buffer update policies. Every policy turns the pool
// X_t.train + R_t into the next buffer; the bound pseudo-policies instead
// define the whole training set directly.

#include "hullreplay/hull.hpp"

#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace hullreplay {

enum class PolicyKind { Lower, Upper, ErRand, ErHull, KMeans };

inline constexpr std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Lower: return "lower";
    case PolicyKind::Upper: return "upper";
    case PolicyKind::ErRand: return "er_rand";
    case PolicyKind::ErHull: return "er_hull";
    case PolicyKind::KMeans: return "kmeans";
  }
  return "unknown";
}

inline PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "lower") return PolicyKind::Lower;
  if (name == "upper") return PolicyKind::Upper;
  if (name == "er_rand" || name == "er-rand") return PolicyKind::ErRand;
  if (name == "er_hull" || name == "er-hull") return PolicyKind::ErHull;
  if (name == "kmeans" || name == "k-means") return PolicyKind::KMeans;
  throw Error(ErrorKind::InvalidConfig, "unknown policy '" + std::string(name) + "'");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::ErRand;
  int capacity = 3;
  int ransac_samples = 5000;
  double hull_tolerance = 1e-7;
  std::uint64_t seed = 0;
  /// ER-Hull objective sums over batches 1..t (true) or 1..t-1 (false).
  bool include_current_batch = true;
  /// Worker threads for ER-Hull candidate scoring; results do not depend on it.
  int threads = 1;

  bool uses_buffer() const noexcept {
    return kind == PolicyKind::ErRand || kind == PolicyKind::ErHull || kind == PolicyKind::KMeans;
  }

  void validate() const {
    if (capacity < 0) throw Error(ErrorKind::InvalidConfig, "buffer capacity must be >= 0");
    if (kind == PolicyKind::ErHull && ransac_samples < 1) {
      throw Error(ErrorKind::InvalidConfig, "ER-Hull needs ransac_samples >= 1");
    }
    if (!(hull_tolerance > 0.0)) throw Error(ErrorKind::InvalidConfig, "hull tolerance must be > 0");
    if (threads < 1) throw Error(ErrorKind::InvalidConfig, "threads must be >= 1");
  }

  std::string id() const {
    std::string s(to_string(kind));
    if (uses_buffer()) s += "_k" + std::to_string(capacity);
    if (kind == PolicyKind::ErHull) s += "_n" + std::to_string(ransac_samples);
    return s;
  }
};

struct BufferUpdateRecord {
  int timestamp = 0;
  std::vector<SampleId> chosen;
  long long candidates_evaluated = 0;
  std::optional<double> objective_value;
  std::string rng_state_digest;
};

namespace detail {

// Pool members grouped by timestamp, ascending; indices refer into the pool.
using TimestampGroups = std::vector<std::pair<int, std::vector<std::size_t>>>;

inline TimestampGroups group_by_timestamp(std::span<const TimedSample> pool) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pool.size(); ++i) groups[pool[i].timestamp()].push_back(i);
  return {groups.begin(), groups.end()};
}

inline std::vector<TimedSample> make_pool(const Batch& current, const ReplayBuffer& buffer) {
  std::vector<TimedSample> pool = current.train;
  std::set<SampleId> ids;
  for (const auto& s : pool) ids.insert(s.id);
  for (const auto& m : buffer.members) {
    if (ids.insert(m.id).second) pool.push_back(m);
  }
  return pool;
}

inline ReplayBuffer buffer_from(std::span<const TimedSample> pool, std::vector<std::size_t> picks,
                                int capacity) {
  ReplayBuffer out;
  out.capacity = capacity;
  std::sort(picks.begin(), picks.end(),
            [&](std::size_t a, std::size_t b) { return pool[a].id < pool[b].id; });
  for (auto i : picks) out.members.push_back(pool[i]);
  return out;
}

template <class Rng>
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Rng& rng) {
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  count = std::min(count, population);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

template <class Rng>
std::string digest(const Rng& rng) {
  // Hash of the textual engine state; stable for a given standard library.
  std::ostringstream os;
  os << rng;
  const std::string state = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : state) h = (h ^ c) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Number of distinct timestamps an admissible buffer must span: min(k, t).
inline int timestamp_coverage_constraint(std::span<const TimedSample> pool, int k) {
  if (pool.empty()) throw Error(ErrorKind::InvalidArgument, "pool is empty");
  std::set<int> ts;
  for (const auto& s : pool) ts.insert(s.timestamp());
  return std::min(std::max(k, 0), static_cast<int>(ts.size()));
}

/// How many members a timestamp may contribute once every timestamp is covered.
enum class BucketRule {
  /// ER-Hull: at most one member per timestamp.
  OnePerTimestamp,
  /// ER-Rand: fill capacity with per-timestamp bucket sizes differing by <= 1.
  Balanced,
};

/// Admissibility of a buffer drawn from `pool` with capacity k. Coverage must
/// equal min(k, t); the bucket rule decides the allowed sizes beyond that.
inline bool is_admissible(std::span<const TimedSample> buffer, std::span<const TimedSample> pool,
                          int k, BucketRule rule) {
  if (static_cast<int>(buffer.size()) > std::max(k, 0)) return false;
  if (pool.empty()) return buffer.empty();
  std::map<int, int> pool_counts;
  std::set<SampleId> pool_ids;
  for (const auto& s : pool) {
    ++pool_counts[s.timestamp()];
    pool_ids.insert(s.id);
  }
  std::map<int, int> counts;
  std::set<SampleId> ids;
  for (const auto& s : buffer) {
    if (!pool_ids.contains(s.id) || !ids.insert(s.id).second) return false;
    ++counts[s.timestamp()];
  }
  const int required = timestamp_coverage_constraint(pool, k);
  if (static_cast<int>(counts.size()) != required) return false;
  if (rule == BucketRule::OnePerTimestamp) {
    return std::all_of(counts.begin(), counts.end(), [](const auto& c) { return c.second == 1; });
  }
  const int target = std::min(k, static_cast<int>(pool.size()));
  if (static_cast<int>(buffer.size()) != target) return false;
  // Buckets that are not capped by availability differ by at most one, and a
  // capped bucket is never larger than the uncapped ones.
  int lo = std::numeric_limits<int>::max();
  int hi = 0;
  for (const auto& [t, c] : counts) {
    hi = std::max(hi, c);
    if (c < pool_counts[t]) lo = std::min(lo, c);
  }
  if (lo == std::numeric_limits<int>::max()) return true;
  return hi - lo <= 1;
}

inline bool is_admissible(const ReplayBuffer& buffer, std::span<const TimedSample> pool,
                          BucketRule rule) {
  return is_admissible(std::span<const TimedSample>(buffer.members), pool, buffer.capacity, rule);
}

/// ER-Rand: balanced reservoir sampling constrained to maximal timestamp
/// coverage. With k below the number of timestamps, k timestamps are chosen
/// at random and contribute one sample each; otherwise random bucket sizes
/// that differ by at most one fill the buffer.
template <class Rng>
ReplayBuffer er_rand_update(const Batch& current_batch, const ReplayBuffer& buffer, int k,
                            Rng& rng) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "buffer capacity must be >= 0");
  const auto pool = detail::make_pool(current_batch, buffer);
  if (k == 0 || pool.empty()) return ReplayBuffer{k, {}};

  const auto groups = detail::group_by_timestamp(pool);
  const auto distinct = groups.size();
  std::vector<std::size_t> picks;

  if (static_cast<std::size_t>(k) < distinct) {
    for (auto g : detail::sample_without_replacement(distinct, static_cast<std::size_t>(k), rng)) {
      const auto& members = groups[g].second;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      picks.push_back(members[pick(rng)]);
    }
    return detail::buffer_from(pool, std::move(picks), k);
  }

  // Water-fill bucket sizes in a random timestamp order.
  std::vector<std::size_t> order(distinct);
  for (std::size_t i = 0; i < distinct; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> bucket(distinct, 0);
  auto remaining = std::min(static_cast<std::size_t>(k), pool.size());
  while (remaining > 0) {
    for (auto g : order) {
      if (remaining == 0) break;
      if (bucket[g] < groups[g].second.size()) {
        ++bucket[g];
        --remaining;
      }
    }
  }
  for (std::size_t g = 0; g < distinct; ++g) {
    const auto& members = groups[g].second;
    for (auto i : detail::sample_without_replacement(members.size(), bucket[g], rng)) {
      picks.push_back(members[i]);
    }
  }
  return detail::buffer_from(pool, std::move(picks), k);
}

/// Enumerates or samples ER-Hull candidates: min(k, t) distinct timestamps,
/// exactly one pool member each. Candidates are lists of pool indices.
class HullCandidateSpace {
 public:
  HullCandidateSpace(std::span<const TimedSample> pool, int k)
      : groups_(detail::group_by_timestamp(pool)),
        choose_(static_cast<std::size_t>(timestamp_coverage_constraint(pool, k))) {}

  std::size_t subset_size() const noexcept { return choose_; }

  /// Number of admissible candidates, saturating at the uint64 maximum.
  std::uint64_t count() const {
    // Elementary symmetric polynomial of the per-timestamp counts.
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::uint64_t> e(choose_ + 1, 0);
    e[0] = 1;
    for (const auto& g : groups_) {
      const std::uint64_t c = g.second.size();
      for (std::size_t j = choose_; j >= 1; --j) {
        std::uint64_t term = 0;
        if (e[j - 1] != 0 && c > kMax / e[j - 1]) {
          term = kMax;
        } else {
          term = e[j - 1] * c;
        }
        e[j] = (e[j] > kMax - term) ? kMax : e[j] + term;
      }
    }
    return e[choose_];
  }

  /// Every admissible candidate in lexicographic order of (timestamp subset,
  /// member choice).
  std::vector<std::vector<std::size_t>> enumerate() const {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> subset(choose_);
    std::vector<std::size_t> current;
    const std::size_t n = groups_.size();
    std::function<void(std::size_t, std::size_t)> pick_groups = [&](std::size_t start,
                                                                   std::size_t depth) {
      if (depth == choose_) {
        expand(subset, 0, current, out);
        return;
      }
      for (std::size_t g = start; g + (choose_ - depth) <= n; ++g) {
        subset[depth] = g;
        pick_groups(g + 1, depth + 1);
      }
    };
    pick_groups(0, 0);
    return out;
  }

  template <class Rng>
  std::vector<std::size_t> sample(Rng& rng) const {
    auto chosen = detail::sample_without_replacement(groups_.size(), choose_, rng);
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::size_t> picks;
    picks.reserve(choose_);
    for (auto g : chosen) {
      const auto& members = groups_[g].second;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      picks.push_back(members[pick(rng)]);
    }
    return picks;
  }

 private:
  void expand(const std::vector<std::size_t>& subset, std::size_t depth,
              std::vector<std::size_t>& current, std::vector<std::vector<std::size_t>>& out) const {
    if (depth == subset.size()) {
      out.push_back(current);
      return;
    }
    for (auto member : groups_[subset[depth]].second) {
      current.push_back(member);
      expand(subset, depth + 1, current, out);
      current.pop_back();
    }
  }

  detail::TimestampGroups groups_;
  std::size_t choose_;
};

struct ErHullOptions {
  int capacity = 3;
  int ransac_samples = 5000;
  HullOptions hull{};
  bool include_current_batch = true;
  int threads = 1;
};

/// Normalised ER-Hull objective of one candidate: the summed distance of
/// every available sample of each seen batch to the candidate hull, divided
/// by one plus the number of distinct timestamps in the pool.
inline double er_hull_objective(std::span<const TimedSample> pool,
                                std::span<const TimedSample> candidate, int current_timestamp,
                                bool include_current_batch, const HullOptions& hull) {
  const auto groups = detail::group_by_timestamp(pool);
  std::set<SampleId> available;
  for (const auto& s : pool) available.insert(s.id);
  const Eigen::MatrixXd anchors = stack_columns(candidate);
  double numerator = 0.0;
  for (const auto& [t, members] : groups) {
    if (!include_current_batch && t == current_timestamp) continue;
    std::vector<TimedSample> target;
    target.reserve(members.size());
    for (auto i : members) target.push_back(pool[i]);
    numerator += batch_hull_distance(target, available, anchors, hull);
  }
  return numerator / (1.0 + static_cast<double>(groups.size()));
}

/// ER-Hull: RANSAC search over admissible buffers for the one whose convex
/// hull is closest to all available samples. Exhaustive when the admissible
/// set has at most N members.
template <class Rng>
std::pair<ReplayBuffer, BufferUpdateRecord> er_hull_update(const Batch& current_batch,
                                                           const ReplayBuffer& buffer,
                                                           const ErHullOptions& opts, Rng& rng) {
  if (opts.capacity < 1) throw Error(ErrorKind::InvalidArgument, "ER-Hull needs k >= 1");
  if (opts.ransac_samples < 1) throw Error(ErrorKind::InvalidArgument, "ER-Hull needs N >= 1");
  const auto pool = detail::make_pool(current_batch, buffer);
  if (pool.empty()) {
    throw Error(ErrorKind::NoAdmissibleCandidate,
                "empty pool at timestamp " + std::to_string(current_batch.timestamp));
  }

  BufferUpdateRecord record;
  record.timestamp = current_batch.timestamp;

  const HullCandidateSpace space(pool, opts.capacity);
  const auto n_max = static_cast<std::uint64_t>(opts.ransac_samples);
  std::vector<std::vector<std::size_t>> candidates;
  if (space.count() <= n_max) {
    candidates = space.enumerate();
  } else {
    std::set<std::vector<std::size_t>> seen;
    const std::uint64_t max_draws = 50 * n_max;
    for (std::uint64_t draw = 0; draw < max_draws && candidates.size() < n_max; ++draw) {
      auto c = space.sample(rng);
      if (seen.insert(c).second) candidates.push_back(std::move(c));
    }
  }

  // Candidate i is scored into slot i; the argmin scan below is serial, so
  // the result does not depend on the thread count.
  std::vector<double> objective(candidates.size());
  const int t = current_batch.timestamp;
  auto score_range = [&](std::size_t begin, std::size_t end) {
    std::vector<TimedSample> members;
    for (std::size_t i = begin; i < end; ++i) {
      members.clear();
      for (auto p : candidates[i]) members.push_back(pool[p]);
      objective[i] = er_hull_objective(pool, members, t, opts.include_current_batch, opts.hull);
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, opts.threads));
  if (workers == 1 || candidates.size() < 2 * workers) {
    score_range(0, candidates.size());
  } else {
    std::vector<std::thread> pool_threads;
    const std::size_t chunk = (candidates.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(candidates.size(), begin + chunk);
      if (begin >= end) break;
      pool_threads.emplace_back(score_range, begin, end);
    }
    for (auto& th : pool_threads) th.join();
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (objective[i] < objective[best]) best = i;
  }
  record.candidates_evaluated = static_cast<long long>(candidates.size());
  record.objective_value = objective[best];
  record.rng_state_digest = detail::digest(rng);

  ReplayBuffer next = detail::buffer_from(pool, candidates[best], opts.capacity);
  for (const auto& m : next.members) record.chosen.push_back(m.id);
  return {std::move(next), std::move(record)};
}

/// K-Means baseline: k-means++ seeding and Lloyd iterations on the pool's
/// codes; each cluster is represented by the pool sample nearest its centroid.
template <class Rng>
ReplayBuffer kmeans_update(const Batch& current_batch, const ReplayBuffer& buffer, int k,
                           Rng& rng) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "K-Means needs k >= 1");
  const auto pool = detail::make_pool(current_batch, buffer);
  const auto n = pool.size();
  if (static_cast<std::size_t>(k) >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return detail::buffer_from(pool, std::move(all), k);
  }

  const Eigen::MatrixXd points = stack_columns(std::span<const TimedSample>(pool));
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd centroids(points.rows(), kk);

  // k-means++ seeding.
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centroids.col(0) = points.col(static_cast<Eigen::Index>(first(rng)));
  Eigen::VectorXd nearest_sq = (points.colwise() - centroids.col(0)).colwise().squaredNorm();
  for (Eigen::Index c = 1; c < kk; ++c) {
    const double total = nearest_sq.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (chosen = 0; chosen < points.cols() - 1; ++chosen) {
        target -= nearest_sq[chosen];
        if (target <= 0.0) break;
      }
    } else {
      chosen = static_cast<Eigen::Index>(first(rng));
    }
    centroids.col(c) = points.col(chosen);
    nearest_sq = nearest_sq.cwiseMin(
        (points.colwise() - centroids.col(c)).colwise().squaredNorm().transpose());
  }

  std::vector<Eigen::Index> assign(n, 0);
  double inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    double next_inertia = 0.0;
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
      Eigen::Index best = 0;
      next_inertia += (centroids.colwise() - points.col(p)).colwise().squaredNorm().minCoeff(&best);
      assign[static_cast<std::size_t>(p)] = best;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), kk);
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
      sums.col(assign[static_cast<std::size_t>(p)]) += points.col(p);
      ++sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(p)])];
    }
    for (Eigen::Index c = 0; c < kk; ++c) {
      // Empty clusters keep their previous centroid.
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        centroids.col(c) = sums.col(c) / sizes[static_cast<std::size_t>(c)];
      }
    }
    const bool settled = std::isfinite(inertia) &&
                         std::abs(inertia - next_inertia) <= 1e-6 * std::max(inertia, 1e-300);
    inertia = next_inertia;
    if (settled) break;
  }

  std::vector<std::size_t> picks;
  std::vector<bool> taken(n, false);
  for (Eigen::Index c = 0; c < kk; ++c) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n; ++p) {
      if (taken[p]) continue;
      const double dist = (points.col(static_cast<Eigen::Index>(p)) - centroids.col(c)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = p;
      }
    }
    taken[best] = true;
    picks.push_back(best);
  }
  return detail::buffer_from(pool, std::move(picks), k);
}

/// Training set of the bound pseudo-policies: the current batch only (Lower)
/// or every batch seen so far (Upper).
inline std::vector<TimedSample> bound_training_set(PolicyKind kind,
                                                   std::span<const Batch> history,
                                                   const Batch& current_batch) {
  if (kind == PolicyKind::Lower) return current_batch.train;
  if (kind != PolicyKind::Upper) {
    throw Error(ErrorKind::InvalidArgument, "bound_training_set takes Lower or Upper");
  }
  std::vector<TimedSample> out;
  for (const auto& b : history) {
    if (b.timestamp >= current_batch.timestamp) continue;
    out.insert(out.end(), b.train.begin(), b.train.end());
  }
  out.insert(out.end(), current_batch.train.begin(), current_batch.train.end());
  return out;
}

}  // namespace hullreplay
