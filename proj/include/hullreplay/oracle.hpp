#pragma once

// Brute-force reference routes used by the test suites and the `oracle`
// subcommand. Nothing here calls the Frank-Wolfe solver or the ER-Hull
// candidate machinery; each quantity is recomputed from first principles.

#include "hullreplay/core.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>

namespace hullreplay::oracle {

namespace detail {

inline double dist_at(const Eigen::MatrixXd& anchors, const Eigen::VectorXd& query,
                      const std::vector<double>& w) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(anchors.rows());
  for (std::size_t i = 0; i < w.size(); ++i) p += w[i] * anchors.col(static_cast<Eigen::Index>(i));
  return (p - query).norm();
}

// Pattern search over mass transfers w_a -> w_b, halving the step until it
// drops below `min_step`. Convex objective + edge directions of the simplex
// make any stationary point of this search the global minimum.
inline double refine(const Eigen::MatrixXd& anchors, const Eigen::VectorXd& query,
                     std::vector<double>& w, double step, double min_step) {
  double best = dist_at(anchors, query, w);
  const std::size_t m = w.size();
  while (step >= min_step) {
    bool improved = false;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (a == b || w[a] <= 0.0) continue;
        const double moved = std::min(step, w[a]);
        w[a] -= moved;
        w[b] += moved;
        const double d = dist_at(anchors, query, w);
        if (d < best) {
          best = d;
          improved = true;
        } else {
          w[a] += moved;
          w[b] -= moved;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

}  // namespace detail

struct GridResult {
  double distance = 0.0;        // best refined distance
  double grid_distance = 0.0;   // best value on the raw grid
  std::vector<double> weights;
};

/// Exhaustive search over barycentric weights on a simplex lattice with the
/// given step, followed by pattern-search refinement from the best lattice
/// point. Practical for up to four anchors.
inline GridResult simplex_grid_search(const Eigen::MatrixXd& anchors, const Eigen::VectorXd& query,
                                      double step = 0.002) {
  const auto m = static_cast<std::size_t>(anchors.cols());
  if (m == 0) throw Error(ErrorKind::EmptyAnchorSet, "oracle: no anchors");
  const int ticks = static_cast<int>(std::lround(1.0 / step));
  GridResult out;
  out.weights.assign(m, 0.0);
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<int> counts(m, 0);

  // Points are base + sum_i (count_i * step) * (a_i - a_last), i < m - 1.
  const Eigen::VectorXd base = anchors.col(static_cast<Eigen::Index>(m - 1)) - query;
  std::vector<Eigen::VectorXd> edge(m);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    edge[i] = (anchors.col(static_cast<Eigen::Index>(i)) -
               anchors.col(static_cast<Eigen::Index>(m - 1))) * step;
  }
  std::function<void(std::size_t, int, Eigen::VectorXd)> walk = [&](std::size_t axis, int left,
                                                                    Eigen::VectorXd point) {
    if (axis + 1 >= m) {
      const double sq = point.squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        for (std::size_t i = 0; i + 1 < m; ++i) out.weights[i] = counts[i] * step;
        out.weights[m - 1] = left * step;
      }
      return;
    }
    if (axis + 2 == m) {
      // Innermost axis: plain loop without recursion.
      for (int c = 0; c <= left; ++c) {
        const double sq = point.squaredNorm();
        if (sq < best_sq) {
          best_sq = sq;
          counts[axis] = c;
          for (std::size_t i = 0; i + 1 < m; ++i) out.weights[i] = counts[i] * step;
          out.weights[m - 1] = (left - c) * step;
        }
        point += edge[axis];
      }
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[axis] = c;
      walk(axis + 1, left - c, point);
      point += edge[axis];
    }
    counts[axis] = 0;
  };
  walk(0, ticks, base);
  out.grid_distance = std::sqrt(best_sq);
  // Re-normalise lattice weights (step may not divide 1 exactly).
  double total = 0.0;
  for (double w : out.weights) total += w;
  for (double& w : out.weights) w /= total;
  out.distance = detail::refine(anchors, query, out.weights, step, 1e-12);
  out.distance = std::min(out.distance, out.grid_distance);
  return out;
}

/// Exact projection distance by enumerating every face of the simplex and
/// solving the affine least-squares problem on it. Exponential in the number
/// of anchors; meant for small instances.
inline double face_enumeration_distance(const Eigen::MatrixXd& anchors, const Eigen::VectorXd& query) {
  const auto m = static_cast<std::size_t>(anchors.cols());
  if (m == 0) throw Error(ErrorKind::EmptyAnchorSet, "oracle: no anchors");
  if (m > 20) throw Error(ErrorKind::InvalidArgument, "oracle: too many anchors to enumerate faces");
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> face;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) face.push_back(static_cast<Eigen::Index>(i));
    }
    const Eigen::VectorXd a0 = anchors.col(face.front());
    if (face.size() == 1) {
      best = std::min(best, (a0 - query).norm());
      continue;
    }
    Eigen::MatrixXd e(anchors.rows(), static_cast<Eigen::Index>(face.size() - 1));
    for (std::size_t c = 1; c < face.size(); ++c) {
      e.col(static_cast<Eigen::Index>(c - 1)) = anchors.col(face[c]) - a0;
    }
    const Eigen::VectorXd z = e.completeOrthogonalDecomposition().solve(query - a0);
    if ((z.array() < -1e-12).any() || z.sum() > 1.0 + 1e-12) continue;
    best = std::min(best, (a0 + e * z - query).norm());
  }
  return best;
}

/// Every subset of `pool` of size `size`, as sorted index lists.
inline std::vector<std::vector<std::size_t>> all_subsets(std::size_t n, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (cur.size() == size) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

struct HullSearchResult {
  double best_objective = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::size_t>> argmin;  // all subsets within `tie_tolerance`
  std::size_t admissible = 0;
};

/// Exhaustive ER-Hull search: every subset of the pool spanning min(k, t)
/// timestamps with one member each, scored by summed grid-oracle distances
/// of all pool samples divided by (1 + distinct timestamps).
inline HullSearchResult exhaustive_er_hull(std::span<const TimedSample> pool, int k,
                                           int current_timestamp, bool include_current_batch,
                                           double tie_tolerance = 1e-6, double grid_step = 0.002) {
  std::set<int> timestamps;
  for (const auto& s : pool) timestamps.insert(s.timestamp());
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), timestamps.size());
  HullSearchResult out;
  std::vector<std::pair<double, std::vector<std::size_t>>> scored;
  for (auto& subset : all_subsets(pool.size(), want)) {
    std::set<int> ts;
    for (auto i : subset) ts.insert(pool[i].timestamp());
    if (ts.size() != want) continue;  // one member per timestamp, min(k, t) timestamps
    ++out.admissible;
    Eigen::MatrixXd anchors(pool.front().code.dim(), static_cast<Eigen::Index>(subset.size()));
    for (std::size_t c = 0; c < subset.size(); ++c) {
      anchors.col(static_cast<Eigen::Index>(c)) = pool[subset[c]].code.values();
    }
    double total = 0.0;
    for (const auto& s : pool) {
      if (!include_current_batch && s.timestamp() == current_timestamp) continue;
      total += simplex_grid_search(anchors, s.code.values(), grid_step).distance;
    }
    total /= 1.0 + static_cast<double>(timestamps.size());
    scored.emplace_back(total, subset);
    out.best_objective = std::min(out.best_objective, total);
  }
  for (auto& [v, subset] : scored) {
    if (v <= out.best_objective + tie_tolerance) out.argmin.push_back(subset);
  }
  return out;
}

}  // namespace hullreplay::oracle
