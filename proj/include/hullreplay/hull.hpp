#pragma once

// Convex-hull geometry in latent space: Euclidean projection onto the hull of
// a finite anchor set, the summed batch-to-hull distance used by ER-Hull, and
// Dirichlet sampling of hull interior points.

#include "hullreplay/core.hpp"

#include <Eigen/Dense>

#include <random>

namespace hullreplay {

struct HullOptions {
  /// Bound on the Frank-Wolfe gap of the (unsquared) distance objective.
  /// max_iterations counts corral insertions.
  double tolerance = 1e-7;
  int max_iterations = 10000;
};

struct HullProjection {
  LatentCode projected_point;
  std::vector<double> barycentric_weights;
  double distance = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

struct RawProjection {
  Eigen::VectorXd point;
  Eigen::VectorXd weights;
  double distance = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Frank-Wolfe gap of h(x) = |x - q| at x, normalised so it bounds h(x) - h*.
inline double distance_gap(const Eigen::MatrixXd& anchors, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& query, double* dist_out) {
  const Eigen::VectorXd r = x - query;
  const double h = r.norm();
  if (dist_out) *dist_out = h;
  if (h == 0.0) return 0.0;
  const double min_dot = (anchors.transpose() * r).minCoeff();
  return std::max(0.0, (r.dot(x) - min_dot) / h);
}

// Minimiser of |P v| over the affine hull of the corral columns P (sum v = 1).
inline Eigen::VectorXd affine_minimizer(const Eigen::MatrixXd& p) {
  const Eigen::Index s = p.cols();
  Eigen::VectorXd v(s);
  if (s == 1) {
    v[0] = 1.0;
    return v;
  }
  Eigen::MatrixXd edges(p.rows(), s - 1);
  for (Eigen::Index c = 1; c < s; ++c) edges.col(c - 1) = p.col(c) - p.col(0);
  const Eigen::VectorXd z = edges.completeOrthogonalDecomposition().solve(-p.col(0));
  v[0] = 1.0 - z.sum();
  v.tail(s - 1) = z;
  return v;
}

/// Fully corrective Frank-Wolfe (Wolfe's minimum-norm-point method) on the
/// anchors shifted by -q. Each major iteration adds the Frank-Wolfe vertex to
/// a small corral; minor cycles move to the corral's affine minimiser while
/// keeping the weights in the simplex. Stops on the distance gap certificate.
inline RawProjection project(const Eigen::MatrixXd& anchors, const Eigen::VectorXd& query,
                             const HullOptions& opts) {
  const Eigen::Index m = anchors.cols();
  const Eigen::MatrixXd shifted = anchors.colwise() - query;
  RawProjection out;

  Eigen::Index start = 0;
  shifted.colwise().squaredNorm().minCoeff(&start);
  std::vector<Eigen::Index> corral{start};
  Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd x = shifted.col(start);

  auto corral_matrix = [&] {
    Eigen::MatrixXd p(shifted.rows(), static_cast<Eigen::Index>(corral.size()));
    for (std::size_t c = 0; c < corral.size(); ++c) p.col(static_cast<Eigen::Index>(c)) = shifted.col(corral[c]);
    return p;
  };

  int it = 0;
  while (it < opts.max_iterations) {
    const double h = x.norm();
    if (h <= opts.tolerance) break;
    Eigen::Index fw = 0;
    (shifted.transpose() * x).minCoeff(&fw);
    const double gap = x.squaredNorm() - x.dot(shifted.col(fw));
    if (gap / h <= opts.tolerance) break;
    if (std::find(corral.begin(), corral.end(), fw) != corral.end()) break;  // round-off stall
    ++it;
    corral.push_back(fw);
    w.conservativeResize(w.size() + 1);
    w[w.size() - 1] = 0.0;

    // Minor cycles: at most one corral member leaves per cycle.
    while (true) {
      const Eigen::MatrixXd p = corral_matrix();
      const Eigen::VectorXd v = affine_minimizer(p);
      if (!v.allFinite()) break;
      if ((v.array() > 0.0).all()) {
        w = v;
        x = p * w;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] <= 0.0 && w[i] - v[i] > 0.0) theta = std::min(theta, w[i] / (w[i] - v[i]));
      }
      w = (1.0 - theta) * w + theta * v;
      std::vector<Eigen::Index> kept;
      std::vector<double> kept_w;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] > 1e-15) {
          kept.push_back(corral[static_cast<std::size_t>(i)]);
          kept_w.push_back(w[i]);
        }
      }
      if (kept.empty()) {  // cannot happen in exact arithmetic; keep the new vertex
        kept.push_back(fw);
        kept_w.push_back(1.0);
      }
      corral = std::move(kept);
      w = Eigen::Map<const Eigen::VectorXd>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
      w /= w.sum();
      x = corral_matrix() * w;
    }
  }

  out.weights = Eigen::VectorXd::Zero(m);
  for (std::size_t c = 0; c < corral.size(); ++c) out.weights[corral[c]] += w[static_cast<Eigen::Index>(c)];
  out.point = anchors * out.weights;
  double h = 0.0;
  const double gap = distance_gap(anchors, out.point, query, &h);
  out.distance = h;
  out.converged = h <= opts.tolerance || gap <= opts.tolerance;
  out.iterations = it;
  return out;
}

inline void check_hull_inputs(int query_dim, const Eigen::MatrixXd& anchors,
                              const HullOptions& opts) {
  if (anchors.cols() == 0) throw Error(ErrorKind::EmptyAnchorSet, "anchor set is empty");
  if (anchors.rows() != query_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "query has dimension " + std::to_string(query_dim) + ", anchors have " +
                    std::to_string(anchors.rows()));
  }
  if (!(opts.tolerance > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "hull tolerance must be positive");
  }
}

inline HullProjection to_projection(RawProjection raw) {
  HullProjection p;
  p.projected_point = LatentCode(std::move(raw.point));
  p.barycentric_weights.assign(raw.weights.data(), raw.weights.data() + raw.weights.size());
  p.distance = raw.distance;
  p.converged = raw.converged;
  p.iterations = raw.iterations;
  return p;
}

}  // namespace detail

/// Projection onto a pre-stacked anchor matrix (d x m). Used on hot paths
/// where the same hull is queried many times.
inline HullProjection project_onto_hull(const LatentCode& query, const Eigen::MatrixXd& anchors,
                                        const HullOptions& opts = {}) {
  detail::check_hull_inputs(query.dim(), anchors, opts);
  return detail::to_projection(detail::project(anchors, query.values(), opts));
}

inline HullProjection project_onto_hull(const LatentCode& query,
                                        std::span<const LatentCode> anchors,
                                        const HullOptions& opts = {}) {
  if (anchors.empty()) throw Error(ErrorKind::EmptyAnchorSet, "anchor set is empty");
  return project_onto_hull(query, stack_columns(anchors), opts);
}

inline double hull_distance(const LatentCode& query, const Eigen::MatrixXd& anchors,
                            const HullOptions& opts = {}) {
  detail::check_hull_inputs(query.dim(), anchors, opts);
  return detail::project(anchors, query.values(), opts).distance;
}

/// Sum of distances from the available members of `target_batch` to the hull
/// of `buffer_candidate`. Unavailable samples contribute exactly zero.
inline double batch_hull_distance(std::span<const TimedSample> target_batch,
                                  const std::set<SampleId>& available,
                                  const Eigen::MatrixXd& candidate_anchors,
                                  const HullOptions& opts = {}) {
  if (candidate_anchors.cols() == 0) {
    throw Error(ErrorKind::EmptyAnchorSet, "buffer candidate is empty");
  }
  double total = 0.0;
  for (const auto& sample : target_batch) {
    if (!available.contains(sample.id)) continue;
    total += hull_distance(sample.code, candidate_anchors, opts);
  }
  return total;
}

inline double batch_hull_distance(std::span<const TimedSample> target_batch,
                                  const std::set<SampleId>& available,
                                  std::span<const TimedSample> buffer_candidate,
                                  const HullOptions& opts = {}) {
  if (buffer_candidate.empty()) {
    throw Error(ErrorKind::EmptyAnchorSet, "buffer candidate is empty");
  }
  return batch_hull_distance(target_batch, available, stack_columns(buffer_candidate), opts);
}

/// Draws sum_i w_i * anchor_i with w ~ Dirichlet(concentration, ..., concentration).
template <class Rng>
LatentCode sample_in_hull(std::span<const LatentCode> anchors, double concentration, Rng& rng) {
  if (anchors.empty()) throw Error(ErrorKind::EmptyAnchorSet, "anchor set is empty");
  if (!(concentration > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "Dirichlet concentration must be positive");
  }
  if (anchors.size() == 1) return anchors.front();

  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> w(anchors.size());
  double total = 0.0;
  for (auto& wi : w) {
    wi = gamma(rng);
    total += wi;
  }
  // All-zero draws only happen for tiny concentrations; fall back to a vertex.
  if (!(total > 0.0)) {
    std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
    return anchors[pick(rng)];
  }
  const int d = anchors.front().dim();
  Eigen::VectorXd point = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].dim() != d) {
      throw Error(ErrorKind::DimensionMismatch, "anchors have mixed dimensions");
    }
    point += (w[i] / total) * anchors[i].values();
  }
  return LatentCode(std::move(point));
}

}  // namespace hullreplay
