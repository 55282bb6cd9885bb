#pragma once

// Anchor-hull proxy for a personalised generator. The model's "weights" are
// its anchor set; generating or inverting means projecting onto their hull.

#include "hullreplay/hull.hpp"

#include <Eigen/Eigenvalues>

#include <numeric>

namespace hullreplay {

struct TrainerConfig {
  /// lambda_R: weight of the replay term in the training loss.
  double replay_weight = 1.0;
  /// Share of each training iteration drawn from the buffer. Recorded for
  /// provenance; the hull proxy has no iterations to mix.
  double replay_fraction = 0.5;

  void validate() const {
    if (!(replay_weight >= 0.0)) throw Error(ErrorKind::InvalidConfig, "replay_weight must be >= 0");
    if (!(replay_fraction >= 0.0 && replay_fraction <= 1.0)) {
      throw Error(ErrorKind::InvalidConfig, "replay_fraction must lie in [0, 1]");
    }
  }
};

class AnchorHullModel {
 public:
  const std::vector<TimedSample>& anchors() const noexcept { return anchors_; }
  int trained_at() const noexcept { return trained_at_; }
  const TrainerConfig& trainer() const noexcept { return trainer_; }
  const HullOptions& hull_options() const noexcept { return hull_; }
  const Eigen::MatrixXd& anchor_matrix() const noexcept { return *matrix_; }
  int dim() const noexcept { return static_cast<int>(matrix_->rows()); }

 private:
  friend AnchorHullModel fit(std::span<const TimedSample>, int, const TrainerConfig&,
                             const HullOptions&);
  AnchorHullModel(std::vector<TimedSample> anchors, int t, TrainerConfig trainer, HullOptions hull)
      : anchors_(std::move(anchors)),
        trained_at_(t),
        trainer_(trainer),
        hull_(hull),
        matrix_(std::make_shared<const Eigen::MatrixXd>(
            stack_columns(std::span<const TimedSample>(anchors_)))) {}

  std::vector<TimedSample> anchors_;
  int trained_at_ = 0;
  TrainerConfig trainer_;
  HullOptions hull_;
  std::shared_ptr<const Eigen::MatrixXd> matrix_;
};

/// "Training" at timestamp t: the anchor set becomes exactly the training set.
inline AnchorHullModel fit(std::span<const TimedSample> training_set, int t,
                           const TrainerConfig& trainer = {}, const HullOptions& hull = {}) {
  if (training_set.empty()) {
    throw Error(ErrorKind::EmptyTrainingSet, "no training samples at timestamp " + std::to_string(t));
  }
  trainer.validate();
  for (const auto& s : training_set) {
    if (s.timestamp() > t) {
      throw Error(ErrorKind::InvalidArgument, "anchor " + describe(s.id) +
                                                  " is newer than the training timestamp " +
                                                  std::to_string(t));
    }
  }
  return AnchorHullModel({training_set.begin(), training_set.end()}, t, trainer, hull);
}

struct Inversion {
  LatentCode reconstruction;
  double recon_l2 = 0.0;
};

inline Inversion invert(const AnchorHullModel& model, const LatentCode& query) {
  auto p = project_onto_hull(query, model.anchor_matrix(), model.hull_options());
  return {std::move(p.projected_point), p.distance};
}

/// Latent analogue of the reconstruction loss over the current batch plus
/// lambda_R times the loss over the replay set.
inline double diagnostic_loss(const AnchorHullModel& model, std::span<const TimedSample> current,
                              std::span<const TimedSample> replay) {
  auto mean_sq = [&](std::span<const TimedSample> set) {
    if (set.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : set) {
      const double d = invert(model, s.code).recon_l2;
      acc += d * d;
    }
    return acc / static_cast<double>(set.size());
  };
  const double replay_term = model.trainer().replay_weight > 0.0 ? mean_sq(replay) : 0.0;
  return mean_sq(current) + model.trainer().replay_weight * replay_term;
}

/// Loss over the model's own anchors: those from the training timestamp form
/// the batch term, older ones the replay term.
inline double diagnostic_loss(const AnchorHullModel& model) {
  std::vector<TimedSample> current;
  std::vector<TimedSample> replay;
  for (const auto& a : model.anchors()) {
    (a.timestamp() == model.trained_at() ? current : replay).push_back(a);
  }
  return diagnostic_loss(model, current, replay);
}

/// Cosine similarity restricted to the identity coordinates.
inline double identity_score(const LatentCode& a, const LatentCode& b,
                             std::span<const int> id_dims) {
  if (id_dims.empty()) throw Error(ErrorKind::InvalidArgument, "identity subspace is empty");
  if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionMismatch, "identity_score operands differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (int i : id_dims) {
    if (i < 0 || i >= a.dim()) {
      throw Error(ErrorKind::InvalidArgument, "identity index " + std::to_string(i) + " out of range");
    }
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::ZeroVector, "identity restriction is the zero vector");
  }
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

/// Draws `count` points from the hull of the source batch's train codes and
/// realises each through the model by projecting onto its anchor hull.
template <class Rng>
std::vector<LatentCode> synthesize(const AnchorHullModel& model, const Batch& source_batch,
                                   int count, double concentration, Rng& rng) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "synthesis count must be >= 1");
  const auto source = codes_of(source_batch.train);
  std::vector<LatentCode> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto draw = sample_in_hull(std::span<const LatentCode>(source), concentration, rng);
    out.push_back(invert(model, draw).reconstruction);
  }
  return out;
}

namespace detail {

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(std::span<const LatentCode> set,
                                                           double ridge) {
  const Eigen::MatrixXd x = stack_columns(set);
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mean;
  Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(x.cols() - 1);
  cov.diagonal().array() += ridge;
  return {mean, cov};
}

}  // namespace detail

inline constexpr double kCovarianceRidge = 1e-6;

/// Frechet distance between Gaussian fits of two latent sets (unbiased
/// covariance plus a small ridge).
inline double frechet_distance(std::span<const LatentCode> set_a, std::span<const LatentCode> set_b) {
  if (set_a.size() < 2 || set_b.size() < 2) {
    throw Error(ErrorKind::InsufficientSamples, "Frechet distance needs >= 2 samples per set");
  }
  if (set_a.front().dim() != set_b.front().dim()) {
    throw Error(ErrorKind::DimensionMismatch, "Frechet operands differ in dimension");
  }
  const auto [mu_a, cov_a] = detail::moments(set_a, kCovarianceRidge);
  const auto [mu_b, cov_b] = detail::moments(set_b, kCovarianceRidge);
  const Eigen::MatrixXd root_a = detail::psd_sqrt(cov_a);
  const Eigen::MatrixXd cross = detail::psd_sqrt(root_a * cov_b * root_a);
  const double value =
      (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
  return std::max(0.0, value);
}

struct EvalScores {
  double recon_l2 = 0.0;
  double recon_id = 0.0;
  double synth_frechet = 0.0;
  double synth_id = 0.0;
};

struct EvalConfig {
  std::vector<int> id_dims{0, 1, 2, 3};
  int synth_count = 50;
  double concentration = 1.0;
  bool reconstruction = true;
  bool synthesis = true;
};

/// Reconstruction scores over the batch's test set and synthesis scores for
/// draws from the batch's train hull realised through the model.
template <class Rng>
EvalScores evaluate(const AnchorHullModel& model, const Batch& target_batch,
                    const EvalConfig& config, Rng& rng) {
  if (target_batch.test.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                "batch " + std::to_string(target_batch.timestamp) + " has no test samples");
  }
  const std::span<const int> id_dims(config.id_dims);
  EvalScores scores;
  const auto n_test = static_cast<double>(target_batch.test.size());
  if (config.reconstruction) {
    for (const auto& q : target_batch.test) {
      const auto inv = invert(model, q.code);
      scores.recon_l2 += inv.recon_l2 / n_test;
      scores.recon_id += identity_score(inv.reconstruction, q.code, id_dims) / n_test;
    }
  }
  if (config.synthesis) {
    const auto synth = synthesize(model, target_batch, config.synth_count, config.concentration, rng);
    const auto test_codes = codes_of(target_batch.test);
    scores.synth_frechet = frechet_distance(synth, test_codes);
    for (const auto& s : synth) {
      double best = -1.0;
      for (const auto& q : test_codes) best = std::max(best, identity_score(s, q, id_dims));
      scores.synth_id += best / static_cast<double>(synth.size());
    }
  }
  return scores;
}

}  // namespace hullreplay
