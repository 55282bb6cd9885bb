#include "hullreplay/hull.hpp"
#include "hullreplay/oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace hullreplay;
namespace ht = hullreplay::testing;

TEST(ProjectOntoHull, InteriorPointHasZeroDistance) {
  const std::vector<LatentCode> anchors{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  const auto p = project_onto_hull(LatentCode{0.2, 0.2}, anchors);
  EXPECT_LE(p.distance, 1e-7);
  EXPECT_NEAR(p.projected_point[0], 0.2, 1e-7);
  EXPECT_NEAR(p.projected_point[1], 0.2, 1e-7);
  EXPECT_TRUE(p.converged);
}

TEST(ProjectOntoHull, ProjectsOntoEdgeMidpoint) {
  const std::vector<LatentCode> anchors{{1.0, 0.0}, {0.0, 1.0}};
  const auto p = project_onto_hull(LatentCode{1.0, 1.0}, anchors);
  EXPECT_NEAR(p.projected_point[0], 0.5, 1e-9);
  EXPECT_NEAR(p.projected_point[1], 0.5, 1e-9);
  EXPECT_NEAR(p.distance, std::sqrt(0.5), 1e-9);
}

TEST(ProjectOntoHull, MatchesFrozenGridOracleValue) {
  // Expected value from oracle::simplex_grid_search (step 0.002), confirmed by
  // face enumeration.
  const std::vector<LatentCode> anchors{
      {0.3, -0.7, 1.1}, {-1.2, 0.4, 0.5}, {0.9, 0.8, -0.6}, {-0.1, -1.3, -0.9}};
  const auto p = project_onto_hull(LatentCode{0.2, 1.6, 1.4}, anchors);
  EXPECT_NEAR(p.distance, 1.766501150803, 1e-3);
  EXPECT_NEAR(p.distance, 1.766501150803, 1e-9);
}

TEST(ProjectOntoHull, ResultInvariantsHold) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 6;
    const int m = 1 + trial % 9;
    const auto a = ht::uniform_matrix(rng, d, m, -1.0, 1.0);
    const LatentCode q(ht::uniform_vector(rng, d, -2.0, 2.0));
    const auto p = project_onto_hull(q, a);
    ASSERT_EQ(p.barycentric_weights.size(), static_cast<std::size_t>(m));
    double sum = 0.0;
    Eigen::VectorXd combo = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < m; ++i) {
      EXPECT_GE(p.barycentric_weights[static_cast<std::size_t>(i)], 0.0);
      sum += p.barycentric_weights[static_cast<std::size_t>(i)];
      combo += p.barycentric_weights[static_cast<std::size_t>(i)] * a.col(i);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (int k = 0; k < d; ++k) EXPECT_NEAR(combo[k], p.projected_point[k], 1e-7);
    EXPECT_NEAR(p.distance, (q.values() - p.projected_point.values()).norm(), 1e-7);
  }
}

TEST(ProjectOntoHull, AgreesWithGridOracleOnSmallInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 3;
    const int m = 1 + trial % 4;
    const auto a = ht::uniform_matrix(rng, d, m, -1.0, 1.0);
    const Eigen::VectorXd q = ht::uniform_vector(rng, d, -2.0, 2.0);
    const double fw = project_onto_hull(LatentCode(q), a).distance;
    EXPECT_NEAR(fw, oracle::simplex_grid_search(a, q).distance, 1e-3) << "trial " << trial;
    EXPECT_NEAR(fw, oracle::face_enumeration_distance(a, q), 1e-7) << "trial " << trial;
  }
}

TEST(ProjectOntoHull, AnchorsAreFixpointsAndProjectionIsIdempotent) {
  std::mt19937_64 rng(5);
  const HullOptions opts;
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = ht::uniform_matrix(rng, 5, 7, -1.0, 1.0);
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      EXPECT_LE(project_onto_hull(LatentCode(Eigen::VectorXd(a.col(c))), a).distance, opts.tolerance);
    }
    const auto p = project_onto_hull(LatentCode(ht::uniform_vector(rng, 5, -3.0, 3.0)), a);
    EXPECT_LE(project_onto_hull(p.projected_point, a).distance, opts.tolerance);
  }
}

TEST(ProjectOntoHull, AddingAnAnchorNeverIncreasesDistance) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 5;
    auto a = ht::uniform_matrix(rng, d, 1 + trial % 6, -1.0, 1.0);
    const LatentCode q(ht::uniform_vector(rng, d, -2.0, 2.0));
    const double before = project_onto_hull(q, a).distance;
    a.conservativeResize(Eigen::NoChange, a.cols() + 1);
    a.col(a.cols() - 1) = ht::uniform_vector(rng, d, -1.5, 1.5);
    EXPECT_LE(project_onto_hull(q, a).distance, before + 1e-9);
  }
}

TEST(ProjectOntoHull, PermutationInvariant) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 6;
    const int m = 2 + trial % 8;
    const auto a = ht::uniform_matrix(rng, d, m, -1.0, 1.0);
    const LatentCode q(ht::uniform_vector(rng, d, -2.0, 2.0));
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd shuffled(d, m);
    for (int c = 0; c < m; ++c) shuffled.col(c) = a.col(order[static_cast<std::size_t>(c)]);
    EXPECT_NEAR(project_onto_hull(q, a).distance, project_onto_hull(q, shuffled).distance, 1e-9)
        << "trial " << trial;
  }
}

TEST(ProjectOntoHull, HandlesDuplicateAndCollinearAnchors) {
  const std::vector<LatentCode> anchors{{0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}, {2.0, 2.0}};
  const auto p = project_onto_hull(LatentCode{0.0, 2.0}, anchors);
  EXPECT_NEAR(p.distance, std::sqrt(2.0), 1e-9);
  EXPECT_TRUE(p.converged);
}

TEST(ProjectOntoHull, ReportsNonConvergenceInsteadOfThrowing) {
  std::mt19937_64 rng(3);
  const auto a = ht::uniform_matrix(rng, 8, 30, -1.0, 1.0);
  const HullOptions opts{1e-15, 1};
  const auto p = project_onto_hull(LatentCode(ht::uniform_vector(rng, 8, 0.0, 0.5)), a, opts);
  EXPECT_FALSE(p.converged);
  EXPECT_EQ(p.iterations, 1);
}

TEST(ProjectOntoHull, Errors) {
  const std::vector<LatentCode> none;
  EXPECT_THROW(project_onto_hull(LatentCode{1.0}, none), Error);
  const std::vector<LatentCode> anchors{{1.0, 2.0}};
  try {
    project_onto_hull(LatentCode{1.0, 2.0, 3.0}, anchors);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  try {
    project_onto_hull(LatentCode{1.0, 2.0}, anchors, HullOptions{0.0, 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(BatchHullDistance, InteriorTargetsGiveZero) {
  const std::vector<TimedSample> candidate{ht::sample(1, 0, {0.0, 0.0}), ht::sample(2, 0, {4.0, 0.0}),
                                           ht::sample(3, 0, {0.0, 4.0})};
  const std::vector<TimedSample> target{ht::sample(4, 0, {1.0, 1.0}), ht::sample(4, 1, {0.5, 2.0})};
  const std::set<SampleId> available{target[0].id, target[1].id};
  EXPECT_LE(batch_hull_distance(target, available, candidate), 2e-7);
}

TEST(BatchHullDistance, EmptyAvailabilityAnnihilatesSum) {
  const std::vector<TimedSample> candidate{ht::sample(1, 0, {0.0, 0.0})};
  const std::vector<TimedSample> target{ht::sample(2, 0, {10.0, 3.0}), ht::sample(2, 1, {-5.0, 1.0})};
  EXPECT_EQ(batch_hull_distance(target, {}, candidate), 0.0);
}

TEST(BatchHullDistance, EqualsSumOfOracleDistances) {
  // Frozen from oracle::simplex_grid_search on each point; by hand the three
  // segment projections are sqrt(1.8), sqrt(2) and sqrt(2).
  const std::vector<TimedSample> candidate{ht::sample(1, 0, {0.0, 0.0}), ht::sample(1, 1, {2.0, 1.0})};
  const std::vector<TimedSample> target{ht::sample(2, 0, {1.0, 2.0}), ht::sample(2, 1, {3.0, 0.0}),
                                        ht::sample(2, 2, {-1.0, -1.0}), ht::sample(2, 3, {9.0, 9.0})};
  const std::set<SampleId> available{target[0].id, target[1].id, target[2].id};
  EXPECT_NEAR(batch_hull_distance(target, available, candidate), 4.170067911246, 1e-9);
}

TEST(BatchHullDistance, EmptyCandidateIsAnError) {
  const std::vector<TimedSample> none;
  const std::vector<TimedSample> target{ht::sample(1, 0, {0.0})};
  try {
    batch_hull_distance(target, {target[0].id}, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyAnchorSet);
  }
}

TEST(SampleInHull, SingleAnchorIsReturnedExactly) {
  std::mt19937_64 rng(1);
  const std::vector<LatentCode> anchors{{0.125, -3.5, 7.0}};
  EXPECT_EQ(sample_in_hull(anchors, 1.0, rng), anchors.front());
}

TEST(SampleInHull, DrawsLieInsideHull) {
  std::mt19937_64 rng(9);
  const auto a = ht::uniform_matrix(rng, 4, 5, -1.0, 1.0);
  const auto anchors = ht::columns(a);
  for (int i = 0; i < 200; ++i) {
    const auto draw = sample_in_hull(anchors, 0.7, rng);
    EXPECT_LE(project_onto_hull(draw, a).distance, 1e-6);
  }
}

TEST(SampleInHull, UniformDirichletMeanIsCentroid) {
  // Dirichlet(1, 1, 1) has mean (1/3, 1/3, 1/3), so draws average to the centroid.
  std::mt19937_64 rng(77);
  const std::vector<LatentCode> anchors{{0.0, 0.0}, {4.0, 0.0}, {0.0, 2.0}};
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) mean += sample_in_hull(anchors, 1.0, rng).values();
  mean /= draws;
  const double spread = 4.0;  // largest anchor-to-anchor distance along an axis
  EXPECT_NEAR(mean[0], 4.0 / 3.0, 0.05 * spread);
  EXPECT_NEAR(mean[1], 2.0 / 3.0, 0.05 * spread);
}

TEST(SampleInHull, RejectsBadArguments) {
  std::mt19937_64 rng(1);
  const std::vector<LatentCode> none;
  EXPECT_THROW(sample_in_hull(none, 1.0, rng), Error);
  const std::vector<LatentCode> one{{1.0}};
  EXPECT_THROW(sample_in_hull(one, 0.0, rng), Error);
}
