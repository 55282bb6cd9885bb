#include "hullreplay/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace hullreplay;
namespace fs = std::filesystem;

namespace {

Stream small_stream(std::uint64_t seed, int T = 5, double drift = 1.0) {
  StreamSpec spec;
  spec.stream.num_timestamps = T;
  spec.stream.seed = seed;
  spec.style_drift = drift;
  return validate_stream(generate_stream(spec), spec.stream);
}

PolicyConfig policy(PolicyKind kind, int k = 0) {
  PolicyConfig p;
  p.kind = kind;
  p.capacity = k;
  return p;
}

EvalOptions quick_eval() {
  EvalOptions e;
  e.synth.count = 20;
  return e;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hullreplay_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(RunEpisode, MatricesAreCompleteLowerTriangles) {
  const auto r = run_episode(small_stream(1), policy(PolicyKind::ErRand, 3), {}, quick_eval(), 1);
  ASSERT_EQ(r.matrices.size(), 4u);
  for (const auto& m : r.matrices) {
    EXPECT_TRUE(m.complete());
    EXPECT_EQ(m.num_timestamps(), 5);
  }
  EXPECT_EQ(r.buffer_trace.size(), 5u);
  EXPECT_EQ(r.training_sets.size(), 5u);
  EXPECT_EQ(r.policy_id, "er_rand_k3");
}

TEST(RunEpisode, UpperBoundOnStaticStreamForgetsNothing) {
  const auto stream = small_stream(2, 5, 0.0);
  const auto upper = run_episode(stream, policy(PolicyKind::Upper), {}, quick_eval(), 2);
  EXPECT_LE(upper.report.per_metric.at("recon_l2").forgetting, 1e-6);
  const auto lower = run_episode(stream, policy(PolicyKind::Lower), {}, quick_eval(), 2);
  const auto drifting = run_episode(small_stream(2), policy(PolicyKind::Lower), {}, quick_eval(), 2);
  const double static_f = lower.report.per_metric.at("recon_l2").forgetting;
  const double drift_f = drifting.report.per_metric.at("recon_l2").forgetting;
  EXPECT_GT(drift_f, 0.5);
  EXPECT_LT(std::abs(static_f), 0.1 * drift_f);
}

TEST(RunEpisode, UpperNeverWorseThanLowerOnReconstruction) {
  const auto stream = small_stream(3);
  const auto upper = run_episode(stream, policy(PolicyKind::Upper), {}, quick_eval(), 3);
  const auto lower = run_episode(stream, policy(PolicyKind::Lower), {}, quick_eval(), 3);
  for (int i = 1; i <= 5; ++i) {
    for (int j = 1; j <= i; ++j) {
      EXPECT_LE(upper.matrix("recon_l2").at(i, j), lower.matrix("recon_l2").at(i, j) + 1e-7);
    }
  }
  EXPECT_EQ(upper.training_sets.back().size(), 100u);
  EXPECT_EQ(lower.training_sets.back().size(), 20u);
}

TEST(RunEpisode, LargeErHullBufferSpansEveryTimestamp) {
  const auto r = run_episode(small_stream(4, 10), policy(PolicyKind::ErHull, 10), {}, quick_eval(), 4);
  std::set<int> ts;
  for (const auto& id : r.buffer_trace.back().chosen) ts.insert(id.timestamp);
  EXPECT_EQ(ts.size(), 10u);
  for (const auto& rec : r.buffer_trace) {
    std::set<int> seen;
    for (const auto& id : rec.chosen) EXPECT_TRUE(seen.insert(id.timestamp).second);
    EXPECT_EQ(static_cast<int>(rec.chosen.size()), std::min(10, rec.timestamp));
  }
}

TEST(RunEpisode, BufferTraceReplaysTrainingSets) {
  const auto stream = small_stream(5);
  for (auto kind : {PolicyKind::ErRand, PolicyKind::ErHull, PolicyKind::KMeans}) {
    const auto r = run_episode(stream, policy(kind, 3), {}, quick_eval(), 5);
    for (int t = 2; t <= 5; ++t) {
      std::vector<SampleId> expected;
      for (const auto& s : stream.batch(t).train) expected.push_back(s.id);
      const auto& prev = r.buffer_trace[static_cast<std::size_t>(t - 2)].chosen;
      expected.insert(expected.end(), prev.begin(), prev.end());
      std::sort(expected.begin(), expected.end());
      EXPECT_EQ(r.training_sets[static_cast<std::size_t>(t - 1)], expected) << r.policy_id << " t=" << t;
    }
  }
}

TEST(RunEpisode, SeededEpisodesRepeatExactly) {
  const auto stream = small_stream(6);
  auto eval = quick_eval();
  const auto a = run_episode(stream, policy(PolicyKind::ErHull, 3), {}, eval, 6);
  eval.threads = 3;
  auto par = policy(PolicyKind::ErHull, 3);
  par.threads = 3;
  const auto b = run_episode(stream, par, {}, eval, 6);
  EXPECT_EQ(to_json(a)["buffer_trace"], to_json(b)["buffer_trace"]);
  EXPECT_EQ(to_json(a)["report"], to_json(b)["report"]);
}

TEST(RunEpisode, ErrorsCarryContext) {
  const auto stream = small_stream(7);
  auto eval = quick_eval();
  eval.id_dims = {40};
  EXPECT_THROW(run_episode(stream, policy(PolicyKind::Lower), {}, eval, 0), Error);
}

TEST(Compare, SummariesAcrossSeedsAndFiles) {
  auto cfg = default_experiment_config();
  cfg.stream.generate->stream.num_timestamps = 4;
  cfg.policies = {policy(PolicyKind::Lower), policy(PolicyKind::Upper)};
  cfg.seeds = {0, 1, 2};
  cfg.eval = quick_eval();
  cfg.output_dir = scratch_dir("compare").string();
  const auto res = compare(cfg);
  ASSERT_EQ(res.runs.size(), 6u);
  ASSERT_EQ(res.summaries.size(), 2u);
  const auto& lower = res.summaries[0].aip.at("recon_l2");
  EXPECT_EQ(lower.runs, 3u);
  std::vector<double> v;
  for (std::size_t i = 0; i < 3; ++i) v.push_back(res.runs[i].report.per_metric.at("recon_l2").aip);
  const double m = (v[0] + v[1] + v[2]) / 3.0;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  EXPECT_NEAR(lower.mean, m, 1e-12);
  EXPECT_NEAR(lower.sd, std::sqrt(ss / 2.0), 1e-12);
  for (const char* f : {"summary.csv", "curves.csv", "summary.json", "buffer_log.jsonl"}) {
    EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / f)) << f;
  }
  const auto csv = slurp(fs::path(cfg.output_dir) / "summary.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 4);
  fs::remove_all(cfg.output_dir);
}

TEST(Compare, RerunIsByteIdentical) {
  auto cfg = default_experiment_config();
  cfg.stream.generate->stream.num_timestamps = 4;
  cfg.policies = {policy(PolicyKind::ErRand, 3), policy(PolicyKind::ErHull, 3)};
  cfg.seeds = {3, 4};
  cfg.eval = quick_eval();
  const auto first = scratch_dir("rerun_a");
  const auto second = scratch_dir("rerun_b");
  cfg.output_dir = first.string();
  compare(cfg);
  cfg.output_dir = second.string();
  cfg.threads = 2;
  compare(cfg);
  for (const char* f : {"summary.csv", "curves.csv", "summary.json", "buffer_log.jsonl"}) {
    EXPECT_EQ(slurp(first / f), slurp(second / f)) << f;
  }
  const auto log = slurp(first / "buffer_log.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2 * 2 * 4);
  fs::remove_all(first);
  fs::remove_all(second);
}

TEST(Config, ParsesAndRejects) {
  const auto cfg = parse_experiment_config(nlohmann::json::parse(R"({
    "stream": {"generate": {"T": 6, "d": 8, "id_dims": 2}},
    "policies": [{"kind": "er_hull", "capacity": 4, "ransac_samples": 100}, {"kind": "lower"}],
    "seeds": [1, 2],
    "synth": {"count": 10}
  })"));
  EXPECT_EQ(cfg.stream.generate->stream.num_timestamps, 6);
  EXPECT_EQ(cfg.policies[0].id(), "er_hull_k4_n100");
  EXPECT_EQ(cfg.policies[1].capacity, 0);
  EXPECT_EQ(cfg.eval.synth.count, 10);

  auto rejects = [](const char* text) {
    try {
      parse_experiment_config(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidConfig;
    }
    return false;
  };
  EXPECT_TRUE(rejects(R"({"stream": {"generate": {}}, "policies": []})"));
  EXPECT_TRUE(rejects(R"({"stream": {"generate": {}}, "policies": [{"kind": "lower"}], "bogus": 1})"));
  EXPECT_TRUE(rejects(R"({"stream": {"generate": {}}, "policies": [{"kind": "nope"}]})"));
  EXPECT_TRUE(rejects(R"({"stream": {}, "policies": [{"kind": "lower"}]})"));
  EXPECT_TRUE(rejects(R"({"stream": {"generate": {}}, "policies": [{"kind": "lower"}, {"kind": "lower"}]})"));
  EXPECT_TRUE(rejects(R"({"stream": {"generate": {}}, "policies": [{"kind": "lower"}], "seeds": []})"));
}

TEST(Config, DefaultCoversBoundsAndThreeBufferSizes) {
  const auto cfg = default_experiment_config();
  EXPECT_EQ(cfg.policies.size(), 11u);
  EXPECT_NO_THROW(cfg.validate());
}
