// hullreplay command-line driver: gen, run, compare, oracle.
//
// Failures exit nonzero and print one JSON error record on stderr:
//   {"error": {"kind": "...", "message": "..."}}

#include "hullreplay/hullreplay.hpp"
#include "hullreplay/oracle.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace hullreplay;

namespace {

int emit_error(std::string_view kind, const std::string& message, int code = 1) {
  const nlohmann::json record{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << record.dump() << '\n';
  return code;
}

struct GenArgs {
  std::string out;
  int T = 10;
  int n = 20;
  int test = 10;
  int d = 16;
  int id_dims = 4;
  double drift = 1.0;
  double noise = 0.2;
  std::uint64_t seed = 0;
};

StreamSpec spec_from(const GenArgs& g) {
  StreamSpec spec;
  spec.stream = StreamConfig{g.T, g.n, g.test, g.d, g.seed};
  spec.id_dims = g.id_dims;
  spec.style_drift = g.drift;
  spec.within_noise = g.noise;
  return spec;
}

int cmd_gen(const GenArgs& g) {
  const auto spec = spec_from(g);
  const auto batches = generate_stream(spec);
  if (g.out.empty() || g.out == "-") {
    save_stream(std::cout, batches);
  } else {
    save_stream(g.out, batches);
  }
  return 0;
}

struct RunArgs {
  std::string stream;
  std::string policy = "er_hull";
  int buffer_size = 3;
  int ransac_n = 5000;
  std::uint64_t seed = 0;
  std::string out = "results";
  int threads = 1;
  GenArgs gen;
};

int cmd_run(const RunArgs& a) {
  PolicyConfig policy;
  policy.kind = parse_policy_kind(a.policy);
  policy.capacity = policy.uses_buffer() ? a.buffer_size : 0;
  policy.ransac_samples = a.ransac_n;
  policy.threads = a.threads;
  policy.validate();

  Stream stream = [&] {
    if (!a.stream.empty()) return load_stream(a.stream);
    GenArgs g = a.gen;
    g.seed = a.seed;
    const auto spec = spec_from(g);
    return validate_stream(generate_stream(spec), spec.stream);
  }();

  EvalOptions eval;
  eval.threads = a.threads;
  const auto result = run_episode(stream, policy, TrainerConfig{}, eval, a.seed);
  const std::vector<RunResult> runs{result};
  const std::vector<PolicyConfig> policies{policy};
  const auto summaries = summarize_runs(runs, policies, eval.metrics);
  write_comparison(a.out, runs, summaries, eval.metrics);

  for (const auto& m : eval.metrics) {
    const auto& s = result.report.per_metric.at(m);
    std::printf("%s %s aip=%.6g forgetting=%.6g\n", result.policy_id.c_str(), m.c_str(), s.aip, s.forgetting);
  }
  return 0;
}

struct CompareArgs {
  std::string config;
  std::string out;
  int threads = 0;
};

int cmd_compare(const CompareArgs& a) {
  auto cfg = load_experiment_config(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.threads > 0) cfg.threads = a.threads;
  const auto result = compare(cfg);
  for (const auto& s : result.summaries) {
    for (const auto& m : cfg.eval.metrics) {
      std::printf("%s %s aip=%.6g±%.3g forgetting=%.6g±%.3g\n", s.policy_id.c_str(), m.c_str(), s.aip.at(m).mean,
                  s.aip.at(m).sd, s.forgetting.at(m).mean, s.forgetting.at(m).sd);
    }
  }
  std::printf("wrote %s\n", cfg.output_dir.c_str());
  return 0;
}

struct OracleArgs {
  int hull_instances = 200;
  int er_hull_instances = 50;
  std::uint64_t seed = 1;
};

// Solver against the grid and face-enumeration oracles, and ER-Hull against
// exhaustive enumeration. Prints a JSON report; exit 1 on any disagreement.
int cmd_oracle(const OracleArgs& a) {
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_int_distribution<int> n_anchors(1, 4);
  std::uniform_int_distribution<int> dims(1, 3);
  double worst_grid = 0.0;
  double worst_faces = 0.0;
  int hull_bad = 0;
  for (int i = 0; i < a.hull_instances; ++i) {
    const int m = n_anchors(rng);
    const int d = dims(rng);
    Eigen::MatrixXd anchors(d, m);
    Eigen::VectorXd q(d);
    for (int c = 0; c < m; ++c) {
      for (int r = 0; r < d; ++r) anchors(r, c) = coord(rng);
    }
    for (int r = 0; r < d; ++r) q[r] = coord(rng);
    const double ours = project_onto_hull(LatentCode(q), anchors).distance;
    const double grid = oracle::simplex_grid_search(anchors, q).distance;
    const double faces = oracle::face_enumeration_distance(anchors, q);
    worst_grid = std::max(worst_grid, std::abs(ours - grid));
    worst_faces = std::max(worst_faces, std::abs(ours - faces));
    if (std::abs(ours - grid) > 1e-3) ++hull_bad;
  }

  int er_bad = 0;
  double worst_excess = 0.0;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> per_t(1, 3);
  for (int i = 0; i < a.er_hull_instances; ++i) {
    Batch batch;
    batch.timestamp = 3;
    ReplayBuffer buffer{2, {}};
    for (int t = 1; t <= 3; ++t) {
      const int n = per_t(rng);
      for (int k = 0; k < n; ++k) {
        TimedSample s{SampleId{t, k, Split::Train}, LatentCode({unit(rng), unit(rng)})};
        (t == 3 ? batch.train : buffer.members).push_back(std::move(s));
      }
    }
    ErHullOptions opts;
    opts.capacity = 2;
    opts.ransac_samples = 1 << 20;
    const auto [chosen, record] = er_hull_update(batch, buffer, opts, rng);
    std::vector<TimedSample> pool = batch.train;
    pool.insert(pool.end(), buffer.members.begin(), buffer.members.end());
    const auto ref = oracle::exhaustive_er_hull(pool, 2, 3, true);
    const double excess = *record.objective_value - ref.best_objective;
    worst_excess = std::max(worst_excess, excess);
    bool in_argmin = false;
    for (const auto& subset : ref.argmin) {
      std::set<SampleId> ids;
      for (auto idx : subset) ids.insert(pool[idx].id);
      in_argmin = in_argmin || ids == chosen.identities();
    }
    if (!in_argmin) ++er_bad;
  }

  const nlohmann::json report{
      {"hull", {{"instances", a.hull_instances},
                {"max_abs_error_vs_grid", worst_grid},
                {"max_abs_error_vs_faces", worst_faces},
                {"over_tolerance", hull_bad}}},
      {"er_hull", {{"instances", a.er_hull_instances},
                   {"not_in_argmin", er_bad},
                   {"max_objective_excess", worst_excess}}},
      {"pass", hull_bad == 0 && er_bad == 0}};
  std::cout << report.dump(2) << '\n';
  return hull_bad == 0 && er_bad == 0 ? 0 : 1;
}

void add_gen_options(CLI::App* app, GenArgs& g, bool with_seed) {
  app->add_option("--T", g.T, "Number of timestamps");
  app->add_option("--n", g.n, "Train samples per batch");
  app->add_option("--test", g.test, "Test samples per batch");
  app->add_option("--d", g.d, "Latent dimension");
  app->add_option("--id-dims", g.id_dims, "Identity subspace size");
  app->add_option("--drift", g.drift, "Style drift per timestamp");
  app->add_option("--noise", g.noise, "Within-batch noise");
  if (with_seed) app->add_option("--seed", g.seed, "Stream seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay-buffer selection for continual personalisation on latent streams"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic stream file");
  gen_cmd->add_option("--out", gen.out, "Output path (JSON lines; '-' for stdout)");
  add_gen_options(gen_cmd, gen, true);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one episode and write its tables");
  run_cmd->add_option("--stream", run.stream, "Stream file (.jsonl or .csv); generated if omitted");
  run_cmd->add_option("--policy", run.policy, "lower, upper, er_rand, er_hull or kmeans");
  run_cmd->add_option("--buffer-size", run.buffer_size, "Replay buffer capacity k");
  run_cmd->add_option("--ransac-n", run.ransac_n, "ER-Hull candidate budget N");
  run_cmd->add_option("--seed", run.seed, "Run seed (also the generated stream's seed)");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--threads", run.threads, "Worker threads");
  add_gen_options(run_cmd, run.gen, false);

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Run an experiment config and write tables and curves");
  cmp_cmd->add_option("config", cmp.config, "Experiment config (JSON, comments allowed)")->required();
  cmp_cmd->add_option("--out", cmp.out, "Override output_dir");
  cmp_cmd->add_option("--threads", cmp.threads, "Override episode worker count");

  OracleArgs orc;
  auto* orc_cmd = app.add_subcommand("oracle", "Check the solver and ER-Hull against brute force");
  orc_cmd->add_option("--hull-instances", orc.hull_instances, "Random projection instances");
  orc_cmd->add_option("--er-hull-instances", orc.er_hull_instances, "Random ER-Hull instances");
  orc_cmd->add_option("--seed", orc.seed, "Instance seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("UsageError", e.what(), 2);
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*run_cmd) return cmd_run(run);
    if (*cmp_cmd) return cmd_compare(cmp);
    if (*orc_cmd) return cmd_oracle(orc);
  } catch (const Error& e) {
    return emit_error(to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return emit_error("InternalError", e.what());
  }
  return 0;
}
