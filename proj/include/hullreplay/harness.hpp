#pragma once

// Experiment driver: runs the sequential protocol for each policy, fills the
// performance matrices and writes tables, deterioration curves and run logs.

#include "hullreplay/datagen.hpp"
#include "hullreplay/metrics.hpp"
#include "hullreplay/model.hpp"
#include "hullreplay/policies.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

namespace hullreplay {

inline constexpr std::array<std::string_view, 4> kMetricNames{"recon_l2", "recon_id",
                                                              "synth_frechet", "synth_id"};

inline Direction metric_direction(std::string_view name) {
  if (name == "recon_l2" || name == "synth_frechet") return Direction::Negative;
  if (name == "recon_id" || name == "synth_id") return Direction::Positive;
  throw Error(ErrorKind::InvalidConfig, "unknown metric '" + std::string(name) + "'");
}

struct SynthConfig {
  int count = 50;
  double concentration = 1.0;
};

struct EvalOptions {
  std::vector<int> id_dims{0, 1, 2, 3};
  SynthConfig synth{};
  std::vector<std::string> metrics{kMetricNames.begin(), kMetricNames.end()};
  int threads = 1;

  EvalConfig eval_config() const {
    EvalConfig c;
    c.id_dims = id_dims;
    c.synth_count = synth.count;
    c.concentration = synth.concentration;
    auto has = [&](std::string_view m) {
      return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
    };
    c.reconstruction = has("recon_l2") || has("recon_id");
    c.synthesis = has("synth_frechet") || has("synth_id");
    return c;
  }

  void validate(int latent_dim) const {
    if (metrics.empty()) throw Error(ErrorKind::InvalidConfig, "no metrics enabled");
    std::set<std::string> seen;
    for (const auto& m : metrics) {
      metric_direction(m);
      if (!seen.insert(m).second) throw Error(ErrorKind::InvalidConfig, "metric '" + m + "' repeated");
    }
    if (id_dims.empty()) throw Error(ErrorKind::InvalidConfig, "id_dims is empty");
    for (int i : id_dims) {
      if (i < 0 || i >= latent_dim) {
        throw Error(ErrorKind::InvalidConfig, "id_dims entry " + std::to_string(i) + " out of range");
      }
    }
    if (synth.count < 2) throw Error(ErrorKind::InvalidConfig, "synth count must be >= 2");
    if (!(synth.concentration > 0.0)) throw Error(ErrorKind::InvalidConfig, "concentration must be > 0");
    if (threads < 1) throw Error(ErrorKind::InvalidConfig, "threads must be >= 1");
  }
};

struct PhaseTimings {
  double fit_seconds = 0.0;
  double evaluate_seconds = 0.0;
  double update_seconds = 0.0;
};

struct RunResult {
  std::string policy_id;
  PolicyConfig policy;
  std::uint64_t seed = 0;
  std::vector<PerformanceMatrix> matrices;
  MetricsReport report;
  std::vector<BufferUpdateRecord> buffer_trace;
  /// Identities of the training set used at each timestamp 1..T.
  std::vector<std::vector<SampleId>> training_sets;
  PhaseTimings timings;

  const PerformanceMatrix& matrix(std::string_view metric) const {
    for (const auto& m : matrices) {
      if (m.metric_name() == metric) return m;
    }
    throw Error(ErrorKind::MissingEntry, "metric '" + std::string(metric) + "' was not evaluated");
  }
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
// handled exactly once, so writes to slot i need no synchronisation.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<SampleId> ids_of(std::span<const TimedSample> samples) {
  std::vector<SampleId> ids;
  for (const auto& s : samples) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline double metric_value(const EvalScores& s, std::string_view name) {
  if (name == "recon_l2") return s.recon_l2;
  if (name == "recon_id") return s.recon_id;
  if (name == "synth_frechet") return s.synth_frechet;
  return s.synth_id;
}

constexpr std::uint64_t kPolicyTag = 0x706f6c696379ULL;  // "policy"

}  // namespace detail

/// One sequential episode: for t = 1..T build the training set, fit, score
/// the model on every batch j <= t, then update the buffer.
inline RunResult run_episode(const Stream& stream, const PolicyConfig& policy,
                             const TrainerConfig& trainer, const EvalOptions& eval,
                             std::uint64_t seed) {
  policy.validate();
  trainer.validate();
  eval.validate(stream.latent_dim());
  const int T = stream.num_timestamps();
  const EvalConfig eval_config = eval.eval_config();
  const HullOptions hull{policy.hull_tolerance, HullOptions{}.max_iterations};
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point start) {
    return std::chrono::duration<double>(clock::now() - start).count();
  };

  RunResult result;
  result.policy = policy;
  result.policy_id = policy.id();
  result.seed = seed;
  for (const auto& m : eval.metrics) result.matrices.emplace_back(m, metric_direction(m), T);

  ReplayBuffer buffer{policy.capacity, {}};
  for (int t = 1; t <= T; ++t) {
    try {
      const Batch& current = stream.batch(t);
      std::vector<TimedSample> training_set;
      if (policy.uses_buffer()) {
        training_set = current.train;
        training_set.insert(training_set.end(), buffer.members.begin(), buffer.members.end());
      } else {
        training_set = bound_training_set(
            policy.kind, std::span<const Batch>(stream.batches()).first(static_cast<std::size_t>(t)),
            current);
      }
      result.training_sets.push_back(detail::ids_of(training_set));

      auto start = clock::now();
      const AnchorHullModel model = fit(training_set, t, trainer, hull);
      result.timings.fit_seconds += seconds_since(start);

      start = clock::now();
      std::vector<EvalScores> row(static_cast<std::size_t>(t));
      detail::parallel_for(row.size(), eval.threads, [&](std::size_t idx) {
        const int j = static_cast<int>(idx) + 1;
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t),
                                        static_cast<std::uint64_t>(j)));
        row[idx] = evaluate(model, stream.batch(j), eval_config, rng);
      });
      for (int j = 1; j <= t; ++j) {
        for (auto& m : result.matrices) {
          m.set(t, j, detail::metric_value(row[static_cast<std::size_t>(j - 1)], m.metric_name()));
        }
      }
      result.timings.evaluate_seconds += seconds_since(start);

      if (policy.uses_buffer()) {
        start = clock::now();
        std::mt19937_64 rng(derive_seed(seed ^ policy.seed, detail::kPolicyTag,
                                        static_cast<std::uint64_t>(t)));
        BufferUpdateRecord record;
        record.timestamp = t;
        if (policy.kind == PolicyKind::ErHull) {
          ErHullOptions opts;
          opts.capacity = policy.capacity;
          opts.ransac_samples = policy.ransac_samples;
          opts.hull = hull;
          opts.include_current_batch = policy.include_current_batch;
          opts.threads = policy.threads;
          auto [next, rec] = er_hull_update(current, buffer, opts, rng);
          buffer = std::move(next);
          record = std::move(rec);
        } else {
          buffer = policy.kind == PolicyKind::ErRand
                       ? er_rand_update(current, buffer, policy.capacity, rng)
                       : kmeans_update(current, buffer, policy.capacity, rng);
          record.candidates_evaluated = 1;
          record.rng_state_digest = detail::digest(rng);
          for (const auto& m : buffer.members) record.chosen.push_back(m.id);
        }
        result.buffer_trace.push_back(std::move(record));
        result.timings.update_seconds += seconds_since(start);
      }
    } catch (const Error& e) {
      throw Error(e.kind(), result.policy_id + " seed " + std::to_string(seed) + " timestamp " +
                                std::to_string(t) + ": " + e.what());
    }
  }
  result.report = make_report(result.matrices);
  return result;
}

// ---------------------------------------------------------------------------
// Configuration

struct StreamSource {
  std::optional<StreamSpec> generate;
  std::optional<std::string> path;
  StreamFormat format = StreamFormat::Auto;
};

struct ExperimentConfig {
  StreamSource stream;
  std::vector<PolicyConfig> policies;
  TrainerConfig trainer{};
  EvalOptions eval{};
  std::string output_dir = "results";
  std::vector<std::uint64_t> seeds{0};
  /// Episodes run concurrently on this many workers.
  int threads = 1;

  void validate() const {
    if (policies.empty()) throw Error(ErrorKind::InvalidConfig, "at least one policy is required");
    if (seeds.empty()) throw Error(ErrorKind::InvalidConfig, "at least one seed is required");
    if (stream.generate.has_value() == stream.path.has_value()) {
      throw Error(ErrorKind::InvalidConfig, "stream needs exactly one of 'generate' or 'path'");
    }
    if (stream.generate) stream.generate->validate();
    std::set<std::string> ids;
    for (const auto& p : policies) {
      p.validate();
      if (!ids.insert(p.id()).second) {
        throw Error(ErrorKind::InvalidConfig, "policy '" + p.id() + "' listed twice");
      }
    }
    trainer.validate();
    if (threads < 1) throw Error(ErrorKind::InvalidConfig, "threads must be >= 1");
  }
};

/// Lower and Upper bounds plus ER-Rand, ER-Hull (N = 5000) and K-Means at
/// buffer sizes 3, 5 and 10 on the default synthetic stream.
inline ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.stream.generate = StreamSpec{};
  c.policies.push_back(PolicyConfig{PolicyKind::Lower, 0});
  c.policies.push_back(PolicyConfig{PolicyKind::Upper, 0});
  for (int k : {3, 5, 10}) {
    for (auto kind : {PolicyKind::ErRand, PolicyKind::ErHull, PolicyKind::KMeans}) {
      PolicyConfig p;
      p.kind = kind;
      p.capacity = k;
      c.policies.push_back(p);
    }
  }
  return c;
}

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> keys,
                           const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
      throw Error(ErrorKind::InvalidConfig, "unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::read_opt;
  ExperimentConfig c;
  try {
    detail::reject_unknown(j, {"stream", "policies", "trainer", "id_dims", "synth", "output_dir",
                               "seeds", "metrics", "threads"},
                           "config");
    if (!j.contains("stream")) throw Error(ErrorKind::InvalidConfig, "config needs 'stream'");
    const auto& s = j.at("stream");
    detail::reject_unknown(s, {"generate", "path", "format"}, "stream");
    if (s.contains("generate")) {
      const auto& g = s.at("generate");
      detail::reject_unknown(g, {"T", "n", "test", "d", "id_dims", "style_drift", "within_noise"},
                             "stream.generate");
      StreamSpec spec;
      read_opt(g, "T", spec.stream.num_timestamps);
      read_opt(g, "n", spec.stream.train_per_batch);
      read_opt(g, "test", spec.stream.test_per_batch);
      read_opt(g, "d", spec.stream.latent_dim);
      read_opt(g, "id_dims", spec.id_dims);
      read_opt(g, "style_drift", spec.style_drift);
      read_opt(g, "within_noise", spec.within_noise);
      c.stream.generate = spec;
    }
    if (s.contains("path")) c.stream.path = s.at("path").get<std::string>();
    if (s.contains("format")) {
      const auto f = s.at("format").get<std::string>();
      if (f == "auto") c.stream.format = StreamFormat::Auto;
      else if (f == "jsonl") c.stream.format = StreamFormat::JsonLines;
      else if (f == "csv") c.stream.format = StreamFormat::Csv;
      else throw Error(ErrorKind::InvalidConfig, "stream.format must be auto, jsonl or csv");
    }

    if (!j.contains("policies") || !j.at("policies").is_array()) {
      throw Error(ErrorKind::InvalidConfig, "config needs a 'policies' array");
    }
    for (const auto& p : j.at("policies")) {
      detail::reject_unknown(p, {"kind", "capacity", "ransac_samples", "hull_tolerance", "seed",
                                 "include_current_batch", "threads"},
                             "policy");
      PolicyConfig pc;
      pc.kind = parse_policy_kind(p.at("kind").get<std::string>());
      pc.capacity = pc.uses_buffer() ? 3 : 0;
      read_opt(p, "capacity", pc.capacity);
      read_opt(p, "ransac_samples", pc.ransac_samples);
      read_opt(p, "hull_tolerance", pc.hull_tolerance);
      read_opt(p, "seed", pc.seed);
      read_opt(p, "include_current_batch", pc.include_current_batch);
      read_opt(p, "threads", pc.threads);
      c.policies.push_back(pc);
    }
    if (j.contains("trainer")) {
      const auto& t = j.at("trainer");
      detail::reject_unknown(t, {"replay_weight", "replay_fraction"}, "trainer");
      read_opt(t, "replay_weight", c.trainer.replay_weight);
      read_opt(t, "replay_fraction", c.trainer.replay_fraction);
    }
    read_opt(j, "id_dims", c.eval.id_dims);
    if (j.contains("synth")) {
      const auto& sy = j.at("synth");
      detail::reject_unknown(sy, {"count", "concentration"}, "synth");
      read_opt(sy, "count", c.eval.synth.count);
      read_opt(sy, "concentration", c.eval.synth.concentration);
    }
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "seeds", c.seeds);
    read_opt(j, "metrics", c.eval.metrics);
    read_opt(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::json to_json(const SampleId& id) {
  return {{"t", id.timestamp}, {"i", id.index}, {"split", std::string(to_string(id.split))}};
}

inline nlohmann::json to_json(const BufferUpdateRecord& r) {
  nlohmann::json chosen = nlohmann::json::array();
  for (const auto& id : r.chosen) chosen.push_back(to_json(id));
  nlohmann::json j{{"timestamp", r.timestamp},
                   {"chosen", chosen},
                   {"candidates_evaluated", r.candidates_evaluated},
                   {"rng_state_digest", r.rng_state_digest}};
  j["objective_value"] = r.objective_value ? nlohmann::json(*r.objective_value) : nlohmann::json();
  return j;
}

inline nlohmann::json to_json(const PerformanceMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 1; i <= m.num_timestamps(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 1; j <= i; ++j) row.push_back(m.has(i, j) ? nlohmann::json(m.at(i, j)) : nlohmann::json());
    rows.push_back(row);
  }
  return {{"metric", m.metric_name()}, {"direction", std::string(to_string(m.direction()))},
          {"rows", rows}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, s] : r.per_metric) {
    j[name] = {{"matrix", to_json(s.matrix)},
               {"average_at", s.average_at},
               {"aip", s.aip},
               {"forgetting", s.forgetting},
               {"per_timestamp_forgetting", s.per_timestamp_forgetting}};
  }
  return j;
}

inline nlohmann::json to_json(const PolicyConfig& p) {
  return {{"kind", std::string(to_string(p.kind))},
          {"capacity", p.capacity},
          {"ransac_samples", p.ransac_samples},
          {"hull_tolerance", p.hull_tolerance},
          {"seed", p.seed},
          {"include_current_batch", p.include_current_batch}};
}

inline nlohmann::json to_json(const RunResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& rec : r.buffer_trace) trace.push_back(to_json(rec));
  return {{"policy_id", r.policy_id},
          {"policy", to_json(r.policy)},
          {"seed", r.seed},
          {"report", to_json(r.report)},
          {"buffer_trace", trace}};
}

// ---------------------------------------------------------------------------
// Comparison tables

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t runs = 0;
};

/// Mean and sample standard deviation (0 for a single run).
inline MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  out.runs = values.size();
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

struct PolicySummary {
  std::string policy_id;
  PolicyConfig policy;
  std::map<std::string, MeanSd> aip;
  std::map<std::string, MeanSd> forgetting;
  /// Final-model curve a(T, j) per metric: mean and sd over seeds for j = 1..T.
  std::map<std::string, std::vector<MeanSd>> final_curve;
};

struct ComparisonResult {
  std::vector<RunResult> runs;  // policy-major, then seed order
  std::vector<PolicySummary> summaries;
};

inline std::vector<PolicySummary> summarize_runs(std::span<const RunResult> runs,
                                                 std::span<const PolicyConfig> policies,
                                                 std::span<const std::string> metrics) {
  std::vector<PolicySummary> out;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    PolicySummary s;
    s.policy = policies[p];
    s.policy_id = policies[p].id();
    std::vector<const RunResult*> mine;
    for (const auto& r : runs) {
      if (r.policy_id == s.policy_id) mine.push_back(&r);
    }
    if (mine.empty()) continue;
    for (const auto& metric : metrics) {
      std::vector<double> a;
      std::vector<double> f;
      for (const auto* r : mine) {
        const auto& summary = r->report.per_metric.at(metric);
        a.push_back(summary.aip);
        f.push_back(summary.forgetting);
      }
      s.aip[metric] = mean_sd(a);
      s.forgetting[metric] = mean_sd(f);
      const int T = mine.front()->matrix(metric).num_timestamps();
      for (int j = 1; j <= T; ++j) {
        std::vector<double> v;
        for (const auto* r : mine) v.push_back(r->matrix(metric).at(T, j));
        s.final_curve[metric].push_back(mean_sd(v));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << content;
}

}  // namespace detail

/// Writes summary.csv, summary.json, curves.csv and buffer_log.jsonl.
inline void write_comparison(const std::filesystem::path& dir, std::span<const RunResult> runs,
                             std::span<const PolicySummary> summaries,
                             std::span<const std::string> metrics) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::string csv =
      "policy,kind,buffer_size,metric,direction,runs,aip_mean,aip_sd,forgetting_mean,"
      "forgetting_sd,forgetting_x10_mean,forgetting_x10_sd\n";
  std::string curves = "policy,kind,buffer_size,metric,j,mean,sd,runs\n";
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json policies_json = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json pj{{"policy_id", s.policy_id}, {"policy", to_json(s.policy)}};
    for (const auto& metric : metrics) {
      const auto& a = s.aip.at(metric);
      const auto& f = s.forgetting.at(metric);
      const std::string prefix = s.policy_id + "," + std::string(to_string(s.policy.kind)) + "," +
                                 std::to_string(s.policy.capacity) + "," + metric + ",";
      csv += prefix + std::string(to_string(metric_direction(metric))) + "," +
             std::to_string(a.runs) + "," + detail::fmt6(a.mean) + "," + detail::fmt6(a.sd) + "," +
             detail::fmt6(f.mean) + "," + detail::fmt6(f.sd) + "," + detail::fmt6(10.0 * f.mean) +
             "," + detail::fmt6(10.0 * f.sd) + "\n";
      const auto& curve = s.final_curve.at(metric);
      nlohmann::json curve_json = nlohmann::json::array();
      for (std::size_t j = 0; j < curve.size(); ++j) {
        curves += prefix + std::to_string(j + 1) + "," + detail::fmt6(curve[j].mean) + "," +
                  detail::fmt6(curve[j].sd) + "," + std::to_string(curve[j].runs) + "\n";
        curve_json.push_back({{"j", j + 1}, {"mean", curve[j].mean}, {"sd", curve[j].sd}});
      }
      pj["metrics"][metric] = {{"runs", a.runs},
                               {"aip_mean", a.mean},
                               {"aip_sd", a.sd},
                               {"forgetting_mean", f.mean},
                               {"forgetting_sd", f.sd},
                               {"final_curve", curve_json}};
    }
    policies_json.push_back(pj);
  }
  summary["policies"] = policies_json;
  nlohmann::json runs_json = nlohmann::json::array();
  std::string log;
  for (const auto& r : runs) {
    runs_json.push_back(to_json(r));
    for (const auto& rec : r.buffer_trace) {
      auto line = to_json(rec);
      line["policy_id"] = r.policy_id;
      line["seed"] = r.seed;
      log += line.dump() + "\n";
    }
  }
  summary["runs"] = runs_json;

  detail::write_file(dir / "summary.csv", csv);
  detail::write_file(dir / "curves.csv", curves);
  detail::write_file(dir / "summary.json", summary.dump(2) + "\n");
  detail::write_file(dir / "buffer_log.jsonl", log);
}

inline Stream stream_for_seed(const StreamSource& source, std::uint64_t seed) {
  if (source.generate) {
    StreamSpec spec = *source.generate;
    spec.stream.seed = seed;
    return validate_stream(generate_stream(spec), spec.stream);
  }
  return load_stream(*source.path, source.format);
}

/// Runs every (policy, seed) episode and writes the comparison outputs. On
/// failure the finished episodes are flushed before the error propagates.
inline ComparisonResult compare(const ExperimentConfig& config) {
  config.validate();
  std::vector<Stream> streams;
  for (auto seed : config.seeds) streams.push_back(stream_for_seed(config.stream, seed));
  for (const auto& s : streams) config.eval.validate(s.latent_dim());

  const std::size_t n_seeds = config.seeds.size();
  const std::size_t n_runs = config.policies.size() * n_seeds;
  std::vector<std::optional<RunResult>> slots(n_runs);
  std::exception_ptr failure;
  try {
    detail::parallel_for(n_runs, config.threads, [&](std::size_t idx) {
      const auto& policy = config.policies[idx / n_seeds];
      const std::size_t s = idx % n_seeds;
      slots[idx] = run_episode(streams[s], policy, config.trainer, config.eval, config.seeds[s]);
    });
  } catch (...) {
    failure = std::current_exception();
  }

  ComparisonResult result;
  for (auto& slot : slots) {
    if (slot) result.runs.push_back(std::move(*slot));
  }
  result.summaries = summarize_runs(result.runs, config.policies, config.eval.metrics);
  write_comparison(config.output_dir, result.runs, result.summaries, config.eval.metrics);
  if (failure) std::rethrow_exception(failure);
  return result;
}

}  // namespace hullreplay
