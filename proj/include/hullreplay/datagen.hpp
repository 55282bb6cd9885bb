#pragma once

// Synthetic drifting latent streams and the embedding file format.
//
// A sample is [identity + jitter | style centre c_t + noise]: the identity
// block is shared by the whole stream, the style centre performs a random
// walk with fixed step length across timestamps.

#include "hullreplay/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace hullreplay {

struct StreamSpec {
  StreamConfig stream{};
  int id_dims = 4;
  double style_drift = 1.0;
  double within_noise = 0.2;

  void validate() const {
    const auto& s = stream;
    if (s.num_timestamps < 1 || s.train_per_batch < 1 || s.test_per_batch < 0 || s.latent_dim < 1) {
      throw Error(ErrorKind::InvalidSpec, "need T >= 1, n >= 1, test >= 0, d >= 1");
    }
    if (id_dims < 1 || id_dims >= s.latent_dim) {
      throw Error(ErrorKind::InvalidSpec, "need 1 <= id_dims < d so at least one style dimension remains");
    }
    if (!(style_drift >= 0.0)) throw Error(ErrorKind::InvalidSpec, "style_drift must be >= 0");
    if (!(within_noise > 0.0)) throw Error(ErrorKind::InvalidSpec, "within_noise must be > 0");
  }
};

struct SyntheticStream {
  std::vector<Batch> batches;
  Eigen::VectorXd identity;
  std::vector<Eigen::VectorXd> style_centers;  // c_1..c_T
};

inline SyntheticStream generate_stream_detailed(const StreamSpec& spec) {
  spec.validate();
  const auto& cfg = spec.stream;
  const int d = cfg.latent_dim;
  const int style_dims = d - spec.id_dims;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto unit_vector = [&](int n) {
    Eigen::VectorXd v(n);
    do {
      for (int i = 0; i < n; ++i) v[i] = normal(rng);
    } while (v.norm() == 0.0);
    return Eigen::VectorXd(v / v.norm());
  };

  SyntheticStream out;
  out.identity = unit_vector(spec.id_dims);
  Eigen::VectorXd center = Eigen::VectorXd::Zero(style_dims);
  const double id_jitter = 0.1 * spec.within_noise;

  auto draw = [&](int t, int index, Split split) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < spec.id_dims; ++i) v[i] = out.identity[i] + id_jitter * normal(rng);
    for (int i = 0; i < style_dims; ++i) {
      v[spec.id_dims + i] = center[i] + spec.within_noise * normal(rng);
    }
    return TimedSample{SampleId{t, index, split}, LatentCode(std::move(v))};
  };

  for (int t = 1; t <= cfg.num_timestamps; ++t) {
    center += spec.style_drift * unit_vector(style_dims);
    out.style_centers.push_back(center);
    Batch batch;
    batch.timestamp = t;
    for (int i = 0; i < cfg.train_per_batch; ++i) batch.train.push_back(draw(t, i, Split::Train));
    for (int i = 0; i < cfg.test_per_batch; ++i) batch.test.push_back(draw(t, i, Split::Test));
    out.batches.push_back(std::move(batch));
  }
  return out;
}

inline std::vector<Batch> generate_stream(const StreamSpec& spec) {
  return generate_stream_detailed(spec).batches;
}

enum class StreamFormat { Auto, JsonLines, Csv };

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line,
                                    const std::string& what) {
  throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

struct StreamCollector {
  std::string source;
  std::map<int, Batch> batches;
  std::set<SampleId> seen;

  void add(std::size_t line, SampleId id, std::vector<double> values) {
    if (!seen.insert(id).second) {
      parse_fail(source, line, "duplicate record " + describe(id));
    }
    for (double v : values) {
      if (!std::isfinite(v)) parse_fail(source, line, "non-finite value in " + describe(id));
    }
    if (values.empty()) parse_fail(source, line, "empty vector in " + describe(id));
    auto& b = batches[id.timestamp];
    b.timestamp = id.timestamp;
    TimedSample s{id, LatentCode::from(values)};
    (id.split == Split::Train ? b.train : b.test).push_back(std::move(s));
  }

  std::vector<Batch> finish() {
    if (batches.empty()) parse_fail(source, 0, "no sample records");
    std::vector<Batch> out;
    for (auto& [t, b] : batches) {
      auto by_index = [](const TimedSample& a, const TimedSample& c) { return a.id < c.id; };
      std::sort(b.train.begin(), b.train.end(), by_index);
      std::sort(b.test.begin(), b.test.end(), by_index);
      out.push_back(std::move(b));
    }
    return out;
  }
};

inline Split parse_split(const std::string& source, std::size_t line, const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  parse_fail(source, line, "split must be \"train\" or \"test\", got \"" + s + "\"");
}

inline std::vector<Batch> read_jsonl(std::istream& in, const std::string& source,
                                     StreamConfig& header) {
  StreamCollector collect{source, {}, {}};
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      parse_fail(source, line, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("d") || !j.contains("T") || !j["d"].is_number_integer() ||
          !j["T"].is_number_integer()) {
        parse_fail(source, line, "first line must be the header {\"d\": int, \"T\": int}");
      }
      header.latent_dim = j["d"].get<int>();
      header.num_timestamps = j["T"].get<int>();
      if (header.latent_dim < 1 || header.num_timestamps < 1) {
        parse_fail(source, line, "header needs d >= 1 and T >= 1");
      }
      have_header = true;
      continue;
    }
    try {
      const SampleId id{j.at("t").get<int>(), j.at("i").get<int>(),
                        parse_split(source, line, j.at("split").get<std::string>())};
      if (id.timestamp < 1 || id.index < 0) parse_fail(source, line, "need t >= 1 and i >= 0");
      collect.add(line, id, j.at("v").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      parse_fail(source, line, std::string("bad record: ") + e.what());
    }
  }
  if (!have_header) parse_fail(source, line, "empty stream file");
  return collect.finish();
}

inline std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> cells;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return cells;
}

inline std::vector<Batch> read_csv(std::istream& in, const std::string& source,
                                   StreamConfig& header) {
  StreamCollector collect{source, {}, {}};
  std::string text;
  std::size_t line = 0;
  std::size_t columns = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(text);
    if (columns == 0) {
      if (cells.size() < 4 || cells[0] != "t" || cells[1] != "i" || cells[2] != "split") {
        parse_fail(source, line, "header must be t,i,split,v0..v{d-1}");
      }
      for (std::size_t c = 3; c < cells.size(); ++c) {
        if (cells[c] != "v" + std::to_string(c - 3)) {
          parse_fail(source, line, "expected column v" + std::to_string(c - 3));
        }
      }
      columns = cells.size();
      continue;
    }
    if (cells.size() != columns) {
      parse_fail(source, line, "expected " + std::to_string(columns) + " columns, got " +
                                   std::to_string(cells.size()));
    }
    try {
      std::size_t used = 0;
      const int t = std::stoi(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("t");
      const int i = std::stoi(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("i");
      if (t < 1 || i < 0) parse_fail(source, line, "need t >= 1 and i >= 0");
      std::vector<double> v;
      for (std::size_t c = 3; c < cells.size(); ++c) {
        v.push_back(std::stod(cells[c], &used));
        if (used != cells[c].size()) throw std::invalid_argument("v");
      }
      collect.add(line, SampleId{t, i, parse_split(source, line, cells[2])}, std::move(v));
    } catch (const std::logic_error&) {
      parse_fail(source, line, "malformed number");
    }
  }
  if (columns == 0) parse_fail(source, line, "empty stream file");
  header.latent_dim = static_cast<int>(columns - 3);
  header.num_timestamps = 0;
  return collect.finish();
}

}  // namespace detail

/// Writes the JSON-lines embedding format: a {"d", "T"} header, then one
/// record per sample with 17 significant digits per coordinate.
inline void save_stream(std::ostream& out, std::span<const Batch> batches) {
  int d = 0;
  for (const auto& b : batches) {
    if (!b.train.empty()) {
      d = b.train.front().code.dim();
      break;
    }
  }
  out << "{\"d\":" << d << ",\"T\":" << batches.size() << "}\n";
  std::string line;
  auto emit = [&](const TimedSample& s) {
    line.clear();
    line += "{\"t\":" + std::to_string(s.id.timestamp) + ",\"i\":" + std::to_string(s.id.index) +
            ",\"split\":\"" + std::string(to_string(s.id.split)) + "\",\"v\":[";
    for (int k = 0; k < s.code.dim(); ++k) {
      if (k) line += ',';
      detail::append_number(line, s.code[k]);
    }
    line += "]}\n";
    out << line;
  };
  for (const auto& b : batches) {
    for (const auto& s : b.train) emit(s);
    for (const auto& s : b.test) emit(s);
  }
}

inline void save_stream(const std::string& path, std::span<const Batch> batches) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  save_stream(out, batches);
  if (!out) throw Error(ErrorKind::IoError, "write to " + path + " failed");
}

inline Stream load_stream(std::istream& in, StreamFormat format, const std::string& source = "<stream>") {
  StreamConfig header;
  std::vector<Batch> batches;
  if (format == StreamFormat::Csv) {
    batches = detail::read_csv(in, source, header);
  } else {
    batches = detail::read_jsonl(in, source, header);
  }
  return validate_stream(std::move(batches), header);
}

/// Loads a stream file; Auto picks CSV for a ".csv" suffix and JSON lines otherwise.
inline Stream load_stream(const std::string& path, StreamFormat format = StreamFormat::Auto) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  if (format == StreamFormat::Auto) {
    const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    format = csv ? StreamFormat::Csv : StreamFormat::JsonLines;
  }
  return load_stream(in, format, path);
}

}  // namespace hullreplay
