#include "hullreplay/datagen.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace hullreplay;

namespace {

StreamSpec default_spec(std::uint64_t seed) {
  StreamSpec spec;
  spec.stream.seed = seed;
  return spec;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::InvalidArgument;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(GenerateStream, ShapeAndValidity) {
  const auto batches = generate_stream(default_spec(1));
  ASSERT_EQ(batches.size(), 10u);
  for (const auto& b : batches) {
    EXPECT_EQ(b.train.size(), 20u);
    EXPECT_EQ(b.test.size(), 10u);
    EXPECT_EQ(b.train.front().code.dim(), 16);
  }
  EXPECT_NO_THROW(validate_stream(batches, default_spec(1).stream));
}

TEST(GenerateStream, SameSeedIsBitIdentical) {
  const auto a = generate_stream(default_spec(7));
  const auto b = generate_stream(default_spec(7));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].train.size(); ++i) {
      EXPECT_EQ(a[t].train[i].code, b[t].train[i].code);
    }
  }
  EXPECT_FALSE(a[0].train[0].code == generate_stream(default_spec(8))[0].train[0].code);
}

TEST(GenerateStream, ZeroDriftKeepsOneStyleCentre) {
  auto spec = default_spec(3);
  spec.style_drift = 0.0;
  const auto s = generate_stream_detailed(spec);
  for (const auto& c : s.style_centers) EXPECT_EQ(c.norm(), 0.0);
}

TEST(GenerateStream, StyleCentreRandomWalk) {
  // The stated expectation: distance between the centres at timestamps 1 and 10
  // is about sqrt(10) * drift (Monte Carlo over 200 seeds, 15% band).
  double mean_gap = 0.0;
  double mean_sq_gap = 0.0;
  double mean_sq_origin = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = generate_stream_detailed(default_spec(seed));
    const double gap = (s.style_centers[9] - s.style_centers[0]).norm();
    mean_gap += gap / 200.0;
    mean_sq_gap += gap * gap / 200.0;
    mean_sq_origin += s.style_centers[9].squaredNorm() / 200.0;
    for (std::size_t t = 1; t < s.style_centers.size(); ++t) {
      EXPECT_NEAR((s.style_centers[t] - s.style_centers[t - 1]).norm(), 1.0, 1e-12);
    }
  }
  EXPECT_NEAR(mean_gap, std::sqrt(10.0), 0.15 * std::sqrt(10.0));
  // Exact second moments: c_10 - c_1 spans 9 independent unit steps, c_10 spans 10.
  EXPECT_NEAR(mean_sq_gap, 9.0, 0.1 * 9.0);
  EXPECT_NEAR(mean_sq_origin, 10.0, 0.1 * 10.0);
}

TEST(GenerateStream, TrainAndTestShareOneDistribution) {
  const int seeds = 200;
  std::vector<double> diffs;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto b = generate_stream(default_spec(static_cast<std::uint64_t>(seed)))[0];
    auto mean_of = [](const std::vector<TimedSample>& set, int k) {
      double m = 0.0;
      for (const auto& s : set) m += s.code[k] / static_cast<double>(set.size());
      return m;
    };
    diffs.push_back(mean_of(b.train, 10) - mean_of(b.test, 10));
  }
  double mean = 0.0;
  for (double v : diffs) mean += v / seeds;
  const double se = std::sqrt(0.04 / 20 + 0.04 / 10) / std::sqrt(double(seeds));
  EXPECT_LT(std::abs(mean), 4.0 * se);
}

TEST(GenerateStream, IdentityMeanWithinStandardErrorBound) {
  // 3-sigma per coordinate; allow the occasional expected excursion.
  int violations = 0;
  int checks = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = generate_stream_detailed(default_spec(seed));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
    int n = 0;
    for (const auto& b : s.batches) {
      for (const auto& x : b.train) {
        mean += x.code.values().head(4);
        ++n;
      }
    }
    mean /= n;
    EXPECT_NEAR(s.identity.norm(), 1.0, 1e-12);
    const double bound = 3.0 * 0.1 * 0.2 / std::sqrt(double(n));
    for (int k = 0; k < 4; ++k) {
      ++checks;
      if (std::abs(mean[k] - s.identity[k]) > bound) ++violations;
    }
  }
  EXPECT_LE(violations, checks / 20);
}

TEST(GenerateStream, InvalidSpec) {
  auto spec = default_spec(0);
  spec.id_dims = 16;
  EXPECT_EQ(kind_of([&] { generate_stream(spec); }), ErrorKind::InvalidSpec);
  spec = default_spec(0);
  spec.within_noise = 0.0;
  EXPECT_EQ(kind_of([&] { generate_stream(spec); }), ErrorKind::InvalidSpec);
}

TEST(StreamFile, JsonLinesRoundTrip) {
  const auto batches = generate_stream(default_spec(11));
  std::stringstream buf;
  save_stream(buf, batches);
  const auto loaded = load_stream(buf, StreamFormat::JsonLines);
  ASSERT_EQ(loaded.batches().size(), batches.size());
  for (std::size_t t = 0; t < batches.size(); ++t) EXPECT_EQ(loaded.batches()[t], batches[t]);
  // Values survive bit-exactly with 17 significant digits.
  EXPECT_EQ(loaded.batches()[4].test[3].code.values(), batches[4].test[3].code.values());
}

TEST(StreamFile, CsvRoundTripThroughDisk) {
  const auto batches = generate_stream(default_spec(12));
  const auto path = (std::filesystem::temp_directory_path() / "hullreplay_roundtrip.csv").string();
  {
    std::ofstream out(path);
    out << "t,i,split";
    for (int k = 0; k < 16; ++k) out << ",v" << k;
    out << '\n';
    char num[32];
    for (const auto& b : batches) {
      for (const auto* set : {&b.train, &b.test}) {
        for (const auto& s : *set) {
          out << s.id.timestamp << ',' << s.id.index << ',' << to_string(s.id.split);
          for (int k = 0; k < 16; ++k) {
            std::snprintf(num, sizeof num, "%.17g", s.code[k]);
            out << ',' << num;
          }
          out << '\n';
        }
      }
    }
  }
  const auto loaded = load_stream(path);
  std::filesystem::remove(path);
  ASSERT_EQ(loaded.num_timestamps(), 10);
  for (std::size_t t = 0; t < batches.size(); ++t) {
    ASSERT_EQ(loaded.batches()[t], batches[t]);
    EXPECT_EQ(loaded.batches()[t].train[5].code.values(), batches[t].train[5].code.values());
  }
}

TEST(StreamFile, DuplicateRecordIsNamed) {
  std::stringstream buf(
      "{\"d\":2,\"T\":1}\n"
      "{\"t\":1,\"i\":0,\"split\":\"train\",\"v\":[1,2]}\n"
      "{\"t\":1,\"i\":0,\"split\":\"train\",\"v\":[3,4]}\n");
  const auto msg = message_of([&] { load_stream(buf, StreamFormat::JsonLines, "dup.jsonl"); });
  EXPECT_NE(msg.find("dup.jsonl:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
  std::stringstream again(buf.str());
  EXPECT_EQ(kind_of([&] { load_stream(again, StreamFormat::JsonLines); }), ErrorKind::ParseError);
}

TEST(StreamFile, EmptyAndMalformedInputs) {
  std::stringstream empty;
  EXPECT_EQ(kind_of([&] { load_stream(empty, StreamFormat::JsonLines); }), ErrorKind::ParseError);
  std::stringstream empty_csv;
  EXPECT_EQ(kind_of([&] { load_stream(empty_csv, StreamFormat::Csv); }), ErrorKind::ParseError);
  std::stringstream header_only("{\"d\":2,\"T\":1}\n");
  EXPECT_EQ(kind_of([&] { load_stream(header_only, StreamFormat::JsonLines); }), ErrorKind::ParseError);
  std::stringstream bad_split("{\"d\":1,\"T\":1}\n{\"t\":1,\"i\":0,\"split\":\"val\",\"v\":[1]}\n");
  EXPECT_EQ(kind_of([&] { load_stream(bad_split, StreamFormat::JsonLines); }), ErrorKind::ParseError);
  std::stringstream bad_csv("t,i,split,v0\n1,0,train,abc\n");
  EXPECT_EQ(kind_of([&] { load_stream(bad_csv, StreamFormat::Csv); }), ErrorKind::ParseError);
  std::stringstream wrong_dim("{\"d\":3,\"T\":1}\n{\"t\":1,\"i\":0,\"split\":\"train\",\"v\":[1,2]}\n");
  EXPECT_EQ(kind_of([&] { load_stream(wrong_dim, StreamFormat::JsonLines); }), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([&] { load_stream(std::string("/nonexistent/x.jsonl")); }), ErrorKind::IoError);
}
