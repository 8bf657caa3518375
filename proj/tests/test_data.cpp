#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "sedloss/data.hpp"

using namespace sedloss;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec(std::uint64_t seed, std::size_t clips = 5) {
  DatasetSpec s;
  s.clip_length_s = 2.0;
  s.clips = clips;
  s.feature_dim = 4;
  s.seed = seed;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  for (const char* name : {"a", "b", "c"}) {
    EventClassSpec c;
    c.name = name;
    c.mean_duration_s = 0.3;
    c.rate_per_clip = 1.5;
    c.signature.resize(4);
    for (double& v : c.signature) v = g(rng);
    s.classes.push_back(c);
  }
  return s;
}

struct Recount {
  std::vector<std::int64_t> active, runs;
};

Recount recount(const Dataset& ds) {
  const std::size_t m_count = ds.spec.num_classes();
  Recount r{std::vector<std::int64_t>(m_count), std::vector<std::int64_t>(m_count)};
  for (const auto& c : ds.clips) {
    for (std::size_t m = 0; m < m_count; ++m) {
      bool prev = false;
      for (std::size_t n = 0; n < c.labels.frames(); ++n) {
        const bool on = c.labels.active(n, m);
        r.active[m] += on;
        if (on && !prev) ++r.runs[m];
        prev = on;
      }
    }
  }
  return r;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sedloss_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Data, FramesPerClip) {
  DatasetSpec s;
  EXPECT_EQ(s.frames_per_clip(), 500u);
}

TEST(Data, SameSeedIsBitIdentical) {
  const auto a = generate_dataset(small_spec(1));
  const auto b = generate_dataset(small_spec(1));
  ASSERT_EQ(a.clips.size(), b.clips.size());
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    EXPECT_EQ(a.clips[i].features, b.clips[i].features);
    EXPECT_EQ(a.clips[i].labels, b.clips[i].labels);
  }
  const auto c = generate_dataset(small_spec(2));
  EXPECT_NE(a.clips[0].features, c.clips[0].features);
}

TEST(Data, ZeroRateGivesSilentClipsAndPureNoise) {
  auto s = small_spec(3, 40);
  for (auto& c : s.classes) c.rate_per_clip = 0.0;
  s.noise_sigma = 2.0;
  const auto ds = generate_dataset(s);
  double sum = 0, sq = 0, count = 0;
  for (const auto& c : ds.clips) {
    for (std::size_t n = 0; n < c.labels.frames(); ++n) {
      for (std::size_t m = 0; m < c.labels.classes(); ++m) EXPECT_FALSE(c.labels.active(n, m));
    }
    for (double v : c.features.flat()) {
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  const double mean = sum / count;
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(std::sqrt(sq / count - mean * mean), 2.0, 0.05);
}

TEST(Data, ShapesFollowSpec) {
  const auto s = small_spec(4);
  const auto ds = generate_dataset(s);
  ASSERT_EQ(ds.clips.size(), 5u);
  for (const auto& c : ds.clips) {
    EXPECT_TRUE(c.features.same_shape(100, 4));
    EXPECT_EQ(c.labels.frames(), 100u);
    EXPECT_EQ(c.labels.classes(), 3u);
  }
}

TEST(Data, SignatureDimensionMismatchRejected) {
  auto s = small_spec(5);
  s.classes[1].signature.pop_back();
  EXPECT_THROW(generate_dataset(s), ValidationError);
  s = small_spec(5);
  s.frame_len_s = 0.01;  // shorter than the hop
  EXPECT_THROW(validate(s), ValidationError);
  s = small_spec(5);
  s.classes[0].mean_duration_s = 0.0;
  EXPECT_THROW(validate(s), ValidationError);
  s = small_spec(5);
  s.classes[0].amplitude = -1.0;
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Data, ClampedExponentialScaleHitsTargetMean) {
  // mean of clamp(X, lo, hi) = lo + integral_lo^hi P(X > t) dt, by quadrature
  auto clamped_mean = [](double scale, double lo, double hi) {
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    double acc = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double t0 = lo + i * h, t1 = t0 + h;
      acc += 0.5 * h * (std::exp(-t0 / scale) + std::exp(-t1 / scale));
    }
    return lo + acc;
  };
  for (double mean : {0.14, 0.8, 4.09, 7.63}) {
    const double s = clamped_exponential_scale(mean, 0.02, 10.0);
    EXPECT_NEAR(clamped_mean(s, 0.02, 10.0), mean, 1e-6 * mean) << mean;
  }
  EXPECT_EQ(clamped_exponential_scale(29.99, 0.02, 10.0), 29.99);
}

TEST(Preset, ContainsTableDurations) {
  const auto s = tut_like_preset();
  ASSERT_EQ(s.classes.size(), 25u);
  auto find = [&](const std::string& name) {
    for (const auto& c : s.classes) {
      if (c.name == name) return c.mean_duration_s;
    }
    return -1.0;
  };
  EXPECT_EQ(find("fan"), 29.99);
  EXPECT_EQ(find("mouse clicking"), 0.14);
  EXPECT_NO_THROW(validate(s));
}

TEST(Preset, MeanDurationsTrackClassMeans) {
  auto s = tut_like_preset();
  // at 200 clips the per-class sampling error alone is about 12%
  s.clips = 2000;
  s.seed = 11;
  const auto ds = generate_dataset(s);
  const auto r = recount(ds);
  int checked = 0;
  for (std::size_t m = 0; m < s.classes.size(); ++m) {
    // events longer than a clip are always truncated
    if (r.runs[m] < 50 || s.classes[m].mean_duration_s >= s.clip_length_s) continue;
    const double frames = static_cast<double>(r.active[m]) / static_cast<double>(r.runs[m]);
    const double seconds = frames * s.frame_hop_s;
    EXPECT_NEAR(seconds, s.classes[m].mean_duration_s, 0.25 * s.classes[m].mean_duration_s)
        << s.classes[m].name;
    ++checked;
  }
  EXPECT_GE(checked, 15);
}

TEST(Preset, ActiveFractionNearFourPercent) {
  auto s = tut_like_preset();
  s.clips = 500;
  s.seed = 12;
  const auto stats = compute_stats(generate_dataset(s));
  EXPECT_GE(stats.active_fraction(), 0.03);
  EXPECT_LE(stats.active_fraction(), 0.055);
}

TEST(Stats, AllZeroLabels) {
  auto s = small_spec(6);
  for (auto& c : s.classes) c.rate_per_clip = 0.0;
  const auto st = compute_stats(generate_dataset(s));
  EXPECT_EQ(st.total_active, 0);
  EXPECT_EQ(st.total_inactive, 5 * 100 * 3);
  EXPECT_EQ(st.active_fraction(), 0.0);
}

TEST(Stats, SingleRun) {
  Dataset ds;
  ds.spec = small_spec(7, 1);
  Clip c{FeatureGrid(10, 4), LabelGrid(10, 3)};
  for (std::size_t n = 3; n <= 7; ++n) c.labels.set(n, 1, true);
  ds.clips.push_back(c);
  const auto st = compute_stats(ds);
  EXPECT_EQ(st.per_class_active_frames[1], 5);
  EXPECT_EQ(st.per_class_runs[1], 1);
  EXPECT_EQ(st.per_class_mean_duration_frames[1], 5.0);
  EXPECT_EQ(st.per_class_runs[0], 0);
  EXPECT_EQ(st.per_class_mean_duration_frames[0], 0.0);
}

TEST(Stats, MatchesRecountAndConserves) {
  auto s = tut_like_preset();
  s.clips = 500;
  s.seed = 13;
  const auto ds = generate_dataset(s);
  const auto st = compute_stats(ds);
  const auto r = recount(ds);
  EXPECT_EQ(st.per_class_active_frames, r.active);
  EXPECT_EQ(st.per_class_runs, r.runs);
  std::int64_t sum = 0;
  for (std::size_t m = 0; m < r.active.size(); ++m) {
    sum += st.per_class_active_frames[m];
    EXPECT_EQ(st.per_class_active_frames[m] + st.per_class_inactive_frames[m], 500 * 500);
  }
  EXPECT_EQ(sum, st.total_active);
  EXPECT_EQ(st.total_active + st.total_inactive, 500 * 500 * 25);
}

TEST(Data, FeaturesProjectOntoActiveSignatures) {
  auto s = tut_like_preset();
  s.clips = 60;
  s.seed = 14;
  const auto ds = generate_dataset(s);
  for (std::size_t m = 0; m < s.classes.size(); ++m) {
    const auto& sig = s.classes[m].signature;
    double on = 0, off = 0, n_on = 0, n_off = 0;
    for (const auto& c : ds.clips) {
      for (std::size_t n = 0; n < c.features.rows(); ++n) {
        double proj = 0.0;
        for (std::size_t j = 0; j < sig.size(); ++j) proj += c.features(n, j) * sig[j];
        if (c.labels.active(n, m)) {
          on += proj;
          ++n_on;
        } else {
          off += proj;
          ++n_off;
        }
      }
    }
    if (n_on == 0) continue;
    EXPECT_GT(on / n_on, off / n_off) << s.classes[m].name;
  }
}

TEST(DatasetIo, RoundTripIsLossless) {
  const auto ds = generate_dataset(small_spec(15, 3));
  const auto dir = temp_dir("roundtrip");
  write_dataset(dir, ds);
  EXPECT_TRUE(fs::exists(dir / "manifest"));
  EXPECT_TRUE(fs::exists(dir / "clip_2.csv"));
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.clips.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.clips[i].features, ds.clips[i].features);
    EXPECT_EQ(back.clips[i].labels, ds.clips[i].labels);
  }
  ASSERT_EQ(back.spec.classes.size(), 3u);
  EXPECT_EQ(back.spec.classes[2].signature, ds.spec.classes[2].signature);
  EXPECT_EQ(back.spec.seed, 15u);
  fs::remove_all(dir);
}

TEST(DatasetIo, MalformedInputRejected) {
  const auto ds = generate_dataset(small_spec(16, 2));
  const auto dir = temp_dir("malformed");
  write_dataset(dir, ds);
  {
    std::ofstream os(dir / "clip_1.csv", std::ios::app);
    os << "100,1,2,3,4,0,0,2\n";
  }
  EXPECT_THROW(read_dataset(dir), ValidationError);
  fs::remove(dir / "clip_1.csv");
  EXPECT_THROW(read_dataset(dir), ValidationError);
  fs::remove_all(dir);
  EXPECT_THROW(read_dataset(dir), ValidationError);
}

TEST(Data, SliceKeepsOrder) {
  const auto ds = generate_dataset(small_spec(17, 5));
  const auto part = slice(ds, 1, 3);
  ASSERT_EQ(part.clips.size(), 2u);
  EXPECT_EQ(part.clips[0].features, ds.clips[1].features);
  EXPECT_EQ(part.clips[1].labels, ds.clips[2].labels);
}
