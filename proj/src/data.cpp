#include <algorithm>
#include <cmath>
#include <random>

#include "sedloss/data.hpp"
#include "sedloss/parallel.hpp"

namespace sedloss {

std::size_t DatasetSpec::frames_per_clip() const {
  return static_cast<std::size_t>(std::llround(clip_length_s / frame_hop_s));
}

void validate(const DatasetSpec& spec) {
  if (!(spec.frame_hop_s > 0.0) || !(spec.frame_len_s >= spec.frame_hop_s) ||
      !(spec.clip_length_s >= spec.frame_len_s)) {
    throw ValidationError("dataset timing requires 0 < frame_hop <= frame_len <= clip_length");
  }
  if (spec.clips == 0) throw ValidationError("dataset needs at least one clip");
  if (spec.feature_dim == 0) throw ValidationError("feature_dim must be positive");
  if (!(spec.noise_sigma > 0.0)) throw ValidationError("noise_sigma must be positive");
  if (spec.classes.empty()) throw ValidationError("dataset needs at least one event class");
  for (const auto& c : spec.classes) {
    if (!(c.mean_duration_s > 0.0)) {
      throw ValidationError("class '" + c.name + "': mean duration must be positive");
    }
    if (!(c.amplitude > 0.0)) {
      throw ValidationError("class '" + c.name + "': amplitude must be positive");
    }
    if (!(c.rate_per_clip >= 0.0) || !std::isfinite(c.rate_per_clip)) {
      throw ValidationError("class '" + c.name + "': rate must be finite and >= 0");
    }
    if (c.signature.size() != spec.feature_dim) {
      throw ValidationError("class '" + c.name + "': signature has " +
                            std::to_string(c.signature.size()) + " dims, feature_dim is " +
                            std::to_string(spec.feature_dim));
    }
  }
}

double clamped_exponential_scale(double mean, double lo, double hi) {
  if (mean >= hi) return mean;
  if (mean <= lo) return lo * 1e-3;
  // E[clamp(X, lo, hi)] = lo + s (exp(-lo/s) - exp(-hi/s)), increasing in s.
  auto clamped_mean = [&](double s) { return lo + s * (std::exp(-lo / s) - std::exp(-hi / s)); };
  double a = mean * 1e-3;
  double b = mean;
  while (clamped_mean(b) < mean) b *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    (clamped_mean(mid) < mean ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

Dataset generate_dataset(const DatasetSpec& spec) {
  validate(spec);
  const std::size_t frames = spec.frames_per_clip();
  const std::size_t nclass = spec.num_classes();
  const std::size_t dim = spec.feature_dim;
  const double hop = spec.frame_hop_s;
  const double length = spec.clip_length_s;

  std::vector<double> scale(nclass);
  for (std::size_t m = 0; m < nclass; ++m) {
    scale[m] = clamped_exponential_scale(spec.classes[m].mean_duration_s, hop, length);
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset ds;
  ds.spec = spec;
  ds.clips.reserve(spec.clips);
  for (std::size_t i = 0; i < spec.clips; ++i) {
    LabelGrid labels(frames, nclass);
    for (std::size_t m = 0; m < nclass; ++m) {
      const double rate = spec.classes[m].rate_per_clip;
      if (rate == 0.0) continue;
      std::poisson_distribution<int> count_dist(rate);
      std::exponential_distribution<double> duration_dist(1.0 / scale[m]);
      const int count = count_dist(rng);
      for (int k = 0; k < count; ++k) {
        const double dur = std::clamp(duration_dist(rng), hop, length);
        const double onset = unit(rng) * (length - dur);
        const double offset = onset + dur;
        // frame n is active when its start n*hop lies in [onset, offset)
        auto n = static_cast<std::size_t>(std::max(0.0, std::floor(onset / hop)));
        for (; n < frames; ++n) {
          const double t = static_cast<double>(n) * hop;
          if (t >= offset) break;
          if (t >= onset) labels.set(n, m, true);
        }
      }
    }

    FeatureGrid features(frames, dim);
    for (std::size_t n = 0; n < frames; ++n) {
      auto row = features.row(n);
      for (double& v : row) v = spec.noise_sigma * gauss(rng);
      for (std::size_t m = 0; m < nclass; ++m) {
        if (!labels.active(n, m)) continue;
        const auto& c = spec.classes[m];
        const double gain = c.amplitude * (1.0 + 0.1 * gauss(rng));
        for (std::size_t d = 0; d < dim; ++d) row[d] += gain * c.signature[d];
      }
    }
    ds.clips.push_back({std::move(features), std::move(labels)});
  }
  return ds;
}

namespace {

struct PresetClass {
  const char* name;
  double mean_duration_s;
};

// Average duration of one instance, in seconds.
constexpr PresetClass kTutClasses[] = {
    {"object banging", 0.78},   {"object impact", 0.35},     {"object rustling", 2.24},
    {"object snapping", 0.46},  {"object squeaking", 0.74},  {"bird singing", 7.63},
    {"brakes squeaking", 1.65}, {"breathing", 0.43},         {"car", 6.88},
    {"children", 6.87},         {"cupboard", 0.65},          {"cutlery", 0.74},
    {"dishes", 1.24},           {"drawer", 0.80},            {"fan", 29.99},
    {"glass jingling", 0.80},   {"keyboard typing", 0.21},   {"large vehicle", 14.68},
    {"mouse clicking", 0.14},   {"mouse wheeling", 0.16},    {"people talking", 4.09},
    {"people walking", 6.63},   {"washing dishes", 4.15},    {"water tap running", 5.92},
    {"wind blowing", 6.09},
};

constexpr std::uint64_t kSignatureSeed = 20210606;

}  // namespace

DatasetSpec tut_like_preset(std::size_t feature_dim) {
  if (feature_dim == 0) throw ValidationError("feature_dim must be positive");
  DatasetSpec spec;
  spec.feature_dim = feature_dim;
  std::mt19937_64 rng(kSignatureSeed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& pc : kTutClasses) {
    EventClassSpec c;
    c.name = pc.name;
    c.mean_duration_s = pc.mean_duration_s;
    // Long events are few instances; short ones recur.
    if (pc.mean_duration_s >= spec.clip_length_s) {
      c.rate_per_clip = 0.06;
    } else if (pc.mean_duration_s >= 4.0) {
      c.rate_per_clip = 0.1;
    } else {
      c.rate_per_clip = 0.38;
    }
    c.amplitude = 3.0;
    c.signature.resize(feature_dim);
    double norm = 0.0;
    for (double& v : c.signature) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : c.signature) v /= norm;
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

DatasetStats compute_stats(const Dataset& ds) {
  if (ds.clips.empty()) throw ValidationError("statistics of an empty dataset");
  const std::size_t nclass = ds.clips.front().labels.classes();
  DatasetStats st;
  st.per_class_active_frames.assign(nclass, 0);
  st.per_class_inactive_frames.assign(nclass, 0);
  st.per_class_runs.assign(nclass, 0);
  st.per_class_mean_duration_frames.assign(nclass, 0.0);

  const auto classes = static_cast<long long>(nclass);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long mm = 0; mm < classes; ++mm) {
    const auto m = static_cast<std::size_t>(mm);
    std::int64_t active = 0, inactive = 0, runs = 0;
    for (const auto& clip : ds.clips) {
      bool prev = false;
      for (std::size_t n = 0; n < clip.labels.frames(); ++n) {
        const bool on = clip.labels.active(n, m);
        active += on ? 1 : 0;
        inactive += on ? 0 : 1;
        if (on && !prev) ++runs;
        prev = on;
      }
    }
    st.per_class_active_frames[m] = active;
    st.per_class_inactive_frames[m] = inactive;
    st.per_class_runs[m] = runs;
    st.per_class_mean_duration_frames[m] =
        runs == 0 ? 0.0 : static_cast<double>(active) / static_cast<double>(runs);
  }
  for (std::size_t m = 0; m < nclass; ++m) {
    st.total_active += st.per_class_active_frames[m];
    st.total_inactive += st.per_class_inactive_frames[m];
  }
  return st;
}

Dataset slice(const Dataset& ds, std::size_t first, std::size_t last) {
  if (first > last || last > ds.clips.size()) throw ContractViolation("slice out of range");
  Dataset out;
  out.spec = ds.spec;
  out.spec.clips = last - first;
  out.clips.assign(ds.clips.begin() + static_cast<std::ptrdiff_t>(first),
                   ds.clips.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

}  // namespace sedloss
