#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sedloss/grid.hpp"

namespace sedloss {

struct EventClassSpec {
  std::string name;
  double mean_duration_s = 1.0;
  double rate_per_clip = 0.0;     // expected instances per clip
  std::vector<double> signature;  // feature direction, length D
  double amplitude = 3.0;
};

struct DatasetSpec {
  std::vector<EventClassSpec> classes;
  double clip_length_s = 10.0;
  double frame_hop_s = 0.02;
  double frame_len_s = 0.04;
  std::size_t clips = 100;
  std::size_t feature_dim = 16;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  std::size_t frames_per_clip() const;
  std::size_t num_classes() const noexcept { return classes.size(); }
};

/// Throws ValidationError on inconsistent specs (bad timing, signature length
/// different from feature_dim, non-positive durations or amplitudes).
void validate(const DatasetSpec& spec);

struct Clip {
  FeatureGrid features;
  LabelGrid labels;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Clip> clips;
};

struct DatasetStats {
  std::vector<std::int64_t> per_class_active_frames;
  std::vector<std::int64_t> per_class_inactive_frames;
  std::vector<std::int64_t> per_class_runs;  // maximal active runs
  std::vector<double> per_class_mean_duration_frames;
  std::int64_t total_active = 0;
  std::int64_t total_inactive = 0;

  double active_fraction() const noexcept {
    const auto all = total_active + total_inactive;
    return all == 0 ? 0.0 : static_cast<double>(total_active) / static_cast<double>(all);
  }
};

/// Per clip and class: Poisson(rate) instances, exponential durations clamped
/// to [one hop, clip length], onsets uniform over positions that keep the
/// instance inside the clip. Instances of one class merge where they overlap.
/// Features are Gaussian noise plus the amplitude-scaled signatures of every
/// active class. Pure function of spec.
Dataset generate_dataset(const DatasetSpec& spec);

/// Scale of the exponential whose value clamped to [lo, hi] has the given
/// mean. Returns mean itself when mean >= hi, where no such scale exists.
double clamped_exponential_scale(double mean, double lo, double hi);

/// 25 everyday sound classes with realistic mean durations and roughly 4%
/// active class-frames.
DatasetSpec tut_like_preset(std::size_t feature_dim = 16);

DatasetStats compute_stats(const Dataset& ds);

/// Directory layout: `manifest` (key=value) plus clip_<i>.csv with header
/// `frame,f0..f{D-1},z0..z{M-1}`.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

/// Clips [first, last) as a new dataset sharing the spec.
Dataset slice(const Dataset& ds, std::size_t first, std::size_t last);

}  // namespace sedloss
