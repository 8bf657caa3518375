#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sedloss/losses.hpp"

namespace sedloss {

/// |analytic - numeric| / max(|analytic|, |numeric|); plain absolute error
/// when both magnitudes are below 1e-8.
double relative_error(double analytic, double numeric) noexcept;

using BatchLossFn = std::function<BatchLossOutput(std::span<const PredictionGrid>,
                                                  std::span<const LabelGrid>)>;

struct GradCheckCase {
  std::string name;
  BatchLossFn loss;
  std::size_t clips = 1;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::string worst;  // location of the largest error
  bool pass() const noexcept { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
  std::uint64_t seed = 1;
  std::size_t trials = 50;
  std::size_t frames = 4;
  std::size_t classes = 3;
  double step = 1e-6;
  double lo = 1e-3;  // predictions are drawn from [lo, 1 - lo]
  double loss_tolerance = 1e-5;
  double model_tolerance = 1e-4;
};

/// BCE, SRL(1, 0.3535), IFL(1, 500), AFL(0.0625, 1), FBTL(0.6, 0.4, 0.001)
/// over 2-clip batches.
std::vector<GradCheckCase> default_loss_cases();

/// Central finite differences against the analytic dE/dy of one loss.
GradCheckResult check_loss_gradient(const GradCheckCase& c, const GradCheckOptions& opts);

/// Central finite differences of BCE(forward(x)) over every parameter of a
/// tiny network (D=3, H=4, M=2, N=5, w=1).
GradCheckResult check_model_gradient(const GradCheckOptions& opts);

}  // namespace sedloss
