#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sedloss/grid.hpp"

namespace sedloss {

/// Binary cross-entropy summed over frames and classes.
struct BceSpec {};

/// Constant weights on the active (alpha) and inactive (beta) terms.
struct SrlSpec {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Active term scaled by (c / (N_m + c))^gamma, N_m = active frames of class m
/// in the current batch.
struct IflSpec {
  double gamma = 1.0;
  double c = 500.0;
};

/// Focal modulation (1-y)^gamma on active and y^zeta on inactive terms.
struct AflSpec {
  double gamma = 0.0;
  double zeta = 0.0;
};

/// One-minus-ratio loss pooled over the whole batch. alpha + beta must be 1.
struct FbtlSpec {
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.0;
  double eta = 1.0;
};

using LossSpec = std::variant<BceSpec, SrlSpec, IflSpec, AflSpec, FbtlSpec>;

/// Throws ValidationError when the hyperparameters are outside their domain.
void validate(const LossSpec& spec);

/// Short method name: bce, srl, ifl, afl, fbtl.
std::string loss_name(const LossSpec& spec);
/// Parameters as `key=value` pairs separated by spaces, e.g. "gamma=0.0625 zeta=1".
std::string loss_params(const LossSpec& spec);

/// Parses `name[:param[:param...]]`. Parameters are positional:
///   bce
///   srl:beta  or  srl:alpha:beta
///   ifl:gamma[:c]
///   afl:gamma:zeta
///   fbtl:alpha:beta:gamma[:eta]
/// Throws ValidationError on malformed input.
LossSpec parse_loss_spec(const std::string& text);

/// Active-frame counts per class over a training batch.
struct ClassFrequency {
  std::vector<std::int64_t> counts;
};

ClassFrequency class_frequency_counts(std::span<const LabelGrid> batch_labels);

enum class FbtlPooling { kBatch, kPerClip };

struct LossOptions {
  /// Predictions are clamped into [clamp_eps, 1 - clamp_eps]. Zero disables
  /// clamping (only meaningful for the Tversky loss on closed-interval inputs).
  double clamp_eps = 1e-7;
  /// kPerClip averages one Tversky ratio per clip instead of pooling the sums.
  FbtlPooling fbtl_pooling = FbtlPooling::kBatch;
};

/// Loss value and dE/dy for a single clip.
struct LossOutput {
  double value = 0.0;
  Matrix grad;
};

/// Loss value and per-clip dE/dy for a batch.
struct BatchLossOutput {
  double value = 0.0;
  std::vector<Matrix> grad;
};

LossOutput bce_loss(const PredictionGrid& y, const LabelGrid& z, const LossOptions& opts = {});
LossOutput srl_loss(const PredictionGrid& y, const LabelGrid& z, double alpha, double beta,
                    const LossOptions& opts = {});
LossOutput ifl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double c,
                    const ClassFrequency& freq, const LossOptions& opts = {});
LossOutput afl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double zeta,
                    const LossOptions& opts = {});
BatchLossOutput fbtl_loss(std::span<const PredictionGrid> y_batch,
                          std::span<const LabelGrid> z_batch, double alpha, double beta,
                          double gamma, double eta, const LossOptions& opts = {});

/// Routes to the matching loss. Per-frame losses sum over clips; the Tversky
/// loss pools the batch. freq must be present exactly when spec is IFL.
BatchLossOutput loss_dispatch(const LossSpec& spec, std::span<const PredictionGrid> y_batch,
                              std::span<const LabelGrid> z_batch,
                              const std::optional<ClassFrequency>& freq,
                              const LossOptions& opts = {});

/// Straightforward single-threaded implementations, kept as the reference the
/// OpenMP kernels are tested and benchmarked against.
namespace serial {

LossOutput bce_loss(const PredictionGrid& y, const LabelGrid& z, const LossOptions& opts = {});
LossOutput srl_loss(const PredictionGrid& y, const LabelGrid& z, double alpha, double beta,
                    const LossOptions& opts = {});
LossOutput ifl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double c,
                    const ClassFrequency& freq, const LossOptions& opts = {});
LossOutput afl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double zeta,
                    const LossOptions& opts = {});
BatchLossOutput fbtl_loss(std::span<const PredictionGrid> y_batch,
                          std::span<const LabelGrid> z_batch, double alpha, double beta,
                          double gamma, double eta, const LossOptions& opts = {});

}  // namespace serial

namespace detail {

void check_srl(double alpha, double beta);
void check_ifl(double gamma, double c);
void check_afl(double gamma, double zeta);
void check_fbtl(double alpha, double beta, double gamma, double eta);
void check_shapes(const PredictionGrid& y, const LabelGrid& z);
void check_batch(std::span<const PredictionGrid> y_batch, std::span<const LabelGrid> z_batch);

inline double clamp_score(double y, double eps) noexcept {
  return y < eps ? eps : (y > 1.0 - eps ? 1.0 - eps : y);
}

/// d/dx x^p, with the 0^0 = 1 convention making the p == 0 case exactly zero.
double pow_deriv(double x, double p) noexcept;

}  // namespace detail

}  // namespace sedloss
