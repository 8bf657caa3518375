#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "sedloss/grid.hpp"

namespace sedloss {

struct ModelDims {
  std::size_t input_dim = 16;     // D
  std::size_t hidden = 32;        // H
  std::size_t classes = 25;       // M
  std::size_t window_radius = 5;  // w, context is 2w+1 frames

  std::size_t context_width() const noexcept { return (2 * window_radius + 1) * input_dim; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

inline constexpr double kDefaultLeak = 0.01;

/// Context-windowed feed-forward tagger:
///   h_n = leaky_relu(w1 * [x_{n-w} .. x_{n+w}] + b1)
///   y_n = sigmoid(w2 * h_n + b2)
/// Frames outside the clip contribute zeros to the window.
struct ModelParams {
  ModelDims dims;
  double leak = kDefaultLeak;
  Matrix w1;               // H x (2w+1)D
  std::vector<double> b1;  // H
  Matrix w2;               // M x H
  std::vector<double> b2;  // M

  /// Zero-initialised parameters of the given shape.
  static ModelParams zeros(const ModelDims& dims, double leak = kDefaultLeak);

  /// w1, b1, w2, b2 as flat views, in declaration order.
  std::array<std::span<double>, 4> tensors();
  std::array<std::span<const double>, 4> tensors() const;
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients with the same layout as ModelParams.
struct ParamGrads {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;

  static ParamGrads zeros(const ModelDims& dims);
  ParamGrads& operator+=(const ParamGrads& other);
  ParamGrads& operator*=(double s);
  std::array<std::span<double>, 4> tensors();
  std::array<std::span<const double>, 4> tensors() const;
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  FeatureGrid x;
  Matrix pre;     // N x H, before leaky ReLU
  Matrix hidden;  // N x H
  Matrix y;       // N x M, sigmoid outputs
};

/// He-style init: weights ~ Normal(0, 2 / fan_in), biases zero.
ModelParams init_params(std::uint64_t seed, const ModelDims& dims, double leak = kDefaultLeak);

std::pair<PredictionGrid, ForwardCache> forward(const ModelParams& params, const FeatureGrid& x);

/// Scores only; skips keeping the cache.
PredictionGrid predict(const ModelParams& params, const FeatureGrid& x);

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Matrix& dl_dy);

namespace serial {

std::pair<PredictionGrid, ForwardCache> forward(const ModelParams& params, const FeatureGrid& x);
ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Matrix& dl_dy);

}  // namespace serial

/// Checkpoint layout (all little-endian):
///   8 bytes   magic "SEDMLP01"
///   4 x u64   D, H, M, w
///   f64       leaky ReLU slope
///   f64[]     w1 (row-major), b1, w2 (row-major), b2
void save_params(std::ostream& os, const ModelParams& params);
ModelParams load_params(std::istream& is);
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace sedloss
