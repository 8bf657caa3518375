#include "sedloss/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "sedloss/parallel.hpp"

namespace sedloss {

ModelParams ModelParams::zeros(const ModelDims& dims, double leak) {
  ModelParams p;
  p.dims = dims;
  p.leak = leak;
  p.w1 = Matrix(dims.hidden, dims.context_width());
  p.b1.assign(dims.hidden, 0.0);
  p.w2 = Matrix(dims.classes, dims.hidden);
  p.b2.assign(dims.classes, 0.0);
  return p;
}

std::array<std::span<double>, 4> ModelParams::tensors() {
  return {w1.flat(), std::span<double>(b1), w2.flat(), std::span<double>(b2)};
}

std::array<std::span<const double>, 4> ModelParams::tensors() const {
  return {w1.flat(), std::span<const double>(b1), w2.flat(), std::span<const double>(b2)};
}

std::size_t ModelParams::parameter_count() const noexcept {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

ParamGrads ParamGrads::zeros(const ModelDims& dims) {
  ParamGrads g;
  g.w1 = Matrix(dims.hidden, dims.context_width());
  g.b1.assign(dims.hidden, 0.0);
  g.w2 = Matrix(dims.classes, dims.hidden);
  g.b2.assign(dims.classes, 0.0);
  return g;
}

std::array<std::span<double>, 4> ParamGrads::tensors() {
  return {w1.flat(), std::span<double>(b1), w2.flat(), std::span<double>(b2)};
}

std::array<std::span<const double>, 4> ParamGrads::tensors() const {
  return {w1.flat(), std::span<const double>(b1), w2.flat(), std::span<const double>(b2)};
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  auto dst = tensors();
  auto src = other.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t) {
    if (dst[t].size() != src[t].size()) throw ContractViolation("gradient shapes differ");
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
  }
  return *this;
}

ParamGrads& ParamGrads::operator*=(double s) {
  for (auto t : tensors()) {
    for (double& v : t) v *= s;
  }
  return *this;
}

ModelParams init_params(std::uint64_t seed, const ModelDims& dims, double leak) {
  if (dims.input_dim == 0 || dims.hidden == 0 || dims.classes == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  if (!(leak > 0.0 && leak < 1.0)) throw ValidationError("leaky ReLU slope must lie in (0,1)");
  ModelParams p = ModelParams::zeros(dims, leak);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> hidden_init(
      0.0, std::sqrt(2.0 / static_cast<double>(dims.context_width())));
  for (double& v : p.w1.flat()) v = hidden_init(rng);
  std::normal_distribution<double> output_init(
      0.0, std::sqrt(2.0 / static_cast<double>(dims.hidden)));
  for (double& v : p.w2.flat()) v = output_init(rng);
  return p;
}

namespace {

inline double sigmoid(double a) noexcept {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

void check_input(const ModelParams& params, const FeatureGrid& x) {
  if (x.cols() != params.dims.input_dim) {
    throw ValidationError("feature grid has " + std::to_string(x.cols()) +
                          " dims, model expects " + std::to_string(params.dims.input_dim));
  }
  if (x.rows() == 0) throw ValidationError("feature grid has no frames");
  if (params.w1.rows() != params.dims.hidden ||
      params.w1.cols() != params.dims.context_width() ||
      params.w2.rows() != params.dims.classes || params.w2.cols() != params.dims.hidden) {
    throw ContractViolation("model parameter shapes inconsistent with dims");
  }
}

/// Computes pre-activations, hidden activations and outputs for all frames.
void forward_kernel(const ModelParams& params, const FeatureGrid& x, Matrix& pre,
                    Matrix& hidden, Matrix& y) {
  const auto& d = params.dims;
  const std::size_t frames = x.rows();
  const std::size_t dim = d.input_dim;
  const std::size_t width = 2 * d.window_radius + 1;
  const std::size_t nh = d.hidden;
  const std::size_t nm = d.classes;
  const Matrix w1t = transpose(params.w1);  // K x H
  const Matrix w2t = transpose(params.w2);  // H x M
  pre = Matrix(frames, nh);
  hidden = Matrix(frames, nh);
  y = Matrix(frames, nm);
  const auto count = static_cast<long long>(frames);
  const auto radius = static_cast<long long>(d.window_radius);

  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long n = 0; n < count; ++n) {
    double* p = pre.data() + static_cast<std::size_t>(n) * nh;
    for (std::size_t h = 0; h < nh; ++h) p[h] = params.b1[h];
    for (std::size_t j = 0; j < width; ++j) {
      const long long src = n + static_cast<long long>(j) - radius;
      if (src < 0 || src >= count) continue;
      const double* xs = x.data() + static_cast<std::size_t>(src) * dim;
      for (std::size_t k = 0; k < dim; ++k) {
        const double xv = xs[k];
        const double* wrow = w1t.data() + (j * dim + k) * nh;
        for (std::size_t h = 0; h < nh; ++h) p[h] += wrow[h] * xv;
      }
    }
    double* hv = hidden.data() + static_cast<std::size_t>(n) * nh;
    for (std::size_t h = 0; h < nh; ++h) hv[h] = p[h] > 0.0 ? p[h] : params.leak * p[h];
    double* out = y.data() + static_cast<std::size_t>(n) * nm;
    for (std::size_t m = 0; m < nm; ++m) out[m] = params.b2[m];
    for (std::size_t h = 0; h < nh; ++h) {
      const double hval = hv[h];
      const double* wrow = w2t.data() + h * nm;
      for (std::size_t m = 0; m < nm; ++m) out[m] += wrow[m] * hval;
    }
    for (std::size_t m = 0; m < nm; ++m) out[m] = sigmoid(out[m]);
  }
}

}  // namespace

std::pair<PredictionGrid, ForwardCache> forward(const ModelParams& params,
                                                const FeatureGrid& x) {
  check_input(params, x);
  ForwardCache cache;
  cache.x = x;
  forward_kernel(params, x, cache.pre, cache.hidden, cache.y);
  PredictionGrid y(cache.y);
  return {std::move(y), std::move(cache)};
}

PredictionGrid predict(const ModelParams& params, const FeatureGrid& x) {
  check_input(params, x);
  Matrix pre, hidden, y;
  forward_kernel(params, x, pre, hidden, y);
  return PredictionGrid(std::move(y));
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Matrix& dl_dy) {
  const auto& d = params.dims;
  const std::size_t frames = cache.x.rows();
  const std::size_t nh = d.hidden;
  const std::size_t nm = d.classes;
  const std::size_t dim = d.input_dim;
  const std::size_t width = 2 * d.window_radius + 1;
  if (!dl_dy.same_shape(cache.y) || !cache.y.same_shape(frames, nm) ||
      !cache.pre.same_shape(frames, nh) || !cache.hidden.same_shape(frames, nh) ||
      cache.x.cols() != dim) {
    throw ContractViolation("forward cache does not match gradient or model shape");
  }

  // dE/dlogit = dE/dy * y(1-y)
  Matrix dlogit(frames, nm);
  for (std::size_t i = 0; i < dlogit.size(); ++i) {
    const double yv = cache.y.flat()[i];
    dlogit.flat()[i] = dl_dy.flat()[i] * yv * (1.0 - yv);
  }

  const auto count = static_cast<long long>(frames);
  Matrix dpre(frames, nh);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long n = 0; n < count; ++n) {
    double* dp = dpre.data() + static_cast<std::size_t>(n) * nh;
    const double* dl = dlogit.data() + static_cast<std::size_t>(n) * nm;
    for (std::size_t m = 0; m < nm; ++m) {
      const double g = dl[m];
      const double* wrow = params.w2.data() + m * nh;
      for (std::size_t h = 0; h < nh; ++h) dp[h] += g * wrow[h];
    }
    const double* pv = cache.pre.data() + static_cast<std::size_t>(n) * nh;
    for (std::size_t h = 0; h < nh; ++h) dp[h] *= pv[h] > 0.0 ? 1.0 : params.leak;
  }

  ParamGrads grads = ParamGrads::zeros(d);

  // Every output row sums over frames in order; rows are split across threads.
  const auto classes = static_cast<long long>(nm);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long m = 0; m < classes; ++m) {
    double* gw = grads.w2.data() + static_cast<std::size_t>(m) * nh;
    double gb = 0.0;
    for (std::size_t n = 0; n < frames; ++n) {
      const double g = dlogit(n, static_cast<std::size_t>(m));
      gb += g;
      const double* hv = cache.hidden.data() + n * nh;
      for (std::size_t h = 0; h < nh; ++h) gw[h] += g * hv[h];
    }
    grads.b2[static_cast<std::size_t>(m)] = gb;
  }

  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t h = 0; h < nh; ++h) grads.b1[h] += dpre(n, h);
  }

  // Transposed layout: row k of w1t collects sum_n x_window[n][k] * dpre[n][:]
  const std::size_t kw = width * dim;
  Matrix gw1t(kw, nh);
  const auto radius = static_cast<long long>(d.window_radius);
  const auto columns = static_cast<long long>(kw);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long kk = 0; kk < columns; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    const auto offset = static_cast<long long>(k / dim) - radius;
    const std::size_t feat = k % dim;
    double* acc = gw1t.data() + k * nh;
    for (long long n = 0; n < count; ++n) {
      const long long src = n + offset;
      if (src < 0 || src >= count) continue;
      const double xv = cache.x(static_cast<std::size_t>(src), feat);
      const double* dp = dpre.data() + static_cast<std::size_t>(n) * nh;
      for (std::size_t h = 0; h < nh; ++h) acc[h] += xv * dp[h];
    }
  }
  for (std::size_t k = 0; k < kw; ++k) {
    for (std::size_t h = 0; h < nh; ++h) grads.w1(h, k) = gw1t(k, h);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'E', 'D', 'M', 'L', 'P', '0', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) {
    throw ValidationError("truncated model checkpoint");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void save_params(std::ostream& os, const ModelParams& params) {
  os.write(kMagic, sizeof(kMagic));
  put_u64(os, params.dims.input_dim);
  put_u64(os, params.dims.hidden);
  put_u64(os, params.dims.classes);
  put_u64(os, params.dims.window_radius);
  put_f64(os, params.leak);
  for (auto t : params.tensors()) {
    for (double v : t) put_f64(os, v);
  }
  if (!os) throw std::runtime_error("failed writing model checkpoint");
}

ModelParams load_params(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("not a model checkpoint (bad magic)");
  }
  ModelDims dims;
  dims.input_dim = get_u64(is);
  dims.hidden = get_u64(is);
  dims.classes = get_u64(is);
  dims.window_radius = get_u64(is);
  constexpr std::uint64_t kLimit = 1u << 20;
  if (dims.input_dim == 0 || dims.hidden == 0 || dims.classes == 0 ||
      dims.input_dim > kLimit || dims.hidden > kLimit || dims.classes > kLimit ||
      dims.window_radius > kLimit) {
    throw ValidationError("implausible dimensions in model checkpoint");
  }
  const double leak = get_f64(is);
  ModelParams p = ModelParams::zeros(dims, leak);
  for (auto t : p.tensors()) {
    for (double& v : t) {
      v = get_f64(is);
      if (!std::isfinite(v)) throw ValidationError("non-finite value in model checkpoint");
    }
  }
  return p;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_params(os, params);
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return load_params(is);
}

}  // namespace sedloss
