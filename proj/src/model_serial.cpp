#include <cmath>

#include "sedloss/model.hpp"

namespace sedloss::serial {

namespace {

std::vector<double> window(const FeatureGrid& x, std::size_t n, std::size_t radius) {
  const std::size_t dim = x.cols();
  std::vector<double> in((2 * radius + 1) * dim, 0.0);
  for (std::size_t j = 0; j < 2 * radius + 1; ++j) {
    const long long src = static_cast<long long>(n + j) - static_cast<long long>(radius);
    if (src < 0 || src >= static_cast<long long>(x.rows())) continue;
    for (std::size_t k = 0; k < dim; ++k) in[j * dim + k] = x(static_cast<std::size_t>(src), k);
  }
  return in;
}

}  // namespace

std::pair<PredictionGrid, ForwardCache> forward(const ModelParams& params, const FeatureGrid& x) {
  const auto& d = params.dims;
  if (x.cols() != d.input_dim) throw ValidationError("feature dimension mismatch");
  ForwardCache cache{x, Matrix(x.rows(), d.hidden), Matrix(x.rows(), d.hidden),
                     Matrix(x.rows(), d.classes)};
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto in = window(x, n, d.window_radius);
    for (std::size_t h = 0; h < d.hidden; ++h) {
      double a = params.b1[h];
      for (std::size_t k = 0; k < in.size(); ++k) a += params.w1(h, k) * in[k];
      cache.pre(n, h) = a;
      cache.hidden(n, h) = a > 0.0 ? a : params.leak * a;
    }
    for (std::size_t m = 0; m < d.classes; ++m) {
      double a = params.b2[m];
      for (std::size_t h = 0; h < d.hidden; ++h) a += params.w2(m, h) * cache.hidden(n, h);
      cache.y(n, m) = 1.0 / (1.0 + std::exp(-a));
    }
  }
  PredictionGrid y(cache.y);
  return {std::move(y), std::move(cache)};
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Matrix& dl_dy) {
  const auto& d = params.dims;
  if (!dl_dy.same_shape(cache.y)) throw ContractViolation("gradient shape mismatch");
  ParamGrads g = ParamGrads::zeros(d);
  for (std::size_t n = 0; n < cache.x.rows(); ++n) {
    const auto in = window(cache.x, n, d.window_radius);
    std::vector<double> dhidden(d.hidden, 0.0);
    for (std::size_t m = 0; m < d.classes; ++m) {
      const double y = cache.y(n, m);
      const double dlogit = dl_dy(n, m) * y * (1.0 - y);
      g.b2[m] += dlogit;
      for (std::size_t h = 0; h < d.hidden; ++h) {
        g.w2(m, h) += dlogit * cache.hidden(n, h);
        dhidden[h] += dlogit * params.w2(m, h);
      }
    }
    for (std::size_t h = 0; h < d.hidden; ++h) {
      const double dpre = dhidden[h] * (cache.pre(n, h) > 0.0 ? 1.0 : params.leak);
      g.b1[h] += dpre;
      for (std::size_t k = 0; k < in.size(); ++k) g.w1(h, k) += dpre * in[k];
    }
  }
  return g;
}

}  // namespace sedloss::serial
