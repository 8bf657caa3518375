#include <cmath>

#include "sedloss/losses.hpp"

namespace sedloss::serial {

using detail::clamp_score;

LossOutput bce_loss(const PredictionGrid& y, const LabelGrid& z, const LossOptions& opts) {
  return serial::srl_loss(y, z, 1.0, 1.0, opts);
}

LossOutput srl_loss(const PredictionGrid& y, const LabelGrid& z, double alpha, double beta,
                    const LossOptions& opts) {
  detail::check_srl(alpha, beta);
  detail::check_shapes(y, z);
  LossOutput out{0.0, Matrix(y.frames(), y.classes())};
  for (std::size_t n = 0; n < y.frames(); ++n) {
    for (std::size_t m = 0; m < y.classes(); ++m) {
      const double p = clamp_score(y(n, m), opts.clamp_eps);
      if (z.active(n, m)) {
        out.value -= alpha * std::log(p);
        out.grad(n, m) = -alpha / p;
      } else {
        out.value -= beta * std::log(1.0 - p);
        out.grad(n, m) = beta / (1.0 - p);
      }
    }
  }
  return out;
}

LossOutput ifl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double c,
                    const ClassFrequency& freq, const LossOptions& opts) {
  detail::check_ifl(gamma, c);
  detail::check_shapes(y, z);
  if (freq.counts.size() != y.classes()) {
    throw ContractViolation("class frequency length does not match class count");
  }
  LossOutput out{0.0, Matrix(y.frames(), y.classes())};
  for (std::size_t n = 0; n < y.frames(); ++n) {
    for (std::size_t m = 0; m < y.classes(); ++m) {
      const double p = clamp_score(y(n, m), opts.clamp_eps);
      if (z.active(n, m)) {
        const double w = std::pow(c / (static_cast<double>(freq.counts[m]) + c), gamma);
        out.value -= w * std::log(p);
        out.grad(n, m) = -w / p;
      } else {
        out.value -= std::log(1.0 - p);
        out.grad(n, m) = 1.0 / (1.0 - p);
      }
    }
  }
  return out;
}

LossOutput afl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double zeta,
                    const LossOptions& opts) {
  detail::check_afl(gamma, zeta);
  detail::check_shapes(y, z);
  LossOutput out{0.0, Matrix(y.frames(), y.classes())};
  for (std::size_t n = 0; n < y.frames(); ++n) {
    for (std::size_t m = 0; m < y.classes(); ++m) {
      const double p = clamp_score(y(n, m), opts.clamp_eps);
      if (z.active(n, m)) {
        const double w = std::pow(1.0 - p, gamma);
        out.value -= w * std::log(p);
        out.grad(n, m) = detail::pow_deriv(1.0 - p, gamma) * std::log(p) - w / p;
      } else {
        const double w = std::pow(p, zeta);
        out.value -= w * std::log(1.0 - p);
        out.grad(n, m) = w / (1.0 - p) - detail::pow_deriv(p, zeta) * std::log(1.0 - p);
      }
    }
  }
  return out;
}

BatchLossOutput fbtl_loss(std::span<const PredictionGrid> y_batch,
                          std::span<const LabelGrid> z_batch, double alpha, double beta,
                          double gamma, double eta, const LossOptions& opts) {
  detail::check_fbtl(alpha, beta, gamma, eta);
  detail::check_batch(y_batch, z_batch);
  const std::size_t clips = y_batch.size();
  const bool pooled = opts.fbtl_pooling == FbtlPooling::kBatch;

  auto ratio_terms = [&](std::size_t first, std::size_t last) {
    double overlap = 0.0;
    double scores = 0.0;
    double labels = 0.0;
    for (std::size_t l = first; l < last; ++l) {
      const auto& y = y_batch[l];
      const auto& z = z_batch[l];
      for (std::size_t n = 0; n < y.frames(); ++n) {
        for (std::size_t m = 0; m < y.classes(); ++m) {
          const double p = clamp_score(y(n, m), opts.clamp_eps);
          const double a = std::pow(1.0 - p, gamma) * p;
          scores += a;
          if (z.active(n, m)) {
            overlap += a;
            labels += 1.0;
          }
        }
      }
    }
    return std::pair{overlap + eta, alpha * scores + beta * labels + eta};
  };

  auto fill_grad = [&](std::size_t l, double num, double den, double scale, Matrix& g) {
    const auto& y = y_batch[l];
    const auto& z = z_batch[l];
    g = Matrix(y.frames(), y.classes());
    for (std::size_t n = 0; n < y.frames(); ++n) {
      for (std::size_t m = 0; m < y.classes(); ++m) {
        const double p = clamp_score(y(n, m), opts.clamp_eps);
        const double da = std::pow(1.0 - p, gamma) - p * detail::pow_deriv(1.0 - p, gamma);
        const double zi = z.active(n, m) ? 1.0 : 0.0;
        // d/dy of 1 - num/den by the quotient rule
        g(n, m) = -scale * da * (zi * den - alpha * num) / (den * den);
      }
    }
  };

  BatchLossOutput out;
  out.grad.resize(clips);
  if (pooled) {
    const auto [num, den] = ratio_terms(0, clips);
    out.value = 1.0 - num / den;
    for (std::size_t l = 0; l < clips; ++l) fill_grad(l, num, den, 1.0, out.grad[l]);
  } else {
    const double scale = 1.0 / static_cast<double>(clips);
    for (std::size_t l = 0; l < clips; ++l) {
      const auto [num, den] = ratio_terms(l, l + 1);
      out.value += scale * (1.0 - num / den);
      fill_grad(l, num, den, scale, out.grad[l]);
    }
  }
  return out;
}

}  // namespace sedloss::serial
