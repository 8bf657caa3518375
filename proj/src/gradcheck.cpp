#include "sedloss/gradcheck.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "sedloss/model.hpp"

namespace sedloss {

double relative_error(double analytic, double numeric) noexcept {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale < 1e-8 ? diff : diff / scale;
}

std::vector<GradCheckCase> default_loss_cases() {
  std::vector<GradCheckCase> cases;
  auto per_frame = [](LossSpec spec) {
    return [spec](std::span<const PredictionGrid> y, std::span<const LabelGrid> z) {
      std::optional<ClassFrequency> freq;
      if (std::holds_alternative<IflSpec>(spec)) freq = class_frequency_counts(z);
      return loss_dispatch(spec, y, z, freq);
    };
  };
  cases.push_back({"bce", per_frame(BceSpec{}), 2});
  cases.push_back({"srl", per_frame(SrlSpec{1.0, 0.3535}), 2});
  cases.push_back({"ifl", per_frame(IflSpec{1.0, 500.0}), 2});
  cases.push_back({"afl", per_frame(AflSpec{0.0625, 1.0}), 2});
  cases.push_back({"fbtl", per_frame(FbtlSpec{0.6, 0.4, 0.001, 1.0}), 2});
  return cases;
}

GradCheckResult check_loss_gradient(const GradCheckCase& c, const GradCheckOptions& opts) {
  GradCheckResult res{c.name, 0.0, opts.loss_tolerance, ""};
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> score(opts.lo, 1.0 - opts.lo);
  std::bernoulli_distribution label(0.3);

  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    std::vector<Matrix> raw(c.clips, Matrix(opts.frames, opts.classes));
    std::vector<LabelGrid> z;
    for (auto& m : raw) {
      for (double& v : m.flat()) v = score(rng);
      LabelGrid g(opts.frames, opts.classes);
      for (std::size_t n = 0; n < opts.frames; ++n) {
        for (std::size_t k = 0; k < opts.classes; ++k) g.set(n, k, label(rng));
      }
      z.push_back(std::move(g));
    }
    auto value_at = [&](const std::vector<Matrix>& grids) {
      std::vector<PredictionGrid> y;
      for (const auto& m : grids) y.emplace_back(m);
      return c.loss(y, z);
    };
    const BatchLossOutput analytic = value_at(raw);

    for (std::size_t l = 0; l < c.clips; ++l) {
      for (std::size_t i = 0; i < raw[l].size(); ++i) {
        auto plus = raw;
        auto minus = raw;
        plus[l].flat()[i] += opts.step;
        minus[l].flat()[i] -= opts.step;
        const double numeric =
            (value_at(plus).value - value_at(minus).value) / (2.0 * opts.step);
        const double err = relative_error(analytic.grad[l].flat()[i], numeric);
        if (err > res.max_rel_error || !std::isfinite(err)) {
          res.max_rel_error = std::isfinite(err) ? err : INFINITY;
          std::ostringstream os;
          os << "trial " << trial << " clip " << l << " frame " << i / opts.classes
             << " class " << i % opts.classes << " analytic " << analytic.grad[l].flat()[i]
             << " numeric " << numeric;
          res.worst = os.str();
        }
      }
    }
  }
  return res;
}

GradCheckResult check_model_gradient(const GradCheckOptions& opts) {
  GradCheckResult res{"model", 0.0, opts.model_tolerance, ""};
  const ModelDims dims{3, 4, 2, 1};
  constexpr std::size_t kFrames = 5;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution label(0.4);
  static constexpr const char* kNames[] = {"w1", "b1", "w2", "b2"};

  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    ModelParams params = init_params(opts.seed * 7919 + trial, dims);
    for (double& b : params.b1) b = 0.1 * gauss(rng);
    for (double& b : params.b2) b = 0.1 * gauss(rng);
    FeatureGrid x(kFrames, dims.input_dim);
    for (double& v : x.flat()) v = gauss(rng);
    LabelGrid z(kFrames, dims.classes);
    for (std::size_t n = 0; n < kFrames; ++n) {
      for (std::size_t m = 0; m < dims.classes; ++m) z.set(n, m, label(rng));
    }

    auto loss_of = [&](const ModelParams& p) { return bce_loss(predict(p, x), z).value; };
    auto [y, cache] = forward(params, x);
    const ParamGrads grads = backward(params, cache, bce_loss(y, z).grad);
    const auto analytic = grads.tensors();

    for (std::size_t t = 0; t < analytic.size(); ++t) {
      for (std::size_t i = 0; i < analytic[t].size(); ++i) {
        ModelParams plus = params;
        ModelParams minus = params;
        plus.tensors()[t][i] += opts.step;
        minus.tensors()[t][i] -= opts.step;
        const double numeric = (loss_of(plus) - loss_of(minus)) / (2.0 * opts.step);
        const double err = relative_error(analytic[t][i], numeric);
        if (err > res.max_rel_error || !std::isfinite(err)) {
          res.max_rel_error = std::isfinite(err) ? err : INFINITY;
          std::ostringstream os;
          os << "trial " << trial << ' ' << kNames[t] << '[' << i << "] analytic "
             << analytic[t][i] << " numeric " << numeric;
          res.worst = os.str();
        }
      }
    }
  }
  return res;
}

}  // namespace sedloss
