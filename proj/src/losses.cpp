#include "sedloss/losses.hpp"

#include <cmath>
#include <sstream>

#include "sedloss/parallel.hpp"

namespace sedloss {

namespace detail {

void check_srl(double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw ValidationError("srl: alpha and beta must be finite and >= 0");
  }
}

void check_ifl(double gamma, double c) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("ifl: gamma must be finite and >= 0");
  }
  if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("ifl: c must be > 0");
}

void check_afl(double gamma, double zeta) {
  if (!(gamma >= 0.0) || !(zeta >= 0.0) || !std::isfinite(gamma) || !std::isfinite(zeta)) {
    throw ValidationError("afl: gamma and zeta must be finite and >= 0");
  }
}

void check_fbtl(double alpha, double beta, double gamma, double eta) {
  if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0)) {
    throw ValidationError("fbtl: alpha and beta must lie in [0,1]");
  }
  if (std::abs(alpha + beta - 1.0) > 1e-12) {
    throw ValidationError("fbtl: alpha + beta must equal 1");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("fbtl: gamma must be finite and >= 0");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("fbtl: eta must be > 0");
}

void check_shapes(const PredictionGrid& y, const LabelGrid& z) {
  if (y.frames() != z.frames() || y.classes() != z.classes()) {
    throw ContractViolation("prediction " + shape_string(y.frames(), y.classes()) +
                            " and label " + shape_string(z.frames(), z.classes()) +
                            " shapes differ");
  }
}

void check_batch(std::span<const PredictionGrid> y_batch, std::span<const LabelGrid> z_batch) {
  if (y_batch.empty()) throw ValidationError("empty batch");
  if (y_batch.size() != z_batch.size()) {
    throw ContractViolation("prediction and label batches differ in clip count");
  }
  const std::size_t m = y_batch.front().classes();
  for (std::size_t l = 0; l < y_batch.size(); ++l) {
    check_shapes(y_batch[l], z_batch[l]);
    if (y_batch[l].classes() != m) throw ContractViolation("clips differ in class count");
  }
}

double pow_deriv(double x, double p) noexcept {
  if (p == 0.0) return 0.0;
  return p * std::pow(x, p - 1.0);
}

}  // namespace detail

namespace {

using detail::clamp_score;

/// Runs term(y_clamped, active, class) -> {value, grad} over every entry.
template <typename Term>
LossOutput elementwise(const PredictionGrid& y, const LabelGrid& z, double eps, Term term) {
  detail::check_shapes(y, z);
  const std::size_t cols = y.classes();
  LossOutput out;
  out.grad = Matrix(y.frames(), cols);
  const double* yv = y.values().data();
  const std::uint8_t* zv = z.values().data();
  double* g = out.grad.data();
  out.value = parallel::block_sum(out.grad.size(), [&](std::size_t i) {
    const double yc = clamp_score(yv[i], eps);
    const auto [v, d] = term(yc, zv[i] != 0, i % cols);
    g[i] = d;
    return v;
  });
  return out;
}

struct Entry {
  double value;
  double grad;
};

}  // namespace

LossOutput bce_loss(const PredictionGrid& y, const LabelGrid& z, const LossOptions& opts) {
  return elementwise(y, z, opts.clamp_eps, [](double p, bool active, std::size_t) {
    return active ? Entry{-std::log(p), -1.0 / p} : Entry{-std::log(1.0 - p), 1.0 / (1.0 - p)};
  });
}

LossOutput srl_loss(const PredictionGrid& y, const LabelGrid& z, double alpha, double beta,
                    const LossOptions& opts) {
  detail::check_srl(alpha, beta);
  return elementwise(y, z, opts.clamp_eps, [=](double p, bool active, std::size_t) {
    return active ? Entry{-(alpha * std::log(p)), -alpha / p}
                  : Entry{-(beta * std::log(1.0 - p)), beta / (1.0 - p)};
  });
}

ClassFrequency class_frequency_counts(std::span<const LabelGrid> batch_labels) {
  if (batch_labels.empty()) throw ValidationError("class frequency of an empty batch");
  const std::size_t m = batch_labels.front().classes();
  ClassFrequency freq{std::vector<std::int64_t>(m, 0)};
  for (const auto& z : batch_labels) {
    if (z.classes() != m) throw ValidationError("batch clips differ in class count");
    for (std::size_t n = 0; n < z.frames(); ++n) {
      for (std::size_t k = 0; k < m; ++k) freq.counts[k] += z.active(n, k) ? 1 : 0;
    }
  }
  return freq;
}

LossOutput ifl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double c,
                    const ClassFrequency& freq, const LossOptions& opts) {
  detail::check_ifl(gamma, c);
  if (freq.counts.size() != y.classes()) {
    throw ContractViolation("class frequency length does not match class count");
  }
  std::vector<double> weight(freq.counts.size());
  for (std::size_t m = 0; m < weight.size(); ++m) {
    weight[m] = std::pow(c / (static_cast<double>(freq.counts[m]) + c), gamma);
  }
  return elementwise(y, z, opts.clamp_eps, [&](double p, bool active, std::size_t m) {
    return active ? Entry{-(weight[m] * std::log(p)), -weight[m] / p}
                  : Entry{-std::log(1.0 - p), 1.0 / (1.0 - p)};
  });
}

LossOutput afl_loss(const PredictionGrid& y, const LabelGrid& z, double gamma, double zeta,
                    const LossOptions& opts) {
  detail::check_afl(gamma, zeta);
  return elementwise(y, z, opts.clamp_eps, [=](double p, bool active, std::size_t) {
    if (active) {
      const double focal = std::pow(1.0 - p, gamma);
      const double log_p = std::log(p);
      return Entry{-(focal * log_p), detail::pow_deriv(1.0 - p, gamma) * log_p - focal / p};
    }
    const double focal = std::pow(p, zeta);
    const double log_q = std::log(1.0 - p);
    return Entry{-(focal * log_q), focal / (1.0 - p) - detail::pow_deriv(p, zeta) * log_q};
  });
}

namespace {

struct TverskySums {
  double overlap = 0.0;  // sum (1-y)^g y z
  double scores = 0.0;   // sum (1-y)^g y
  double labels = 0.0;   // sum z
};

TverskySums tversky_sums(const PredictionGrid& y, const LabelGrid& z, double gamma,
                         double eps) {
  const double* yv = y.values().data();
  const std::uint8_t* zv = z.values().data();
  const std::size_t count = y.values().size();
  auto focal_score = [&](std::size_t i) {
    const double p = clamp_score(yv[i], eps);
    return std::pow(1.0 - p, gamma) * p;
  };
  TverskySums s;
  s.overlap = parallel::block_sum(count, [&](std::size_t i) {
    return zv[i] != 0 ? focal_score(i) : 0.0;
  });
  s.scores = parallel::block_sum(count, focal_score);
  s.labels = parallel::block_sum(count, [&](std::size_t i) { return zv[i] != 0 ? 1.0 : 0.0; });
  return s;
}

/// Writes scale * dE/dy for one clip given the pooled numerator and denominator.
void tversky_grad(const PredictionGrid& y, const LabelGrid& z, double alpha, double gamma,
                  double eps, double num, double den, double scale, Matrix& grad) {
  grad = Matrix(y.frames(), y.classes());
  const double* yv = y.values().data();
  const std::uint8_t* zv = z.values().data();
  double* g = grad.data();
  const auto count = static_cast<long long>(grad.size());
  const double inv_den2 = 1.0 / (den * den);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(static)")
  for (long long i = 0; i < count; ++i) {
    const double p = clamp_score(yv[i], eps);
    const double dscore = std::pow(1.0 - p, gamma) - p * detail::pow_deriv(1.0 - p, gamma);
    const double zi = zv[i] != 0 ? 1.0 : 0.0;
    g[i] = -scale * dscore * (zi * den - alpha * num) * inv_den2;
  }
}

}  // namespace

BatchLossOutput fbtl_loss(std::span<const PredictionGrid> y_batch,
                          std::span<const LabelGrid> z_batch, double alpha, double beta,
                          double gamma, double eta, const LossOptions& opts) {
  detail::check_fbtl(alpha, beta, gamma, eta);
  detail::check_batch(y_batch, z_batch);
  const std::size_t clips = y_batch.size();
  std::vector<TverskySums> sums(clips);
  for (std::size_t l = 0; l < clips; ++l) {
    sums[l] = tversky_sums(y_batch[l], z_batch[l], gamma, opts.clamp_eps);
  }

  BatchLossOutput out;
  out.grad.resize(clips);
  if (opts.fbtl_pooling == FbtlPooling::kBatch) {
    TverskySums total;
    for (const auto& s : sums) {
      total.overlap += s.overlap;
      total.scores += s.scores;
      total.labels += s.labels;
    }
    const double num = total.overlap + eta;
    const double den = alpha * total.scores + beta * total.labels + eta;
    out.value = 1.0 - num / den;
    for (std::size_t l = 0; l < clips; ++l) {
      tversky_grad(y_batch[l], z_batch[l], alpha, gamma, opts.clamp_eps, num, den, 1.0,
                   out.grad[l]);
    }
  } else {
    const double scale = 1.0 / static_cast<double>(clips);
    for (std::size_t l = 0; l < clips; ++l) {
      const double num = sums[l].overlap + eta;
      const double den = alpha * sums[l].scores + beta * sums[l].labels + eta;
      out.value += scale * (1.0 - num / den);
      tversky_grad(y_batch[l], z_batch[l], alpha, gamma, opts.clamp_eps, num, den, scale,
                   out.grad[l]);
    }
  }
  return out;
}

BatchLossOutput loss_dispatch(const LossSpec& spec, std::span<const PredictionGrid> y_batch,
                              std::span<const LabelGrid> z_batch,
                              const std::optional<ClassFrequency>& freq,
                              const LossOptions& opts) {
  validate(spec);
  detail::check_batch(y_batch, z_batch);
  const bool is_ifl = std::holds_alternative<IflSpec>(spec);
  if (is_ifl && !freq) throw ConfigError("ifl requires batch class frequencies");
  if (!is_ifl && freq) throw ConfigError("class frequencies are only used by ifl");

  if (const auto* f = std::get_if<FbtlSpec>(&spec)) {
    return fbtl_loss(y_batch, z_batch, f->alpha, f->beta, f->gamma, f->eta, opts);
  }

  BatchLossOutput out;
  out.grad.reserve(y_batch.size());
  for (std::size_t l = 0; l < y_batch.size(); ++l) {
    const auto& y = y_batch[l];
    const auto& z = z_batch[l];
    LossOutput clip = std::visit(
        [&](const auto& s) -> LossOutput {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, BceSpec>) {
            return bce_loss(y, z, opts);
          } else if constexpr (std::is_same_v<S, SrlSpec>) {
            return srl_loss(y, z, s.alpha, s.beta, opts);
          } else if constexpr (std::is_same_v<S, IflSpec>) {
            return ifl_loss(y, z, s.gamma, s.c, *freq, opts);
          } else if constexpr (std::is_same_v<S, AflSpec>) {
            return afl_loss(y, z, s.gamma, s.zeta, opts);
          } else {
            throw ContractViolation("unreachable loss kind");
          }
        },
        spec);
    out.value += clip.value;
    out.grad.push_back(std::move(clip.grad));
  }
  return out;
}

// ---------------------------------------------------------------------------
// LossSpec helpers

void validate(const LossSpec& spec) {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SrlSpec>) detail::check_srl(s.alpha, s.beta);
        if constexpr (std::is_same_v<S, IflSpec>) detail::check_ifl(s.gamma, s.c);
        if constexpr (std::is_same_v<S, AflSpec>) detail::check_afl(s.gamma, s.zeta);
        if constexpr (std::is_same_v<S, FbtlSpec>) {
          detail::check_fbtl(s.alpha, s.beta, s.gamma, s.eta);
        }
      },
      spec);
}

std::string loss_name(const LossSpec& spec) {
  static constexpr const char* kNames[] = {"bce", "srl", "ifl", "afl", "fbtl"};
  return kNames[spec.index()];
}

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string loss_params(const LossSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BceSpec>) {
          return "";
        } else if constexpr (std::is_same_v<S, SrlSpec>) {
          return "alpha=" + fmt_num(s.alpha) + " beta=" + fmt_num(s.beta);
        } else if constexpr (std::is_same_v<S, IflSpec>) {
          return "gamma=" + fmt_num(s.gamma) + " c=" + fmt_num(s.c);
        } else if constexpr (std::is_same_v<S, AflSpec>) {
          return "gamma=" + fmt_num(s.gamma) + " zeta=" + fmt_num(s.zeta);
        } else {
          return "alpha=" + fmt_num(s.alpha) + " beta=" + fmt_num(s.beta) +
                 " gamma=" + fmt_num(s.gamma) + " eta=" + fmt_num(s.eta);
        }
      },
      spec);
}

LossSpec parse_loss_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty() || parts.front().empty()) {
    throw ValidationError("empty loss specification");
  }
  std::vector<double> p;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    try {
      std::size_t used = 0;
      p.push_back(std::stod(parts[i], &used));
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
    } catch (const std::exception&) {
      throw ValidationError("bad numeric parameter '" + parts[i] + "' in '" + text + "'");
    }
  }
  const std::string& name = parts.front();
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (p.size() < lo || p.size() > hi) {
      throw ValidationError("'" + name + "' takes " + std::to_string(lo) + ".." +
                            std::to_string(hi) + " parameters, got " +
                            std::to_string(p.size()));
    }
  };
  LossSpec spec;
  if (name == "bce") {
    arity(0, 0);
    spec = BceSpec{};
  } else if (name == "srl") {
    arity(1, 2);
    spec = p.size() == 1 ? SrlSpec{1.0, p[0]} : SrlSpec{p[0], p[1]};
  } else if (name == "ifl") {
    arity(1, 2);
    spec = IflSpec{p[0], p.size() == 2 ? p[1] : 500.0};
  } else if (name == "afl") {
    arity(2, 2);
    spec = AflSpec{p[0], p[1]};
  } else if (name == "fbtl") {
    arity(3, 4);
    spec = FbtlSpec{p[0], p[1], p[2], p.size() == 4 ? p[3] : 1.0};
  } else {
    throw ValidationError("unknown loss '" + name + "'");
  }
  validate(spec);
  return spec;
}

}  // namespace sedloss
