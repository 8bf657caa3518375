#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's loss, metric or model kernels.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sedloss/grid.hpp"

namespace sedloss::oracle {

using Rows = std::vector<std::vector<double>>;
using LabelRows = std::vector<std::vector<int>>;

inline Matrix to_matrix(const Rows& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

inline LabelGrid to_labels(const LabelRows& rows) {
  LabelGrid g(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) g.set(r, c, rows[r][c] != 0);
  }
  return g;
}

inline double clampv(double y, double eps = 1e-7) { return std::min(std::max(y, eps), 1.0 - eps); }

/// -sum [a z log y + b (1-z) log(1-y)] with per-entry weights
inline double weighted_ce(const Matrix& y, const LabelGrid& z,
                          const std::function<double(double, std::size_t)>& active_w,
                          const std::function<double(double, std::size_t)>& inactive_w) {
  double total = 0.0;
  for (std::size_t n = 0; n < y.rows(); ++n) {
    for (std::size_t m = 0; m < y.cols(); ++m) {
      const double p = clampv(y(n, m));
      const double zz = z.active(n, m) ? 1.0 : 0.0;
      total += -(active_w(p, m) * zz * std::log(p) + inactive_w(p, m) * (1.0 - zz) * std::log(1.0 - p));
    }
  }
  return total;
}

inline double bce(const Matrix& y, const LabelGrid& z) {
  auto one = [](double, std::size_t) { return 1.0; };
  return weighted_ce(y, z, one, one);
}

/// 1 - (sum f y z + eta) / (alpha sum f y + beta sum z + eta), f = (1-y)^gamma, pooled over clips.
inline double tversky(const std::vector<Matrix>& ys, const std::vector<LabelGrid>& zs, double alpha,
                      double beta, double gamma, double eta, double eps = 1e-7) {
  double num = eta, fy = 0.0, zsum = 0.0;
  for (std::size_t l = 0; l < ys.size(); ++l) {
    for (std::size_t n = 0; n < ys[l].rows(); ++n) {
      for (std::size_t m = 0; m < ys[l].cols(); ++m) {
        const double p = eps > 0 ? clampv(ys[l](n, m), eps) : ys[l](n, m);
        const double zz = zs[l].active(n, m) ? 1.0 : 0.0;
        num += std::pow(1.0 - p, gamma) * p * zz;
        fy += std::pow(1.0 - p, gamma) * p;
        zsum += zz;
      }
    }
  }
  return 1.0 - num / (alpha * fy + beta * zsum + eta);
}

/// Probability that a random positive outscores a random negative, ties 1/2.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& z) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!z[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (z[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

inline Matrix random_scores(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double lo = 1e-3) {
  std::uniform_real_distribution<double> u(lo, 1.0 - lo);
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = u(rng);
  return m;
}

inline LabelGrid random_labels(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                               double p = 0.3) {
  std::bernoulli_distribution b(p);
  LabelGrid g(rows, cols);
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t m = 0; m < cols; ++m) g.set(n, m, b(rng));
  }
  return g;
}

/// Central difference of f at every entry of x.
inline Matrix numeric_grad(const Matrix& x, const std::function<double(const Matrix&)>& f,
                           double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Matrix plus = x, minus = x;
    plus.flat()[i] += h;
    minus.flat()[i] -= h;
    g.flat()[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s < 1e-8 ? std::abs(a - b) : std::abs(a - b) / s;
}

}  // namespace sedloss::oracle
