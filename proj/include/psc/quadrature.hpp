#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace psc::quad {

/// Nodes and weights of the M-point Gauss-Legendre rule on [-1, 1].
template <int M>
struct GaussLegendre {
  std::array<double, M> x{}, w{};

  GaussLegendre() {
    for (int i = 0; i < (M + 1) / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (M + 0.5));
      double dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = z;
        for (int k = 2; k <= M; ++k) {
          const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = M * (z * p1 - p0) / (z * z - 1);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = -z;
      x[M - 1 - i] = z;
      w[i] = w[M - 1 - i] = 2 / ((1 - z * z) * dp * dp);
    }
  }

  template <typename F>
  double integrate(F&& f, double a, double b) const {
    const double mid = (a + b) / 2, half = (b - a) / 2;
    double acc = 0;
    for (int i = 0; i < M; ++i) acc += w[i] * f(mid + half * x[i]);
    return acc * half;
  }
};

inline const GaussLegendre<16>& gauss16() {
  static const GaussLegendre<16> rule;
  return rule;
}

/// Integral of f over [a, b] using 16-point panels no wider than `width`.
template <typename F>
double composite(F&& f, double a, double b, double width) {
  if (b == a) return 0;
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / width)));
  const double step = (b - a) / panels;
  double acc = 0;
  for (int k = 0; k < panels; ++k) acc += gauss16().integrate(f, a + k * step, a + (k + 1) * step);
  return acc;
}

/// Integral over [0, N h] of a smooth function sampled at the cell centres
/// (j + 1/2) h. Midpoint rule plus the endpoint correction
/// (h^2 / 24)(g'(b) - g'(a)), with g' estimated by one-sided second-order
/// stencils; fourth order overall.
inline double cell_centred(const Eigen::VectorXd& g, double h) {
  const Eigen::Index n = g.size();
  const double mid = h * g.sum();
  if (n < 3) return mid;
  const double d0 = (-2 * g[0] + 3 * g[1] - g[2]) / h;
  const double d1 = (2 * g[n - 1] - 3 * g[n - 2] + g[n - 3]) / h;
  return mid + h * h / 24 * (d1 - d0);
}

}  // namespace psc::quad
