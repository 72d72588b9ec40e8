#pragma once

// The normalized total-curvature functional E_f on the conformal class of a
// warped metric, its normalization constant alpha, L^2 gradient, dissipation
// along the flow and the second variation at a normalized critical metric.
//
// The Dirichlet term is evaluated through the same flux weights as
// `laplacian`, so integration by parts holds exactly on the grid:
//   sum |grad u|^2 = -<u, Lap u>.

#include <cmath>

#include "psc/geometry.hpp"

namespace psc {

/// 2n / (n - 2), the power of u in the volume element of u^{4/(n-2)} g.
template <typename Scalar = double>
Scalar critical_power(int dim) {
  return Scalar(2 * dim) / Scalar(dim - 2);
}

/// 4(n - 1) / (n - 2).
template <typename Scalar = double>
Scalar conformal_laplacian_coefficient(int dim) {
  return Scalar(4 * (dim - 1)) / Scalar(dim - 2);
}

/// Discrete <grad u, grad v> integrated against dV.
template <typename Scalar, typename A, typename B>
Scalar dirichlet_form(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<A>& u,
                      const Eigen::MatrixBase<B>& v) {
  check_grid(m, u);
  check_grid(m, v);
  const int n = m.size();
  Scalar acc = 0;
  for (int j = 0; j + 1 < n; ++j)
    acc += m.face_weight[j] * (Scalar(u[j + 1]) - Scalar(u[j])) * (Scalar(v[j + 1]) - Scalar(v[j]));
  return m.sphere_area * acc / m.spacing();
}

/// Numerator of E_f: integral of (4(n-1)/(n-2)) |grad u|^2 + R u^2.
template <typename Scalar, typename Derived>
Scalar total_curvature(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  const Scalar c = conformal_laplacian_coefficient<Scalar>(m.dim());
  return c * dirichlet_form(m, u, u) + inner(m, (m.curvature.array() * u.array()).matrix(), u);
}

/// Integral of f u^{2n/(n-2)} dV, the f-weighted volume of u^{4/(n-2)} g.
template <typename Scalar, typename Derived>
Scalar f_volume(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  check_grid(m, u);
  check_positive(u);
  const FieldT<Scalar> uq = u.template cast<Scalar>().array().pow(critical_power<Scalar>(m.dim())).matrix();
  return integrate(m, (m.f.array() * uq.array()).matrix());
}

/// Volume of u^{4/(n-2)} g.
template <typename Scalar, typename Derived>
Scalar conformal_volume(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  check_grid(m, u);
  check_positive(u);
  return integrate(m, u.template cast<Scalar>().array().pow(critical_power<Scalar>(m.dim())).matrix());
}

template <typename Scalar, typename Derived>
Scalar energy(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  using std::pow;
  const Scalar denom = f_volume(m, u);
  const Scalar n = Scalar(m.dim());
  return total_curvature(m, u) / pow(denom, (n - 2) / n);
}

template <typename Scalar, typename Derived>
Scalar alpha_of(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  const Scalar denom = f_volume(m, u);
  return total_curvature(m, u) / denom;
}

/// DE_f(u) as an element of L^2(g), i.e. twice
///   (-(4(n-1)/(n-2)) Lap u + R u - alpha(u) f u^{(n+2)/(n-2)}) / (int f u^{2n/(n-2)})^{(n-2)/n}.
template <typename Scalar, typename Derived>
FieldT<Scalar> gradient(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  using std::pow;
  const FieldT<Scalar> uu = u.template cast<Scalar>();
  const Scalar n = Scalar(m.dim());
  const Scalar denom = f_volume(m, uu);
  const Scalar alpha = total_curvature(m, uu) / denom;
  const Scalar c = conformal_laplacian_coefficient<Scalar>(m.dim());
  const FieldT<Scalar> lap = laplacian(m, uu);
  const auto bracket = -c * lap.array() + m.curvature.array() * uu.array() -
                       alpha * m.f.array() * uu.array().pow((n + 2) / (n - 2));
  return (Scalar(2) * bracket / pow(denom, (n - 2) / n)).matrix();
}

/// dE_f/dt along the flow, -((n-2)/2) int (R_g - alpha f)^2 dV_g / (int f dV_g)^{(n-2)/n}.
template <typename Scalar, typename Derived>
Scalar dissipation(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  using std::pow;
  const FieldT<Scalar> uu = u.template cast<Scalar>();
  const Scalar n = Scalar(m.dim());
  const Scalar alpha = alpha_of(m, uu);
  const FieldT<Scalar> rg = conformal_scalar_curvature(m, uu);
  const auto uq = uu.array().pow(critical_power<Scalar>(m.dim()));
  const Scalar num = integrate(m, ((rg.array() - alpha * m.f.array()).square() * uq).matrix());
  const Scalar fvol = integrate(m, (m.f.array() * uq).matrix());
  return -(n - 2) / 2 * num / pow(fvol, (n - 2) / n);
}

/// Deviation of g from the normalization int f dV = 1, R = alpha f.
template <typename Scalar>
struct NormalizationDefect {
  Scalar f_integral_error = 0;  // |int f dV - 1|
  Scalar curvature_error = 0;   // sup |R - alpha f|
  Scalar alpha = 0;
};

template <typename Scalar>
NormalizationDefect<Scalar> normalization_defect(const BasicWarpedMetric<Scalar>& m) {
  using std::abs;
  NormalizationDefect<Scalar> d;
  const Scalar fint = integrate(m, m.f);
  d.alpha = integrate(m, m.curvature) / fint;
  d.f_integral_error = abs(fint - Scalar(1));
  d.curvature_error = (m.curvature - d.alpha * m.f).cwiseAbs().maxCoeff();
  return d;
}

/// D^2 E_f(1)[v, w] = 2 int ((4(n-1)/(n-2)) <grad v, grad w> - (4/(n-2)) R v w) dV.
/// Only valid when g is a normalized critical metric (checked to 1e-6).
template <typename Scalar, typename A, typename B>
Scalar second_variation(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<A>& v,
                        const Eigen::MatrixBase<B>& w) {
  const auto defect = normalization_defect(m);
  if (defect.f_integral_error > Scalar(1e-6) || defect.curvature_error > Scalar(1e-6))
    throw DomainError("second variation requires normalized critical metric");
  const Scalar n = Scalar(m.dim());
  const Scalar c = conformal_laplacian_coefficient<Scalar>(m.dim());
  const Scalar potential = inner(m, (m.curvature.array() * v.array()).matrix(), w);
  return Scalar(2) * (c * dirichlet_form(m, v, w) - Scalar(4) / (n - 2) * potential);
}

template <typename Scalar>
struct BasicEnergyReport {
  Scalar energy = 0;
  Scalar alpha = 0;
  Scalar grad_l2 = 0;
  Scalar dissipation = 0;
  Scalar f_volume = 0;
};
using EnergyReport = BasicEnergyReport<double>;

template <typename Scalar, typename Derived>
BasicEnergyReport<Scalar> energy_report(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  BasicEnergyReport<Scalar> r;
  r.energy = energy(m, u);
  r.alpha = alpha_of(m, u);
  r.grad_l2 = l2_norm(m, gradient(m, u));
  r.dissipation = dissipation(m, u);
  r.f_volume = f_volume(m, u);
  return r;
}

}  // namespace psc
