#pragma once

// Rotationally symmetric geometry on [0, pi] x S^{n-1}: cell-centred radial
// grids, warped metrics g = dr^2 + w(r)^2 g_{S^{n-1}}, scalar curvature, the
// radial Laplacian and midpoint volume integration.
//
// Everything here is templated on the scalar type; `RadialGrid`,
// `WarpedMetric` and `Field` are the double-precision instantiations used by
// the rest of the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <string>

#include "psc/error.hpp"

namespace psc {

template <typename Scalar>
using FieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Field = FieldT<double>;

template <typename Scalar>
struct BasicRadialGrid {
  int dim = 0;
  int n_cells = 0;
  Scalar spacing = 0;
  FieldT<Scalar> nodes;  // cell centres (j + 1/2) h

  int size() const { return n_cells; }
  /// Interior face between cells j and j + 1.
  Scalar face(int j) const { return Scalar(j + 1) * spacing; }
};
using RadialGrid = BasicRadialGrid<double>;

template <typename Scalar = double>
BasicRadialGrid<Scalar> make_grid(int dim, int n_cells) {
  if (dim < 3) throw DomainError("dimension below 3 unsupported");
  if (n_cells < 8) throw DomainError("grid too coarse");
  BasicRadialGrid<Scalar> g;
  g.dim = dim;
  g.n_cells = n_cells;
  g.spacing = std::numbers::pi_v<Scalar> / Scalar(n_cells);
  g.nodes.resize(n_cells);
  for (int j = 0; j < n_cells; ++j) g.nodes[j] = (Scalar(j) + Scalar(0.5)) * g.spacing;
  return g;
}

/// Area of the unit (n-1)-sphere, 2 pi^{n/2} / Gamma(n/2).
template <typename Scalar = double>
Scalar unit_sphere_area(int dim) {
  using std::pow;
  using std::tgamma;
  const Scalar half = Scalar(dim) / Scalar(2);
  return Scalar(2) * pow(std::numbers::pi_v<Scalar>, half) / tgamma(half);
}

/// Volume of the unit ball in R^n.
template <typename Scalar = double>
Scalar unit_ball_volume(int dim) {
  return unit_sphere_area<Scalar>(dim) / Scalar(dim);
}

struct MetricFamily {
  enum class Kind { round, eps, custom };
  Kind kind = Kind::round;
  double epsilon = 0.0;
  std::string source;

  std::string tag() const {
    switch (kind) {
      case Kind::round:
        return "round";
      case Kind::eps: {
        std::ostringstream os;
        os.precision(17);
        os << "eps:" << epsilon;
        return os.str();
      }
      case Kind::custom:
        return "custom:" + source;
    }
    return "round";
  }

  static MetricFamily round() { return {}; }
  static MetricFamily eps(double e) { return {Kind::eps, e, {}}; }
};

namespace detail {
inline double parse_number(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end == text.c_str() || *end != '\0' || !std::isfinite(v))
    throw ConfigError("cannot parse " + what + " from '" + text + "'");
  return v;
}
}  // namespace detail

/// Parses "round", "eps:<float>" or "custom:<path>".
inline MetricFamily parse_metric_family(const std::string& tag) {
  if (tag == "round") return MetricFamily::round();
  if (tag.rfind("eps:", 0) == 0) return MetricFamily::eps(detail::parse_number(tag.substr(4), "eps"));
  if (tag.rfind("custom:", 0) == 0 && tag.size() > 7)
    return {MetricFamily::Kind::custom, 0.0, tag.substr(7)};
  throw ConfigError("unknown metric family '" + tag + "'");
}

/// Prescribed function f. `critical` rescales R_g so that R = alpha f and
/// the integral of f is one; `unit_volume` is f = 1 / Vol.
struct FSpec {
  enum class Kind { constant, critical, unit_volume, cosine };
  Kind kind = Kind::constant;
  double value = 1.0;

  std::string tag() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case Kind::constant:
        os << "const:" << value;
        break;
      case Kind::critical:
        os << "critical";
        break;
      case Kind::unit_volume:
        os << "unit_volume";
        break;
      case Kind::cosine:
        os << "cosine:" << value;
        break;
    }
    return os.str();
  }

  static FSpec constant(double c) { return {Kind::constant, c}; }
  static FSpec critical() { return {Kind::critical, 0.0}; }
  static FSpec unit_volume() { return {Kind::unit_volume, 0.0}; }
  static FSpec cosine(double a) { return {Kind::cosine, a}; }
};

/// Parses "const:<c>", "critical", "unit_volume" or "cosine:<a>" (f = 1 + a cos r).
inline FSpec parse_f_spec(const std::string& tag) {
  if (tag == "critical") return FSpec::critical();
  if (tag == "unit_volume") return FSpec::unit_volume();
  if (tag.rfind("const:", 0) == 0) return FSpec::constant(detail::parse_number(tag.substr(6), "f constant"));
  if (tag.rfind("cosine:", 0) == 0)
    return FSpec::cosine(detail::parse_number(tag.substr(7), "f amplitude"));
  throw ConfigError("unknown f spec '" + tag + "'");
}

/// Sampled warped metric plus prescribed function. Immutable after
/// construction; the derived arrays (curvature, quadrature and flux weights)
/// are filled by the factory functions below.
template <typename Scalar>
struct BasicWarpedMetric {
  BasicRadialGrid<Scalar> grid;
  MetricFamily family;
  FieldT<Scalar> w, wp, wpp;
  FieldT<Scalar> gap;  // 1 - (w')^2, closed form where the family has one
  FieldT<Scalar> f;
  Scalar sphere_area = 0;

  FieldT<Scalar> curvature;    // R_g at the nodes
  FieldT<Scalar> cell_weight;  // w^{n-1} h
  FieldT<Scalar> face_weight;  // flux coefficient on each interior face

  int dim() const { return grid.dim; }
  int size() const { return grid.n_cells; }
  Scalar spacing() const { return grid.spacing; }
};
using WarpedMetric = BasicWarpedMetric<double>;

template <typename Scalar, typename Derived>
void check_grid(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& field) {
  if (field.size() != m.size()) throw DomainError("grid mismatch");
}

/// R = -2(n-1) w''/w + (n-1)(n-2)(1 - w'^2)/w^2, pointwise.
template <typename Scalar>
FieldT<Scalar> warped_curvature(int dim, const FieldT<Scalar>& w, const FieldT<Scalar>& wpp,
                                const FieldT<Scalar>& gap) {
  const Scalar n1 = Scalar(dim - 1);
  const Scalar n2 = Scalar(dim - 2);
  return (n1 * (Scalar(-2) * (wpp.array() / w.array()) + n2 * (gap.array() / w.array().square()))).matrix();
}

template <typename Scalar, typename Derived>
Scalar integrate(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& field) {
  check_grid(m, field);
  return m.sphere_area * m.cell_weight.dot(field.template cast<Scalar>());
}

template <typename Scalar, typename A, typename B>
Scalar inner(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  check_grid(m, a);
  check_grid(m, b);
  return m.sphere_area * (m.cell_weight.array() * a.array() * b.array()).sum();
}

template <typename Scalar, typename Derived>
Scalar l2_norm(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& a) {
  using std::sqrt;
  return sqrt(inner(m, a, a));
}

template <typename Scalar>
Scalar volume(const BasicWarpedMetric<Scalar>& m) {
  return m.sphere_area * m.cell_weight.sum();
}

/// Radial Laplacian d^2/dr^2 + (n-1)(w'/w) d/dr in conservative form:
///   (L psi)_j = [k_{j+1/2}(psi_{j+1} - psi_j) - k_{j-1/2}(psi_j - psi_{j-1})] / (w_j^{n-1} h^2)
/// with zero flux through both poles (the even ghost reflection psi_{-1} = psi_0).
/// The operator is self-adjoint for the midpoint measure used by `integrate`.
template <typename Scalar, typename Derived>
FieldT<Scalar> laplacian(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& field) {
  check_grid(m, field);
  const int n = m.size();
  const Scalar h = m.spacing();
  FieldT<Scalar> out = FieldT<Scalar>::Zero(n);
  for (int j = 0; j + 1 < n; ++j) {
    const Scalar flux = m.face_weight[j] * (Scalar(field[j + 1]) - Scalar(field[j]));
    out[j] += flux;
    out[j + 1] -= flux;
  }
  return (out.array() / (m.cell_weight.array() * h)).matrix();
}

template <typename Scalar>
FieldT<Scalar> scalar_curvature(const BasicWarpedMetric<Scalar>& m) {
  return warped_curvature<Scalar>(m.dim(), m.w, m.wpp, m.gap);
}

template <typename Derived>
void check_positive(const Eigen::MatrixBase<Derived>& u) {
  if (!(u.array() > 0).all() || !u.allFinite()) throw DomainError("conformal factor must be positive");
}

/// Scalar curvature of u^{4/(n-2)} g from
///   R_u u^{(n+2)/(n-2)} = -(4(n-1)/(n-2)) Lap u + R u.
template <typename Scalar, typename Derived>
FieldT<Scalar> conformal_scalar_curvature(const BasicWarpedMetric<Scalar>& m, const Eigen::MatrixBase<Derived>& u) {
  check_grid(m, u);
  check_positive(u);
  const Scalar n = Scalar(m.dim());
  const Scalar c = Scalar(4) * (n - 1) / (n - 2);
  const FieldT<Scalar> uu = u.template cast<Scalar>();
  const FieldT<Scalar> lap = laplacian(m, uu);
  return ((-c * lap.array() + m.curvature.array() * uu.array()) / uu.array().pow((n + 2) / (n - 2))).matrix();
}

namespace detail {

/// Flux coefficients for the conservative Laplacian. The face value of
/// w^{n-1} comes from cubic Hermite interpolation of the node samples; the
/// factor rho corrects the midpoint cell volumes near each pole so the
/// scheme stays second order there (rho -> 1 like 1/j^2 away from the pole).
template <typename Scalar>
FieldT<Scalar> flux_weights(const BasicRadialGrid<Scalar>& g, const FieldT<Scalar>& w, const FieldT<Scalar>& wp) {
  using std::pow;
  const int n = g.n_cells;
  const Scalar dim = Scalar(g.dim);
  const Scalar h = g.spacing;

  FieldT<Scalar> rho(n - 1);
  Scalar partial = 0;
  for (int j = 0; j + 1 < n; ++j) {
    partial += pow(Scalar(j) + Scalar(0.5), dim - 1);
    rho[j] = dim * partial / pow(Scalar(j + 1), dim);
  }

  FieldT<Scalar> k(n - 1);
  for (int j = 0; j + 1 < n; ++j) {
    const Scalar wf = (w[j] + w[j + 1]) / 2 + h * (wp[j] - wp[j + 1]) / 8;
    k[j] = pow(wf, dim - 1) * rho[j] * rho[n - 2 - j];
  }
  return k;
}

template <typename Scalar>
FieldT<Scalar> sample_f(const BasicWarpedMetric<Scalar>& m, const FSpec& spec) {
  const int n = m.size();
  FieldT<Scalar> f(n);
  switch (spec.kind) {
    case FSpec::Kind::constant:
      f.setConstant(Scalar(spec.value));
      break;
    case FSpec::Kind::critical:
      f = m.curvature / integrate(m, m.curvature);
      break;
    case FSpec::Kind::unit_volume:
      f.setConstant(Scalar(1) / volume(m));
      break;
    case FSpec::Kind::cosine:
      f = (Scalar(1) + Scalar(spec.value) * m.grid.nodes.array().cos()).matrix();
      break;
  }
  return f;
}

}  // namespace detail

/// Replaces the prescribed function; f must be positive everywhere.
template <typename Scalar>
BasicWarpedMetric<Scalar> with_f(BasicWarpedMetric<Scalar> m, const FieldT<Scalar>& f) {
  if (f.size() != m.size()) throw DomainError("grid mismatch");
  if (!(f.array() > 0).all() || !f.allFinite()) throw DomainError("f must be positive");
  m.f = f;
  return m;
}

/// Builds a metric from raw samples; pole behaviour of w is the caller's
/// responsibility.
template <typename Scalar>
BasicWarpedMetric<Scalar> make_metric(const BasicRadialGrid<Scalar>& grid, MetricFamily family, FieldT<Scalar> w,
                                      FieldT<Scalar> wp, FieldT<Scalar> wpp, FieldT<Scalar> gap, const FSpec& fspec) {
  const int n = grid.n_cells;
  if (w.size() != n || wp.size() != n || wpp.size() != n || gap.size() != n) throw DomainError("grid mismatch");
  if (!(w.array() > 0).all() || !w.allFinite()) throw DomainError("warping function must be positive");

  BasicWarpedMetric<Scalar> m;
  m.grid = grid;
  m.family = std::move(family);
  m.w = std::move(w);
  m.wp = std::move(wp);
  m.wpp = std::move(wpp);
  m.gap = std::move(gap);
  m.sphere_area = unit_sphere_area<Scalar>(grid.dim);
  m.curvature = warped_curvature<Scalar>(grid.dim, m.w, m.wpp, m.gap);
  m.cell_weight = (m.w.array().pow(Scalar(grid.dim - 1)) * grid.spacing).matrix();
  m.face_weight = detail::flux_weights(grid, m.w, m.wp);
  FieldT<Scalar> f = detail::sample_f(m, fspec);
  return with_f(std::move(m), f);
}

template <typename Scalar>
BasicWarpedMetric<Scalar> custom_metric(const BasicRadialGrid<Scalar>& grid, const FieldT<Scalar>& w,
                                        const FieldT<Scalar>& wp, const FieldT<Scalar>& wpp, const FSpec& fspec,
                                        std::string source = "inline") {
  FieldT<Scalar> gap = (Scalar(1) - wp.array().square()).matrix();
  return make_metric(grid, MetricFamily{MetricFamily::Kind::custom, 0.0, std::move(source)}, w, wp, wpp,
                     std::move(gap), fspec);
}

/// Samples the round (w = sin r) or eps (w = sin r + eps sin^3 r) family with
/// closed-form derivatives.
template <typename Scalar>
BasicWarpedMetric<Scalar> sample_metric(const BasicRadialGrid<Scalar>& grid, const MetricFamily& family,
                                        const FSpec& fspec = FSpec::constant(1.0)) {
  if (family.kind == MetricFamily::Kind::custom)
    throw ConfigError("custom metrics are loaded from samples, see load_custom_metric");
  const Scalar eps = family.kind == MetricFamily::Kind::eps ? Scalar(family.epsilon) : Scalar(0);
  using std::abs;
  if (abs(eps) >= Scalar(0.5)) throw DomainError("perturbation too large");

  // Evaluated once so that w and w'' share bit-identical samples of sin r.
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> s = grid.nodes.array().sin();
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> c = grid.nodes.array().cos();
  FieldT<Scalar> w = (s + eps * s.cube()).matrix();
  FieldT<Scalar> wp = (c * (Scalar(1) + Scalar(3) * eps * s.square())).matrix();
  FieldT<Scalar> wpp = (-s + Scalar(3) * eps * s * (Scalar(2) * c.square() - s.square())).matrix();
  // 1 - (w')^2 = s^2 (1 - c^2 (6 eps + 9 eps^2 s^2)), free of cancellation at the poles.
  FieldT<Scalar> gap =
      (s.square() * (Scalar(1) - c.square() * (Scalar(6) * eps + Scalar(9) * eps * eps * s.square()))).matrix();
  return make_metric(grid, family, std::move(w), std::move(wp), std::move(wpp), std::move(gap), fspec);
}

/// Reads a CSV with header r,w,wp,wpp and interpolates it onto `grid`
/// (cubic Hermite for w and w', linear for w'').
WarpedMetric load_custom_metric(const RadialGrid& grid, const std::string& path, const FSpec& fspec);

/// Dispatches on the family tag, loading custom samples from disk.
WarpedMetric build_metric(const RadialGrid& grid, const MetricFamily& family, const FSpec& fspec);

}  // namespace psc
