#include "psc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace psc {

Scheme parse_scheme(const std::string& tag) {
  if (tag == "rk4") return Scheme::rk4;
  if (tag == "imex") return Scheme::imex;
  throw ConfigError("unknown scheme '" + tag + "'");
}

Renormalize parse_renormalize(const std::string& tag) {
  if (tag == "none") return Renormalize::none;
  if (tag == "volume") return Renormalize::volume;
  if (tag == "f_volume") return Renormalize::f_volume;
  throw ConfigError("unknown renormalize mode '" + tag + "'");
}

std::string to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "imex"; }

std::string to_string(Renormalize r) {
  switch (r) {
    case Renormalize::volume:
      return "volume";
    case Renormalize::f_volume:
      return "f_volume";
    default:
      return "none";
  }
}

Field velocity(const WarpedMetric& m, const Field& u) {
  const double n = m.dim();
  const double alpha = alpha_of(m, u);
  const Field r = conformal_scalar_curvature(m, u);
  return ((n - 2) / 4 * (alpha * m.f - r).array() * u.array()).matrix();
}

double rk4_stability_bound(const WarpedMetric& m, const Field& u) {
  check_positive(u);
  const double n = m.dim();
  const double h = m.spacing();
  return 0.2 * h * h * std::pow(u.minCoeff(), 4 / (n - 2)) / (4 * (n - 1));
}

namespace {

void require_positive_after_step(const Field& u) {
  if (!u.allFinite() || !(u.array() > 0).all()) throw FlowError("positivity lost: reduce dt");
}

Field rk4_step(const WarpedMetric& m, const Field& u, double dt) {
  const double bound = rk4_stability_bound(m, u);
  if (dt > bound) {
    std::ostringstream os;
    os.precision(6);
    os << "rk4 stability bound exceeded: dt = " << dt << " > " << bound << "; reduce dt";
    throw FlowError(os.str());
  }
  auto stage = [&](const Field& x) {
    require_positive_after_step(x);
    return velocity(m, x);
  };
  const Field k1 = stage(u);
  const Field k2 = stage(u + 0.5 * dt * k1);
  const Field k3 = stage(u + 0.5 * dt * k2);
  const Field k4 = stage(u + dt * k3);
  return u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

// Backward Euler on (n-1) u^{-4/(n-2)} Lap u with the coefficient frozen at
// the start of the step; the remaining terms are explicit.
Field imex_step(const WarpedMetric& m, const Field& u, double dt) {
  check_positive(u);
  const int N = m.size();
  const double n = m.dim();
  const double h = m.spacing();
  const double alpha = alpha_of(m, u);
  const Field a = ((n - 1) * u.array().pow(-4 / (n - 2))).matrix();

  Field rhs = u + dt * (n - 2) / 4 *
                      (alpha * m.f.array() * u.array() - m.curvature.array() * u.array().pow((n - 6) / (n - 2)))
                          .matrix();

  Field lower(N), diag(N), upper(N);
  for (int j = 0; j < N; ++j) {
    const double s = dt * a[j] / (m.cell_weight[j] * h);
    const double kl = j > 0 ? m.face_weight[j - 1] : 0.0;
    const double kr = j + 1 < N ? m.face_weight[j] : 0.0;
    lower[j] = -s * kl;
    upper[j] = -s * kr;
    diag[j] = 1 + s * (kl + kr);
  }
  // Thomas algorithm; the matrix is strictly diagonally dominant.
  for (int j = 1; j < N; ++j) {
    if (!(std::abs(diag[j - 1]) > 0)) throw FlowError("implicit solve failed");
    const double w = lower[j] / diag[j - 1];
    diag[j] -= w * upper[j - 1];
    rhs[j] -= w * rhs[j - 1];
  }
  if (!(std::abs(diag[N - 1]) > 0)) throw FlowError("implicit solve failed");
  rhs[N - 1] /= diag[N - 1];
  for (int j = N - 2; j >= 0; --j) rhs[j] = (rhs[j] - upper[j] * rhs[j + 1]) / diag[j];
  if (!rhs.allFinite()) throw FlowError("implicit solve failed");
  return rhs;
}

}  // namespace

ConformalState step(const WarpedMetric& m, const ConformalState& state, double dt, Scheme scheme) {
  if (!(dt > 0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  check_grid(m, state.u);
  check_positive(state.u);
  ConformalState next;
  next.u = scheme == Scheme::rk4 ? rk4_step(m, state.u, dt) : imex_step(m, state.u, dt);
  require_positive_after_step(next.u);
  next.time = state.time + dt;
  return next;
}

Field renormalize(const WarpedMetric& m, const Field& u, Renormalize mode, double target) {
  if (mode == Renormalize::none) return u;
  const double current = mode == Renormalize::volume ? conformal_volume(m, u) : f_volume(m, u);
  const double n = m.dim();
  return u * std::pow(target / current, (n - 2) / (2 * n));
}

std::string DtPolicy::tag() const {
  std::ostringstream os;
  os.precision(17);
  os << (kind == Kind::fixed ? "fixed:" : kind == Kind::h2 ? "h2:" : "stable:") << value;
  return os.str();
}

double DtPolicy::resolve(const WarpedMetric& m, const Field& u0) const {
  switch (kind) {
    case Kind::fixed:
      return value;
    case Kind::h2:
      return value * m.spacing() * m.spacing();
    case Kind::stable:
      return value * rk4_stability_bound(m, u0);
  }
  return value;
}

DtPolicy parse_dt_policy(const std::string& tag) {
  const auto colon = tag.find(':');
  const std::string head = tag.substr(0, colon);
  DtPolicy p;
  if (head == "fixed")
    p.kind = DtPolicy::Kind::fixed;
  else if (head == "h2")
    p.kind = DtPolicy::Kind::h2;
  else if (head == "stable")
    p.kind = DtPolicy::Kind::stable;
  else
    throw ConfigError("unknown dt policy '" + tag + "'");
  p.value = colon == std::string::npos ? 1.0 : detail::parse_number(tag.substr(colon + 1), "dt");
  if (!(p.value > 0)) throw ConfigError("dt must be positive");
  return p;
}

void FlowTrace::rebase(const WarpedMetric& m, const Field& ref) {
  if (snapshots.size() != times.size()) throw DomainError("rebase needs stored snapshots");
  check_grid(m, ref);
  u_ref = ref;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const Field diff = snapshots[i] - ref;
    dist_sup[i] = diff.cwiseAbs().maxCoeff();
    dist_l2[i] = l2_norm(m, diff);
  }
}

FlowTrace run(const WarpedMetric& m, const Field& u0, const FlowControls& controls) {
  check_grid(m, u0);
  check_positive(u0);
  if (!(controls.horizon > 0)) throw DomainError("horizon must be positive");
  if (controls.cadence < 1) throw DomainError("cadence must be at least 1");

  FlowTrace trace;
  trace.u_ref = controls.u_ref ? *controls.u_ref : Field::Ones(m.size());
  check_grid(m, trace.u_ref);
  const bool keep = controls.keep_snapshots || controls.u_ref_final;
  const double dt = controls.dt.resolve(m, u0);
  if (!(dt > 0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  trace.dt = dt;

  const double target = controls.renormalize == Renormalize::volume     ? conformal_volume(m, u0)
                        : controls.renormalize == Renormalize::f_volume ? 1.0
                                                                        : 0.0;
  ConformalState state{0.0, renormalize(m, u0, controls.renormalize, target)};

  auto record = [&](const ConformalState& s, const EnergyReport& rep) {
    trace.times.push_back(s.time);
    trace.volume.push_back(conformal_volume(m, s.u));
    trace.f_volume.push_back(rep.f_volume);
    trace.energy.push_back(rep.energy);
    trace.alpha.push_back(rep.alpha);
    trace.grad_l2.push_back(rep.grad_l2);
    trace.dissipation.push_back(rep.dissipation);
    const Field diff = s.u - trace.u_ref;
    trace.dist_sup.push_back(diff.cwiseAbs().maxCoeff());
    trace.dist_l2.push_back(l2_norm(m, diff));
    if (keep) trace.snapshots.push_back(s.u);
  };

  EnergyReport rep = energy_report(m, state.u);
  record(state, rep);
  trace.termination = "horizon";
  if (rep.grad_l2 < controls.stop_tol) {
    trace.termination = "converged";
  } else {
    const long total = static_cast<long>(std::ceil(controls.horizon / dt - 1e-9));
    for (long k = 1; k <= total; ++k) {
      const double dt_k = std::min(dt, controls.horizon - state.time);
      ConformalState next;
      try {
        next = step(m, state, dt_k > 0 ? dt_k : dt, controls.scheme);
        next.u = renormalize(m, next.u, controls.renormalize, target);
      } catch (const FlowError& e) {
        trace.failed = true;
        trace.termination = e.what();
        break;
      }
      const EnergyReport next_rep = energy_report(m, next.u);
      trace.max_energy_excess =
          std::max(trace.max_energy_excess, next_rep.energy - rep.energy - 1e-9 * (1 + std::abs(rep.energy)));
      state = std::move(next);
      rep = next_rep;
      trace.steps = k;
      const bool converged = rep.grad_l2 < controls.stop_tol;
      if (converged || k == total || k % controls.cadence == 0) record(state, rep);
      if (converged) {
        trace.termination = "converged";
        break;
      }
    }
  }
  if (trace.times.back() != state.time) record(state, rep);
  trace.final_state = state;
  if (controls.u_ref_final) trace.rebase(m, state.u);
  if (!controls.keep_snapshots && controls.u_ref_final) trace.snapshots.clear();
  return trace;
}

}  // namespace psc
