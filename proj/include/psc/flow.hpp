#pragma once

// Prescribed scalar curvature flow in conformal-factor form,
//   du/dt = ((n-2)/4) (alpha(u) f - R_u) u,   g(t) = u^{4/(n-2)} g,
// with explicit (rk4) and semi-implicit (imex) time stepping.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "psc/energy.hpp"
#include "psc/geometry.hpp"

namespace psc {

enum class Scheme { rk4, imex };
enum class Renormalize { none, volume, f_volume };

Scheme parse_scheme(const std::string& tag);
Renormalize parse_renormalize(const std::string& tag);
std::string to_string(Scheme s);
std::string to_string(Renormalize r);

struct ConformalState {
  double time = 0;
  Field u;
};

Field velocity(const WarpedMetric& m, const Field& u);

/// Largest dt accepted by the rk4 scheme at state u:
///   0.2 h^2 min(u)^{4/(n-2)} / (4(n-1)).
double rk4_stability_bound(const WarpedMetric& m, const Field& u);

ConformalState step(const WarpedMetric& m, const ConformalState& state, double dt, Scheme scheme);

/// Rescales u by a constant so that the chosen volume matches `target`.
Field renormalize(const WarpedMetric& m, const Field& u, Renormalize mode, double target);

/// dt = value (fixed), value * h^2 (h2) or value * rk4 bound at u0 (stable).
struct DtPolicy {
  enum class Kind { fixed, h2, stable };
  Kind kind = Kind::h2;
  double value = 1.0;

  std::string tag() const;
  double resolve(const WarpedMetric& m, const Field& u0) const;
};

DtPolicy parse_dt_policy(const std::string& tag);

struct FlowControls {
  Scheme scheme = Scheme::imex;
  DtPolicy dt;
  double horizon = 1.0;
  int cadence = 1;  // record every `cadence` steps
  double stop_tol = 1e-10;
  Renormalize renormalize = Renormalize::none;
  std::optional<Field> u_ref;   // comparison target, constant 1 if unset
  bool u_ref_final = false;     // measure distances against the last state
  bool keep_snapshots = false;
};

struct FlowTrace {
  std::vector<double> times, volume, f_volume, energy, alpha, grad_l2, dissipation, dist_sup, dist_l2;
  std::vector<Field> snapshots;
  Field u_ref;
  ConformalState final_state;
  std::string termination;  // "converged", "horizon" or the error message
  bool failed = false;
  long steps = 0;
  double dt = 0;
  /// Largest per-step rise E_{k+1} - E_k - 1e-9 (1 + |E_k|) seen over all steps;
  /// nonpositive when the energy was monotone.
  double max_energy_excess = -std::numeric_limits<double>::infinity();

  std::size_t size() const { return times.size(); }
  bool energy_monotone() const { return max_energy_excess <= 0; }
  /// Recomputes dist_sup and dist_l2 against a new reference from stored snapshots.
  void rebase(const WarpedMetric& m, const Field& ref);
};

FlowTrace run(const WarpedMetric& m, const Field& u0, const FlowControls& controls);

}  // namespace psc
