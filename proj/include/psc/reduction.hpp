#pragma once

// Reduced dynamics near a critical metric: the cubic term F_3 on kernel
// directions, the slow-mode ansatz, the kernel ODE and the orthogonal heat
// modes with their weighted time norms, and the warped-product AS_3 example.

#include <functional>
#include <string>
#include <vector>

#include "psc/geometry.hpp"
#include "psc/spectral.hpp"

namespace psc {

// ---- cubic term ----------------------------------------------------------

/// geometric: dV = omega_{n-1} w^{n-1} dr.
/// paper_radial: dV = n alpha(n) r^{n-1} dr with alpha(n) the unit-ball volume.
enum class Measure { geometric, paper_radial };

Measure parse_measure(const std::string& tag);
std::string to_string(Measure m);

struct CubicTermReport {
  Measure measure = Measure::geometric;
  double radial_integral = 0;    // int_0^pi v^3 r^{n-1} dr or int_0^pi v^3 w^{n-1} dr
  double weighted_integral = 0;  // int R v^3 dV under the chosen measure
  double abs_integral = 0;       // int |R v^3| dV, the scale for zero tests
  double prefactor = 0;          // 2 ((n+2)/(n-2)) (4/(n-2))
  double value = 0;              // prefactor * weighted_integral
};

/// 2 ((n+2)/(n-2)) (4/(n-2)).
double cubic_prefactor(int dim);

CubicTermReport cubic_term_report(const WarpedMetric& m, const Field& v, Measure measure);
double cubic_term(const WarpedMetric& m, const Field& v, Measure measure);

// ---- slow-mode ansatz ----------------------------------------------------

/// One-dimensional kernel (k = 1): v_hat is a unit vector and
/// F_p(s v_hat) = Fp_vhat s^p.
struct AnsatzSpec {
  int p = 3;
  double Fp_vhat = 1;
  double T = 1;
  int dim = 3;
  Field v_hat;  // optional; empty means the scalar coordinate along v_hat

  void validate() const;
};

/// Builds a spec from a kernel field, normalizing it in L^2(g).
AnsatzSpec make_ansatz_spec(const WarpedMetric& m, const Field& v, int p, double Fp_vhat, double T);

/// Coordinate s(t) of phi(t) = s(t) v_hat.
double ansatz_amplitude(const AnsatzSpec& spec, double t);
double ansatz_amplitude_derivative(const AnsatzSpec& spec, double t);
Field ansatz_phi(const AnsatzSpec& spec, double t);
/// D F_p(phi) along v_hat, p Fp_vhat s^{p-1}.
double ansatz_gradient(const AnsatzSpec& spec, double t);

// ---- reduced ODE solvers -------------------------------------------------

using Forcing = std::function<double(double)>;

/// (T + t)^{-1-decay} (a + b cos(omega log(T + t) + phase)).
Forcing power_forcing(double T, double decay, double a, double b = 0, double omega = 0, double phase = 0);

struct KernelODEProblem {
  std::vector<double> mu;  // eigenvalues of the reduced Hessian
  double gamma = 0;
  double T = 1;
  std::vector<Forcing> forcing;  // one per component
  int dim = 3;
};

struct OrthogonalProblem {
  std::vector<double> deltas;  // L phi_i = -delta_i phi_i
  double q = 0;
  double T = 1;
  std::vector<Forcing> forcing;
};

/// Sampled solution; row i of `values` is the coordinate vector at times[i].
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd values;
  Eigen::MatrixXd derivatives;  // empty when not available
  double residual = 0;          // weighted sup of the ODE residual
  double bound_constant = 0;    // kernel ODE only: max_j |gamma - beta_j|^{-1} (n-2)/8

  int components() const { return static_cast<int>(values.cols()); }
};

/// Times t with T + t geometrically spaced on [T, T + horizon].
std::vector<double> log_times(double T, double horizon, int count);

/// Single component of the kernel ODE solution at time t.
double kernel_ode_component(const KernelODEProblem& problem, int j, double t);
Trajectory kernel_ode_solve(const KernelODEProblem& problem, double horizon, int samples = 200);

double heat_mode_component(const OrthogonalProblem& problem, int i, double t);
Trajectory heat_mode_solve(const OrthogonalProblem& problem, double horizon, int samples = 200);

enum class NormKind { sup_gamma, sup_1gamma_with_derivative, l2_q };

NormKind parse_norm_kind(const std::string& tag);

double weighted_norm(const Trajectory& trajectory, double exponent, double T, NormKind kind);

/// Samples of a forcing family in the same layout as a Trajectory.
Trajectory sample_forcing(const std::vector<Forcing>& forcing, const std::vector<double>& times);

// ---- warped-product example ----------------------------------------------

struct WarpedKernel {
  Field psi;
  double eigenvalue = 0;  // eigenvalue of L nearest zero
  double kernel_tol = 0;
  double residual = 0;    // sup |residual of the radial kernel ODE|
  int index = 0;
};

WarpedKernel warped_kernel_solve(const WarpedMetric& m);

struct As3Report {
  int dim = 3;
  int n_cells = 0;
  double epsilon = 0;
  double lambda_nearest_zero = 0;
  double kernel_tol = 0;
  double kernel_residual = 0;
  Field psi;
  double psi_deviation = 0;  // sup |psi - cos r|
  CubicTermReport geometric, paper_radial;
  double curvature_spread = 0;  // max R - min R
  Measure convention = Measure::paper_radial;
  bool as3 = false;
  std::string verdict;
};

As3Report as3_check(const RadialGrid& grid, double epsilon, const FSpec& fspec = FSpec::critical(),
                    Measure convention = Measure::paper_radial);

}  // namespace psc
