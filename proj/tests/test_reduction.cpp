#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "psc/energy.hpp"
#include "psc/reduction.hpp"

using namespace psc;
using std::numbers::pi;

TEST_CASE("cubic term on the round three-sphere") {
  const auto m = sample_metric(make_grid(3, 2048), MetricFamily::round());
  const Field c = m.grid.nodes.array().cos().matrix();

  const auto radial = cubic_term_report(m, c, Measure::paper_radial);
  CHECK(std::abs(radial.radial_integral + 14 * pi / 9) < 1e-8);
  CHECK(radial.value < 0);
  CHECK(radial.prefactor == doctest::Approx(2 * 5.0 * 4.0));
  // R = 6 and n alpha(3) = 4 pi.
  CHECK(radial.value == doctest::Approx(40 * 6 * 4 * pi * (-14 * pi / 9)).epsilon(1e-9));

  const auto geo = cubic_term_report(m, c, Measure::geometric);
  CHECK(std::abs(geo.radial_integral) < 1e-10);
  CHECK(std::abs(geo.value) < 1e-10 * geo.prefactor * geo.abs_integral);
}

TEST_CASE("cubic term is odd and cubic") {
  const auto m = sample_metric(make_grid(4, 256), MetricFamily::eps(0.1));
  const Field v = (m.grid.nodes.array().cos() + 0.3 * m.grid.nodes.array().square()).matrix();
  for (auto meas : {Measure::geometric, Measure::paper_radial}) {
    const double f = cubic_term(m, v, meas);
    CHECK(cubic_term(m, Field(-2 * v), meas) == doctest::Approx(-8 * f).epsilon(1e-13));
    CHECK(cubic_term(m, Field(-v), meas) == doctest::Approx(-f).epsilon(1e-13));
  }
  CHECK(parse_measure("paper") == Measure::paper_radial);
  CHECK(parse_measure("paper_radial") == Measure::paper_radial);
  CHECK_THROWS_AS(parse_measure("spherical"), ConfigError);
}

TEST_CASE("third-order Taylor coefficient of the energy") {
  // Independent series expansion of E(1 + t v) = N(t) D(t)^{-(n-2)/n} at a
  // normalized critical metric, compared with a finite-difference third
  // derivative. When int f v = 0 and v is in the kernel the coefficient
  // reduces to -(cubic term).
  for (int n : {3, 4}) {
    const auto m = sample_metric(make_grid(n, 256), MetricFamily::eps(0.08), FSpec::critical());
    const Field v = (m.grid.nodes.array().cos() + 0.2 * (2 * m.grid.nodes.array()).cos() + 0.1).matrix();
    const double alpha = normalization_defect(m).alpha;
    const double q = 2.0 * n / (n - 2), p = (n - 2.0) / n;
    auto moment = [&](int k) { return integrate(m, Field(m.f.array() * v.array().pow(k))); };
    const double a1 = moment(1), a2 = moment(2), a3 = moment(3);
    const double N0 = alpha, N1 = 2 * inner(m, m.curvature, v),
                 N2 = conformal_laplacian_coefficient(n) * dirichlet_form(m, v, v) +
                      inner(m, Field(m.curvature.cwiseProduct(v)), v);
    const double D1 = q * a1, D2 = q * (q - 1) / 2 * a2, D3 = q * (q - 1) * (q - 2) / 6 * a3;
    const double e1 = -p * D1;
    const double e2 = -p * D2 + p * (p + 1) / 2 * D1 * D1;
    const double e3 = -p * D3 + p * (p + 1) * D1 * D2 - p * (p + 1) * (p + 2) / 6 * D1 * D1 * D1;
    const double series = 6 * (N0 * e3 + N1 * e2 + N2 * e1);

    auto E = [&](double t) { return energy(m, Field(Field::Ones(m.size()) + t * v)); };
    const double h = 4e-3;
    const double fd = (E(2 * h) - 2 * E(h) + 2 * E(-h) - E(-2 * h)) / (2 * h * h * h);
    CHECK(fd == doctest::Approx(series).epsilon(2e-3));

    // The N0 e3 term alone is -2 alpha (q-1)(q-2) int f v^3 = -F_3(v) since R = alpha f.
    CHECK(6 * N0 * (-p * D3) == doctest::Approx(-cubic_term(m, v, Measure::geometric)).epsilon(1e-10));
  }
}

TEST_CASE("ansatz amplitude") {
  const AnsatzSpec spec{3, 2.0, 10.0, 3, {}};
  CHECK(ansatz_amplitude(spec, 0) == doctest::Approx(2.0 / 15.0).epsilon(1e-15));
  const double s1 = ansatz_amplitude(spec, 1e3), s2 = ansatz_amplitude(spec, 1e6);
  CHECK((std::log(s2) - std::log(s1)) / (std::log(1e6) - std::log(1e3)) == doctest::Approx(-1.0).epsilon(1e-3));

  const AnsatzSpec five{5, 0.7, 3.0, 3, {}};
  const double t1 = ansatz_amplitude(five, 1e3), t2 = ansatz_amplitude(five, 1e6);
  CHECK((std::log(t2) - std::log(t1)) / (std::log(1e6) - std::log(1e3)) == doctest::Approx(-1.0 / 3).epsilon(1e-3));

  CHECK_THROWS_WITH_AS(ansatz_amplitude(AnsatzSpec{3, -1.0, 1.0, 3, {}}, 0), "AS_p violated", DomainError);
  CHECK_THROWS_AS(ansatz_amplitude(AnsatzSpec{2, 1.0, 1.0, 3, {}}, 0), DomainError);
}

TEST_CASE("ansatz solves the reduced gradient flow") {
  for (auto [p, n] : {std::pair{3, 3}, std::pair{3, 4}, std::pair{5, 3}}) {
    const AnsatzSpec spec{p, 1.7, 4.0, n, {}};
    for (int i = 0; i < 100; ++i) {
      const double t = std::pow(10.0, -2 + 8.0 * i / 99);
      const double lhs = 8.0 / (n - 2) * ansatz_amplitude_derivative(spec, t);
      const double g = ansatz_gradient(spec, t);
      CHECK(std::abs(lhs + g) <= 1e-10 * std::abs(g));
    }
  }
}

TEST_CASE("ansatz along a kernel field") {
  const auto m = sample_metric(make_grid(3, 128), MetricFamily::round());
  const Field c = m.grid.nodes.array().cos().matrix();
  const auto spec = make_ansatz_spec(m, Field(3 * c), 3, 2.0, 10.0);
  CHECK(l2_norm(m, spec.v_hat) == doctest::Approx(1.0).epsilon(1e-12));
  const Field phi = ansatz_phi(spec, 5.0);
  CHECK(l2_norm(m, phi) == doctest::Approx(ansatz_amplitude(spec, 5.0)).epsilon(1e-12));
}

TEST_CASE("kernel ODE closed forms") {
  const double T = 2.0, gamma = 0.7;
  for (int n : {3, 5}) {
    KernelODEProblem pb{{0.0}, gamma, T, {power_forcing(T, gamma, 1.0)}, n};
    const auto tr = kernel_ode_solve(pb, 1e4);
    CHECK(tr.residual < 1e-8);
    double err = 0;
    for (int i = 0; i < static_cast<int>(tr.times.size()); ++i) {
      const double s = T + tr.times[i];
      const double exact = -(n - 2) / (8 * gamma) * std::pow(s, -gamma);
      err = std::max(err, std::pow(s, gamma) * std::abs(tr.values(i, 0) - exact));
    }
    CHECK(err < 1e-10);
  }

  KernelODEProblem zero{{0.0, 4.0}, 0.3, 1.0, {[](double) { return 0.0; }, [](double) { return 0.0; }}, 3};
  const auto z = kernel_ode_solve(zero, 100);
  CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.residual == 0.0);
}

TEST_CASE("kernel ODE forward branch") {
  // beta = mu/8 > gamma: u = ((n-2)/8) s^{-beta} int_T^s sigma^{beta - 1 - gamma} d sigma.
  const double T = 1.5, gamma = 0.2, mu = 4.0, beta = mu / 8;
  KernelODEProblem pb{{mu}, gamma, T, {power_forcing(T, gamma, 1.0)}, 3};
  const auto tr = kernel_ode_solve(pb, 1e3);
  CHECK(tr.residual < 1e-8);
  for (int i = 0; i < static_cast<int>(tr.times.size()); i += 7) {
    const double s = T + tr.times[i];
    const double exact = 1.0 / 8 * std::pow(s, -beta) * (std::pow(s, beta - gamma) - std::pow(T, beta - gamma)) / (beta - gamma);
    CHECK(tr.values(i, 0) == doctest::Approx(exact).epsilon(1e-10).scale(1e-12));
    CHECK(kernel_ode_component(pb, 0, tr.times[i]) == doctest::Approx(exact).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("kernel ODE errors") {
  KernelODEProblem resonant{{0.8}, 0.1, 1.0, {power_forcing(1.0, 0.1, 1.0)}, 3};
  CHECK_THROWS_WITH_AS(kernel_ode_solve(resonant, 10), "resonant exponent", DomainError);
  KernelODEProblem growing{{0.0}, 0.5, 1.0, {[](double t) { return 1 + t; }}, 3};
  CHECK_THROWS_WITH_AS(kernel_ode_solve(growing, 10), "forcing not integrable", DomainError);
}

TEST_CASE("weighted bound for the kernel ODE") {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 3;
    const double T = 1 + 4 * U(rng);
    const double gamma = 0.2 + 0.8 * U(rng);
    std::vector<double> mu{-2 + 6 * U(rng), 10 * U(rng)};
    std::vector<Forcing> forcing;
    for (int j = 0; j < 2; ++j) {
      const double a = 0.5 + U(rng), b = 0.5 * a * (2 * U(rng) - 1);
      forcing.push_back(power_forcing(T, gamma + 0.5 + U(rng), a, b, U(rng), 6 * U(rng)));
    }
    KernelODEProblem pb{mu, gamma, T, forcing, n};
    bool resonant = false;
    for (double x : mu) resonant = resonant || std::abs(gamma - (n - 2) * x / 8) < 1e-2;
    if (resonant) continue;
    const auto tr = kernel_ode_solve(pb, 1e4);
    CHECK(tr.residual < 1e-8);
    const double lhs = weighted_norm(tr, gamma, T, NormKind::sup_gamma);
    const double rhs = weighted_norm(sample_forcing(forcing, tr.times), 1 + gamma, T, NormKind::sup_gamma);
    CHECK(std::isfinite(lhs));
    CHECK(lhs <= tr.bound_constant * rhs * (1 + 1e-9));
  }
}

TEST_CASE("heat modes closed forms") {
  const double c = 0.8;
  OrthogonalProblem pb{{2.0, -1.0}, 0.0, 1.0, {[=](double) { return c; }, [=](double) { return c; }}};
  const auto tr = heat_mode_solve(pb, 50);
  CHECK(tr.residual < 1e-8);
  for (int i = 0; i < static_cast<int>(tr.times.size()); ++i) {
    const double t = tr.times[i];
    CHECK(std::abs(tr.values(i, 0) - c / 2 * (1 - std::exp(-2 * t))) < 1e-12);
    CHECK(std::abs(tr.values(i, 1) + c) < 1e-12);
  }
  CHECK(heat_mode_component(pb, 0, 0.3) == doctest::Approx(c / 2 * (1 - std::exp(-0.6))).epsilon(1e-12));

  OrthogonalProblem zero{{3.0, -2.0}, 0.0, 1.0, {[](double) { return 0.0; }, [](double) { return 0.0; }}};
  CHECK(heat_mode_solve(zero, 10).values.cwiseAbs().maxCoeff() == 0.0);

  OrthogonalProblem near{{1e-9}, 0.0, 1.0, {[](double) { return 1.0; }}};
  CHECK_THROWS_WITH_AS(heat_mode_solve(near, 10), "near-kernel mode: route through kernel_ode_solve", DomainError);
}

TEST_CASE("heat modes weighted bound") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const double T = 1 + 3 * U(rng), q = 0.5 + U(rng);
    std::vector<double> deltas{0.5 + 3 * U(rng), 0.5 + 3 * U(rng)};
    std::vector<Forcing> forcing{power_forcing(T, q - 1, 1.0, 0.3, 1.0), power_forcing(T, q - 1, -0.5)};
    OrthogonalProblem pb{deltas, q, T, forcing};
    const auto tr = heat_mode_solve(pb, 200);
    CHECK(tr.residual < 1e-8);
    const double lhs = weighted_norm(tr, q, T, NormKind::l2_q);
    const double rhs = weighted_norm(sample_forcing(forcing, tr.times), q, T, NormKind::l2_q);
    CHECK(lhs <= (2 / std::min(deltas[0], deltas[1]) + 1) * rhs);
  }
}

TEST_CASE("weighted norms") {
  const double T = 3.0, gamma = 0.6;
  Trajectory tr;
  tr.times = log_times(T, 1e4, 200);
  tr.values.resize(200, 1);
  for (int i = 0; i < 200; ++i) tr.values(i, 0) = std::pow(T + tr.times[i], -gamma);
  CHECK(weighted_norm(tr, gamma, T, NormKind::sup_gamma) == doctest::Approx(1.0).epsilon(1e-12));

  Trajectory half = tr;
  half.values *= 0.5;
  CHECK(weighted_norm(half, gamma, T, NormKind::sup_gamma) <= weighted_norm(tr, gamma, T, NormKind::sup_gamma));

  Trajectory zero = tr;
  zero.values.setZero();
  CHECK(weighted_norm(zero, gamma, T, NormKind::sup_gamma) == 0.0);

  // A weaker weight than the decay gives a growing tail.
  CHECK(std::isinf(weighted_norm(tr, gamma + 0.5, T, NormKind::sup_gamma)));

  // u = s^{-gamma}: sup s^gamma |u| + sup s^{1+gamma} |u'| = 1 + gamma.
  CHECK(weighted_norm(tr, gamma, T, NormKind::sup_1gamma_with_derivative) == doctest::Approx(1 + gamma).epsilon(1e-3));

  Trajectory few;
  few.times = log_times(T, 10, 9);
  few.values = Eigen::MatrixXd::Ones(9, 1);
  CHECK_THROWS_WITH_AS(weighted_norm(few, 0, T, NormKind::l2_q), "insufficient samples", DomainError);
  CHECK_THROWS_AS(parse_norm_kind("sup"), ConfigError);
}

TEST_CASE("warped kernel on the round sphere") {
  double prev = 0;
  for (int cells : {64, 128, 256}) {
    const auto m = sample_metric(make_grid(3, cells), MetricFamily::round());
    const auto k = warped_kernel_solve(m);
    const Field c = m.grid.nodes.array().cos().matrix();
    const double err = (k.psi - c).cwiseAbs().maxCoeff();
    CHECK(err < 10 * m.spacing() * m.spacing());
    CHECK(k.psi[0] > 0);
    CHECK(l2_norm(m, k.psi) == doctest::Approx(l2_norm(m, c)).epsilon(1e-12));
    if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.125));
    prev = err;
  }
}

TEST_CASE("warped kernel on the eps family") {
  const auto m = sample_metric(make_grid(3, 128), MetricFamily::eps(0.05));
  const auto k = warped_kernel_solve(m);
  const Field c = m.grid.nodes.array().cos().matrix();
  const double dev = (k.psi - c).cwiseAbs().maxCoeff();
  CHECK(std::isfinite(dev));
  CHECK(dev < 0.05 * 20);
  CHECK(k.residual < 10 * std::abs(k.eigenvalue) * k.psi.cwiseAbs().maxCoeff());

  const auto fine = sample_metric(make_grid(3, 2048), MetricFamily::eps(0.05));
  CHECK_THROWS_WITH_AS(warped_kernel_solve(fine), "no approximate kernel mode", DomainError);
}

TEST_CASE("AS3 pipeline") {
  const auto grid = make_grid(3, 256);
  const auto r0 = as3_check(grid, 0.0);
  CHECK(r0.paper_radial.value < 0);
  CHECK(r0.as3);
  CHECK(r0.verdict == "AS3 holds");
  CHECK(std::abs(r0.geometric.value) < 1e-10 * r0.geometric.prefactor * r0.geometric.abs_integral);

  const auto rg = as3_check(grid, 0.0, FSpec::critical(), Measure::geometric);
  CHECK_FALSE(rg.as3);
  CHECK(rg.verdict == "inconclusive under geometric convention");

  const auto r5 = as3_check(grid, 0.05);
  CHECK(r5.curvature_spread > 0);
  const double C = std::abs(r5.paper_radial.value - r0.paper_radial.value) / 0.05;
  CHECK(std::isfinite(C));

  CHECK_THROWS_AS(as3_check(make_grid(4, 64), 0.0), DomainError);
}
