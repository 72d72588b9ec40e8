#include <doctest.h>

#include <cmath>
#include <random>

#include "psc/energy.hpp"
#include "psc/spectral.hpp"

using namespace psc;

namespace {

double continuum_eigenvalue(int n, int l) { return (n - 1.0) * (n - l * (l + n - 1.0)); }

Field random_field(int size, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Field x(size);
  for (auto& v : x) v = d(rng);
  return x;
}

}  // namespace

TEST_CASE("assembled operator") {
  const auto m = sample_metric(make_grid(3, 128), MetricFamily::round());
  const auto op = assemble(m);
  const Field c = m.grid.nodes.array().cos().matrix();
  CHECK(op.apply(c).cwiseAbs().maxCoeff() < 10 * m.spacing() * m.spacing());

  const Field one = Field::Ones(m.size());
  CHECK((op.apply(one).array() - 6).abs().maxCoeff() < 1e-11);

  std::mt19937_64 rng(1);
  const Field u = random_field(m.size(), rng), v = random_field(m.size(), rng);
  CHECK(std::abs(inner(m, op.apply(u), v) - inner(m, u, op.apply(v))) < 1e-10 * l2_norm(m, u) * l2_norm(m, v));

  const Eigen::MatrixXd s = op.matrix();
  CHECK((s - s.transpose()).norm() == 0.0);
}

TEST_CASE("round sphere spectrum") {
  for (int n : {3, 4}) {
    const auto m1 = sample_metric(make_grid(n, 128), MetricFamily::round());
    const auto m2 = sample_metric(make_grid(n, 256), MetricFamily::round());
    const auto d1 = eigendecompose(assemble(m1), m1);
    const auto d2 = eigendecompose(assemble(m2), m2);

    CHECK(d1.eigenvalues[d1.mode_index(0)] == doctest::Approx(n * (n - 1.0)).epsilon(1e-12));
    for (int l = 1; l <= 4; ++l) {
      const double exact = continuum_eigenvalue(n, l);
      const double e1 = std::abs(d1.eigenvalues[d1.mode_index(l)] - exact);
      const double e2 = std::abs(d2.eigenvalues[d2.mode_index(l)] - exact);
      CHECK(e1 < 200 * m1.spacing() * m1.spacing() * (l + 1) * (l + 1));
      CHECK(e1 / e2 > 3.5);
      CHECK(e1 / e2 < 4.5);
    }
    CHECK(kernel_dimension(d1) == 1);
    CHECK(d1.nearest_zero() == d1.mode_index(1));
  }
}

TEST_CASE("decomposition invariants") {
  const auto m = sample_metric(make_grid(3, 96), MetricFamily::eps(0.1));
  const auto d = eigendecompose(assemble(m), m);
  CHECK(d.size() == 96);
  for (int i = 0; i + 1 < d.size(); ++i) CHECK(d.eigenvalues[i] <= d.eigenvalues[i + 1]);

  const Eigen::MatrixXd gram = d.eigenfields.transpose() * d.weights.asDiagonal() * d.eigenfields;
  CHECK((gram - Eigen::MatrixXd::Identity(96, 96)).cwiseAbs().maxCoeff() < 1e-8);

  std::vector<int> seen(96, 0);
  for (int i : d.kernel_indices) { ++seen[i]; CHECK(std::abs(d.eigenvalues[i]) < d.kernel_tol); }
  for (int i : d.up_indices) { ++seen[i]; CHECK(d.eigenvalues[i] >= d.kernel_tol); }
  for (int i : d.down_indices) { ++seen[i]; CHECK(d.eigenvalues[i] <= -d.kernel_tol); }
  for (int s : seen) CHECK(s == 1);
  for (int i = 0; i < d.size(); ++i) CHECK(d.eigenfields(0, i) >= 0);
  CHECK(d.kernel_tol == doctest::Approx(50 * m.spacing() * m.spacing() * 2));
}

TEST_CASE("kernel of the round sphere") {
  for (int cells : {128, 256}) {
    const auto m = sample_metric(make_grid(3, cells), MetricFamily::round());
    const auto d = eigendecompose(assemble(m), m);
    const double h2 = m.spacing() * m.spacing();
    REQUIRE(kernel_dimension(d) == 1);
    const int k = d.kernel_indices[0];
    CHECK(std::abs(d.eigenvalues[k]) < 50 * h2);

    const Field c = m.grid.nodes.array().cos().matrix();
    const Field psi = d.eigenfield(k) * (l2_norm(m, c) / l2_norm(m, d.eigenfield(k)));
    CHECK((psi - c).cwiseAbs().maxCoeff() < 10 * h2);

    CHECK((project(d, c, Subspace::kernel) - c).cwiseAbs().maxCoeff() < 10 * h2);
    CHECK(project(d, Field(Field::Ones(cells)), Subspace::kernel).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("projections") {
  const auto m = sample_metric(make_grid(3, 64), MetricFamily::eps(0.05));
  const auto d = eigendecompose(assemble(m), m, 2.0);
  std::mt19937_64 rng(4);
  const Field x = random_field(64, rng), y = random_field(64, rng);
  for (auto s : {Subspace::kernel, Subspace::kernel_perp, Subspace::up, Subspace::down}) {
    const Field p = project(d, x, s);
    CHECK((project(d, p, s) - p).cwiseAbs().maxCoeff() < 1e-10 * x.cwiseAbs().maxCoeff());
  }
  const Field sum = project(d, x, Subspace::kernel) + project(d, x, Subspace::kernel_perp);
  CHECK((sum - x).cwiseAbs().maxCoeff() < 1e-10 * x.cwiseAbs().maxCoeff());
  CHECK(std::abs(inner(m, project(d, x, Subspace::up), project(d, y, Subspace::down))) <
        1e-10 * l2_norm(m, x) * l2_norm(m, y));
  CHECK_THROWS_WITH_AS(project(d, Field(Field::Ones(63)), Subspace::kernel), "grid mismatch", DomainError);
  CHECK(parse_subspace("kernel_perp") == Subspace::kernel_perp);
  CHECK_THROWS_AS(parse_subspace("sideways"), ConfigError);
}

TEST_CASE("kernel dimension edge cases") {
  const auto m = sample_metric(make_grid(3, 128), MetricFamily::round());
  const Field shifted = (m.curvature.array() + 1).matrix();
  CHECK(kernel_dimension(eigendecompose(assemble(m, shifted), m)) == 0);
  CHECK(kernel_dimension(eigendecompose(assemble(m), m, 0.0)) == 0);
}

TEST_CASE("potential switch") {
  // With f = R / int R the f potential differs from R by the factor alpha.
  const auto m = sample_metric(make_grid(3, 64), MetricFamily::round(), FSpec::critical());
  const auto r = assemble(m, Potential::curvature);
  const auto f = assemble(m, Potential::f);
  const double alpha = integrate(m, m.curvature);
  CHECK(((r.diagonal - f.diagonal).array() - (6 - 6 / alpha)).abs().maxCoeff() < 1e-12);
  CHECK(parse_potential("f") == Potential::f);
  CHECK(parse_potential("R") == Potential::curvature);
}

TEST_CASE("second variation on up and down fields") {
  const auto m = sample_metric(make_grid(3, 128), MetricFamily::round(), FSpec::critical());
  const auto d = eigendecompose(assemble(m), m);
  for (int i : d.down_indices) {
    const Field v = d.eigenfield(i);
    CHECK(second_variation(m, v, v) >= 8 * (-d.eigenvalues[i] - d.kernel_tol) * inner(m, v, v) * (1 - 1e-9));
  }
  for (int i : d.up_indices) {
    const Field v = d.eigenfield(i);
    CHECK(second_variation(m, v, v) < 0);
  }
}
