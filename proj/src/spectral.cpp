#include "psc/spectral.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace psc {

Potential parse_potential(const std::string& tag) {
  if (tag == "R" || tag == "curvature") return Potential::curvature;
  if (tag == "f") return Potential::f;
  throw ConfigError("unknown potential '" + tag + "'");
}

std::string to_string(Potential p) { return p == Potential::f ? "f" : "R"; }

Subspace parse_subspace(const std::string& tag) {
  if (tag == "kernel") return Subspace::kernel;
  if (tag == "kernel_perp") return Subspace::kernel_perp;
  if (tag == "up") return Subspace::up;
  if (tag == "down") return Subspace::down;
  throw ConfigError("unknown subspace '" + tag + "'");
}

Eigen::MatrixXd SchrodingerOperator::matrix() const {
  const int n = size();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  s.diagonal() = diagonal;
  s.diagonal(1) = off_diagonal;
  s.diagonal(-1) = off_diagonal;
  return s;
}

Field SchrodingerOperator::apply(const Field& v) const {
  const int n = size();
  if (v.size() != n) throw DomainError("grid mismatch");
  const Field y = sqrt_mass.cwiseProduct(v);
  Field out = diagonal.cwiseProduct(y);
  out.head(n - 1) += off_diagonal.cwiseProduct(y.tail(n - 1));
  out.tail(n - 1) += off_diagonal.cwiseProduct(y.head(n - 1));
  return out.cwiseQuotient(sqrt_mass);
}

SchrodingerOperator assemble(const WarpedMetric& m, const Field& potential) {
  check_grid(m, potential);
  const int n = m.size();
  const double h = m.spacing();
  const double c = m.dim() - 1;
  SchrodingerOperator op;
  op.dim = m.dim();
  op.spacing = h;
  op.sqrt_mass = (m.sphere_area * m.cell_weight).cwiseSqrt();
  op.diagonal = potential;
  op.off_diagonal.resize(n - 1);
  for (int j = 0; j + 1 < n; ++j) {
    const double k = c * m.face_weight[j] / h;
    op.diagonal[j] -= k / m.cell_weight[j];
    op.diagonal[j + 1] -= k / m.cell_weight[j + 1];
    op.off_diagonal[j] = k / std::sqrt(m.cell_weight[j] * m.cell_weight[j + 1]);
  }
  return op;
}

SchrodingerOperator assemble(const WarpedMetric& m, Potential potential) {
  return assemble(m, potential == Potential::f ? m.f : m.curvature);
}

double default_kernel_tol(const WarpedMetric& m) {
  const double h = m.spacing();
  return 50 * h * h * (m.dim() - 1);
}

int SpectralDecomposition::nearest_zero() const {
  int best = 0;
  eigenvalues.cwiseAbs().minCoeff(&best);
  return best;
}

int SpectralDecomposition::mode_index(int l) const {
  if (l < 0 || l >= size()) throw DomainError("mode index out of range");
  return size() - 1 - l;
}

SpectralDecomposition eigendecompose(const SchrodingerOperator& op, const WarpedMetric& m, double kernel_tol) {
  if (op.size() != m.size()) throw DomainError("grid mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(op.diagonal, op.off_diagonal, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) {
    std::ostringstream os;
    os << "spectral failure: tridiagonal QR did not converge (n = " << op.size()
       << ", diag range [" << op.diagonal.minCoeff() << ", " << op.diagonal.maxCoeff() << "])";
    throw SpectralError(os.str());
  }

  SpectralDecomposition d;
  d.kernel_tol = kernel_tol;
  d.eigenvalues = solver.eigenvalues();
  d.weights = m.sphere_area * m.cell_weight;
  // Columns of the solver are orthonormal in the Euclidean sense; undoing
  // the similarity transform makes them orthonormal for the weighted inner
  // product.
  d.eigenfields = op.sqrt_mass.cwiseInverse().asDiagonal() * solver.eigenvectors();
  for (int i = 0; i < d.size(); ++i) {
    auto col = d.eigenfields.col(i);
    col /= std::sqrt(col.cwiseAbs2().dot(d.weights));
    if (col[0] < 0) col = -col;
  }
  for (int i = 0; i < d.size(); ++i) {
    const double l = d.eigenvalues[i];
    if (std::abs(l) < kernel_tol)
      d.kernel_indices.push_back(i);
    else if (l > 0)
      d.up_indices.push_back(i);
    else
      d.down_indices.push_back(i);
  }
  return d;
}

SpectralDecomposition eigendecompose(const SchrodingerOperator& op, const WarpedMetric& m) {
  return eigendecompose(op, m, default_kernel_tol(m));
}

Field project(const SpectralDecomposition& d, const Field& field, Subspace subspace) {
  if (field.size() != d.weights.size()) throw DomainError("grid mismatch");
  if (subspace == Subspace::kernel_perp) return field - project(d, field, Subspace::kernel);
  const std::vector<int>& idx = subspace == Subspace::kernel ? d.kernel_indices
                                : subspace == Subspace::up   ? d.up_indices
                                                             : d.down_indices;
  const Field weighted = field.cwiseProduct(d.weights);
  Field out = Field::Zero(field.size());
  for (int i : idx) out += d.eigenfields.col(i).dot(weighted) * d.eigenfields.col(i);
  return out;
}

int kernel_dimension(const SpectralDecomposition& d) { return static_cast<int>(d.kernel_indices.size()); }

}  // namespace psc
