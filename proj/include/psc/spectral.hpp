#pragma once

// The linearized operator L = (n-1) Lap + V at a critical metric, with V the
// scalar curvature by default, its spectrum and the splitting of L^2 into
// up (positive eigenvalues), kernel and down (negative eigenvalues).

#include <string>
#include <vector>

#include "psc/geometry.hpp"

namespace psc {

enum class Potential { curvature, f };

Potential parse_potential(const std::string& tag);
std::string to_string(Potential p);

/// L in the symmetric form S = M^{1/2} L M^{-1/2}, where M is the diagonal
/// of midpoint cell weights. S is tridiagonal.
struct SchrodingerOperator {
  Field diagonal;
  Field off_diagonal;  // S(j, j+1)
  Field sqrt_mass;     // sqrt(omega * w_j^{n-1} h)
  double spacing = 0;
  int dim = 0;

  int size() const { return static_cast<int>(diagonal.size()); }
  /// Dense copy of S.
  Eigen::MatrixXd matrix() const;
  /// L v on node values (not the symmetrized form).
  Field apply(const Field& v) const;
};

SchrodingerOperator assemble(const WarpedMetric& m, Potential potential = Potential::curvature);
SchrodingerOperator assemble(const WarpedMetric& m, const Field& potential);

double default_kernel_tol(const WarpedMetric& m);

enum class Subspace { kernel, kernel_perp, up, down };

Subspace parse_subspace(const std::string& tag);

struct SpectralDecomposition {
  Field eigenvalues;           // ascending
  Eigen::MatrixXd eigenfields; // column i pairs with eigenvalues[i]
  std::vector<int> kernel_indices, up_indices, down_indices;
  double kernel_tol = 0;
  Field weights;  // quadrature weights omega * w^{n-1} h of the inner product

  int size() const { return static_cast<int>(eigenvalues.size()); }
  Field eigenfield(int i) const { return eigenfields.col(i); }
  /// Index of the eigenvalue of smallest magnitude.
  int nearest_zero() const;
  /// Radial mode l, counting down from the largest eigenvalue (l = 0 is the
  /// constant mode on the round sphere).
  int mode_index(int l) const;
};

SpectralDecomposition eigendecompose(const SchrodingerOperator& op, const WarpedMetric& m, double kernel_tol);
SpectralDecomposition eigendecompose(const SchrodingerOperator& op, const WarpedMetric& m);

Field project(const SpectralDecomposition& d, const Field& field, Subspace subspace);

int kernel_dimension(const SpectralDecomposition& d);

}  // namespace psc
