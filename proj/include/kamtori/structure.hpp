#ifndef KAMTORI_STRUCTURE_HPP
#define KAMTORI_STRUCTURE_HPP

// Poisson structure on T^n x R^l x R^{2m} with phase vector ordered (y, x, z):
//
//     I~ = blockdiag( [[0, E], [-E^T, C]],  J ),   J = [[0, I_m], [-I_m, 0]],
//
// bracket {f, g} = <grad f, I~ grad g>, and the generalized Hamiltonian
// vector field X_g = I~ grad g, i.e.
//
//     ydot = E g_x,   xdot = -E^T g_y + C g_x,   zdot = J g_z.

#include <Eigen/Dense>
#include <vector>

#include "kamtori/series.hpp"

namespace kamtori {

/// Truncation caps for operations that multiply series.
struct Caps {
  int d_max = 4;
  int K_max = 16;
};

class PoissonStructure {
 public:
  PoissonStructure() = default;
  /// E is l x n, C is n x n and antisymmetric.
  PoissonStructure(Eigen::MatrixXd E, Eigen::MatrixXd C, int m);

  Dims dims() const { return dims_; }
  const Eigen::MatrixXd& E() const { return E_; }
  const Eigen::MatrixXd& C() const { return C_; }
  Eigen::MatrixXd J() const;

  /// The full structure matrix in (y, x, z) ordering.
  Eigen::MatrixXd tilde_I() const;

  /// Toral frequency w = -E^T Omega.
  Eigen::VectorXd toral_frequency(const Eigen::VectorXd& Omega) const;

 private:
  Dims dims_{};
  Eigen::MatrixXd E_;
  Eigen::MatrixXd C_;
};

/// Components of a vector field, in (y, x, z) order.
struct VectorField {
  std::vector<Series> ydot;
  std::vector<Series> xdot;
  std::vector<Series> zdot;

  /// All components flattened in phase order.
  std::vector<Series> flattened() const;
};

/// X_H. The components are linear in the partial derivatives of H, so no
/// truncation happens beyond H's own caps.
VectorField vector_field(const Series& H, const PoissonStructure& S);

/// {f, g}, truncated to `caps`; the tail carries the discarded coefficient mass.
Truncated bracket(const Series& f, const Series& g, const PoissonStructure& S, Caps caps);

}  // namespace kamtori

#endif  // KAMTORI_STRUCTURE_HPP
