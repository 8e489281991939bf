#ifndef KAMTORI_VERIFY_HPP
#define KAMTORI_VERIFY_HPP

// Dynamical cross-checks of computed tori: direct integration of the
// generalized Hamiltonian flow, the invariance identity DPhi . w = X_H o Phi
// on a torus grid, and rotation numbers of trajectories.

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "kamtori/evaluate.hpp"
#include "kamtori/series.hpp"
#include "kamtori/structure.hpp"

namespace kamtori {

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;  // (y, x, z), x unwrapped
  std::vector<double> energy;
  bool escaped = false;
  double escape_time = std::numeric_limits<double>::quiet_NaN();
};

struct IntegrateOptions {
  /// Integration stops (escaped = true) once |(y, z) - (y0, z0)| exceeds this.
  double escape_radius = std::numeric_limits<double>::infinity();
  std::size_t record_every = 1;
};

/// Classical fixed-step RK4 for (ydot, xdot, zdot) = I~ grad H.
/// Throws DivergenceError when the state stops being finite.
Trajectory integrate(const Series& H, const PoissonStructure& S, const Eigen::VectorXd& p0, double T,
                     double dt, const IntegrateOptions& opt = {});

/// Maximum |H(t) - H(0)| along the trajectory.
double energy_drift(const Trajectory& traj);

/// Least-squares slopes of the unwrapped angles against time.
/// Throws DivergenceError when the trajectory escaped.
Eigen::VectorXd rotation_numbers(const Trajectory& traj, int n, int l);

/// Time-T map of the vector field `X` (components in (y, x, z) order) by
/// adaptive Dormand-Prince integration with absolute and relative tolerance `tol`.
Eigen::VectorXd flow_map(const FieldEvaluator& X, const Eigen::VectorXd& p, double T, double tol);

struct InvarianceOptions {
  int min_grid = 0;          // the grid must have at least this many points per angle
  double alias_tol = 1e-8;   // allowed spectral energy fraction in the top quarter
};

struct InvarianceReport {
  double residual = 0.0;        // max over the grid of |DPhi . w - X_H o Phi|
  double alias_fraction = 0.0;  // top-quarter spectral energy / total
};

/// `embedding` holds grid^n points (row-major over theta, last angle fastest),
/// each a phase vector (y, x, z) with x = theta + periodic part.
InvarianceReport invariance_residual(const std::vector<double>& embedding, int grid,
                                     const Eigen::VectorXd& omega, const Series& H,
                                     const PoissonStructure& S, const InvarianceOptions& opt = {});

/// The identity embedding theta -> (0, theta, 0) on a uniform grid.
std::vector<double> identity_embedding(Dims d, int grid);

}  // namespace kamtori

#endif  // KAMTORI_VERIFY_HPP
