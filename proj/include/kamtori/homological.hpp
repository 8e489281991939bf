#ifndef KAMTORI_HOMOLOGICAL_HPP
#define KAMTORI_HOMOLOGICAL_HPP

// Homological equations of one KAM step and the Diophantine sieve.
//
// The generating Hamiltonian is
//
//     F = sum_{0<|k|<=K} (f_k0 + <f_k1, y> + <F_k1, z>) e^{i<k,x>} + <F_01, z>,
//
// and the translation y -> y + y_star with y_star = (Y_star, 0). The unknowns
// {F_k1}, F_01 and Y_star are coupled through the Fourier modes of M and B and
// are solved together as one real linear system; f_k1 and f_k0 then follow by
// division.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "kamtori/model.hpp"
#include "kamtori/series.hpp"

namespace kamtori {

struct GeneratingData {
  Dims dims{};
  int K = 0;
  int n0 = 0;
  std::map<Mode, cplx> f0;               // 0 < |k|_1 <= K, both signs
  std::map<Mode, Eigen::VectorXcd> f1;   // l entries
  std::map<Mode, Eigen::VectorXcd> F1;   // 2m entries
  Eigen::VectorXd F01;                   // 2m entries
  Eigen::VectorXd y_star;                // l entries, zero past n0

  /// F as a series with the given caps.
  Series to_series(int d_max, int K_max, double drop_tol = kDefaultDropTol) const;

  /// Largest |X_{-k} - conj(X_k)| over all stored families.
  double reality_defect() const;
};

struct SieveCheck {
  bool pass = true;
  Mode worst_k{};
  double worst_margin = 0.0;  // min over modes of |<k,w>| |k|^tau; +inf when no modes
};

/// |<k, w>| > gamma / |k|_1^tau for all 0 < |k|_1 <= K.
SieveCheck sieve(const Eigen::VectorXd& omega, double gamma, double tau, int K);

/// How the degree-0 part of F feeds the degree-1 equations. `full` keeps the
/// terms {1/2<y,Ay> + <y,Bz>, f_k0 e^{i<k,x>}}, which move the y- and z-linear
/// coefficients by sum_j A_{k-j} E (i j) f_j0 and sum_j B_{k-j}^T E (i j) f_j0;
/// `literal` drops them and leaves them in the remainder.
enum class Coupling { full, literal };

struct HomologicalOptions {
  Coupling coupling = Coupling::full;
  std::size_t dense_limit = 2500;  // unknowns above which the sparse solver is used
  double cond_max = 1e14;
};

/// Inputs of the linear system.
struct HomologicalProblem {
  const NormalForm* N = nullptr;
  const Series* R = nullptr;  // degree <= 2 truncation of the perturbation
  int n0 = 0;
  Eigen::VectorXd omega;      // toral frequency -E^T Omega
  Eigen::MatrixXd E;          // l x n, used by the full coupling
  int K = 0;
};

struct HomologicalSolution {
  GeneratingData g;
  double residual = 0.0;   // max relative residual over all equation families
  double condition = 0.0;  // estimate of the 1-norm condition number
  std::size_t unknowns = 0;
  bool sparse = false;
};

/// Solves the system. Throws SieveError when some <k, w> vanishes and
/// SingularError when the matrix is singular.
HomologicalSolution assemble_and_solve(const HomologicalProblem& pb, const HomologicalOptions& opt = {});

/// Residual of every equation family after substituting g; relative to the
/// norm of the forcing (absolute when the forcing vanishes).
double residual_check(const GeneratingData& g, const HomologicalProblem& pb,
                      Coupling coupling = Coupling::full);

/// Writes the assembled matrix and right-hand side as "row col value" lines
/// followed by a "rhs" section, for offline inspection.
void dump_system(const HomologicalProblem& pb, const HomologicalOptions& opt, const std::string& path);

}  // namespace kamtori

#endif  // KAMTORI_HOMOLOGICAL_HPP
