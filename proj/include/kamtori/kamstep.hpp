#ifndef KAMTORI_KAMSTEP_HPP
#define KAMTORI_KAMSTEP_HPP

// One KAM step: truncate the perturbation, solve the homological system for
// a generating Hamiltonian F and a translation y*, push H = N + P through the
// time-1 map of X_F (as a truncated Lie series) and the translation, and
// split the result into the next normal form and perturbation.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kamtori/homological.hpp"
#include "kamtori/model.hpp"
#include "kamtori/series.hpp"
#include "kamtori/structure.hpp"

namespace kamtori {

enum class KPolicy {
  log_power,    // ([ln 1/s] + 1)^(a* + 2), capped at K_hard
  log_cubic,    // ([ln 1/s] + 1)^3, capped at K_hard
  fixed         // always K_fixed
};

struct KamParams {
  double gamma0 = 0.05;
  double tau = 2.0;
  double sigma0 = 1.0;
  int d_max = 4;
  KPolicy K_policy = KPolicy::log_power;
  int K_fixed = 16;
  int K_hard = 32;
  int a_star = 7;
  int lie_order = 4;
  double tol_residual = 1e-10;
  double tol_stop = 1e-12;
  int nu_max = 12;
  double r0 = 0.5;
  double s0 = 0.0;           // <= 0: solve the self-consistent initial radius
  double eps_clamp = 0.5;    // schedule epsilon is min(measured, eps_clamp)
  double coeff_floor = 1e-40;
  Coupling coupling = Coupling::full;
  std::size_t dense_limit = 2000;

  /// Least integer a with (10/9)^a > 2.
  static int minimal_a_star();
  void validate() const;
  bool operator==(const KamParams&) const = default;
};

/// A problem at one parameter value lambda.
struct ProblemInstance {
  PoissonStructure S;
  NormalForm N;
  Series P;
  Eigen::VectorXd lambda;
  int n0 = 1;
  KamParams params;
};

struct Schedule {
  double eps = 0.0;
  double r = 0.0;
  double s = 0.0;
  double gamma = 0.0;
  int K = 0;  // truncation order used by the step taken from this rung
};

struct ScheduleUpdate {
  Schedule next;
  double zeta = 0.0;
  double Gamma = 0.0;
};

int truncation_order(double s, const KamParams& p);

/// Advances (eps, r, s, gamma) and computes the next truncation order.
/// Throws ScheduleError when s <= 0 or eps >= 1.
ScheduleUpdate update_params(const Schedule& cur, const KamParams& p, int n);

/// Initial rung: r0, self-consistent s0, eps measured from |P| and clamped,
/// gamma0. `eps_measured` receives the unclamped value.
Schedule initial_schedule(const Series& P, int n, const KamParams& p, double* eps_measured = nullptr);

/// sum_{j<=order} ad_F^j H / j! with ad_F H = {H, F}; tail = norm of the last term.
Truncated lie_transform(const Series& H, const Series& F, const PoissonStructure& S, int order, Caps caps);

struct StepDiagnostics {
  int nu = 0;
  Schedule sch;
  double eps_measured = 0.0;
  double norm_P = 0.0;
  double norm_Pplus = 0.0;
  double Delta = 0.0;
  double zeta = 0.0;
  double Gamma = 0.0;
  double cond = 0.0;
  double sieve_margin = 0.0;
  double residual = 0.0;
  double lie_tail = 0.0;
  double first_order_defect = 0.0;
  double h1 = 0.0;
  bool H1 = false, H2 = false, H4 = false, H5 = false, H6 = false;
  double omega_drift = 0.0;  // |w_+ - w|
  double y_star_norm = 0.0;
  std::size_t unknowns = 0;
  bool sparse = false;
  std::size_t terms_Pplus = 0;
};

struct KamState {
  int nu = 0;
  Schedule sch;
  NormalForm N;
  Series P;
  std::vector<GeneratingData> log;
  std::vector<StepDiagnostics> diagnostics;
};

KamState initial_state(const ProblemInstance& inst);

/// Largest coefficient, over the families the homological equations target,
/// of  N + R + {N, F} + <Omega, y*> + <y*, A y> + <y*, B z>  (the part of the
/// transformed Hamiltonian that is linear in the step data). For k != 0 the
/// families are degrees 0 and 1; at k = 0 the z-linear terms and the first n0
/// y-linear terms measured against Omega.
double first_order_defect(const NormalForm& N, const Series& R, const GeneratingData& g,
                          const PoissonStructure& S, Caps caps, int n0);

/// Largest coefficient of `P` in the same families (for 0 < |k| <= K).
double targeted_family_max(const Series& P, int K, int n0);

/// Performs one step. Throws SieveError, SingularError or ContractionError.
KamState kam_step(const KamState& st, const ProblemInstance& inst);

}  // namespace kamtori

#endif  // KAMTORI_KAMSTEP_HPP
