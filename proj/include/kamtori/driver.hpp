#ifndef KAMTORI_DRIVER_HPP
#define KAMTORI_DRIVER_HPP

// Full iteration over a parameter grid: standing-hypothesis checks, the
// Diophantine sieve, repeated KAM steps until the perturbation is below the
// stopping tolerance, reconstruction of the torus embedding from the logged
// generating Hamiltonians, and the measure-of-exclusions experiment.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kamtori/kamstep.hpp"
#include "kamtori/model.hpp"

namespace kamtori {

enum class TorusStatus { converged, sieved_out, diverged, check_failed };

std::string to_string(TorusStatus s);

struct ConditionReport {
  HyperbolicityResult hyperbolicity;
  bool nd_pass = false;
  std::string nd_message;  // why ND failed, empty otherwise
  NdData nd;
  EtaResult eta;
  MbResult mb;
  double A_avg_cond = 0.0;  // 2-norm condition number of the full [A]
  bool pass = false;        // hyperbolicity and ND
};

/// Hyperbolicity, ND, eta and closeness of B, M to their averages for one instance.
ConditionReport check_conditions(const ProblemInstance& inst);

struct DriverOptions {
  bool check = true;          // skip instances whose conditions fail
  int embed_grid = 0;         // points per angle for the embedding; 0 = none
  double flow_tol = 1e-12;    // tolerance of the flows composing the embedding
  double flow_drop = 1e-22;   // F coefficients at or below this are ignored by the flows
};

struct TorusResult {
  Eigen::VectorXd lambda;
  TorusStatus status = TorusStatus::diverged;
  std::string message;
  Eigen::VectorXd Omega0;
  Eigen::VectorXd Omega_inf;
  Eigen::VectorXd omega_inf;
  double drift = 0.0;              // |Omega_inf - Omega0|
  Eigen::VectorXd drift_components;
  double final_residual = 0.0;     // majorant |P| at the last schedule rung
  int steps = 0;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<GeneratingData> log;
  NormalForm N_inf;
  Series P_inf;
  int embed_grid = 0;
  std::vector<double> embedding;   // embed_grid^n phase points, see verify.hpp
  double embedding_distance = 0.0; // max-norm distance from the identity embedding
};

/// Iterates KAM steps on one instance until |P| < tol_stop or nu_max steps.
TorusResult solve_torus(const ProblemInstance& inst, const DriverOptions& opt = {});

using InstanceFactory = std::function<ProblemInstance(const Eigen::VectorXd& lambda)>;

/// solve_torus at every grid point; results in grid order.
std::vector<TorusResult> run(const InstanceFactory& factory, const std::vector<Eigen::VectorXd>& lambdas,
                             const DriverOptions& opt = {});

/// One logged coordinate change: the generating Hamiltonian and the translation.
struct Generator {
  Series F;
  Eigen::VectorXd y_star;
};

std::vector<Generator> generators(const std::vector<GeneratingData>& log, const KamParams& p);

/// Phi(theta) = Phi_1 o ... o Phi_nu (0, theta, 0) with Phi_j(p) = flow of X_{F_j}
/// for unit time applied to p + y*_j.
std::vector<double> reconstruct_embedding(const PoissonStructure& S, const std::vector<Generator>& gens, int grid,
                                          const DriverOptions& opt = {});

/// Max-norm distance of an embedding from the identity embedding.
double identity_distance(const std::vector<double>& embedding, Dims d, int grid);

/// Uniform grid over a box with `per_axis` points per axis, cell midpoints.
std::vector<Eigen::VectorXd> lambda_grid(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int per_axis);

struct MeasureTable {
  std::vector<double> gammas;
  std::vector<double> fractions;
  double slope = 0.0;  // least-squares slope of log(fraction) against log(gamma)
  std::size_t points = 0;
};

/// Fraction of `points` parameter samples in [lo, hi] whose frequency fails
/// |<k, w>| > gamma / |k|^tau for some 0 < |k|_1 <= K. Samples lie on a
/// uniform grid, or are drawn uniformly from a seeded generator when `seed`
/// is given.
MeasureTable measure_excluded(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& omega,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              const std::vector<double>& gammas, double tau, int K, std::size_t points,
                              std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace kamtori

#endif  // KAMTORI_DRIVER_HPP
