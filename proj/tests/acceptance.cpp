// Acceptance run: one PASS/FAIL line per criterion. Every tolerance is pinned
// here; the process exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kamtori/config.hpp"
#include "kamtori/driver.hpp"
#include "kamtori/homological.hpp"
#include "kamtori/kamstep.hpp"
#include "kamtori/model.hpp"
#include "kamtori/structure.hpp"
#include "kamtori/verify.hpp"
#include "test_support.hpp"

using namespace kamtori;

namespace {

// ---------------------------------------------------------------- tolerances

constexpr double kHomologicalResidual = 1e-10;
constexpr double kHomologicalSeconds = 5.0;
constexpr int kHomologicalK = 16;
constexpr double kCancellation = 1e-8;       // targeted families <= this * |P|
constexpr int kMaxSteps = 8;
constexpr double kStopNorm = 1e-12;
constexpr double kContractionExponent = 1.3;
constexpr double kContractionBound = 1.0;    // |P+| / |P|^1.3 must stay below this
constexpr double kOmegaFixed = 1e-12;
constexpr double kRotation = 1e-6;
constexpr double kDriftFactor = 10.0;        // free component drift <= 10 eps
constexpr double kInvariance = 1e-8;
constexpr int kInvarianceGrid = 128;
constexpr double kProbe = 1e-3;
constexpr double kProbeGain = 1e4;
constexpr double kSlopeLo = 0.7, kSlopeHi = 1.3;
constexpr double kMeasureSeconds = 10.0;
constexpr double kEmbeddingSlope = 0.8;
constexpr double kEta = 1e-12;
constexpr int kAlgebraCases = 1000;
constexpr double kAlgebraTol = 1e-12;
constexpr double kOrder = 4.0, kOrderTol = 0.3;

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

RunConfig example1(double eps = 1e-4, double z_coupling = 0.0) {
  RunConfig cfg = preset_config("example1");
  cfg.preset_params["eps"] = eps;
  cfg.preset_params["z_coupling"] = z_coupling;
  return cfg;
}

ProblemInstance instance(const RunConfig& cfg) {
  return make_instance(cfg, Eigen::Map<const Eigen::VectorXd>(cfg.lambda.lo.data(),
                                                              static_cast<Eigen::Index>(cfg.lambda.lo.size())));
}

// ---------------------------------------------------------------- criteria

Outcome homological_exactness() {
  const ProblemInstance inst = instance(example1(1e-4, 1.0));
  const auto t0 = std::chrono::steady_clock::now();
  const Series R = truncate_R(inst.P, kHomologicalK);
  const HomologicalProblem pb{&inst.N, &R, inst.n0, inst.S.toral_frequency(inst.N.Omega), inst.S.E(), kHomologicalK};
  const HomologicalSolution sol = assemble_and_solve(pb);
  const double t = seconds_since(t0);
  return {sol.residual < kHomologicalResidual && t < kHomologicalSeconds,
          "residual " + fmt(sol.residual) + " (< 1e-10), " + std::to_string(sol.unknowns) + " unknowns, " + fmt(t) +
              " s (< 5 s) at K = 16"};
}

Outcome one_step_cancellation() {
  const ProblemInstance inst = instance(example1(1e-4, 1.0));
  const KamState st = initial_state(inst);
  const KamState next = kam_step(st, inst);
  const StepDiagnostics& d = next.diagnostics.back();
  // The step-linear part of the transformed Hamiltonian on the targeted
  // families; what remains in P+ there is quadratic in the perturbation.
  const double literal = targeted_family_max(next.P, d.sch.K, inst.n0);
  return {inst.params.lie_order >= 2 && d.first_order_defect <= kCancellation * d.norm_P,
          "first-order defect " + fmt(d.first_order_defect) + " <= 1e-8 |P| = " + fmt(kCancellation * d.norm_P) +
              " (targeted families of P+: " + fmt(literal) + ", O(|P|^2))"};
}

Outcome convergence() {
  RunConfig cfg = example1();
  cfg.numerics.tol_stop = kStopNorm;
  const auto t0 = std::chrono::steady_clock::now();
  const TorusResult r = solve_torus(instance(cfg));
  const double t = seconds_since(t0);
  double worst = 0.0;
  std::string ratios;
  for (const auto& d : r.diagnostics) {
    const double q = d.norm_Pplus / std::pow(d.norm_P, kContractionExponent);
    worst = std::max(worst, q);
    ratios += (ratios.empty() ? "" : ", ") + fmt(q);
  }
  const bool pass = r.status == TorusStatus::converged && r.steps <= kMaxSteps && r.final_residual < kStopNorm &&
                    worst <= kContractionBound;
  return {pass, to_string(r.status) + " in " + std::to_string(r.steps) + " steps (<= 8), |P| = " +
                    fmt(r.final_residual) + ", |P+|/|P|^1.3 = [" + ratios + "] (<= 1), " + fmt(t) + " s"};
}

Outcome frequency_preservation() {
  const RunConfig cfg = example1();
  const ProblemInstance inst = instance(cfg);
  const TorusResult r = solve_torus(inst);
  if (r.status != TorusStatus::converged) return {false, "example 1 did not converge"};
  const Series H = hamiltonian(inst);
  const auto p = reconstruct_embedding(inst.S, generators(r.log, cfg.numerics), 1);
  const Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  IntegrateOptions io;
  io.escape_radius = cfg.verify.escape_radius;
  io.record_every = 100;
  const Trajectory tr = integrate(H, inst.S, p0, 1000.0, 0.01, io);
  const Eigen::VectorXd rot = rotation_numbers(tr, 2, 1);
  const double rot_err = (rot - Eigen::Vector2d(-1.0, -kGolden)).cwiseAbs().maxCoeff();

  const RunConfig cfg2 = preset_config("example2");
  const TorusResult r2 = solve_torus(make_instance(cfg2, Eigen::Vector2d(1.0, kGolden)));
  if (r2.status != TorusStatus::converged) return {false, "example 2 did not converge"};
  const double fixed2 = std::max(std::abs(r2.drift_components[0]), std::abs(r2.drift_components[1]));
  const double free2 = std::abs(r2.drift_components[2]);
  const double eps2 = cfg2.preset_params.at("eps");
  const bool pass = r.drift <= kOmegaFixed && rot_err <= kRotation && fixed2 <= kOmegaFixed &&
                    free2 <= kDriftFactor * eps2;
  return {pass, "ex1 |Omega_inf - Omega0| = " + fmt(r.drift) + ", rotation error " + fmt(rot_err) +
                    " (<= 1e-6); ex2 fixed drift " + fmt(fixed2) + ", third-component drift " + fmt(free2) +
                    " (<= 10 eps = " + fmt(kDriftFactor * eps2) + ")"};
}

Outcome invariance() {
  const RunConfig cfg = example1();
  const ProblemInstance inst = instance(cfg);
  const TorusResult r = solve_torus(inst);
  if (r.status != TorusStatus::converged) return {false, "example 1 did not converge"};
  const auto emb = reconstruct_embedding(inst.S, generators(r.log, cfg.numerics), kInvarianceGrid);
  const Series H = hamiltonian(inst);
  const InvarianceReport rep = invariance_residual(emb, kInvarianceGrid, r.omega_inf, H, inst.S);
  Eigen::VectorXd probe = r.omega_inf;
  probe[0] += kProbe;
  const InvarianceReport off = invariance_residual(emb, kInvarianceGrid, probe, H, inst.S);
  const double gain = off.residual / rep.residual;
  return {rep.residual <= kInvariance && gain >= kProbeGain,
          "residual " + fmt(rep.residual) + " (<= 1e-8) on 128^2, probe residual " + fmt(off.residual) + ", gain " +
              fmt(gain) + " (>= 1e4)"};
}

Outcome measure_law() {
  auto omega = [](const Eigen::VectorXd& l) { return Eigen::Vector2d(1.0, l[0]).eval(); };
  const auto t0 = std::chrono::steady_clock::now();
  const MeasureTable t = measure_excluded(omega, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0),
                                          {0.01, 0.02, 0.04, 0.08}, 2.0, 30, 10000);
  const double secs = seconds_since(t0);
  std::string fr;
  for (double f : t.fractions) fr += (fr.empty() ? "" : ", ") + fmt(f);
  return {t.slope >= kSlopeLo && t.slope <= kSlopeHi && secs < kMeasureSeconds,
          "slope " + fmt(t.slope) + " in [0.7, 1.3], fractions [" + fr + "], " + fmt(secs) + " s (< 10 s)"};
}

Outcome embedding_scaling() {
  std::vector<double> eps{1e-4, 1e-5, 1e-6}, dist;
  for (double e : eps) {
    const TorusResult r = solve_torus(instance(example1(e)), DriverOptions{true, 32});
    if (r.status != TorusStatus::converged) return {false, "no convergence at eps = " + fmt(e)};
    dist.push_back(r.embedding_distance);
  }
  const double slope = loglog_slope(eps, dist);
  return {slope >= kEmbeddingSlope, "distances [" + fmt(dist[0]) + ", " + fmt(dist[1]) + ", " + fmt(dist[2]) +
                                        "], slope " + fmt(slope) + " (>= 0.8)"};
}

Outcome condition_checks() {
  const RunConfig c1 = preset_config("example1");
  const ProblemInstance i1 = instance(c1);
  const auto h1 = check_hyperbolicity(i1.N.M.average(), i1.params.sigma0);
  const bool spectrum = h1.spectrum.size() == 2 && std::abs(h1.spectrum[0] - std::complex<double>(-1.0, 0.0)) < 1e-12 &&
                        std::abs(h1.spectrum[1] - std::complex<double>(1.0, 0.0)) < 1e-12;
  const bool A1 = std::isfinite(condition_number(i1.N.A.average()));
  const auto rus1 = check_russmann(frequency_map(c1), Eigen::VectorXd::Constant(1, -0.5),
                                   Eigen::VectorXd::Constant(1, 0.5), 2);
  const ConditionReport rep1 = check_conditions(i1);
  const double eta_err = std::abs(rep1.eta.eta - 2.0 / (std::sqrt(432.0) + 12.0));

  const RunConfig c2 = preset_config("example2");
  const ProblemInstance i2 = make_instance(c2, Eigen::Vector2d(1.0, kGolden));
  const bool A2_singular = !std::isfinite(condition_number(i2.N.A.average()));
  const auto rus2 = check_russmann(frequency_map(c2), Eigen::Vector2d(0.5, 1.0), Eigen::Vector2d(1.5, 2.0), 2);
  const NdData nd2 = check_nd(i2.N.A.average(), i2.N.B.average(), i2.N.M.average(), 2);
  const bool U2 = nd2.U.isApprox(Eigen::MatrixXd::Identity(2, 2)) && nd2.pass;

  const bool pass = h1.pass && spectrum && A1 && !rus1.pass && rus2.pass && A2_singular && U2 && eta_err <= kEta;
  auto yes = [](bool b) { return b ? std::string("yes") : std::string("no"); };
  return {pass, "ex1: hyperbolic " + yes(h1.pass && spectrum) + ", [A] nonsingular " + yes(A1) + ", Ruessmann fails " +
                    yes(!rus1.pass) + ", |eta - 2/(sqrt 432 + 12)| = " + fmt(eta_err) + "; ex2: Ruessmann holds " +
                    yes(rus2.pass) + ", [A] singular " + yes(A2_singular) + ", U = I2 nonsingular " + yes(U2)};
}

Outcome algebra() {
  std::mt19937_64 rng(20240601);
  const Dims d{2, 1, 1};
  const Caps caps{8, 12};
  int fails = 0;
  for (int c = 0; c < kAlgebraCases; ++c) {
    const PoissonStructure S = testing::random_structure(rng, d);
    const Series f = testing::random_series(rng, d, 2, 2, 2, 2, 5);
    const Series g = testing::random_series(rng, d, 2, 2, 2, 2, 5);
    const Series h = testing::random_series(rng, d, 2, 2, 2, 2, 5);
    const Series fg = bracket(f, g, S, caps).value;
    // antisymmetry
    if (testing::rel_diff(fg, scale(bracket(g, f, S, caps).value, -1.0)) > kAlgebraTol) ++fails;
    // Leibniz
    const Series lhs = bracket(multiply(f, g, 8, 12).value, h, S, caps).value;
    const Series rhs = add(multiply(f, bracket(g, h, S, caps).value, 8, 12).value,
                           multiply(g, bracket(f, h, S, caps).value, 8, 12).value);
    if (testing::rel_diff(lhs, rhs) > kAlgebraTol) ++fails;
    // Jacobi
    const Series jac = add(add(bracket(f, bracket(g, h, S, caps).value, S, caps).value,
                               bracket(g, bracket(h, f, S, caps).value, S, caps).value),
                           bracket(h, fg, S, caps).value);
    if (testing::rel_diff(jac, Series(d, 8, 12)) > kAlgebraTol) ++fails;
    // reality preservation by bracket and product
    if (reality_defect(fg) > kAlgebraTol || reality_defect(multiply(f, g, 8, 12).value) > kAlgebraTol) ++fails;
    // majorant sub-multiplicativity
    const double r = 0.4, s = 0.3;
    if (sup_norm(multiply(f, g, 8, 12).value, r, s) > sup_norm(f, r, s) * sup_norm(g, r, s) * (1.0 + kAlgebraTol)) {
      ++fails;
    }
    // truncation idempotence
    const Series t1 = truncate_R(multiply(f, g, 8, 12).value, 3);
    if (testing::rel_diff(truncate_R(t1, 3), t1) > 0.0) ++fails;
  }
  return {fails == 0, std::to_string(kAlgebraCases) + " cases each of antisymmetry, Leibniz, Jacobi, reality, " +
                          "sub-multiplicativity, truncation idempotence; " + std::to_string(fails) + " failures"};
}

Outcome integrator_order() {
  const ProblemInstance inst = instance(example1());
  const Series H = hamiltonian(inst);
  Eigen::VectorXd p0(5);
  p0 << 0.1, 0.3, 0.7, 0.02, 0.01;
  std::vector<double> dts{0.1, 0.05, 0.025}, drift;
  for (double dt : dts) drift.push_back(energy_drift(integrate(H, inst.S, p0, 2.0, dt)));
  const double slope = loglog_slope(dts, drift);
  return {std::abs(slope - kOrder) <= kOrderTol, "energy drift [" + fmt(drift[0]) + ", " + fmt(drift[1]) + ", " +
                                                    fmt(drift[2]) + "], slope " + fmt(slope) + " (4 +- 0.3)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"homological exactness", homological_exactness},
      {"one-step cancellation", one_step_cancellation},
      {"convergence", convergence},
      {"frequency preservation", frequency_preservation},
      {"invariance", invariance},
      {"measure law", measure_law},
      {"transform smallness scaling", embedding_scaling},
      {"condition checks", condition_checks},
      {"algebra property suite", algebra},
      {"integrator order", integrator_order},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
