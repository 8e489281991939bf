#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kamtori/config.hpp"
#include "kamtori/homological.hpp"
#include "kamtori/kamstep.hpp"
#include "test_support.hpp"

using namespace kamtori;

namespace {

ProblemInstance example1(double z_coupling, double beta = 0.0) {
  RunConfig cfg = preset_config("example1");
  cfg.preset_params["z_coupling"] = z_coupling;
  if (beta != 0.0) cfg.preset_params["beta"] = beta;
  return make_instance(cfg, Eigen::VectorXd::Zero(1));
}

struct Solved {
  Series R;
  HomologicalSolution sol;
  double defect = 0.0;
};

Solved solve(const ProblemInstance& inst, Coupling coupling, int K = 8) {
  Solved out;
  out.R = truncate_R(inst.P, K);
  HomologicalProblem pb{&inst.N, &out.R, inst.n0, inst.S.toral_frequency(inst.N.Omega), inst.S.E(), K};
  HomologicalOptions opt;
  opt.coupling = coupling;
  out.sol = assemble_and_solve(pb, opt);
  out.defect = first_order_defect(inst.N, out.R, out.sol.g, inst.S, Caps{inst.params.d_max, inst.params.K_hard},
                                  inst.n0);
  return out;
}

}  // namespace

TEST_CASE("sieve: margins and violations") {
  const Eigen::Vector2d golden(1.0, (1.0 + std::sqrt(5.0)) / 2.0);
  const SieveCheck ok = sieve(golden, 0.01, 2.0, 20);
  CHECK(ok.pass);
  CHECK(ok.worst_margin > 0.01);
  const SieveCheck bad = sieve(Eigen::Vector2d(1.0, 1.0), 0.01, 2.0, 4);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst_margin == 0.0);
  CHECK(std::abs(bad.worst_k.k[0] + bad.worst_k.k[1]) == 0);
  // brute-force minimum over all modes
  double brute = std::numeric_limits<double>::infinity();
  for (const Mode& k : modes_in_ball(2, 20, false)) {
    brute = std::min(brute, std::abs(k.k[0] * golden[0] + k.k[1] * golden[1]) * std::pow(k.l1(), 2.0));
  }
  CHECK(ok.worst_margin == doctest::Approx(brute).epsilon(1e-12));
  CHECK(std::isinf(sieve(golden, 0.01, 2.0, 0).worst_margin));
}

TEST_CASE("homological residual below 1e-10 with z coupling") {
  const ProblemInstance inst = example1(1.0);
  const Solved s = solve(inst, Coupling::full);
  CHECK(s.sol.residual < 1e-10);
  CHECK(s.sol.g.reality_defect() < 1e-15);
  // independent oracle: the step-linear part of the transformed Hamiltonian
  // vanishes on every targeted family
  CHECK(s.defect < 1e-14);
  CHECK(targeted_family_max(s.R, 8, inst.n0) > 1e-5);
  // the z coupling produces a nonzero F_k1
  double F1 = 0.0;
  for (const auto& [k, v] : s.sol.g.F1) F1 = std::max(F1, v.cwiseAbs().maxCoeff());
  CHECK(F1 > 1e-6);
}

TEST_CASE("Fourier modes of M couple the z families and are still solved exactly") {
  ProblemInstance inst = example1(1.0);
  const int k1[] = {1, 0}, mk1[] = {-1, 0};
  SeriesMatrix& M = inst.N.M;
  M.at(0, 1).add_term(Mode::from(k1), 0, cplx(0.05, 0.02));
  M.at(0, 1).add_term(Mode::from(mk1), 0, cplx(0.05, -0.02));
  M.at(1, 0) = M.at(0, 1);
  const Solved s = solve(inst, Coupling::full);
  CHECK(s.sol.residual < 1e-10);
  CHECK(s.defect < 1e-14);
}

TEST_CASE("literal coupling solves its own system but leaves the A-coupling in the defect") {
  const ProblemInstance inst = example1(1.0);
  const Solved full = solve(inst, Coupling::full);
  const Solved lit = solve(inst, Coupling::literal);
  CHECK(lit.sol.residual < 1e-10);
  HomologicalProblem pb{&inst.N, &lit.R, inst.n0, inst.S.toral_frequency(inst.N.Omega), inst.S.E(), 8};
  CHECK(residual_check(lit.sol.g, pb, Coupling::literal) < 1e-10);
  CHECK(lit.defect > 1e3 * full.defect);
  CHECK(lit.defect > 0.0);
}

TEST_CASE("zero perturbation gives zero generating data") {
  ProblemInstance inst = example1(0.0);
  inst.P = Series(inst.P.dims(), inst.P.d_max(), inst.P.k_max());
  const Solved s = solve(inst, Coupling::full);
  CHECK(s.sol.g.y_star.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& [k, c] : s.sol.g.f0) CHECK(std::abs(c) == 0.0);
  CHECK(s.sol.g.F01.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exact resonance raises SieveError") {
  const ProblemInstance inst = example1(0.0, 1.0);  // w = -(1, 1)
  CHECK_THROWS_AS(solve(inst, Coupling::full), SieveError);
}

TEST_CASE("generating series is real and matches the stored families") {
  const ProblemInstance inst = example1(1.0);
  const Solved s = solve(inst, Coupling::full);
  const Series F = s.sol.g.to_series(4, 32);
  CHECK(reality_defect(F) < 1e-15);
  for (const auto& [k, c] : s.sol.g.f0) CHECK(std::abs(F.coeff(k, 0) - c) < 1e-18);
  // no k = 0 degree-0 or y-linear part
  const int k0[] = {0, 0}, y1[] = {1}, z0[] = {0, 0};
  CHECK(std::abs(F.coeff(k0, y1, z0)) == 0.0);
  CHECK(std::abs(F.coeff(Mode{}, 0)) == 0.0);
}

TEST_CASE("dense and sparse solvers agree") {
  const ProblemInstance inst = example1(1.0);
  const Series R = truncate_R(inst.P, 8);
  HomologicalProblem pb{&inst.N, &R, inst.n0, inst.S.toral_frequency(inst.N.Omega), inst.S.E(), 8};
  HomologicalOptions dense, sparse;
  sparse.dense_limit = 0;
  const auto a = assemble_and_solve(pb, dense);
  const auto b = assemble_and_solve(pb, sparse);
  CHECK_FALSE(a.sparse);
  CHECK(b.sparse);
  CHECK(a.unknowns == b.unknowns);
  CHECK((a.g.y_star - b.g.y_star).norm() < 1e-14);
  for (const auto& [k, v] : a.g.F1) CHECK((v - b.g.F1.at(k)).norm() < 1e-14);
  CHECK(b.residual < 1e-10);
}
