#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kamtori/config.hpp"
#include "kamtori/verify.hpp"

using namespace kamtori;

namespace {

const int kZero2[] = {0, 0};

// Example 1 structure: E = [[1, 2]], C = 0, m = 1.
PoissonStructure structure() {
  Eigen::MatrixXd E(1, 2);
  E << 1.0, 2.0;
  return PoissonStructure(E, Eigen::MatrixXd::Zero(2, 2), 1);
}

// H = Omega y + z1 z2: xdot = -E^T Omega, z1 grows like e^t, z2 decays like e^-t.
Series linear_hyperbolic(double Omega) {
  Series H(Dims{2, 1, 1}, 2, 2);
  const int y1[] = {1}, y0[] = {0}, z0[] = {0, 0}, z11[] = {1, 1};
  H.add_term(kZero2, y1, z0, Omega);
  H.add_term(kZero2, y0, z11, 1.0);
  return H;
}

Eigen::VectorXd state(double y, double x1, double x2, double z1, double z2) {
  Eigen::VectorXd p(5);
  p << y, x1, x2, z1, z2;
  return p;
}

}  // namespace

TEST_CASE("RK4 is exact on the constant toral flow") {
  const PoissonStructure S = structure();
  const Trajectory tr = integrate(linear_hyperbolic(1.5), S, state(0.1, 0.2, 0.3, 0.0, 0.0), 10.0, 0.01);
  CHECK_FALSE(tr.escaped);
  const Eigen::VectorXd& last = tr.states.back();
  CHECK(tr.times.back() == doctest::Approx(10.0));
  CHECK(last[0] == 0.1);
  CHECK(last[1] == doctest::Approx(0.2 - 1.5 * 10.0).epsilon(1e-13));
  CHECK(last[2] == doctest::Approx(0.3 - 3.0 * 10.0).epsilon(1e-13));
  CHECK(energy_drift(tr) < 1e-13);
  const Eigen::VectorXd rot = rotation_numbers(tr, 2, 1);
  CHECK(rot[0] == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(rot[1] == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("hyperbolic directions double in time ln 2") {
  const PoissonStructure S = structure();
  const Trajectory tr = integrate(linear_hyperbolic(1.0), S, state(0.0, 0.0, 0.0, 1e-3, 1e-3), std::log(2.0),
                                  std::log(2.0) / 1000.0);
  const Eigen::VectorXd& last = tr.states.back();
  CHECK(last[3] == doctest::Approx(2e-3).epsilon(1e-10));
  CHECK(last[4] == doctest::Approx(5e-4).epsilon(1e-10));
}

TEST_CASE("escape stops the integration and blocks rotation numbers") {
  const PoissonStructure S = structure();
  IntegrateOptions opt;
  opt.escape_radius = 1e-2;
  const Trajectory tr = integrate(linear_hyperbolic(1.0), S, state(0.0, 0.0, 0.0, 1e-3, 0.0), 20.0, 0.01, opt);
  CHECK(tr.escaped);
  // |z1| = 1e-3 e^t leaves the ball of radius 1e-2 around z1 = 1e-3 near t = ln 11
  CHECK(tr.escape_time == doctest::Approx(std::log(11.0)).epsilon(1e-2));
  CHECK_THROWS_AS(rotation_numbers(tr, 2, 1), DivergenceError);
}

TEST_CASE("RK4 error is fourth order") {
  const PoissonStructure S = structure();
  const Series H = linear_hyperbolic(1.0);
  auto err = [&](double dt) {
    const Trajectory tr = integrate(H, S, state(0.0, 0.0, 0.0, 1.0, 1.0), 1.0, dt);
    return std::abs(tr.states.back()[3] - std::exp(1.0));
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(std::log2(ratio) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("adaptive flow map matches the closed form") {
  const PoissonStructure S = structure();
  const FieldEvaluator X(vector_field(linear_hyperbolic(1.0), S).flattened());
  const Eigen::VectorXd q = flow_map(X, state(0.0, 0.1, 0.2, 0.3, 0.4), 1.0, 1e-13);
  CHECK(q[1] == doctest::Approx(0.1 - 1.0).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(0.2 - 2.0).epsilon(1e-12));
  CHECK(q[3] == doctest::Approx(0.3 * std::exp(1.0)).epsilon(1e-11));
  CHECK(q[4] == doctest::Approx(0.4 * std::exp(-1.0)).epsilon(1e-11));
}

TEST_CASE("identity embedding layout") {
  const Dims d{2, 1, 1};
  const auto e = identity_embedding(d, 4);
  REQUIRE(e.size() == 16u * 5u);
  // point (i, j) sits at (i * 4 + j) * 5; the last angle runs fastest
  const std::size_t at = (1 * 4 + 3) * 5;
  CHECK(e[at + 0] == 0.0);
  CHECK(e[at + 1] == doctest::Approx(2.0 * M_PI * 1.0 / 4.0));
  CHECK(e[at + 2] == doctest::Approx(2.0 * M_PI * 3.0 / 4.0));
  CHECK(e[at + 3] == 0.0);
}

TEST_CASE("the unperturbed torus is exactly invariant") {
  RunConfig cfg = preset_config("example1");
  ProblemInstance inst = make_instance(cfg, Eigen::VectorXd::Zero(1));
  inst.P = Series(inst.P.dims(), inst.P.d_max(), inst.P.k_max());
  const Series H = hamiltonian(inst);
  const Eigen::VectorXd w = inst.S.toral_frequency(inst.N.Omega);
  const auto emb = identity_embedding(inst.S.dims(), 32);
  const InvarianceReport rep = invariance_residual(emb, 32, w, H, inst.S);
  CHECK(rep.residual < 1e-13);
  // the residual sees a wrong frequency
  const InvarianceReport off = invariance_residual(emb, 32, w + Eigen::Vector2d(1e-3, 0.0), H, inst.S);
  CHECK(off.residual == doctest::Approx(1e-3).epsilon(1e-6));
  // the full Hamiltonian moves the identity torus by the perturbation's field
  const InvarianceReport pert = invariance_residual(emb, 32, w, hamiltonian(make_instance(cfg, Eigen::VectorXd::Zero(1))),
                                                    inst.S);
  CHECK(pert.residual > 1e-5);
}

TEST_CASE("coarse or aliased grids are rejected") {
  const PoissonStructure S = structure();
  const Series H = linear_hyperbolic(1.0);
  const Eigen::VectorXd w = S.toral_frequency(Eigen::VectorXd::Ones(1));
  InvarianceOptions opt;
  opt.min_grid = 64;
  CHECK_THROWS_AS(invariance_residual(identity_embedding(S.dims(), 16), 16, w, H, S, opt), Error);
  // a mode at 7 on a 16-point grid sits in the top quarter of the spectrum
  auto emb = identity_embedding(S.dims(), 16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) emb[static_cast<std::size_t>((i * 16 + j) * 5)] = 1e-3 * std::cos(7.0 * 2.0 * M_PI * j / 16.0);
  CHECK_THROWS_AS(invariance_residual(emb, 16, w, H, S), Error);
  CHECK_THROWS_AS(invariance_residual(emb, 15, w, H, S), Error);
}
