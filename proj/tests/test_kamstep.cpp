#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kamtori/config.hpp"
#include "kamtori/kamstep.hpp"
#include "kamtori/verify.hpp"
#include "test_support.hpp"

using namespace kamtori;

namespace {

ProblemInstance example1(double z_coupling = 0.0) {
  RunConfig cfg = preset_config("example1");
  cfg.preset_params["z_coupling"] = z_coupling;
  return make_instance(cfg, Eigen::VectorXd::Zero(1));
}

Eigen::VectorXd to_state(const testing::Point& p) {
  Eigen::VectorXd v(p.y.size() + p.x.size() + p.z.size());
  Eigen::Index i = 0;
  for (double a : p.y) v[i++] = a;
  for (double a : p.x) v[i++] = a;
  for (double a : p.z) v[i++] = a;
  return v;
}

testing::Point from_state(const Eigen::VectorXd& v, Dims d) {
  testing::Point p;
  Eigen::Index i = 0;
  for (int b = 0; b < d.l; ++b) p.y.push_back(v[i++]);
  for (int a = 0; a < d.n; ++a) p.x.push_back(v[i++]);
  for (int c = 0; c < 2 * d.m; ++c) p.z.push_back(v[i++]);
  return p;
}

}  // namespace

TEST_CASE("minimal a* is 7") {
  CHECK(KamParams::minimal_a_star() == 7);
  CHECK(std::pow(10.0 / 9.0, 7) > 2.0);
  CHECK(std::pow(10.0 / 9.0, 6) <= 2.0);
  CHECK(KamParams{}.a_star == 7);
}

TEST_CASE("truncation order policies") {
  KamParams p;
  CHECK(truncation_order(0.5, p) == 1);                  // [ln 2] + 1 = 1
  CHECK(truncation_order(std::exp(-1.5), p) == 32);      // 2^9 capped at 32
  p.K_hard = 1000;
  CHECK(truncation_order(std::exp(-1.5), p) == 512);
  p.K_policy = KPolicy::log_cubic;
  CHECK(truncation_order(std::exp(-2.5), p) == 27);
  p.K_policy = KPolicy::fixed;
  p.K_fixed = 12;
  CHECK(truncation_order(1e-9, p) == 12);
  p.K_policy = KPolicy::log_power;
  CHECK_THROWS_AS(truncation_order(0.0, p), ScheduleError);
}

TEST_CASE("schedule: recursions, limits and telescoping gaps") {
  KamParams p;
  Schedule s{0.3, p.r0, 0.01, p.gamma0, 8};
  double gaps = 0.0;
  Schedule cur = s;
  for (int nu = 0; nu < 60 && cur.s > 1e-300; ++nu) {
    const ScheduleUpdate u = update_params(cur, p, 2);
    CHECK(u.next.eps == doctest::Approx(std::pow(cur.eps, 10.0 / 9.0)));
    CHECK(u.next.s == doctest::Approx(std::cbrt(cur.eps) * cur.s / 8.0));
    CHECK(u.next.r < cur.r);
    CHECK(u.next.gamma < cur.gamma);
    gaps += cur.r - u.next.r;
    cur = u.next;
  }
  CHECK(cur.r == doctest::Approx(p.r0 / 2.0).epsilon(1e-9));
  CHECK(cur.gamma == doctest::Approx(p.gamma0 / 2.0).epsilon(1e-9));
  CHECK(gaps == doctest::Approx(p.r0 / 2.0).epsilon(1e-9));
  const ScheduleUpdate first = update_params(s, p, 2);
  CHECK(first.Gamma > 0.0);
  CHECK(first.zeta == doctest::Approx(std::pow(8.0, 4) * first.Gamma * first.Gamma));
  CHECK_THROWS_AS(update_params(Schedule{0.3, 0.5, 0.0, 0.05, 1}, p, 2), ScheduleError);
  CHECK_THROWS_AS(update_params(Schedule{1.0, 0.5, 0.1, 0.05, 1}, p, 2), ScheduleError);
}

TEST_CASE("initial schedule is self-consistent and clamps eps") {
  const ProblemInstance inst = example1();
  double measured = 0.0;
  const Schedule s = initial_schedule(inst.P, 2, inst.params, &measured);
  CHECK(s.r == inst.params.r0);
  CHECK(s.gamma == inst.params.gamma0);
  CHECK(s.eps == std::min(measured, inst.params.eps_clamp));
  CHECK(s.s > 0.0);
  CHECK(s.K == truncation_order(s.s, inst.params));
}

TEST_CASE("zero perturbation is a fixed point of the step") {
  ProblemInstance inst = example1();
  inst.P = Series(inst.P.dims(), inst.P.d_max(), inst.P.k_max());
  const KamState st = initial_state(inst);
  const KamState next = kam_step(st, inst);
  CHECK(next.P.empty());
  CHECK(next.N.Omega == inst.N.Omega);
  CHECK(next.N.e == inst.N.e);
  CHECK(next.diagnostics.back().norm_Pplus == 0.0);
}

TEST_CASE("one step on example 1 contracts superlinearly and cancels the targeted families") {
  const ProblemInstance inst = example1(1.0);
  const KamState st = initial_state(inst);
  const KamState next = kam_step(st, inst);
  const StepDiagnostics& d = next.diagnostics.back();
  CHECK(d.residual < 1e-10);
  CHECK(d.norm_Pplus < 1e-2 * d.norm_P);
  CHECK(d.norm_Pplus < std::pow(d.norm_P, 1.3));
  CHECK(d.first_order_defect <= 1e-8 * d.norm_P);
  // with n0 = l the frequency is held fixed
  CHECK(next.N.Omega == inst.N.Omega);
  CHECK(d.omega_drift == 0.0);
  CHECK(next.log.size() == 1);
  CHECK(next.nu == 1);
}

TEST_CASE("example 2: the unconstrained action frequency drifts by O(eps)") {
  const RunConfig cfg = preset_config("example2");
  const ProblemInstance inst = make_instance(cfg, Eigen::Vector2d(1.0, (1.0 + std::sqrt(5.0)) / 2.0));
  const KamState st = initial_state(inst);
  const KamState next = kam_step(st, inst);
  CHECK(next.N.Omega[0] == inst.N.Omega[0]);
  CHECK(next.N.Omega[1] == inst.N.Omega[1]);
  CHECK(std::abs(next.N.Omega[2] - inst.N.Omega[2]) <= 10.0 * cfg.preset_params.at("eps"));
  CHECK(next.diagnostics.back().norm_Pplus < next.diagnostics.back().norm_P);
}

TEST_CASE("Lie series equals composition with the time-1 flow") {
  std::mt19937_64 rng(31);
  const Dims d{2, 1, 1};
  const PoissonStructure S = testing::random_structure(rng, d);
  const Series H = testing::random_series(rng, d, 2, 2, 2, 2, 10);
  const Series F = testing::random_series(rng, d, 1, 2, 1, 2, 6, true, 0.05);
  const Truncated L = lie_transform(H, F, S, 10, Caps{4, 40});
  CHECK(L.tail < 1e-10);
  const FieldEvaluator XF(vector_field(F, S).flattened());
  for (int rep = 0; rep < 5; ++rep) {
    const auto p = testing::random_point(rng, d, 0.3);
    const Eigen::VectorXd q = flow_map(XF, to_state(p), 1.0, 1e-13);
    const double expect = testing::brute_evaluate(H, from_state(q, d)).real();
    CHECK(testing::brute_evaluate(L.value, p).real() == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("parameter validation") {
  KamParams p;
  CHECK_NOTHROW(p.validate());
  p.eps_clamp = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = KamParams{};
  p.d_max = 1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
