#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kamtori/config.hpp"
#include "kamtori/driver.hpp"
#include "kamtori/verify.hpp"

using namespace kamtori;

namespace {

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

}  // namespace

TEST_CASE("zero perturbation converges in zero steps") {
  ProblemInstance inst = make_instance(preset_config("example1"), Eigen::VectorXd::Zero(1));
  inst.P = Series(inst.P.dims(), inst.P.d_max(), inst.P.k_max());
  const TorusResult r = solve_torus(inst);
  CHECK(r.status == TorusStatus::converged);
  CHECK(r.steps == 0);
  CHECK(r.drift == 0.0);
  CHECK(r.log.empty());
}

TEST_CASE("example 1 converges with fixed frequency and an O(eps) embedding") {
  RunConfig cfg = preset_config("example1");
  DriverOptions opt;
  opt.embed_grid = 16;
  const TorusResult r = solve_torus(make_instance(cfg, Eigen::VectorXd::Zero(1)), opt);
  REQUIRE(r.status == TorusStatus::converged);
  CHECK(r.steps >= 1);
  CHECK(r.steps <= 8);
  CHECK(r.final_residual < cfg.numerics.tol_stop);
  CHECK(r.drift == 0.0);
  CHECK(r.omega_inf.isApprox(Eigen::Vector2d(-1.0, -kGolden)));
  CHECK(r.embedding.size() == 16u * 16u * 5u);  // phase points (y, x1, x2, z1, z2)
  CHECK(r.embedding_distance > 0.0);
  CHECK(r.embedding_distance < 10.0 * cfg.preset_params.at("eps"));
  for (std::size_t i = 1; i < r.diagnostics.size(); ++i) {
    CHECK(r.diagnostics[i].norm_P < r.diagnostics[i - 1].norm_P);
  }
  const auto gens = generators(r.log, cfg.numerics);
  CHECK(gens.size() == static_cast<std::size_t>(r.steps));
  const auto again = reconstruct_embedding(make_instance(cfg, Eigen::VectorXd::Zero(1)).S, gens, 16, opt);
  CHECK(again == r.embedding);
}

TEST_CASE("example 2 converges; the free action frequency drifts by at most 10 eps") {
  const RunConfig cfg = preset_config("example2");
  const TorusResult r = solve_torus(make_instance(cfg, Eigen::Vector2d(1.0, kGolden)));
  REQUIRE(r.status == TorusStatus::converged);
  CHECK(r.drift_components[0] == 0.0);
  CHECK(r.drift_components[1] == 0.0);
  CHECK(std::abs(r.drift_components[2]) <= 10.0 * cfg.preset_params.at("eps"));
  CHECK(std::abs(r.drift_components[2]) > 0.0);
}

TEST_CASE("resonant frequencies are sieved out") {
  RunConfig cfg = preset_config("example1");
  cfg.preset_params["beta"] = 1.0;
  const TorusResult r = solve_torus(make_instance(cfg, Eigen::VectorXd::Zero(1)));
  CHECK(r.status == TorusStatus::sieved_out);
  CHECK_FALSE(r.message.empty());
}

TEST_CASE("condition failures are reported, not iterated") {
  RunConfig cfg = preset_config("example1");
  ProblemInstance inst = make_instance(cfg, Eigen::VectorXd::Zero(1));
  inst.N.M = SeriesMatrix::constant(inst.S.dims(), Eigen::MatrixXd::Identity(2, 2), inst.N.M.k_max());
  const ConditionReport rep = check_conditions(inst);
  CHECK_FALSE(rep.hyperbolicity.pass);
  CHECK_FALSE(rep.pass);
  const TorusResult r = solve_torus(inst);
  CHECK(r.status == TorusStatus::check_failed);
  CHECK(r.steps == 0);
}

TEST_CASE("conditions of example 1") {
  const ConditionReport rep = check_conditions(make_instance(preset_config("example1"), Eigen::VectorXd::Zero(1)));
  CHECK(rep.pass);
  CHECK(rep.nd_pass);
  CHECK(std::abs(rep.eta.eta - 2.0 / (std::sqrt(432.0) + 12.0)) < 1e-12);
  CHECK(rep.mb.pass);
}

TEST_CASE("run over a grid keeps grid order and isolates failures") {
  RunConfig cfg = preset_config("example1");
  cfg.lambda.lo = {-0.2};
  cfg.lambda.hi = {0.2};
  cfg.lambda.grid = 3;
  const auto lambdas = lambda_points(cfg);
  REQUIRE(lambdas.size() == 3);
  const auto factory = make_factory(cfg);
  InstanceFactory flaky = [&](const Eigen::VectorXd& l) {
    if (l[0] > 0.1) throw DimensionError("boom");
    return factory(l);
  };
  const auto rs = run(flaky, lambdas);
  REQUIRE(rs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rs[i].lambda == lambdas[i]);
  CHECK(rs[0].status == TorusStatus::converged);
  CHECK(rs[1].status == TorusStatus::converged);
  CHECK(rs[2].status == TorusStatus::check_failed);
  CHECK(rs[2].message.find("boom") != std::string::npos);
}

TEST_CASE("lambda grid uses cell midpoints") {
  const auto g = lambda_grid(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, 3.0), 2);
  REQUIRE(g.size() == 4);
  CHECK(g[0].isApprox(Eigen::Vector2d(0.25, 1.5)));
  CHECK(g[3].isApprox(Eigen::Vector2d(0.75, 2.5)));
}

TEST_CASE("excluded measure scales linearly in gamma") {
  auto omega = [](const Eigen::VectorXd& l) { return Eigen::Vector2d(1.0, l[0]).eval(); };
  const std::vector<double> gammas{0.01, 0.02, 0.04, 0.08};
  const MeasureTable t = measure_excluded(omega, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0),
                                          gammas, 2.0, 30, 10000);
  CHECK(t.points == 10000);
  for (std::size_t i = 1; i < t.fractions.size(); ++i) CHECK(t.fractions[i] >= t.fractions[i - 1]);
  CHECK(t.slope >= 0.7);
  CHECK(t.slope <= 1.3);
  const MeasureTable mc = measure_excluded(omega, Eigen::VectorXd::Constant(1, 1.0),
                                           Eigen::VectorXd::Constant(1, 2.0), gammas, 2.0, 30, 10000, 7);
  for (std::size_t i = 0; i < gammas.size(); ++i) CHECK(std::abs(mc.fractions[i] - t.fractions[i]) < 0.03);
  const MeasureTable mc2 = measure_excluded(omega, Eigen::VectorXd::Constant(1, 1.0),
                                            Eigen::VectorXd::Constant(1, 2.0), gammas, 2.0, 30, 10000, 7);
  CHECK(mc2.fractions == mc.fractions);
}

TEST_CASE("a resonant frequency curve is fully excluded") {
  auto omega = [](const Eigen::VectorXd&) { return Eigen::Vector2d(1.0, 2.0).eval(); };
  const MeasureTable t = measure_excluded(omega, Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0),
                                          {0.01, 0.1}, 2.0, 5, 100);
  for (double f : t.fractions) CHECK(f == 1.0);
}
