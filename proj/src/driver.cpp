#include "kamtori/driver.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kamtori/evaluate.hpp"
#include "kamtori/homological.hpp"
#include "kamtori/kernels.hpp"
#include "kamtori/verify.hpp"

namespace kamtori {

std::string to_string(TorusStatus s) {
  switch (s) {
    case TorusStatus::converged: return "converged";
    case TorusStatus::sieved_out: return "sieved_out";
    case TorusStatus::diverged: return "diverged";
    case TorusStatus::check_failed: return "check_failed";
  }
  return "unknown";
}

ConditionReport check_conditions(const ProblemInstance& inst) {
  const Dims d = inst.S.dims();
  ConditionReport rep;
  const Eigen::MatrixXd A_avg = inst.N.A.average();
  const Eigen::MatrixXd B_avg = inst.N.B.average();
  const Eigen::MatrixXd M_avg = inst.N.M.average();
  rep.hyperbolicity = check_hyperbolicity(M_avg, inst.params.sigma0);
  rep.A_avg_cond = condition_number(A_avg);
  try {
    rep.nd = check_nd(A_avg, B_avg, M_avg, inst.n0);
    rep.nd_pass = rep.nd.pass;
    if (!rep.nd_pass) rep.nd_message = "Y = [M] - [B]^T U^-1 [B] is singular";
  } catch (const SingularError& e) {
    rep.nd_pass = false;
    rep.nd_message = e.what();
  }
  if (rep.nd_pass) {
    rep.eta = compute_eta(rep.nd, M_avg, B_avg, inst.params.sigma0, d.m);
    rep.mb = check_mb(inst.N.B, inst.N.M, rep.eta.eta, inst.params.r0);
  }
  rep.pass = rep.hyperbolicity.pass && rep.nd_pass;
  return rep;
}

// ---------------------------------------------------------------- embedding

namespace {

Series drop_small(const Series& F, double tol) {
  Series out = F;
  out.set_drop_tol(tol);
  out.prune();
  return out;
}

}  // namespace

double identity_distance(const std::vector<double>& emb, Dims d, int grid) {
  const std::vector<double> id = identity_embedding(d, grid);
  if (id.size() != emb.size()) throw DimensionError("embedding size does not match the grid");
  double worst = 0.0;
  for (std::size_t i = 0; i < emb.size(); ++i) worst = std::max(worst, std::abs(emb[i] - id[i]));
  return worst;
}

std::vector<Generator> generators(const std::vector<GeneratingData>& log, const KamParams& p) {
  std::vector<Generator> out;
  out.reserve(log.size());
  for (const GeneratingData& g : log) out.push_back({g.to_series(p.d_max, p.K_hard), g.y_star});
  return out;
}

std::vector<double> reconstruct_embedding(const PoissonStructure& S, const std::vector<Generator>& log, int grid,
                                          const DriverOptions& opt) {
  const Dims d = S.dims();
  std::vector<double> emb = identity_embedding(d, grid);
  if (log.empty()) return emb;
  std::vector<FieldEvaluator> flows;
  flows.reserve(log.size());
  for (const Generator& g : log) {
    if (!(g.F.dims() == d) || g.y_star.size() != d.l) throw DimensionError("generator does not match the structure");
    flows.emplace_back(vector_field(drop_small(g.F, opt.flow_drop), S).flattened());
  }
  const auto dim = static_cast<std::size_t>(d.phase_dim());
  const std::size_t count = emb.size() / dim;
  kernels::for_each_index(count, [&](std::size_t i) {
    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(emb.data() + i * dim, static_cast<Eigen::Index>(dim));
    for (std::size_t j = log.size(); j-- > 0;) {
      q.head(d.l) += log[j].y_star;
      q = flow_map(flows[j], q, 1.0, opt.flow_tol);
    }
    std::copy(q.data(), q.data() + dim, emb.data() + i * dim);
  });
  return emb;
}

// ---------------------------------------------------------------- iteration

TorusResult solve_torus(const ProblemInstance& inst, const DriverOptions& opt) {
  TorusResult res;
  res.lambda = inst.lambda;
  res.Omega0 = inst.N.Omega;
  res.Omega_inf = inst.N.Omega;
  res.omega_inf = inst.S.toral_frequency(inst.N.Omega);
  res.drift_components = Eigen::VectorXd::Zero(inst.N.Omega.size());
  res.N_inf = inst.N;
  const Dims d = inst.S.dims();

  if (opt.check) {
    const ConditionReport rep = check_conditions(inst);
    if (!rep.pass) {
      res.status = TorusStatus::check_failed;
      res.message = !rep.hyperbolicity.pass ? "hyperbolicity fails: min |Re| of the spectrum of J[M] is " +
                                                  std::to_string(rep.hyperbolicity.min_abs_re)
                                            : "ND fails: " + rep.nd_message;
      return res;
    }
  }

  KamState st;
  try {
    st = initial_state(inst);
    while (true) {
      res.final_residual = sup_norm(st.P, st.sch.r, st.sch.s);
      if (res.final_residual < inst.params.tol_stop) {
        // Even with nothing left to remove the torus frequency must pass the sieve.
        const SieveCheck sv = sieve(inst.S.toral_frequency(st.N.Omega), st.sch.gamma, inst.params.tau, st.sch.K);
        if (!sv.pass) throw SieveError("Diophantine condition violated at the final frequency");
        res.status = TorusStatus::converged;
        break;
      }
      if (st.nu >= inst.params.nu_max) {
        res.status = TorusStatus::diverged;
        res.message = "no convergence within nu_max = " + std::to_string(inst.params.nu_max) + " steps";
        break;
      }
      st = kam_step(st, inst);
    }
  } catch (const SieveError& e) {
    res.status = TorusStatus::sieved_out;
    res.message = e.what();
  } catch (const Error& e) {
    res.status = TorusStatus::diverged;
    res.message = e.what();
  }

  res.steps = st.nu;
  res.diagnostics = st.diagnostics;
  res.log = st.log;
  if (st.N.Omega.size() == inst.N.Omega.size()) {
    res.N_inf = st.N;
    res.P_inf = st.P;
    res.Omega_inf = st.N.Omega;
    res.omega_inf = inst.S.toral_frequency(st.N.Omega);
    res.drift_components = res.Omega_inf - res.Omega0;
    res.drift = res.drift_components.norm();
  }

  if (res.status == TorusStatus::converged && opt.embed_grid > 0) {
    try {
      res.embed_grid = opt.embed_grid;
      res.embedding = reconstruct_embedding(inst.S, generators(res.log, inst.params), opt.embed_grid, opt);
      res.embedding_distance = identity_distance(res.embedding, d, opt.embed_grid);
    } catch (const std::exception& e) {
      res.status = TorusStatus::diverged;
      res.message = std::string("embedding reconstruction failed: ") + e.what();
      res.embedding.clear();
      res.embed_grid = 0;
    }
  }
  return res;
}

std::vector<TorusResult> run(const InstanceFactory& factory, const std::vector<Eigen::VectorXd>& lambdas,
                             const DriverOptions& opt) {
  std::vector<TorusResult> out(lambdas.size());
  kernels::for_each_index(lambdas.size(), [&](std::size_t i) {
    try {
      out[i] = solve_torus(factory(lambdas[i]), opt);
    } catch (const std::exception& e) {
      // Instance construction failed: record it, keep sweeping.
      out[i].lambda = lambdas[i];
      out[i].status = TorusStatus::check_failed;
      out[i].message = e.what();
    }
  });
  return out;
}

// ---------------------------------------------------------------- measure

std::vector<Eigen::VectorXd> lambda_grid(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int per_axis) {
  if (lo.size() != hi.size()) throw DimensionError("lambda box bounds disagree in length");
  if (per_axis < 1) throw Error("lambda grid needs at least one point per axis");
  const auto dim = static_cast<int>(lo.size());
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(per_axis);
  std::vector<Eigen::VectorXd> out;
  out.reserve(total);
  for (std::size_t p = 0; p < total; ++p) {
    Eigen::VectorXd lam(dim);
    std::size_t rest = p;
    for (int a = dim - 1; a >= 0; --a) {
      const auto i = static_cast<double>(rest % static_cast<std::size_t>(per_axis));
      rest /= static_cast<std::size_t>(per_axis);
      lam[a] = lo[a] + (hi[a] - lo[a]) * (i + 0.5) / per_axis;
    }
    out.push_back(lam);
  }
  return out;
}

MeasureTable measure_excluded(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& omega,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              const std::vector<double>& gammas, double tau, int K, std::size_t points,
                              std::optional<std::uint64_t> seed) {
  if (points == 0) throw Error("measure_excluded needs at least one sample");
  std::vector<Eigen::VectorXd> lams;
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    lams.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
      Eigen::VectorXd lam(lo.size());
      for (Eigen::Index a = 0; a < lo.size(); ++a) lam[a] = lo[a] + (hi[a] - lo[a]) * unit(rng);
      lams.push_back(lam);
    }
  } else {
    const auto per_axis = static_cast<int>(std::ceil(std::pow(static_cast<double>(points), 1.0 / std::max<Eigen::Index>(lo.size(), 1)) - 1e-9));
    lams = lambda_grid(lo, hi, per_axis);
  }
  const Eigen::VectorXd w0 = omega(lams.front());
  const auto n = static_cast<int>(w0.size());
  std::vector<double> omegas(lams.size() * static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < lams.size(); ++i) {
    const Eigen::VectorXd w = omega(lams[i]);
    if (w.size() != n) throw DimensionError("frequency map changes dimension over the box");
    std::copy(w.data(), w.data() + n, omegas.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<Mode> modes;
  for (const Mode& k : modes_in_ball(n, K, false)) {
    if (is_representative(k)) modes.push_back(k);
  }

  MeasureTable out;
  out.points = lams.size();
  std::vector<std::uint8_t> excluded(lams.size());
  for (double g : gammas) {
    if (kernels::thread_count() > 1) {
      kernels::sieve_mask_parallel(omegas, n, modes, g, tau, excluded);
    } else {
      kernels::sieve_mask_serial(omegas, n, modes, g, tau, excluded);
    }
    std::size_t bad = 0;
    for (std::uint8_t e : excluded) bad += e;
    out.gammas.push_back(g);
    out.fractions.push_back(static_cast<double>(bad) / static_cast<double>(lams.size()));
  }
  // log-log least squares over the strictly positive fractions
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int cnt = 0;
  for (std::size_t i = 0; i < out.gammas.size(); ++i) {
    if (!(out.fractions[i] > 0.0) || !(out.gammas[i] > 0.0)) continue;
    const double x = std::log(out.gammas[i]);
    const double y = std::log(out.fractions[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  const double den = cnt * sxx - sx * sx;
  out.slope = cnt >= 2 && den != 0.0 ? (cnt * sxy - sx * sy) / den : 0.0;
  return out;
}

}  // namespace kamtori
