#include "kamtori/kamstep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kamtori {

// ---------------------------------------------------------------- parameters

int KamParams::minimal_a_star() {
  int a = 0;
  while (std::pow(10.0 / 9.0, a) <= 2.0) ++a;
  return a;
}

void KamParams::validate() const {
  if (!(gamma0 > 0.0)) throw ConfigError("gamma0 must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");
  if (d_max < 2) throw ConfigError("d_max must be at least 2");
  if (K_hard < 1 || K_fixed < 1) throw ConfigError("truncation orders must be positive");
  if (lie_order < 1) throw ConfigError("lie_order must be at least 1");
  if (nu_max < 0) throw ConfigError("nu_max must be non-negative");
  if (!(r0 > 0.0)) throw ConfigError("r0 must be positive");
  if (!(eps_clamp > 0.0 && eps_clamp < 1.0)) throw ConfigError("eps_clamp must lie in (0, 1)");
  if (!(tol_stop > 0.0) || !(tol_residual > 0.0)) throw ConfigError("tolerances must be positive");
  if (coeff_floor < 0.0) throw ConfigError("coeff_floor must be non-negative");
}

// ---------------------------------------------------------------- schedule

int truncation_order(double s, const KamParams& p) {
  if (p.K_policy == KPolicy::fixed) return std::min(p.K_fixed, p.K_hard);
  if (!(s > 0.0)) throw ScheduleError("truncation order needs s > 0");
  const double base = std::floor(std::log(1.0 / s)) + 1.0;
  const double expo = p.K_policy == KPolicy::log_power ? p.a_star + 2.0 : 3.0;
  const double K = std::pow(std::max(base, 1.0), expo);
  return static_cast<int>(std::min(K, static_cast<double>(p.K_hard)));
}

ScheduleUpdate update_params(const Schedule& cur, const KamParams& p, int n) {
  if (!(cur.s > 0.0)) throw ScheduleError("schedule undefined: s <= 0");
  if (!(cur.eps < 1.0)) throw ScheduleError("schedule undefined: eps >= 1");
  ScheduleUpdate out;
  out.next.eps = std::pow(cur.eps, 10.0 / 9.0);
  out.next.r = p.r0 / 4.0 + cur.r / 2.0;
  out.next.s = std::cbrt(cur.eps) * cur.s / 8.0;
  out.next.gamma = p.gamma0 / 4.0 + cur.gamma / 2.0;
  out.next.K = out.next.s > 0.0 ? truncation_order(out.next.s, p) : cur.K;
  const double gap = cur.r - out.next.r;
  if (cur.K >= 1 && gap > 0.0) {
    out.Gamma = gamma_sum(cur.K, n, p.tau, gap);
    out.zeta = std::pow(static_cast<double>(cur.K), n + 2) * out.Gamma * out.Gamma;
  }
  return out;
}

Schedule initial_schedule(const Series& P, int n, const KamParams& p, double* eps_measured) {
  Schedule sch;
  sch.r = p.r0;
  sch.gamma = p.gamma0;
  const double g1 = std::pow(p.gamma0, n + 1);
  auto measured = [&](double s) { return sup_norm(P, p.r0, s) / (g1 * s * s); };
  auto clamp = [&](double e) { return std::clamp(e, 1e-16, p.eps_clamp); };
  double s = p.s0;
  if (!(s > 0.0)) {
    s = std::pow(p.gamma0 / 2.0, n + 1);
    for (int round = 0; round < 3; ++round) {
      s = std::pow(p.gamma0 / 2.0, n + 1) * std::pow(clamp(measured(s)), 5.0 / 9.0);
    }
  }
  sch.s = s;
  const double e = measured(s);
  if (eps_measured) *eps_measured = e;
  sch.eps = clamp(e);
  sch.K = truncation_order(s, p);
  return sch;
}

// ---------------------------------------------------------------- Lie series

Truncated lie_transform(const Series& H, const Series& F, const PoissonStructure& S, int order, Caps caps) {
  if (order < 1) throw Error("lie_transform: order must be at least 1");
  Series sum = H.with_caps(caps.d_max, caps.K_max);
  Series term = sum;
  double last = 0.0;
  for (int j = 1; j <= order; ++j) {
    if (term.empty() || F.empty()) {
      last = 0.0;
      break;
    }
    Truncated b = bracket(term, F, S, caps);
    term = scale(b.value, 1.0 / j);
    sum = add(sum, term);
    last = coefficient_sum(term);
  }
  return {std::move(sum), last};
}

// ---------------------------------------------------------------- step

KamState initial_state(const ProblemInstance& inst) {
  inst.params.validate();
  const Dims d = inst.S.dims();
  inst.N.validate(d);
  if (!(inst.P.dims() == d)) throw DimensionError("perturbation dimensions do not match the structure");
  KamState st;
  st.N = inst.N;
  st.P = inst.P.with_caps(inst.params.d_max, inst.params.K_hard);
  st.P.set_drop_tol(std::max(st.P.drop_tol(), inst.params.coeff_floor));
  st.P.prune();
  st.sch = initial_schedule(st.P, d.n, inst.params);
  return st;
}

namespace {

std::size_t var_index(const MonomialBasis& basis, int nvars, int var) {
  std::vector<int> e(static_cast<std::size_t>(nvars), 0);
  e[static_cast<std::size_t>(var)] = 1;
  return static_cast<std::size_t>(basis.index_of(e));
}

// <Omega, y*> + <y*, A y> + <y*, B z>
Series translation_linear_part(const NormalForm& N, const Eigen::VectorXd& y_star, Dims d, int d_max,
                               int K_max) {
  Series out(d, d_max, K_max);
  const int nv = d.nvars();
  out.add_term(Mode{}, 0, N.Omega.dot(y_star));
  for (int a = 0; a < d.l; ++a) {
    if (y_star[a] == 0.0) continue;
    for (int b = 0; b < d.l; ++b) {
      for (const auto& [k, blk] : N.A.at(a, b).blocks()) {
        out.add_term(k, var_index(out.basis(), nv, b), y_star[a] * blk[0]);
      }
    }
    for (int c = 0; c < 2 * d.m; ++c) {
      for (const auto& [k, blk] : N.B.at(a, c).blocks()) {
        out.add_term(k, var_index(out.basis(), nv, d.l + c), y_star[a] * blk[0]);
      }
    }
  }
  out.prune();
  return out;
}

// Max over the targeted families; `Omega` (first n0 entries) is the expected
// value of the averaged y-linear coefficients, or null for zero.
double family_max(const Series& X, int K, int n0, const Eigen::VectorXd* Omega) {
  const Dims d = X.dims();
  const int nv = d.nvars();
  double worst = 0.0;
  for (const auto& [k, blk] : X.blocks()) {
    if (k.l1() > K) continue;
    if (!k.is_zero()) {
      worst = std::max(worst, std::abs(blk[0]));
      for (int v = 0; v < nv; ++v) worst = std::max(worst, std::abs(blk[var_index(X.basis(), nv, v)]));
    } else {
      for (int c = 0; c < 2 * d.m; ++c) {
        worst = std::max(worst, std::abs(blk[var_index(X.basis(), nv, d.l + c)]));
      }
      for (int b = 0; b < n0; ++b) {
        const double expect = Omega ? (*Omega)[b] : 0.0;
        worst = std::max(worst, std::abs(blk[var_index(X.basis(), nv, b)] - expect));
      }
    }
  }
  if (Omega && !X.blocks().count(Mode{})) {
    for (int b = 0; b < n0; ++b) worst = std::max(worst, std::abs((*Omega)[b]));
  }
  return worst;
}

double matrix_drift(const SeriesMatrix& X, const SeriesMatrix& X0, double r) {
  double worst = 0.0;
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < X.cols(); ++j) {
      worst = std::max(worst, sup_norm(subtract(X.at(i, j), X0.at(i, j)), r, 1.0));
    }
  }
  return worst;
}

SeriesMatrix merge_high_modes(const SeriesMatrix& fresh, const SeriesMatrix& old, int K) {
  SeriesMatrix out = fresh;
  for (int i = 0; i < old.rows(); ++i) {
    for (int j = 0; j < old.cols(); ++j) {
      for (const auto& [k, blk] : old.at(i, j).blocks()) {
        if (k.l1() > K) out.at(i, j).add_term(k, 0, blk[0]);
      }
    }
  }
  return out;
}

}  // namespace

double first_order_defect(const NormalForm& N, const Series& R, const GeneratingData& g,
                          const PoissonStructure& S, Caps caps, int n0) {
  const Dims d = S.dims();
  const Series Nser = normal_form_series(N, d, caps.d_max, caps.K_max);
  const Series F = g.to_series(caps.d_max, caps.K_max);
  Series X = add(Nser, R.with_caps(caps.d_max, caps.K_max));
  X = add(X, bracket(Nser, F, S, caps).value);
  X = add(X, translation_linear_part(N, g.y_star, d, caps.d_max, caps.K_max));
  return family_max(X, g.K, n0, &N.Omega);
}

double targeted_family_max(const Series& P, int K, int n0) { return family_max(P, K, n0, nullptr); }

KamState kam_step(const KamState& st, const ProblemInstance& inst) {
  const KamParams& p = inst.params;
  const PoissonStructure& S = inst.S;
  const Dims d = S.dims();
  const int K = st.sch.K;
  const Caps caps{p.d_max, p.K_hard};

  StepDiagnostics diag;
  diag.nu = st.nu;
  diag.sch = st.sch;
  diag.norm_P = sup_norm(st.P, st.sch.r, st.sch.s);
  diag.eps_measured = diag.norm_P / (std::pow(st.sch.gamma, d.n + 1) * st.sch.s * st.sch.s);

  const ScheduleUpdate upd = update_params(st.sch, p, d.n);
  diag.zeta = upd.zeta;
  diag.Gamma = upd.Gamma;

  const Eigen::VectorXd omega = S.toral_frequency(st.N.Omega);
  const SieveCheck sv = sieve(omega, st.sch.gamma, p.tau, K);
  diag.sieve_margin = sv.worst_margin;
  if (!sv.pass) {
    std::ostringstream msg;
    msg << "Diophantine condition violated at step " << st.nu << ": |<k,w>||k|^tau = " << sv.worst_margin
        << " <= gamma = " << st.sch.gamma << " for k = (";
    for (int a = 0; a < d.n; ++a) msg << (a ? ", " : "") << sv.worst_k.k[a];
    msg << ")";
    throw SieveError(msg.str());
  }
  const double gap = st.sch.r - upd.next.r;
  diag.h1 = h1_integral(K, d.n, gap);
  diag.H1 = diag.h1 <= st.sch.eps;

  const Series R = truncate_R(st.P, K);
  HomologicalProblem pb{&st.N, &R, inst.n0, omega, S.E(), K};
  HomologicalOptions hopt;
  hopt.coupling = p.coupling;
  hopt.dense_limit = p.dense_limit;
  const HomologicalSolution sol = assemble_and_solve(pb, hopt);
  diag.cond = sol.condition;
  diag.residual = sol.residual;
  diag.unknowns = sol.unknowns;
  diag.sparse = sol.sparse;
  if (!(sol.residual <= p.tol_residual)) {
    throw SingularError("homological back-substitution residual " + std::to_string(sol.residual) +
                            " above tolerance",
                        sol.condition);
  }
  const GeneratingData& g = sol.g;
  diag.y_star_norm = g.y_star.norm();
  diag.first_order_defect = first_order_defect(st.N, R, g, S, caps, inst.n0);

  // Transform.
  const Series F = g.to_series(p.d_max, p.K_hard, p.coeff_floor);
  const Series Nser = normal_form_series(st.N, d, p.d_max, p.K_hard, p.coeff_floor);
  const Series H = add(Nser, st.P);
  const Truncated L = lie_transform(H, F, S, p.lie_order, caps);
  diag.lie_tail = L.tail;
  Series Hp = taylor_shift_y(L.value, std::span<const double>(g.y_star.data(), g.y_star.size()));
  Hp.set_drop_tol(p.coeff_floor);

  // Read off the next normal form.
  KamState next;
  next.nu = st.nu + 1;
  next.sch = upd.next;
  next.N = st.N;
  next.N.e = Hp.coeff(Mode{}, 0).real();
  for (int b = inst.n0; b < d.l; ++b) {
    next.N.Omega[b] = Hp.coeff(Mode{}, var_index(Hp.basis(), d.nvars(), b)).real();
  }
  SeriesMatrix A, B, M;
  quadratic_blocks(Hp, K, A, B, M);
  next.N.A = merge_high_modes(A, st.N.A, K);
  next.N.B = merge_high_modes(B, st.N.B, K);
  next.N.M = merge_high_modes(M, st.N.M, K);
  const Series Nnext = normal_form_series(next.N, d, p.d_max, p.K_hard, p.coeff_floor);
  next.P = subtract(Hp, Nnext);
  next.P.set_drop_tol(p.coeff_floor);
  next.P.prune();

  diag.norm_Pplus = sup_norm(next.P, upd.next.r, upd.next.s);
  diag.terms_Pplus = next.P.term_count();
  diag.omega_drift = (S.toral_frequency(next.N.Omega) - omega).norm();

  // Hypothesis diagnostics with unit constants.
  const double n1 = d.n + 1.0;
  const double s = st.sch.s;
  const double e = st.sch.eps;
  const double ga = st.sch.gamma;
  const double sz = s * e * diag.zeta;
  diag.Delta = s * s * s * e * e * diag.zeta * diag.zeta + std::pow(ga, n1) * s * s * e * e * diag.zeta * diag.zeta +
               upd.next.s * s * s * e * diag.zeta;
  diag.H4 = sz < gap / 8.0 && sz < upd.next.s;
  diag.H5 = std::pow(ga, n1) * sz * std::pow(static_cast<double>(K), p.tau + 1.0) < ga - upd.next.gamma;
  diag.H6 = diag.Delta <= std::pow(upd.next.gamma, n1) * upd.next.s * upd.next.s * upd.next.eps;
  const double eps0 = st.diagnostics.empty() ? st.sch.eps : st.diagnostics.front().sch.eps;
  const double drift = std::max({matrix_drift(next.N.A, inst.N.A, st.sch.r), matrix_drift(next.N.B, inst.N.B, st.sch.r),
                                 matrix_drift(next.N.M, inst.N.M, st.sch.r)});
  diag.H2 = drift <= std::pow(eps0, 0.25);

  if (diag.norm_P > 0.0 && !(diag.norm_Pplus < diag.norm_P)) {
    std::ostringstream msg;
    msg << "step " << st.nu << " did not contract: |P+| = " << diag.norm_Pplus << " >= |P| = " << diag.norm_P;
    throw ContractionError(msg.str());
  }

  next.log = st.log;
  next.log.push_back(g);
  next.diagnostics = st.diagnostics;
  next.diagnostics.push_back(diag);
  return next;
}

}  // namespace kamtori
