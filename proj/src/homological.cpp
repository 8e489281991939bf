#include "kamtori/homological.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace kamtori {

// ---------------------------------------------------------------- GeneratingData

Series GeneratingData::to_series(int d_max, int K_max, double drop_tol) const {
  Series F(dims, std::max(d_max, 1), K_max, drop_tol);
  const MonomialBasis& basis = F.basis();
  const int nv = dims.nvars();
  auto linear_index = [&](int var) {
    std::vector<int> e(static_cast<std::size_t>(nv), 0);
    e[static_cast<std::size_t>(var)] = 1;
    return static_cast<std::size_t>(basis.index_of(e));
  };
  for (const auto& [k, c] : f0) F.add_term(k, 0, c);
  for (const auto& [k, v] : f1) {
    for (int b = 0; b < dims.l; ++b) F.add_term(k, linear_index(b), v[b]);
  }
  for (const auto& [k, v] : F1) {
    for (int c = 0; c < 2 * dims.m; ++c) F.add_term(k, linear_index(dims.l + c), v[c]);
  }
  for (int c = 0; c < F01.size(); ++c) F.add_term(Mode{}, linear_index(dims.l + c), F01[c]);
  F.prune();
  return F;
}

double GeneratingData::reality_defect() const {
  double worst = 0.0;
  for (const auto& [k, c] : f0) {
    auto it = f0.find(-k);
    worst = std::max(worst, std::abs((it == f0.end() ? cplx{} : it->second) - std::conj(c)));
  }
  auto vec_defect = [&worst](const std::map<Mode, Eigen::VectorXcd>& fam) {
    for (const auto& [k, v] : fam) {
      auto it = fam.find(-k);
      const Eigen::VectorXcd mirror = it == fam.end() ? Eigen::VectorXcd::Zero(v.size()) : it->second;
      worst = std::max(worst, (mirror - v.conjugate()).cwiseAbs().maxCoeff());
    }
  };
  vec_defect(f1);
  vec_defect(F1);
  return worst;
}

// ---------------------------------------------------------------- sieve

SieveCheck sieve(const Eigen::VectorXd& omega, double gamma, double tau, int K) {
  if (!(gamma > 0.0) || !(tau > 0.0)) throw Error("sieve: gamma and tau must be positive");
  SieveCheck out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  const auto n = static_cast<int>(omega.size());
  for (const Mode& k : modes_in_ball(n, K, false)) {
    if (!is_representative(k)) continue;
    const double kn = k.l1();
    const double margin = std::abs(dot(k, std::span<const double>(omega.data(), omega.size()))) *
                          std::pow(kn, tau);
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.worst_k = k;
    }
  }
  out.pass = out.worst_margin > gamma;
  return out;
}

// ---------------------------------------------------------------- assembly

namespace {

using Triplet = Eigen::Triplet<double>;

// Coefficients of the forcing series, per mode.
struct Forcing {
  std::map<Mode, cplx> P00;
  std::map<Mode, Eigen::VectorXcd> P10;  // l
  std::map<Mode, Eigen::VectorXcd> P01;  // 2m
  std::map<Mode, Eigen::VectorXcd> ey;   // l, coupling through f_k0
  std::map<Mode, Eigen::VectorXcd> ez;   // 2m
  std::map<Mode, cplx> f0;
  double scale = 0.0;
};

struct Context {
  const HomologicalProblem& pb;
  Dims d;
  int l;
  int m2;
  std::vector<Mode> all;   // 0 < |k| <= K
  std::vector<Mode> reps;  // representatives among them
  std::map<Mode, int> rep_index;
  std::vector<Mode> A_support;
  std::vector<Mode> B_support;
  std::vector<Mode> M_support;
  std::map<Mode, Eigen::MatrixXcd> A_modes, B_modes, MJ_modes, BJ_modes;
  Eigen::MatrixXd J;
  Forcing forcing;

  std::size_t off_F01() const { return reps.size() * static_cast<std::size_t>(2 * m2); }
  std::size_t off_Y() const { return off_F01() + static_cast<std::size_t>(m2); }
  std::size_t unknowns() const { return off_Y() + static_cast<std::size_t>(pb.n0); }

  double w(const Mode& k) const { return dot(k, std::span<const double>(pb.omega.data(), pb.omega.size())); }
  bool in_range(const Mode& j) const { return !j.is_zero() && j.l1() <= pb.K; }
};

Eigen::VectorXcd linear_coeffs(const Series& R, const Mode& k, int first_var, int count) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(count);
  const int nv = R.dims().nvars();
  std::vector<int> e(static_cast<std::size_t>(nv), 0);
  for (int i = 0; i < count; ++i) {
    e[static_cast<std::size_t>(first_var + i)] = 1;
    v[i] = R.coeff(k, static_cast<std::size_t>(R.basis().index_of(e)));
    e[static_cast<std::size_t>(first_var + i)] = 0;
  }
  return v;
}

Context make_context(const HomologicalProblem& pb, Coupling coupling) {
  if (!pb.N || !pb.R) throw Error("homological problem without normal form or truncation");
  const NormalForm& N = *pb.N;
  const Series& R = *pb.R;
  Context c{pb, R.dims(), R.dims().l, 2 * R.dims().m, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  if (pb.omega.size() != c.d.n) throw DimensionError("omega must have n entries");
  if (pb.n0 < 0 || pb.n0 > c.l) throw DimensionError("n0 out of range");
  if (R.d_max() < 1 && c.d.nvars() > 0) throw DimensionError("truncation needs degree >= 1");
  c.J = Eigen::MatrixXd::Zero(c.m2, c.m2);
  const int m = c.d.m;
  c.J.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  c.J.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);

  c.all = modes_in_ball(c.d.n, pb.K, false);
  for (const Mode& k : c.all) {
    if (is_representative(k)) {
      c.rep_index[k] = static_cast<int>(c.reps.size());
      c.reps.push_back(k);
    }
    if (c.w(k) == 0.0) {
      throw SieveError("exact resonance: <k, w> = 0 for a mode of order " + std::to_string(k.l1()));
    }
  }
  c.A_support = N.A.support();
  c.B_support = N.B.support();
  c.M_support = N.M.support();
  for (const Mode& q : c.A_support) c.A_modes[q] = N.A.mode(q);
  for (const Mode& q : c.B_support) {
    c.B_modes[q] = N.B.mode(q);
    c.BJ_modes[q] = c.B_modes[q] * c.J;
  }
  for (const Mode& q : c.M_support) c.MJ_modes[q] = N.M.mode(q) * c.J;

  Forcing& f = c.forcing;
  std::vector<Mode> with_zero = c.all;
  with_zero.push_back(Mode{});
  for (const Mode& k : with_zero) {
    f.P00[k] = R.coeff(k, 0);
    f.P10[k] = linear_coeffs(R, k, 0, c.l);
    f.P01[k] = linear_coeffs(R, k, c.l, c.m2);
    f.scale = std::max({f.scale, std::abs(f.P00[k]), f.P10[k].cwiseAbs().maxCoeff(),
                        c.m2 > 0 ? f.P01[k].cwiseAbs().maxCoeff() : 0.0});
    f.ey[k] = Eigen::VectorXcd::Zero(c.l);
    f.ez[k] = Eigen::VectorXcd::Zero(c.m2);
  }
  for (const Mode& k : c.all) f.f0[k] = f.P00[k] / cplx(0.0, c.w(k));
  if (coupling == Coupling::full) {
    // {1/2<y,Ay> + <y,Bz>, f_j0 e^{i<j,x>}} has y-coefficient A E (i j) f_j0 and
    // z-coefficient B^T E (i j) f_j0.
    for (const Mode& k : with_zero) {
      for (const Mode& q : c.A_support) {
        const Mode j = k - q;
        if (!c.in_range(j)) continue;
        Eigen::VectorXcd Ej = (pb.E * Eigen::Map<const Eigen::VectorXi>(j.k.data(), c.d.n).cast<double>())
                                  .cast<cplx>();
        f.ey[k] += c.A_modes[q] * Ej * (cplx(0.0, 1.0) * f.f0[j]);
      }
      for (const Mode& q : c.B_support) {
        const Mode j = k - q;
        if (!c.in_range(j)) continue;
        Eigen::VectorXcd Ej = (pb.E * Eigen::Map<const Eigen::VectorXi>(j.k.data(), c.d.n).cast<double>())
                                  .cast<cplx>();
        f.ez[k] += c.B_modes[q].transpose() * Ej * (cplx(0.0, 1.0) * f.f0[j]);
      }
    }
  }
  for (const Mode& k : with_zero) {
    f.scale = std::max({f.scale, f.ey[k].cwiseAbs().maxCoeff(),
                        c.m2 > 0 ? f.ez[k].cwiseAbs().maxCoeff() : 0.0});
  }
  return c;
}

struct System {
  std::vector<Triplet> triplets;
  Eigen::VectorXd rhs;
  std::size_t size = 0;
};

// Adds C * Ftilde_j to the equation rows starting at `row`. With `complex_rows`
// the real parts go to rows [row, row + C.rows()) and the imaginary parts to
// the following C.rows() rows; otherwise only the real parts are kept.
void add_block(const Context& c, System& s, std::size_t row, bool complex_rows,
               const Eigen::MatrixXcd& C, const Mode& j) {
  const auto rows = static_cast<std::size_t>(C.rows());
  auto put = [&s](std::size_t r, std::size_t col, double v) {
    if (v != 0.0) s.triplets.emplace_back(static_cast<int>(r), static_cast<int>(col), v);
  };
  if (j.is_zero()) {
    const std::size_t col = c.off_F01();
    for (std::size_t r = 0; r < rows; ++r) {
      for (int q = 0; q < C.cols(); ++q) {
        put(row + r, col + q, C(r, q).real());
        if (complex_rows) put(row + rows + r, col + q, C(r, q).imag());
      }
    }
    return;
  }
  const bool rep = is_representative(j);
  const int idx = c.rep_index.at(rep ? j : -j);
  const std::size_t col_a = static_cast<std::size_t>(idx) * static_cast<std::size_t>(2 * c.m2);
  const std::size_t col_b = col_a + static_cast<std::size_t>(c.m2);
  const double sb = rep ? 1.0 : -1.0;  // F_{-p} = a_p - i b_p
  for (std::size_t r = 0; r < rows; ++r) {
    for (int q = 0; q < C.cols(); ++q) {
      const double re = C(r, q).real();
      const double im = C(r, q).imag();
      put(row + r, col_a + q, re);
      put(row + r, col_b + q, -sb * im);
      if (complex_rows) {
        put(row + rows + r, col_a + q, im);
        put(row + rows + r, col_b + q, sb * re);
      }
    }
  }
}

System assemble(const Context& c) {
  System s;
  s.size = c.unknowns();
  s.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.size));
  const int m2 = c.m2;
  const int n0 = c.pb.n0;
  const Forcing& f = c.forcing;
  const cplx I(0.0, 1.0);

  // z-equations for representative modes:
  //   i<k,w> F_k - sum_j M_{k-j} J F_j - B_k^T y* = P_k01 + ez_k
  for (std::size_t r = 0; r < c.reps.size(); ++r) {
    const Mode& k = c.reps[r];
    const std::size_t row = r * static_cast<std::size_t>(2 * m2);
    add_block(c, s, row, true, (I * c.w(k)) * Eigen::MatrixXcd::Identity(m2, m2), k);
    for (const Mode& q : c.M_support) {
      const Mode j = k - q;
      if (!j.is_zero() && !c.in_range(j)) continue;
      add_block(c, s, row, true, -c.MJ_modes.at(q), j);
    }
    auto itB = c.B_modes.find(k);
    if (itB != c.B_modes.end()) {
      const Eigen::MatrixXcd Bt = itB->second.transpose();
      for (int a = 0; a < m2; ++a) {
        for (int b = 0; b < n0; ++b) {
          const auto col = static_cast<int>(c.off_Y()) + b;
          if (Bt(a, b).real() != 0.0) s.triplets.emplace_back(static_cast<int>(row) + a, col, -Bt(a, b).real());
          if (Bt(a, b).imag() != 0.0) s.triplets.emplace_back(static_cast<int>(row) + m2 + a, col, -Bt(a, b).imag());
        }
      }
    }
    const Eigen::VectorXcd rhs = f.P01.at(k) + f.ez.at(k);
    for (int a = 0; a < m2; ++a) {
      s.rhs[static_cast<Eigen::Index>(row) + a] = rhs[a].real();
      s.rhs[static_cast<Eigen::Index>(row) + m2 + a] = rhs[a].imag();
    }
  }

  // Averaged z-equation: -sum_j M_{-j} J F_j - [B]^T y* = P_001 + ez_0
  {
    const std::size_t row = c.off_F01();
    for (const Mode& q : c.M_support) {
      const Mode j = -q;
      if (!j.is_zero() && !c.in_range(j)) continue;
      add_block(c, s, row, false, -c.MJ_modes.at(q), j);
    }
    auto itB = c.B_modes.find(Mode{});
    if (itB != c.B_modes.end()) {
      for (int a = 0; a < m2; ++a) {
        for (int b = 0; b < n0; ++b) {
          const double v = -itB->second(b, a).real();
          if (v != 0.0) s.triplets.emplace_back(static_cast<int>(row) + a, static_cast<int>(c.off_Y()) + b, v);
        }
      }
    }
    const Eigen::VectorXcd rhs = f.P01.at(Mode{}) + f.ez.at(Mode{});
    for (int a = 0; a < m2; ++a) s.rhs[static_cast<Eigen::Index>(row) + a] = rhs[a].real();
  }

  // First n0 rows of the averaged y-equation:
  //   [A] y* + sum_j B_{-j} J F_j = -P_010 - ey_0
  if (n0 > 0) {
    const std::size_t row = c.off_Y();
    for (const Mode& q : c.B_support) {
      const Mode j = -q;
      if (!j.is_zero() && !c.in_range(j)) continue;
      add_block(c, s, row, false, c.BJ_modes.at(q).topRows(n0), j);
    }
    auto itA = c.A_modes.find(Mode{});
    if (itA != c.A_modes.end()) {
      for (int a = 0; a < n0; ++a) {
        for (int b = 0; b < n0; ++b) {
          const double v = itA->second(a, b).real();
          if (v != 0.0) s.triplets.emplace_back(static_cast<int>(row) + a, static_cast<int>(c.off_Y()) + b, v);
        }
      }
    }
    const Eigen::VectorXcd rhs = -(f.P10.at(Mode{}) + f.ey.at(Mode{}));
    for (int a = 0; a < n0; ++a) s.rhs[static_cast<Eigen::Index>(row) + a] = rhs[a].real();
  }
  return s;
}

// sum_j X_{k-j} J Ftilde_j over the support of X (already multiplied by J).
Eigen::VectorXcd coupled_sum(const Context& c, const std::map<Mode, Eigen::MatrixXcd>& XJ,
                             const std::vector<Mode>& support, const GeneratingData& g, const Mode& k,
                             int rows) {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(rows);
  for (const Mode& q : support) {
    const Mode j = k - q;
    if (j.is_zero()) {
      acc += XJ.at(q) * g.F01.cast<cplx>();
    } else if (c.in_range(j)) {
      acc += XJ.at(q) * g.F1.at(j);
    }
  }
  return acc;
}

Eigen::VectorXcd A_times_y(const Context& c, const Mode& k, const Eigen::VectorXd& y) {
  auto it = c.A_modes.find(k);
  if (it == c.A_modes.end()) return Eigen::VectorXcd::Zero(c.l);
  return it->second * y.cast<cplx>();
}

Eigen::VectorXcd Bt_times_y(const Context& c, const Mode& k, const Eigen::VectorXd& y) {
  auto it = c.B_modes.find(k);
  if (it == c.B_modes.end()) return Eigen::VectorXcd::Zero(c.m2);
  return it->second.transpose() * y.cast<cplx>();
}

// Hager's estimate of ||A^{-1}||_1 using solves with A and A^T.
template <class Solve, class SolveT>
double inverse_norm1_estimate(std::size_t n, Solve solve, SolveT solve_t) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  double est = 0.0;
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd y = solve(x);
    est = y.lpNorm<1>();
    const Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    const Eigen::VectorXd z = solve_t(xi);
    Eigen::Index jmax = 0;
    const double zmax = z.cwiseAbs().maxCoeff(&jmax);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x[jmax] = 1.0;
  }
  return est;
}

}  // namespace

HomologicalSolution assemble_and_solve(const HomologicalProblem& pb, const HomologicalOptions& opt) {
  const Context c = make_context(pb, opt.coupling);
  const System s = assemble(c);
  HomologicalSolution out;
  out.unknowns = s.size;
  const auto n = static_cast<Eigen::Index>(s.size);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n > 0) {
    if (s.size <= opt.dense_limit) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
      for (const auto& t : s.triplets) A(t.row(), t.col()) += t.value();
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
      const double rc = lu.rcond();
      out.condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
      if (!(out.condition < opt.cond_max)) {
        throw SingularError("homological system is singular", out.condition);
      }
      x = lu.solve(s.rhs);
    } else {
      Eigen::SparseMatrix<double> A(n, n);
      A.setFromTriplets(s.triplets.begin(), s.triplets.end());
      A.makeCompressed();
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(A);
      if (lu.info() != Eigen::Success) {
        throw SingularError("homological system is singular", std::numeric_limits<double>::infinity());
      }
      double norm1 = 0.0;
      for (Eigen::Index col = 0; col < A.outerSize(); ++col) {
        double sum = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it) sum += std::abs(it.value());
        norm1 = std::max(norm1, sum);
      }
      const double inv = inverse_norm1_estimate(
          s.size, [&](const Eigen::VectorXd& b) { return Eigen::VectorXd(lu.solve(b)); },
          [&](const Eigen::VectorXd& b) { return Eigen::VectorXd(lu.transpose().solve(b)); });
      out.condition = norm1 * inv;
      if (!(out.condition < opt.cond_max)) {
        throw SingularError("homological system is singular", out.condition);
      }
      x = lu.solve(s.rhs);
      out.sparse = true;
    }
  }

  GeneratingData& g = out.g;
  g.dims = c.d;
  g.K = pb.K;
  g.n0 = pb.n0;
  g.F01 = x.segment(static_cast<Eigen::Index>(c.off_F01()), c.m2);
  g.y_star = Eigen::VectorXd::Zero(c.l);
  g.y_star.head(pb.n0) = x.segment(static_cast<Eigen::Index>(c.off_Y()), pb.n0);
  for (std::size_t r = 0; r < c.reps.size(); ++r) {
    const auto base = static_cast<Eigen::Index>(r * static_cast<std::size_t>(2 * c.m2));
    Eigen::VectorXcd F(c.m2);
    for (int a = 0; a < c.m2; ++a) F[a] = cplx(x[base + a], x[base + c.m2 + a]);
    g.F1[c.reps[r]] = F;
    g.F1[-c.reps[r]] = F.conjugate();
  }
  const Forcing& f = c.forcing;
  for (const Mode& k : c.reps) {
    const cplx iw(0.0, c.w(k));
    g.f0[k] = f.f0.at(k);
    g.f0[-k] = std::conj(g.f0[k]);
    const Eigen::VectorXcd rhs = f.P10.at(k) + A_times_y(c, k, g.y_star) +
                                 coupled_sum(c, c.BJ_modes, c.B_support, g, k, c.l) + f.ey.at(k);
    g.f1[k] = rhs / iw;
    g.f1[-k] = g.f1[k].conjugate();
  }
  out.residual = residual_check(g, pb, opt.coupling);
  return out;
}

double residual_check(const GeneratingData& g, const HomologicalProblem& pb, Coupling coupling) {
  const Context c = make_context(pb, coupling);
  const Forcing& f = c.forcing;
  const cplx I(0.0, 1.0);
  double worst = 0.0;
  auto vnorm = [](const Eigen::VectorXcd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); };
  auto lookup = [](const std::map<Mode, Eigen::VectorXcd>& fam, const Mode& k, int size) {
    auto it = fam.find(k);
    return it == fam.end() ? Eigen::VectorXcd(Eigen::VectorXcd::Zero(size)) : it->second;
  };
  GeneratingData full = g;
  for (const Mode& k : c.all) {
    if (!full.F1.count(k)) full.F1[k] = Eigen::VectorXcd::Zero(c.m2);
  }
  if (full.F01.size() != c.m2) full.F01 = Eigen::VectorXd::Zero(c.m2);
  if (full.y_star.size() != c.l) full.y_star = Eigen::VectorXd::Zero(c.l);
  const Eigen::VectorXd& ys = full.y_star;

  for (const Mode& k : c.all) {
    const cplx iw = I * c.w(k);
    auto it0 = g.f0.find(k);
    const cplx f0 = it0 == g.f0.end() ? cplx{} : it0->second;
    worst = std::max(worst, std::abs(iw * f0 - f.P00.at(k)));
    const Eigen::VectorXcd r1 = iw * lookup(g.f1, k, c.l) -
                                (f.P10.at(k) + A_times_y(c, k, ys) +
                                 coupled_sum(c, c.BJ_modes, c.B_support, full, k, c.l) + f.ey.at(k));
    worst = std::max(worst, vnorm(r1));
    const Eigen::VectorXcd r3 = iw * full.F1.at(k) - coupled_sum(c, c.MJ_modes, c.M_support, full, k, c.m2) -
                                Bt_times_y(c, k, ys) - f.P01.at(k) - f.ez.at(k);
    worst = std::max(worst, vnorm(r3));
  }
  const Mode zero{};
  const Eigen::VectorXcd r4 = coupled_sum(c, c.MJ_modes, c.M_support, full, zero, c.m2) +
                              Bt_times_y(c, zero, ys) + f.P01.at(zero) + f.ez.at(zero);
  worst = std::max(worst, vnorm(r4));
  if (pb.n0 > 0) {
    const Eigen::VectorXcd r5 = A_times_y(c, zero, ys) + coupled_sum(c, c.BJ_modes, c.B_support, full, zero, c.l) +
                                f.P10.at(zero) + f.ey.at(zero);
    worst = std::max(worst, vnorm(r5.head(pb.n0)));
  }
  return f.scale > 0.0 ? worst / f.scale : worst;
}

void dump_system(const HomologicalProblem& pb, const HomologicalOptions& opt, const std::string& path) {
  const Context c = make_context(pb, opt.coupling);
  const System s = assemble(c);
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << std::setprecision(17);
  os << "# size " << s.size << " nnz " << s.triplets.size() << "\n";
  for (const auto& t : s.triplets) os << t.row() << ' ' << t.col() << ' ' << t.value() << '\n';
  os << "# rhs\n";
  for (Eigen::Index i = 0; i < s.rhs.size(); ++i) os << i << ' ' << s.rhs[i] << '\n';
}

}  // namespace kamtori
