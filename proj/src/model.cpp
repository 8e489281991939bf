#include "kamtori/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace kamtori {

// ---------------------------------------------------------------- SeriesMatrix

SeriesMatrix::SeriesMatrix(Dims dims, int rows, int cols, int k_max)
    : dims_(dims), rows_(rows), cols_(cols), k_max_(k_max) {
  if (rows < 0 || cols < 0) throw DimensionError("negative matrix shape");
  entries_.assign(static_cast<std::size_t>(rows * cols), Series(dims, 0, k_max));
}

SeriesMatrix SeriesMatrix::constant(Dims dims, const Eigen::MatrixXd& value, int k_max) {
  SeriesMatrix out(dims, static_cast<int>(value.rows()), static_cast<int>(value.cols()), k_max);
  for (int i = 0; i < out.rows_; ++i) {
    for (int j = 0; j < out.cols_; ++j) {
      if (value(i, j) != 0.0) out.at(i, j).add_term(Mode{}, 0, value(i, j));
    }
  }
  return out;
}

Eigen::MatrixXcd SeriesMatrix::mode(const Mode& k) const {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) out(i, j) = at(i, j).coeff(k, 0);
  }
  return out;
}

Eigen::MatrixXd SeriesMatrix::average() const { return mode(Mode{}).real(); }

std::vector<Mode> SeriesMatrix::support() const {
  std::set<Mode> modes;
  for (const auto& s : entries_) {
    for (const auto& [k, blk] : s.blocks()) modes.insert(k);
  }
  return {modes.begin(), modes.end()};
}

SeriesMatrix SeriesMatrix::transpose() const {
  SeriesMatrix out(dims_, cols_, rows_, k_max_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) out.at(j, i) = at(i, j);
  }
  return out;
}

bool SeriesMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i) {
    for (int j = i + 1; j < cols_; ++j) {
      if (coefficient_sum(subtract(at(i, j), at(j, i))) > tol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- NormalForm

void NormalForm::validate(const Dims& dims) const {
  const int l = dims.l;
  const int m2 = 2 * dims.m;
  if (Omega.size() != l) throw DimensionError("Omega must have l = " + std::to_string(l) + " entries");
  if (A.rows() != l || A.cols() != l) throw DimensionError("A must be l x l");
  if (B.rows() != l || B.cols() != m2) throw DimensionError("B must be l x 2m");
  if (M.rows() != m2 || M.cols() != m2) throw DimensionError("M must be 2m x 2m");
  if (!A.is_symmetric(1e-14)) throw DimensionError("A is not symmetric");
  if (!M.is_symmetric(1e-14)) throw DimensionError("M is not symmetric");
  if (!h.empty()) {
    if (!(h.dims() == dims)) throw DimensionError("h has the wrong dimensions");
    for (const auto& [k, blk] : h.blocks()) {
      for (std::size_t i = 0; i < blk.size(); ++i) {
        if (blk[i] != cplx{} && h.basis().degree(i) < 3) {
          throw DimensionError("h has a term of (y, z)-degree below 3");
        }
      }
    }
  }
}

namespace {

// Entry (a, b) of Mcal in the combined w = (y, z) indexing.
const Series& mcal_entry(const NormalForm& N, int l, int a, int b) {
  if (a < l && b < l) return N.A.at(a, b);
  if (a < l) return N.B.at(a, b - l);
  if (b < l) return N.B.at(b, a - l);
  return N.M.at(a - l, b - l);
}

std::size_t quadratic_index(const MonomialBasis& basis, int nvars, int a, int b) {
  std::vector<int> e(static_cast<std::size_t>(nvars), 0);
  ++e[static_cast<std::size_t>(a)];
  ++e[static_cast<std::size_t>(b)];
  return static_cast<std::size_t>(basis.index_of(e));
}

}  // namespace

Series normal_form_series(const NormalForm& N, Dims dims, int d_max, int K_max, double drop_tol) {
  N.validate(dims);
  if (d_max < 2) throw DimensionError("normal form needs d_max >= 2");
  Series out(dims, d_max, K_max, drop_tol);
  const MonomialBasis& basis = out.basis();
  const int l = dims.l;
  const int nv = dims.nvars();
  out.add_term(Mode{}, 0, N.e);
  for (int b = 0; b < l; ++b) {
    std::vector<int> e(static_cast<std::size_t>(nv), 0);
    e[static_cast<std::size_t>(b)] = 1;
    out.add_term(Mode{}, static_cast<std::size_t>(basis.index_of(e)), N.Omega[b]);
  }
  for (int a = 0; a < nv; ++a) {
    for (int b = 0; b < nv; ++b) {
      const Series& entry = mcal_entry(N, l, a, b);
      const std::size_t idx = quadratic_index(basis, nv, a, b);
      for (const auto& [k, blk] : entry.blocks()) out.add_term(k, idx, 0.5 * blk[0]);
    }
  }
  if (!N.h.empty()) {
    for (const auto& [k, blk] : N.h.blocks()) {
      for (std::size_t i = 0; i < blk.size(); ++i) {
        if (blk[i] != cplx{}) out.add_term(k, i, blk[i]);
      }
    }
  }
  out.prune();
  return out;
}

void quadratic_blocks(const Series& p, int K, SeriesMatrix& A, SeriesMatrix& B, SeriesMatrix& M) {
  const Dims d = p.dims();
  const int l = d.l;
  const int m2 = 2 * d.m;
  const int nv = d.nvars();
  A = SeriesMatrix(d, l, l, p.k_max());
  B = SeriesMatrix(d, l, m2, p.k_max());
  M = SeriesMatrix(d, m2, m2, p.k_max());
  if (p.d_max() < 2) return;
  const MonomialBasis& basis = p.basis();
  auto put = [&](int a, int b, const Mode& k, cplx v) {
    if (a < l && b < l) {
      A.at(a, b).add_term(k, 0, v);
    } else if (a < l) {
      B.at(a, b - l).add_term(k, 0, v);
    } else if (b >= l) {
      M.at(a - l, b - l).add_term(k, 0, v);
    }
  };
  for (int a = 0; a < nv; ++a) {
    for (int b = a; b < nv; ++b) {
      const std::size_t idx = quadratic_index(basis, nv, a, b);
      for (const auto& [k, blk] : p.blocks()) {
        if (k.l1() > K || blk[idx] == cplx{}) continue;
        if (a == b) {
          put(a, a, k, 2.0 * blk[idx]);
        } else {
          put(a, b, k, blk[idx]);
          put(b, a, k, blk[idx]);
        }
      }
    }
  }
}

// ---------------------------------------------------------------- checks

double condition_number(const Eigen::MatrixXd& X) {
  if (X.size() == 0) return 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv[0] / smin;
}

namespace {

Eigen::MatrixXd standard_J(int m) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  J.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  J.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
  return J;
}

double op_norm(const Eigen::MatrixXd& X) {
  if (X.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  return svd.singularValues()[0];
}

}  // namespace

HyperbolicityResult check_hyperbolicity(const Eigen::MatrixXd& M_avg, double sigma0) {
  if (M_avg.rows() != M_avg.cols() || M_avg.rows() % 2 != 0) {
    throw DimensionError("[M] must be square of even size");
  }
  const double scale = std::max(1.0, M_avg.cwiseAbs().maxCoeff());
  if ((M_avg - M_avg.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DimensionError("[M] is not symmetric");
  }
  HyperbolicityResult out;
  const int m = static_cast<int>(M_avg.rows() / 2);
  if (m == 0) {
    out.min_abs_re = std::numeric_limits<double>::infinity();
    out.pass = true;
    return out;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(standard_J(m) * M_avg);
  const auto ev = es.eigenvalues();
  out.spectrum.assign(ev.data(), ev.data() + ev.size());
  std::sort(out.spectrum.begin(), out.spectrum.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  out.min_abs_re = std::numeric_limits<double>::infinity();
  for (const auto& v : out.spectrum) out.min_abs_re = std::min(out.min_abs_re, std::abs(v.real()));
  out.pass = out.min_abs_re >= sigma0 - 1e-12;
  return out;
}

namespace {

void multi_indices(int dims, int max_order, int axis, std::vector<int>& cur,
                   std::vector<std::vector<int>>& out, int used) {
  if (axis == dims) {
    out.push_back(cur);
    return;
  }
  for (int p = 0; p + used <= max_order; ++p) {
    cur[static_cast<std::size_t>(axis)] = p;
    multi_indices(dims, max_order, axis + 1, cur, out, used + p);
  }
  cur[static_cast<std::size_t>(axis)] = 0;
}

double binomial(int p, int j) {
  double c = 1.0;
  for (int i = 1; i <= j; ++i) c = c * (p - j + i) / i;
  return c;
}

}  // namespace

RussmannResult check_russmann(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& omega,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                              const RussmannOptions& opt) {
  const auto kdim = static_cast<int>(lo.size());
  if (hi.size() != kdim || kdim == 0) throw DimensionError("parameter box bounds disagree");
  for (int i = 0; i < kdim; ++i) {
    if (!(hi[i] > lo[i])) throw Error("check_russmann: degenerate parameter box on axis " + std::to_string(i));
  }
  if (n < 1) throw DimensionError("n must be positive");
  std::vector<std::vector<int>> alphas;
  std::vector<int> cur(static_cast<std::size_t>(kdim), 0);
  multi_indices(kdim, n - 1, 0, cur, alphas, 0);

  const int g = std::max(1, opt.grid);
  std::vector<int> counter(static_cast<std::size_t>(kdim), 0);
  RussmannResult out;
  bool done = false;
  while (!done) {
    Eigen::VectorXd point(kdim);
    for (int i = 0; i < kdim; ++i) {
      const double t = g == 1 ? 0.5 : static_cast<double>(counter[i]) / (g - 1);
      point[i] = lo[i] + t * (hi[i] - lo[i]);
    }
    Eigen::MatrixXd stack(n, static_cast<Eigen::Index>(alphas.size()));
    for (std::size_t col = 0; col < alphas.size(); ++col) {
      const auto& alpha = alphas[col];
      // tensor product of central difference stencils
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
      std::vector<int> j(static_cast<std::size_t>(kdim), 0);
      while (true) {
        Eigen::VectorXd q = point;
        double w = 1.0;
        for (int i = 0; i < kdim; ++i) {
          const int p = alpha[i];
          if (p == 0) continue;
          const double h = opt.step * (hi[i] - lo[i]);
          q[i] += (0.5 * p - j[i]) * h;
          w *= ((j[i] % 2) ? -1.0 : 1.0) * binomial(p, j[i]) / std::pow(h, p);
        }
        const Eigen::VectorXd f = omega(q);
        if (f.size() != n) throw DimensionError("frequency map returned the wrong length");
        acc += w * f;
        int i = 0;
        while (i < kdim && j[i] == alpha[i]) {
          j[i] = 0;
          ++i;
        }
        if (i == kdim) break;
        ++j[i];
      }
      stack.col(static_cast<Eigen::Index>(col)) = acc;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
    const auto& sv = svd.singularValues();
    int rank = 0;
    if (sv.size() > 0 && sv[0] > 0.0) {
      for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > opt.rank_tol * sv[0] ? 1 : 0;
    }
    if (rank > out.max_rank || out.singular_values.empty()) {
      out.max_rank = std::max(out.max_rank, rank);
      out.singular_values.assign(sv.data(), sv.data() + sv.size());
    }
    int i = 0;
    while (i < kdim && counter[i] == g - 1) {
      counter[i] = 0;
      ++i;
    }
    if (i == kdim) {
      done = true;
    } else {
      ++counter[i];
    }
  }
  out.pass = out.max_rank == n;
  return out;
}

NdData check_nd(const Eigen::MatrixXd& A_avg, const Eigen::MatrixXd& B_avg,
                const Eigen::MatrixXd& M_avg, int n0, double cond_max) {
  const auto l = static_cast<int>(A_avg.rows());
  if (A_avg.cols() != l) throw DimensionError("[A] must be square");
  if (n0 < 1 || n0 > l) throw DimensionError("n0 must lie in [1, l]");
  if (B_avg.rows() != l || B_avg.cols() != M_avg.rows() || M_avg.rows() != M_avg.cols()) {
    throw DimensionError("[B] / [M] shapes disagree with [A]");
  }
  NdData nd;
  nd.n0 = n0;
  nd.U = A_avg.topLeftCorner(n0, n0);
  nd.D = A_avg.topRightCorner(n0, l - n0);
  nd.V = A_avg.bottomRightCorner(l - n0, l - n0);
  nd.cond_U = condition_number(nd.U);
  if (!(nd.cond_U < cond_max)) throw SingularError("the leading minor U of [A] is singular", nd.cond_U);
  Eigen::MatrixXd Uinv_pad = Eigen::MatrixXd::Zero(l, l);
  Uinv_pad.topLeftCorner(n0, n0) = nd.U.inverse();
  nd.Y = M_avg - B_avg.transpose() * Uinv_pad * B_avg;
  nd.cond_Y = condition_number(nd.Y);
  nd.pass = nd.cond_Y < cond_max;
  return nd;
}

EtaResult compute_eta(const NdData& nd, const Eigen::MatrixXd& M_avg, const Eigen::MatrixXd& B_avg,
                      double sigma0, int m) {
  if (!(sigma0 > 0.0)) throw Error("compute_eta: sigma0 must be positive");
  if (!std::isfinite(nd.cond_U)) throw SingularError("U is singular", nd.cond_U);
  if (!std::isfinite(nd.cond_Y)) throw SingularError("Y is singular", nd.cond_Y);
  const double nYi = nd.Y.size() == 0 ? 0.0 : op_norm(nd.Y.inverse());
  const double nUi = op_norm(nd.U.inverse());
  const double nB = op_norm(B_avg);
  const double nM = op_norm(M_avg);
  EtaResult out;
  out.alpha = (1.0 + 2.0 * m) * (nYi + nUi + nYi * nUi * (2.0 * nB + nB * nB * nUi));
  out.rho0 = (4.0 * m / sigma0) * std::pow(1.0 + (2.0 * m / sigma0) * nM, 2 * m - 1);
  out.eta = 2.0 / (std::sqrt(out.rho0 * out.rho0 + 4.0 * out.alpha * out.rho0) + out.rho0);
  return out;
}

namespace {

double deviation(const SeriesMatrix& X, double r) {
  if (X.rows() == 0 || X.cols() == 0) return 0.0;
  Eigen::MatrixXd G(X.rows(), X.cols());
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < X.cols(); ++j) {
      G(i, j) = sup_norm(subtract(X.at(i, j), average(X.at(i, j))), r, 1.0);
    }
  }
  return op_norm(G);
}

}  // namespace

MbResult check_mb(const SeriesMatrix& B, const SeriesMatrix& M, double eta, double r) {
  MbResult out;
  out.dev_B = deviation(B, r);
  out.dev_M = deviation(M, r);
  out.pass = out.dev_B < eta && out.dev_M < eta;
  return out;
}

}  // namespace kamtori
