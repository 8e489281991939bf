#include "kamtori/structure.hpp"

#include <cmath>
#include <string>

namespace kamtori {

PoissonStructure::PoissonStructure(Eigen::MatrixXd E, Eigen::MatrixXd C, int m)
    : E_(std::move(E)), C_(std::move(C)) {
  const auto l = static_cast<int>(E_.rows());
  const auto n = static_cast<int>(E_.cols());
  if (C_.rows() != n || C_.cols() != n) {
    throw DimensionError("C must be n x n with n = columns of E (" + std::to_string(n) + ")");
  }
  if (m < 0) throw DimensionError("m must be non-negative");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (C_(i, j) != -C_(j, i)) {
        throw DimensionError("C is not antisymmetric at entry (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
      }
    }
  }
  dims_ = Dims{n, l, m};
}

Eigen::MatrixXd PoissonStructure::J() const {
  const int m = dims_.m;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  J.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  J.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
  return J;
}

Eigen::MatrixXd PoissonStructure::tilde_I() const {
  const int n = dims_.n;
  const int l = dims_.l;
  const int m2 = 2 * dims_.m;
  Eigen::MatrixXd I = Eigen::MatrixXd::Zero(l + n + m2, l + n + m2);
  I.block(0, l, l, n) = E_;
  I.block(l, 0, n, l) = -E_.transpose();
  I.block(l, l, n, n) = C_;
  I.block(l + n, l + n, m2, m2) = J();
  return I;
}

Eigen::VectorXd PoissonStructure::toral_frequency(const Eigen::VectorXd& Omega) const {
  if (Omega.size() != dims_.l) throw DimensionError("Omega must have l entries");
  return -E_.transpose() * Omega;
}

std::vector<Series> VectorField::flattened() const {
  std::vector<Series> out;
  out.insert(out.end(), ydot.begin(), ydot.end());
  out.insert(out.end(), xdot.begin(), xdot.end());
  out.insert(out.end(), zdot.begin(), zdot.end());
  return out;
}

namespace {

void require_dims(const Series& f, const PoissonStructure& S) {
  if (!(f.dims() == S.dims())) throw DimensionError("series dimensions do not match the structure");
}

Series zero_like(const Series& f) { return Series(f.dims(), f.d_max(), f.k_max(), f.drop_tol()); }

// sum_i w[i] * parts[i], skipping zero weights.
Series combination(const Series& like, const std::vector<Series>& parts, const Eigen::VectorXd& w) {
  Series out = zero_like(like);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0 || parts[static_cast<std::size_t>(i)].empty()) continue;
    out = add(out, scale(parts[static_cast<std::size_t>(i)], w[i]));
  }
  return out;
}

}  // namespace

VectorField vector_field(const Series& H, const PoissonStructure& S) {
  require_dims(H, S);
  const Dims d = S.dims();
  std::vector<Series> Hy;
  std::vector<Series> Hx;
  std::vector<Series> Hz;
  for (int b = 0; b < d.l; ++b) Hy.push_back(differentiate(H, Coord::y(b)));
  for (int a = 0; a < d.n; ++a) Hx.push_back(differentiate(H, Coord::x(a)));
  for (int c = 0; c < 2 * d.m; ++c) Hz.push_back(differentiate(H, Coord::z(c)));

  VectorField X;
  const Eigen::MatrixXd& E = S.E();
  const Eigen::MatrixXd& C = S.C();
  for (int b = 0; b < d.l; ++b) X.ydot.push_back(combination(H, Hx, E.row(b).transpose()));
  for (int a = 0; a < d.n; ++a) {
    Series from_y = combination(H, Hy, -E.col(a));
    Series from_x = combination(H, Hx, C.row(a).transpose());
    X.xdot.push_back(add(from_y, from_x));
  }
  const Eigen::MatrixXd J = S.J();
  for (int c = 0; c < 2 * d.m; ++c) X.zdot.push_back(combination(H, Hz, J.row(c).transpose()));
  return X;
}

Truncated bracket(const Series& f, const Series& g, const PoissonStructure& S, Caps caps) {
  require_dims(f, S);
  require_dims(g, S);
  const Dims d = S.dims();
  const VectorField X = vector_field(g, S);
  Truncated out{Series(d, caps.d_max, caps.K_max, std::max(f.drop_tol(), g.drop_tol())), 0.0};
  auto accumulate = [&](const Series& df, const Series& comp) {
    if (df.empty() || comp.empty()) return;
    Truncated t = multiply(df, comp, caps.d_max, caps.K_max);
    out.value = add(out.value, t.value);
    out.tail += t.tail;
  };
  for (int b = 0; b < d.l; ++b) accumulate(differentiate(f, Coord::y(b)), X.ydot[b]);
  for (int a = 0; a < d.n; ++a) accumulate(differentiate(f, Coord::x(a)), X.xdot[a]);
  for (int c = 0; c < 2 * d.m; ++c) accumulate(differentiate(f, Coord::z(c)), X.zdot[c]);
  out.value = out.value.with_caps(caps.d_max, caps.K_max);
  return out;
}

}  // namespace kamtori
