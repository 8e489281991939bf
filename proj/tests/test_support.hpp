#ifndef KAMTORI_TEST_SUPPORT_HPP
#define KAMTORI_TEST_SUPPORT_HPP

// Shared helpers for the test binaries: seeded random series, point
// sampling, and a brute-force evaluator that does not go through the
// library's own evaluation code.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "kamtori/series.hpp"
#include "kamtori/structure.hpp"

namespace testing {

using kamtori::cplx;
using kamtori::Dims;
using kamtori::Mode;
using kamtori::Series;

/// Random series with `terms` nonzero keys of degree <= deg and |k|_1 <= K;
/// real functions get the conjugate partner for every key.
inline Series random_series(std::mt19937_64& rng, Dims d, int d_max, int k_max, int deg, int K, int terms,
                            bool real = true, double scale = 1.0) {
  Series s(d, d_max, k_max);
  std::uniform_int_distribution<int> kd(-K, K);
  std::uniform_int_distribution<int> ed(0, deg);
  std::uniform_real_distribution<double> cd(-1.0, 1.0);
  const int nv = d.nvars();
  for (int t = 0; t < terms; ++t) {
    std::vector<int> k(static_cast<std::size_t>(d.n));
    int l1 = 0;
    for (int& v : k) {
      v = kd(rng);
      l1 += std::abs(v);
    }
    if (l1 > K) continue;
    std::vector<int> e(static_cast<std::size_t>(nv), 0);
    int total = ed(rng);
    std::uniform_int_distribution<int> vd(0, std::max(nv - 1, 0));
    for (int q = 0; q < total && nv > 0; ++q) ++e[static_cast<std::size_t>(vd(rng))];
    const std::vector<int> i(e.begin(), e.begin() + d.l);
    const std::vector<int> j(e.begin() + d.l, e.end());
    const cplx c(scale * cd(rng), scale * cd(rng));
    if (real) {
      std::vector<int> mk = k;
      for (int& v : mk) v = -v;
      if (mk == k) {
        s.add_term(k, i, j, c.real());
      } else {
        s.add_term(k, i, j, c);
        s.add_term(mk, i, j, std::conj(c));
      }
    } else {
      s.add_term(k, i, j, c);
    }
  }
  return s;
}

struct Point {
  std::vector<double> x, y, z;
};

inline Point random_point(std::mt19937_64& rng, Dims d, double radius = 0.5) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> act(-radius, radius);
  Point p;
  for (int a = 0; a < d.n; ++a) p.x.push_back(ang(rng));
  for (int b = 0; b < d.l; ++b) p.y.push_back(act(rng));
  for (int c = 0; c < 2 * d.m; ++c) p.z.push_back(act(rng));
  return p;
}

/// Direct sum over every stored coefficient: sum c y^i z^j e^{i<k,x>}.
inline cplx brute_evaluate(const Series& s, const Point& p) {
  const Dims d = s.dims();
  cplx total{};
  for (const auto& [k, blk] : s.blocks()) {
    double phase = 0.0;
    for (int a = 0; a < d.n; ++a) phase += k.k[a] * p.x[a];
    const cplx e = std::polar(1.0, phase);
    for (std::size_t idx = 0; idx < blk.size(); ++idx) {
      if (blk[idx] == cplx{}) continue;
      const auto ex = s.basis().exponents(idx);
      double mono = 1.0;
      for (int b = 0; b < d.l; ++b) mono *= std::pow(p.y[b], ex[b]);
      for (int c = 0; c < 2 * d.m; ++c) mono *= std::pow(p.z[c], ex[d.l + c]);
      total += blk[idx] * mono * e;
    }
  }
  return total;
}

/// Gradient in phase order (y, x, z) by central differences of brute_evaluate.
inline Eigen::VectorXd fd_gradient(const Series& s, const Point& p, double h = 1e-5) {
  const Dims d = s.dims();
  Eigen::VectorXd g(d.phase_dim());
  auto bump = [&](int slot, double delta) {
    Point q = p;
    if (slot < d.l) q.y[slot] += delta;
    else if (slot < d.l + d.n) q.x[slot - d.l] += delta;
    else q.z[slot - d.l - d.n] += delta;
    return brute_evaluate(s, q).real();
  };
  for (int i = 0; i < d.phase_dim(); ++i) g[i] = (bump(i, h) - bump(i, -h)) / (2.0 * h);
  return g;
}

inline kamtori::PoissonStructure random_structure(std::mt19937_64& rng, Dims d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd E(d.l, d.n), C = Eigen::MatrixXd::Zero(d.n, d.n);
  for (int i = 0; i < d.l; ++i)
    for (int j = 0; j < d.n; ++j) E(i, j) = u(rng);
  for (int i = 0; i < d.n; ++i)
    for (int j = i + 1; j < d.n; ++j) {
      C(i, j) = u(rng);
      C(j, i) = -C(i, j);
    }
  return kamtori::PoissonStructure(E, C, d.m);
}

/// Largest |coefficient| of a - b relative to max(1, largest |coefficient| of a and b).
inline double rel_diff(const Series& a, const Series& b) {
  const Series d = kamtori::subtract(a, b);
  double worst = 0.0, scale = 1.0;
  for (const auto& [k, blk] : d.blocks())
    for (const auto& c : blk) worst = std::max(worst, std::abs(c));
  for (const Series* s : {&a, &b})
    for (const auto& [k, blk] : s->blocks())
      for (const auto& c : blk) scale = std::max(scale, std::abs(c));
  return worst / scale;
}

}  // namespace testing

#endif  // KAMTORI_TEST_SUPPORT_HPP
