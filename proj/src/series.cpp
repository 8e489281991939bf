#include "kamtori/series.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>

#include "kamtori/kernels.hpp"

namespace kamtori {

// ---------------------------------------------------------------- Mode

Mode Mode::from(std::span<const int> v) {
  if (v.size() > static_cast<std::size_t>(kMaxAngles)) {
    throw DimensionError("mode has " + std::to_string(v.size()) + " entries, at most " +
                         std::to_string(kMaxAngles) + " supported");
  }
  Mode out;
  std::copy(v.begin(), v.end(), out.k.begin());
  return out;
}

Mode Mode::unit(int axis, int value) {
  Mode out;
  out.k.at(static_cast<std::size_t>(axis)) = value;
  return out;
}

int Mode::l1() const {
  int s = 0;
  for (int v : k) s += std::abs(v);
  return s;
}

bool Mode::is_zero() const {
  return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

Mode Mode::operator-() const {
  Mode out;
  for (std::size_t a = 0; a < k.size(); ++a) out.k[a] = -k[a];
  return out;
}

Mode Mode::operator+(const Mode& o) const {
  Mode out;
  for (std::size_t a = 0; a < k.size(); ++a) out.k[a] = k[a] + o.k[a];
  return out;
}

Mode Mode::operator-(const Mode& o) const {
  Mode out;
  for (std::size_t a = 0; a < k.size(); ++a) out.k[a] = k[a] - o.k[a];
  return out;
}

bool is_representative(const Mode& k) {
  for (int v : k.k) {
    if (v != 0) return v > 0;
  }
  return false;
}

namespace {

void enumerate_modes(int n, int axis, int budget, Mode& cur, std::vector<Mode>& out) {
  if (axis == n) {
    out.push_back(cur);
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    cur.k[static_cast<std::size_t>(axis)] = v;
    enumerate_modes(n, axis + 1, budget - std::abs(v), cur, out);
  }
  cur.k[static_cast<std::size_t>(axis)] = 0;
}

}  // namespace

std::vector<Mode> modes_in_ball(int n, int order, bool include_zero) {
  if (n < 0 || n > kMaxAngles) throw DimensionError("angle dimension out of range");
  std::vector<Mode> out;
  if (order < 0) return out;
  Mode cur;
  enumerate_modes(n, 0, order, cur, out);
  if (!include_zero) {
    std::erase_if(out, [](const Mode& k) { return k.is_zero(); });
  }
  std::sort(out.begin(), out.end());
  return out;
}

double dot(const Mode& k, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) s += k.k[a] * w[a];
  return s;
}

// ---------------------------------------------------------------- MonomialBasis

namespace {

constexpr int kPackBits = 6;
constexpr int kMaxVars = 10;

void enumerate_degree(int nvars, int var, int remaining, std::vector<int>& cur,
                      std::vector<std::vector<int>>& out) {
  if (var == nvars - 1) {
    cur[static_cast<std::size_t>(var)] = remaining;
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[static_cast<std::size_t>(var)] = e;
    enumerate_degree(nvars, var + 1, remaining - e, cur, out);
  }
}

}  // namespace

std::size_t MonomialBasis::count(int nvars, int degree) {
  if (degree < 0) return 0;
  // C(nvars + degree, degree)
  std::size_t c = 1;
  for (int i = 1; i <= degree; ++i) {
    c = c * static_cast<std::size_t>(nvars + i) / static_cast<std::size_t>(i);
  }
  return c;
}

MonomialBasis::MonomialBasis(int nvars, int max_degree) : nvars_(nvars), max_degree_(max_degree) {
  if (nvars < 0 || nvars > kMaxVars) {
    throw DimensionError("l + 2m = " + std::to_string(nvars) + " exceeds the supported " +
                         std::to_string(kMaxVars));
  }
  if (max_degree < 0 || max_degree >= (1 << kPackBits)) {
    throw DimensionError("degree cap out of range");
  }
  std::vector<std::vector<int>> monos;
  if (nvars == 0) {
    monos.emplace_back();
  } else {
    std::vector<int> cur(static_cast<std::size_t>(nvars), 0);
    for (int d = 0; d <= max_degree; ++d) enumerate_degree(nvars, 0, d, cur, monos);
  }
  const std::size_t total = monos.size();
  exps_.resize(total * static_cast<std::size_t>(nvars));
  degrees_.resize(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    int deg = 0;
    for (int v = 0; v < nvars; ++v) {
      exps_[idx * nvars + v] = static_cast<std::uint8_t>(monos[idx][v]);
      deg += monos[idx][v];
    }
    degrees_[idx] = deg;
    lookup_.emplace(pack(monos[idx]), idx);
  }
  lowered_.assign(total * static_cast<std::size_t>(nvars), -1);
  parent_.assign(total, 0);
  parent_var_.assign(total, -1);
  std::vector<int> e(static_cast<std::size_t>(nvars));
  for (std::size_t idx = 0; idx < total; ++idx) {
    for (int v = 0; v < nvars; ++v) e[v] = monos[idx][v];
    bool have_parent = false;
    for (int v = 0; v < nvars; ++v) {
      if (e[v] == 0) continue;
      --e[v];
      const auto low = static_cast<std::ptrdiff_t>(lookup_.at(pack(e)));
      ++e[v];
      lowered_[idx * nvars + v] = low;
      if (!have_parent) {
        parent_[idx] = static_cast<std::size_t>(low);
        parent_var_[idx] = v;
        have_parent = true;
      }
    }
  }
}

std::shared_ptr<const MonomialBasis> MonomialBasis::get(int nvars, int max_degree) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const MonomialBasis>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{nvars, max_degree}];
  if (!slot) slot = std::shared_ptr<const MonomialBasis>(new MonomialBasis(nvars, max_degree));
  return slot;
}

std::uint64_t MonomialBasis::pack(std::span<const int> exps) const {
  std::uint64_t key = 0;
  for (int e : exps) key = (key << kPackBits) | static_cast<std::uint64_t>(e);
  return key;
}

std::ptrdiff_t MonomialBasis::index_of(std::span<const int> exps) const {
  int deg = 0;
  for (int e : exps) {
    if (e < 0) return -1;
    deg += e;
  }
  if (deg > max_degree_) return -1;
  auto it = lookup_.find(pack(exps));
  return it == lookup_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::ptrdiff_t MonomialBasis::product(std::size_t a, std::size_t b) const {
  if (degrees_[a] + degrees_[b] > max_degree_) return -1;
  std::array<int, kMaxVars> e{};
  for (int v = 0; v < nvars_; ++v) e[v] = exps_[a * nvars_ + v] + exps_[b * nvars_ + v];
  return index_of(std::span<const int>(e.data(), static_cast<std::size_t>(nvars_)));
}

// ---------------------------------------------------------------- FourierTaylorSeries

FourierTaylorSeries::FourierTaylorSeries(Dims dims, int d_max, int k_max, double drop_tol)
    : dims_(dims), d_max_(d_max), k_max_(k_max), drop_tol_(drop_tol) {
  if (dims.n < 0 || dims.n > kMaxAngles || dims.l < 0 || dims.m < 0) {
    throw DimensionError("invalid series dimensions");
  }
  if (d_max < 0 || k_max < 0) throw DimensionError("negative series caps");
  basis_ = MonomialBasis::get(dims.nvars(), d_max);
  block_size_ = basis_->size();
}

FourierTaylorSeries FourierTaylorSeries::constant(Dims dims, int d_max, int k_max, cplx value) {
  FourierTaylorSeries out(dims, d_max, k_max);
  out.add_term(Mode{}, 0, value);
  out.prune();
  return out;
}

std::size_t FourierTaylorSeries::term_count() const {
  std::size_t c = 0;
  for (const auto& [k, blk] : blocks_) {
    c += static_cast<std::size_t>(
        std::count_if(blk.begin(), blk.end(), [](const cplx& v) { return v != cplx{}; }));
  }
  return c;
}

bool FourierTaylorSeries::add_term(const Mode& k, std::size_t mono, cplx c) {
  for (int a = dims_.n; a < kMaxAngles; ++a) {
    if (k.k[static_cast<std::size_t>(a)] != 0) throw DimensionError("mode exceeds angle dimension");
  }
  if (k.l1() > k_max_ || mono >= block_size_) return false;
  block(k)[mono] += c;
  return true;
}

std::ptrdiff_t FourierTaylorSeries::mono_index(std::span<const int> i, std::span<const int> j) const {
  if (i.size() != static_cast<std::size_t>(dims_.l) || j.size() != static_cast<std::size_t>(2 * dims_.m)) {
    throw DimensionError("exponent vectors do not match (l, 2m)");
  }
  std::array<int, kMaxVars> e{};
  std::copy(i.begin(), i.end(), e.begin());
  std::copy(j.begin(), j.end(), e.begin() + static_cast<std::ptrdiff_t>(i.size()));
  return basis_->index_of(std::span<const int>(e.data(), i.size() + j.size()));
}

bool FourierTaylorSeries::add_term(std::span<const int> k, std::span<const int> i,
                                   std::span<const int> j, cplx c) {
  if (k.size() != static_cast<std::size_t>(dims_.n)) throw DimensionError("mode length != n");
  const auto idx = mono_index(i, j);
  if (idx < 0) return false;
  return add_term(Mode::from(k), static_cast<std::size_t>(idx), c);
}

cplx FourierTaylorSeries::coeff(const Mode& k, std::size_t mono) const {
  auto it = blocks_.find(k);
  if (it == blocks_.end() || mono >= it->second.size()) return {};
  return it->second[mono];
}

cplx FourierTaylorSeries::coeff(std::span<const int> k, std::span<const int> i,
                                std::span<const int> j) const {
  if (k.size() != static_cast<std::size_t>(dims_.n)) throw DimensionError("mode length != n");
  const auto idx = mono_index(i, j);
  if (idx < 0) return {};
  return coeff(Mode::from(k), static_cast<std::size_t>(idx));
}

FourierTaylorSeries::Block& FourierTaylorSeries::block(const Mode& k) {
  auto it = blocks_.find(k);
  if (it == blocks_.end()) it = blocks_.emplace(k, Block(block_size_, cplx{})).first;
  return it->second;
}

void FourierTaylorSeries::prune() {
  for (auto it = blocks_.begin(); it != blocks_.end();) {
    bool any = false;
    for (auto& c : it->second) {
      if (std::abs(c) <= drop_tol_) {
        c = cplx{};
      } else {
        any = true;
      }
    }
    it = any ? std::next(it) : blocks_.erase(it);
  }
}

FourierTaylorSeries FourierTaylorSeries::with_caps(int d_max, int k_max) const {
  FourierTaylorSeries out(dims_, d_max, k_max, drop_tol_);
  const std::size_t keep = std::min(block_size_, out.block_size_);
  for (const auto& [k, blk] : blocks_) {
    if (k.l1() > k_max) continue;
    auto& dst = out.block(k);
    std::copy(blk.begin(), blk.begin() + static_cast<std::ptrdiff_t>(keep), dst.begin());
  }
  out.prune();
  return out;
}

// ---------------------------------------------------------------- algebra

namespace {

void require_same_dims(const Series& a, const Series& b) {
  if (!(a.dims() == b.dims())) throw DimensionError("series dimensions differ");
}

Series combine(const Series& a, const Series& b, cplx sb) {
  require_same_dims(a, b);
  Series out(a.dims(), std::max(a.d_max(), b.d_max()), std::max(a.k_max(), b.k_max()),
             std::max(a.drop_tol(), b.drop_tol()));
  for (const auto& [k, blk] : a.blocks()) {
    auto& dst = out.block(k);
    for (std::size_t i = 0; i < blk.size(); ++i) dst[i] += blk[i];
  }
  for (const auto& [k, blk] : b.blocks()) {
    auto& dst = out.block(k);
    for (std::size_t i = 0; i < blk.size(); ++i) dst[i] += sb * blk[i];
  }
  out.prune();
  return out;
}

}  // namespace

Series add(const Series& a, const Series& b) { return combine(a, b, 1.0); }

Series subtract(const Series& a, const Series& b) { return combine(a, b, -1.0); }

Series scale(const Series& a, cplx factor) {
  Series out(a.dims(), a.d_max(), a.k_max(), a.drop_tol());
  for (const auto& [k, blk] : a.blocks()) {
    auto& dst = out.block(k);
    for (std::size_t i = 0; i < blk.size(); ++i) dst[i] = factor * blk[i];
  }
  out.prune();
  return out;
}

Truncated multiply(const Series& a, const Series& b, int d_cap, int K_cap) {
  require_same_dims(a, b);
  if (d_cap < 0 || K_cap < 0) throw DimensionError("negative multiplication caps");
  const double tol = std::max(a.drop_tol(), b.drop_tol());
  Series kept(a.dims(), d_cap, K_cap, tol);
  Series tail(a.dims(), a.d_max() + b.d_max(), a.k_max() + b.k_max(), tol);
  kernels::convolve(a, b, d_cap, K_cap, kept, tail);
  return {std::move(kept), coefficient_sum(tail)};
}

Series differentiate(const Series& p, Coord which) {
  const Dims& d = p.dims();
  Series out(d, p.d_max(), p.k_max(), p.drop_tol());
  if (which.kind == Coord::Kind::x) {
    if (which.index < 0 || which.index >= d.n) throw DimensionError("x index out of range");
    for (const auto& [k, blk] : p.blocks()) {
      const int ka = k.k[static_cast<std::size_t>(which.index)];
      if (ka == 0) continue;
      auto& dst = out.block(k);
      const cplx f(0.0, static_cast<double>(ka));
      for (std::size_t i = 0; i < blk.size(); ++i) dst[i] = f * blk[i];
    }
    out.prune();
    return out;
  }
  int var = 0;
  if (which.kind == Coord::Kind::y) {
    if (which.index < 0 || which.index >= d.l) throw DimensionError("y index out of range");
    var = which.index;
  } else {
    if (which.index < 0 || which.index >= 2 * d.m) throw DimensionError("z index out of range");
    var = d.l + which.index;
  }
  const MonomialBasis& basis = p.basis();
  for (const auto& [k, blk] : p.blocks()) {
    Series::Block* dst = nullptr;
    for (std::size_t i = 0; i < blk.size(); ++i) {
      if (blk[i] == cplx{}) continue;
      const auto low = basis.lowered(i, var);
      if (low < 0) continue;
      if (!dst) dst = &out.block(k);
      (*dst)[static_cast<std::size_t>(low)] += static_cast<double>(basis.exponents(i)[var]) * blk[i];
    }
  }
  out.prune();
  return out;
}

Series average(const Series& p) {
  Series out(p.dims(), p.d_max(), p.k_max(), p.drop_tol());
  auto it = p.blocks().find(Mode{});
  if (it != p.blocks().end()) out.block(Mode{}) = it->second;
  out.prune();
  return out;
}

double sup_norm(const Series& p, double r, double s) {
  std::vector<double> spow(static_cast<std::size_t>(p.d_max()) + 1, 1.0);
  for (std::size_t d = 1; d < spow.size(); ++d) spow[d] = spow[d - 1] * s;
  const MonomialBasis& basis = p.basis();
  double total = 0.0;
  for (const auto& [k, blk] : p.blocks()) {
    double inner = 0.0;
    for (std::size_t i = 0; i < blk.size(); ++i) {
      if (blk[i] != cplx{}) inner += std::abs(blk[i]) * spow[static_cast<std::size_t>(basis.degree(i))];
    }
    total += inner * std::exp(k.l1() * r);
  }
  return total;
}

double coefficient_sum(const Series& p) {
  double total = 0.0;
  for (const auto& [k, blk] : p.blocks()) {
    for (const auto& c : blk) total += std::abs(c);
  }
  return total;
}

Series restrict_degree(const Series& p, int lo, int hi) {
  Series out(p.dims(), p.d_max(), p.k_max(), p.drop_tol());
  const MonomialBasis& basis = p.basis();
  for (const auto& [k, blk] : p.blocks()) {
    auto& dst = out.block(k);
    for (std::size_t i = 0; i < blk.size(); ++i) {
      const int deg = basis.degree(i);
      if (deg >= lo && deg <= hi) dst[i] = blk[i];
    }
  }
  out.prune();
  return out;
}

Series truncate_R(const Series& P, int K_plus) {
  if (K_plus < 0) throw Error("truncate_R: K_plus must be non-negative");
  Series low = restrict_degree(P, 0, 2);
  Series out(P.dims(), P.d_max(), P.k_max(), P.drop_tol());
  for (const auto& [k, blk] : low.blocks()) {
    if (k.l1() <= K_plus) out.block(k) = blk;
  }
  out.prune();
  return out;
}

Series taylor_shift_y(const Series& p, std::span<const double> y_star) {
  const Dims& d = p.dims();
  if (y_star.size() != static_cast<std::size_t>(d.l)) throw DimensionError("y_star length != l");
  for (double v : y_star) {
    if (!std::isfinite(v)) throw Error("taylor_shift_y: non-finite shift");
  }
  const MonomialBasis& basis = p.basis();
  const int nv = d.nvars();
  Series out(d, p.d_max(), p.k_max(), p.drop_tol());

  // binomial table up to d_max
  const int D = p.d_max();
  std::vector<std::vector<double>> binom(static_cast<std::size_t>(D) + 1);
  for (int q = 0; q <= D; ++q) {
    binom[q].assign(static_cast<std::size_t>(q) + 1, 1.0);
    for (int r = 1; r < q; ++r) binom[q][r] = binom[q - 1][r - 1] + binom[q - 1][r];
  }

  std::vector<int> e(static_cast<std::size_t>(nv));
  std::vector<int> sub(static_cast<std::size_t>(d.l));
  for (const auto& [k, blk] : p.blocks()) {
    auto& dst = out.block(k);
    for (std::size_t idx = 0; idx < blk.size(); ++idx) {
      if (blk[idx] == cplx{}) continue;
      const auto ex = basis.exponents(idx);
      for (int v = 0; v < nv; ++v) e[v] = ex[v];
      // iterate over all sub-exponents sub <= e[0..l)
      std::fill(sub.begin(), sub.end(), 0);
      while (true) {
        double factor = 1.0;
        for (int a = 0; a < d.l; ++a) {
          const int drop = e[a] - sub[a];
          if (drop > 0) factor *= binom[e[a]][sub[a]] * std::pow(y_star[a], drop);
        }
        if (factor != 0.0) {
          std::vector<int> target(e);
          for (int a = 0; a < d.l; ++a) target[a] = sub[a];
          const auto t = basis.index_of(target);
          dst[static_cast<std::size_t>(t)] += factor * blk[idx];
        }
        int a = 0;
        while (a < d.l && sub[a] == e[a]) {
          sub[a] = 0;
          ++a;
        }
        if (a == d.l) break;
        ++sub[a];
      }
    }
  }
  out.prune();
  return out;
}

double reality_defect(const Series& p) {
  double worst = 0.0;
  for (const auto& [k, blk] : p.blocks()) {
    auto it = p.blocks().find(-k);
    for (std::size_t i = 0; i < blk.size(); ++i) {
      const cplx mirror = it == p.blocks().end() ? cplx{} : it->second[i];
      worst = std::max(worst, std::abs(mirror - std::conj(blk[i])));
    }
  }
  return worst;
}

cplx evaluate(const Series& p, std::span<const double> x, std::span<const double> y,
              std::span<const double> z) {
  const Dims& d = p.dims();
  if (x.size() != static_cast<std::size_t>(d.n) || y.size() != static_cast<std::size_t>(d.l) ||
      z.size() != static_cast<std::size_t>(2 * d.m)) {
    throw DimensionError("evaluation point does not match series dimensions");
  }
  const MonomialBasis& basis = p.basis();
  std::vector<double> vars(y.begin(), y.end());
  vars.insert(vars.end(), z.begin(), z.end());
  std::vector<double> mono(p.block_size(), 1.0);
  for (std::size_t i = 1; i < mono.size(); ++i) mono[i] = mono[basis.parent(i)] * vars[basis.parent_var(i)];
  cplx total{};
  for (const auto& [k, blk] : p.blocks()) {
    cplx inner{};
    for (std::size_t i = 0; i < blk.size(); ++i) inner += blk[i] * mono[i];
    double phase = 0.0;
    for (int a = 0; a < d.n; ++a) phase += k.k[a] * x[a];
    total += inner * std::polar(1.0, phase);
  }
  return total;
}

double h1_integral(int K_plus, int n, double gap) {
  if (!(gap > 0.0)) throw Error("h1_integral: gap must be positive");
  if (n < 0 || K_plus < 0) throw Error("h1_integral: negative order or dimension");
  // int_K^inf t^n e^{-ct} dt = e^{-cK} sum_{j=0}^n n!/j! K^j / c^{n-j+1}
  const double c = gap / 8.0;
  double sum = 0.0;
  double falling = 1.0;  // n!/j!, built from j = n downwards
  for (int j = n; j >= 0; --j) {
    sum += falling * std::pow(static_cast<double>(K_plus), j) / std::pow(c, n - j + 1);
    falling *= j;
  }
  return std::exp(-c * K_plus) * sum;
}

double gamma_sum(int K_plus, int n, double tau, double a) {
  if (!(a > 0.0)) throw Error("gamma_sum: width must be positive");
  if (n < 1) throw Error("gamma_sum: n must be positive");
  auto choose = [](int p, int q) {
    if (q < 0 || q > p) return 0.0;
    double c = 1.0;
    for (int i = 1; i <= q; ++i) c = c * (p - q + i) / i;
    return c;
  };
  const double expo = 3.0 * n + (n + 1) * tau;
  double total = 0.0;
  for (int q = 1; q <= K_plus; ++q) {
    // number of k in Z^n with |k|_1 = q
    double count = 0.0;
    for (int j = 1; j <= std::min(n, q); ++j) count += std::pow(2.0, j) * choose(n, j) * choose(q - 1, j - 1);
    total += count * std::pow(static_cast<double>(q), expo) * std::exp(-q * a / 8.0);
  }
  return total;
}

}  // namespace kamtori
