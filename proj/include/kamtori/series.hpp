#ifndef KAMTORI_SERIES_HPP
#define KAMTORI_SERIES_HPP

// Truncated Fourier-Taylor series
//
//     p(x, y, z) = sum_{k, i, j} p_kij  y^i z^j  exp(i <k, x>)
//
// over T^n x R^l x R^{2m}. Every series carries a degree cap d_max on
// |i| + |j| and a Fourier cap K_max on |k|_1. Coefficients are complex;
// a series representing a real function satisfies p_{-k,ij} = conj(p_kij).
//
// Coefficients are stored per Fourier mode as a dense block over all
// monomials of degree <= d_max, in a graded order that is shared by every
// series with the same number of (y, z) variables.

#include <array>
#include <complex>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "kamtori/error.hpp"

namespace kamtori {

using cplx = std::complex<double>;

inline constexpr int kMaxAngles = 6;
inline constexpr double kDefaultDropTol = 1e-300;

/// Dimensions of the phase space T^n x R^l x R^{2m}.
struct Dims {
  int n = 0;
  int l = 0;
  int m = 0;

  int nvars() const { return l + 2 * m; }
  int phase_dim() const { return l + n + 2 * m; }
  bool operator==(const Dims&) const = default;
};

/// A Fourier index k in Z^n. Entries past n are always zero.
struct Mode {
  std::array<int, kMaxAngles> k{};

  static Mode from(std::span<const int> v);
  static Mode unit(int axis, int value = 1);

  int l1() const;
  bool is_zero() const;

  Mode operator-() const;
  Mode operator+(const Mode& o) const;
  Mode operator-(const Mode& o) const;

  auto operator<=>(const Mode&) const = default;
  bool operator==(const Mode&) const = default;
};

/// True when the first nonzero entry of k is positive. Exactly one of k, -k
/// is representative for k != 0.
bool is_representative(const Mode& k);

/// All modes with |k|_1 <= order in Z^n, sorted. Optionally without k = 0.
std::vector<Mode> modes_in_ball(int n, int order, bool include_zero);

/// <k, w> for the first n entries.
double dot(const Mode& k, std::span<const double> w);

/// Graded enumeration of monomials in `nvars` variables.
///
/// The ordering is canonical: monomials of degree d occupy the index range
/// [count(nvars, d-1), count(nvars, d)) independent of the maximal degree the
/// basis was built for, so a block truncated at degree d is a prefix.
class MonomialBasis {
 public:
  static std::shared_ptr<const MonomialBasis> get(int nvars, int max_degree);

  /// Number of monomials of degree <= degree.
  static std::size_t count(int nvars, int degree);

  int nvars() const { return nvars_; }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return degrees_.size(); }

  std::span<const std::uint8_t> exponents(std::size_t idx) const {
    return {exps_.data() + idx * static_cast<std::size_t>(nvars_), static_cast<std::size_t>(nvars_)};
  }
  int degree(std::size_t idx) const { return degrees_[idx]; }

  /// -1 when the monomial has degree above max_degree.
  std::ptrdiff_t index_of(std::span<const int> exps) const;

  /// Index of mono(a) * mono(b); -1 when the product exceeds max_degree.
  std::ptrdiff_t product(std::size_t a, std::size_t b) const;

  /// Index of mono(idx) / var, or -1 when var does not divide it.
  std::ptrdiff_t lowered(std::size_t idx, int var) const { return lowered_[idx * nvars_ + var]; }

  /// For idx > 0: the monomial equals mono(parent) * var.
  std::size_t parent(std::size_t idx) const { return parent_[idx]; }
  int parent_var(std::size_t idx) const { return parent_var_[idx]; }

 private:
  MonomialBasis(int nvars, int max_degree);

  std::uint64_t pack(std::span<const int> exps) const;

  int nvars_;
  int max_degree_;
  std::vector<std::uint8_t> exps_;
  std::vector<int> degrees_;
  std::vector<std::ptrdiff_t> lowered_;
  std::vector<std::size_t> parent_;
  std::vector<int> parent_var_;
  std::map<std::uint64_t, std::size_t> lookup_;
};

class FourierTaylorSeries {
 public:
  using Block = std::vector<cplx>;
  using BlockMap = std::map<Mode, Block>;

  FourierTaylorSeries() = default;
  FourierTaylorSeries(Dims dims, int d_max, int k_max, double drop_tol = kDefaultDropTol);

  static FourierTaylorSeries constant(Dims dims, int d_max, int k_max, cplx value);

  const Dims& dims() const { return dims_; }
  int d_max() const { return d_max_; }
  int k_max() const { return k_max_; }
  double drop_tol() const { return drop_tol_; }
  void set_drop_tol(double tol) { drop_tol_ = tol; }

  const MonomialBasis& basis() const { return *basis_; }
  std::size_t block_size() const { return block_size_; }
  const BlockMap& blocks() const { return blocks_; }

  bool empty() const { return blocks_.empty(); }
  std::size_t term_count() const;

  /// Accumulates c into the coefficient of (k, mono). Keys outside the caps
  /// are rejected and false is returned.
  bool add_term(const Mode& k, std::size_t mono, cplx c);
  bool add_term(std::span<const int> k, std::span<const int> i, std::span<const int> j, cplx c);

  cplx coeff(const Mode& k, std::size_t mono) const;
  cplx coeff(std::span<const int> k, std::span<const int> i, std::span<const int> j) const;

  /// Mutable access used by kernels; creates a zero block when missing.
  Block& block(const Mode& k);

  /// Removes coefficients with |c| <= drop_tol and empty blocks.
  void prune();

  /// Copy with new caps; keys outside them are discarded.
  FourierTaylorSeries with_caps(int d_max, int k_max) const;

  std::ptrdiff_t mono_index(std::span<const int> i, std::span<const int> j) const;

 private:
  Dims dims_{};
  int d_max_ = 0;
  int k_max_ = 0;
  double drop_tol_ = kDefaultDropTol;
  std::size_t block_size_ = 1;
  std::shared_ptr<const MonomialBasis> basis_;
  BlockMap blocks_;
};

using Series = FourierTaylorSeries;

/// A value together with the coefficient-sum norm of whatever a truncation
/// discarded while producing it.
struct Truncated {
  Series value;
  double tail = 0.0;
};

/// Which coordinate a derivative is taken in.
struct Coord {
  enum class Kind { x, y, z };
  Kind kind;
  int index;

  static Coord x(int a) { return {Kind::x, a}; }
  static Coord y(int b) { return {Kind::y, b}; }
  static Coord z(int c) { return {Kind::z, c}; }
};

Series add(const Series& a, const Series& b);
Series subtract(const Series& a, const Series& b);
Series scale(const Series& a, cplx factor);

/// Direct convolution, truncated to |k|_1 <= K_cap and |i|+|j| <= d_cap.
Truncated multiply(const Series& a, const Series& b, int d_cap, int K_cap);

Series differentiate(const Series& p, Coord which);

/// Torus average [p]: the k = 0 part.
Series average(const Series& p);

/// Majorant sum_kij |p_kij| e^{|k|_1 r} s^{|i|+|j|}. This bounds the supremum
/// of |p| on {|Im x| < r, |y| < s, |z| < s} from above; it is not the
/// supremum itself.
double sup_norm(const Series& p, double r, double s);

/// Sum of |p_kij| over all keys.
double coefficient_sum(const Series& p);

/// Keys with |i|+|j| <= 2 and |k|_1 <= K_plus.
Series truncate_R(const Series& P, int K_plus);

/// Keys with lo <= |i|+|j| <= hi.
Series restrict_degree(const Series& p, int lo, int hi);

/// p(x, y + y_star, z), expanded exactly and re-truncated at d_max.
Series taylor_shift_y(const Series& p, std::span<const double> y_star);

/// max |p_{-k,ij} - conj(p_kij)| over stored keys.
double reality_defect(const Series& p);

/// Point value; x, y, z real.
cplx evaluate(const Series& p, std::span<const double> x, std::span<const double> y,
              std::span<const double> z);

/// Closed form of  int_{K_plus}^inf  t^n exp(-t gap / 8) dt.
double h1_integral(int K_plus, int n, double gap);

/// sum_{0 < |k|_1 <= K_plus} |k|^{3n + (n+1) tau} exp(-|k| a / 8) over Z^n.
double gamma_sum(int K_plus, int n, double tau, double a);

}  // namespace kamtori

#endif  // KAMTORI_SERIES_HPP
