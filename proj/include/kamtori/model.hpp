#ifndef KAMTORI_MODEL_HPP
#define KAMTORI_MODEL_HPP

// The integrable skeleton
//
//     N = e + <Omega, y> + 1/2 <(y, z), Mcal(x) (y, z)> + h(x, y, z),
//     Mcal = [[A, B], [B^T, M]],
//
// and executable versions of the standing hypotheses: hyperbolicity of
// J[M], the Ruessmann rank condition on w(lambda), non-degeneracy of the
// leading minor of [A], the constant eta, and closeness of A, B, M to their
// averages.

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "kamtori/series.hpp"
#include "kamtori/structure.hpp"

namespace kamtori {

/// Matrix of pure Fourier series (degree 0 in (y, z)).
class SeriesMatrix {
 public:
  SeriesMatrix() = default;
  SeriesMatrix(Dims dims, int rows, int cols, int k_max);

  /// Constant matrix.
  static SeriesMatrix constant(Dims dims, const Eigen::MatrixXd& value, int k_max);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int k_max() const { return k_max_; }
  const Dims& dims() const { return dims_; }

  Series& at(int i, int j) { return entries_[static_cast<std::size_t>(i * cols_ + j)]; }
  const Series& at(int i, int j) const { return entries_[static_cast<std::size_t>(i * cols_ + j)]; }

  /// Fourier coefficient matrix of mode k.
  Eigen::MatrixXcd mode(const Mode& k) const;
  /// Torus average [X] (real part of the k = 0 coefficient).
  Eigen::MatrixXd average() const;
  /// All modes carried by any entry.
  std::vector<Mode> support() const;

  SeriesMatrix transpose() const;
  bool is_symmetric(double tol) const;

 private:
  Dims dims_{};
  int rows_ = 0;
  int cols_ = 0;
  int k_max_ = 0;
  std::vector<Series> entries_;
};

struct NormalForm {
  double e = 0.0;
  Eigen::VectorXd Omega;
  SeriesMatrix A;  // l x l
  SeriesMatrix B;  // l x 2m
  SeriesMatrix M;  // 2m x 2m
  Series h;        // only keys of (y, z)-degree >= 3

  /// Checks shapes, symmetry and the degree condition on h.
  void validate(const Dims& dims) const;
};

/// N as a single series with caps (d_max, K_max).
Series normal_form_series(const NormalForm& N, Dims dims, int d_max, int K_max,
                          double drop_tol = kDefaultDropTol);

/// Splits the (y, z)-quadratic part of `p` into the blocks A, B, M of the
/// symmetric matrix Mcal with 1/2 <w, Mcal w> equal to that part. Modes with
/// |k|_1 > K are ignored.
void quadratic_blocks(const Series& p, int K, SeriesMatrix& A, SeriesMatrix& B, SeriesMatrix& M);

// ---------------------------------------------------------------- checks

struct HyperbolicityResult {
  double min_abs_re = 0.0;
  bool pass = false;
  std::vector<std::complex<double>> spectrum;  // eigenvalues of J [M], sorted
};

HyperbolicityResult check_hyperbolicity(const Eigen::MatrixXd& M_avg, double sigma0);

struct RussmannResult {
  int max_rank = 0;
  bool pass = false;
  std::vector<double> singular_values;  // at the grid point attaining max_rank
};

struct RussmannOptions {
  int grid = 5;            // points per parameter axis
  double step = 1e-3;      // finite-difference step, relative to the box width
  double rank_tol = 1e-8;  // relative to the largest singular value
};

/// Rank of the stack of partial derivatives of order <= n - 1 of w over a
/// grid of the box [lo, hi].
RussmannResult check_russmann(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& omega,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                              const RussmannOptions& opt = {});

struct NdData {
  int n0 = 0;
  Eigen::MatrixXd U;
  Eigen::MatrixXd D;
  Eigen::MatrixXd V;
  Eigen::MatrixXd Y;
  double cond_U = 0.0;
  double cond_Y = 0.0;
  bool pass = false;
};

/// Throws SingularError when U is singular.
NdData check_nd(const Eigen::MatrixXd& A_avg, const Eigen::MatrixXd& B_avg,
                const Eigen::MatrixXd& M_avg, int n0, double cond_max = 1e12);

struct EtaResult {
  double eta = 0.0;
  double alpha = 0.0;
  double rho0 = 0.0;
};

EtaResult compute_eta(const NdData& nd, const Eigen::MatrixXd& M_avg, const Eigen::MatrixXd& B_avg,
                      double sigma0, int m);

struct MbResult {
  double dev_M = 0.0;
  double dev_B = 0.0;
  bool pass = false;
};

/// Majorant deviations of M and B from their averages on the strip of width r.
MbResult check_mb(const SeriesMatrix& B, const SeriesMatrix& M, double eta, double r);

/// 2-norm condition number (inf for singular input).
double condition_number(const Eigen::MatrixXd& X);

}  // namespace kamtori

#endif  // KAMTORI_MODEL_HPP
