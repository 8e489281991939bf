#include "kamtori/verify.hpp"

#include <fftw3.h>

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "kamtori/kernels.hpp"

namespace kamtori {

namespace {

double normal_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& p0, int l, int n) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i >= l && i < l + n) continue;
    const double d = p[i] - p0[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

Trajectory integrate(const Series& H, const PoissonStructure& S, const Eigen::VectorXd& p0, double T,
                     double dt, const IntegrateOptions& opt) {
  if (!(dt > 0.0) || !(T > 0.0)) throw Error("integrate: T and dt must be positive");
  const Dims d = S.dims();
  if (p0.size() != d.phase_dim()) throw DimensionError("initial state has the wrong length");
  const FieldEvaluator X(vector_field(H, S).flattened());
  const FieldEvaluator energy(std::vector<Series>{H});
  const auto dim = static_cast<Eigen::Index>(d.phase_dim());

  auto field = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd out(dim);
    X(std::span<const double>(p.data(), p.size()), std::span<double>(out.data(), out.size()));
    return out;
  };
  auto H_at = [&](const Eigen::VectorXd& p) {
    double e = 0.0;
    energy(std::span<const double>(p.data(), p.size()), std::span<double>(&e, 1));
    return e;
  };

  Trajectory traj;
  Eigen::VectorXd p = p0;
  traj.times.push_back(0.0);
  traj.states.push_back(p);
  traj.energy.push_back(H_at(p));
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  const std::size_t every = std::max<std::size_t>(1, opt.record_every);
  for (std::size_t i = 1; i <= steps; ++i) {
    const Eigen::VectorXd k1 = field(p);
    const Eigen::VectorXd k2 = field(p + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = field(p + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = field(p + dt * k3);
    p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = static_cast<double>(i) * dt;
    if (!p.allFinite()) throw DivergenceError("state became non-finite at t = " + std::to_string(t));
    const bool escaped = normal_distance(p, p0, d.l, d.n) > opt.escape_radius;
    if (i % every == 0 || i == steps || escaped) {
      traj.times.push_back(t);
      traj.states.push_back(p);
      traj.energy.push_back(H_at(p));
    }
    if (escaped) {
      traj.escaped = true;
      traj.escape_time = t;
      break;
    }
  }
  return traj;
}

double energy_drift(const Trajectory& traj) {
  double worst = 0.0;
  for (double e : traj.energy) worst = std::max(worst, std::abs(e - traj.energy.front()));
  return worst;
}

Eigen::VectorXd rotation_numbers(const Trajectory& traj, int n, int l) {
  if (traj.escaped) {
    throw DivergenceError("trajectory left the torus neighbourhood at t = " + std::to_string(traj.escape_time));
  }
  if (traj.times.size() < 2) throw Error("rotation_numbers: trajectory too short");
  const auto count = static_cast<double>(traj.times.size());
  double tm = 0.0;
  for (double t : traj.times) tm += t;
  tm /= count;
  double stt = 0.0;
  for (double t : traj.times) stt += (t - tm) * (t - tm);
  Eigen::VectorXd out(n);
  for (int a = 0; a < n; ++a) {
    double xm = 0.0;
    for (const auto& s : traj.states) xm += s[l + a];
    xm /= count;
    double sxt = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) sxt += (traj.times[i] - tm) * (traj.states[i][l + a] - xm);
    out[a] = sxt / stt;
  }
  return out;
}

Eigen::VectorXd flow_map(const FieldEvaluator& X, const Eigen::VectorXd& p, double T, double tol) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  State x(p.data(), p.data() + p.size());
  if (X.size() != x.size()) throw DimensionError("vector field does not match the state");
  auto rhs = [&X](const State& s, State& ds, double) {
    ds.resize(s.size());
    X(std::span<const double>(s), std::span<double>(ds));
  };
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, rhs, x, 0.0, T, T / 16.0);
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// ---------------------------------------------------------------- invariance

std::vector<double> identity_embedding(Dims d, int grid) {
  const std::size_t dim = static_cast<std::size_t>(d.phase_dim());
  std::size_t count = 1;
  for (int a = 0; a < d.n; ++a) count *= static_cast<std::size_t>(grid);
  std::vector<double> out(count * dim, 0.0);
  for (std::size_t p = 0; p < count; ++p) {
    std::size_t rest = p;
    for (int a = d.n - 1; a >= 0; --a) {
      const std::size_t i = rest % static_cast<std::size_t>(grid);
      rest /= static_cast<std::size_t>(grid);
      out[p * dim + static_cast<std::size_t>(d.l + a)] = 2.0 * std::numbers::pi * static_cast<double>(i) / grid;
    }
  }
  return out;
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

InvarianceReport invariance_residual(const std::vector<double>& embedding, int grid,
                                     const Eigen::VectorXd& omega, const Series& H,
                                     const PoissonStructure& S, const InvarianceOptions& opt) {
  const Dims d = S.dims();
  const int n = d.n;
  if (omega.size() != n) throw DimensionError("omega must have n entries");
  if (grid < 4 || grid < opt.min_grid) {
    throw Error("invariance grid of " + std::to_string(grid) + " points per angle is too coarse");
  }
  const std::size_t dim = static_cast<std::size_t>(d.phase_dim());
  std::size_t count = 1;
  for (int a = 0; a < n; ++a) count *= static_cast<std::size_t>(grid);
  if (embedding.size() != count * dim) throw DimensionError("embedding size does not match the grid");

  // Wavenumber of every grid index along one axis; the Nyquist index gets 0.
  std::vector<int> wave(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) wave[i] = i < grid / 2 ? i : (i == grid / 2 ? 0 : i - grid);
  auto index_modes = [&](std::size_t p, std::vector<int>& k, bool& nyquist) {
    std::size_t rest = p;
    nyquist = false;
    for (int a = n - 1; a >= 0; --a) {
      const int i = static_cast<int>(rest % static_cast<std::size_t>(grid));
      rest /= static_cast<std::size_t>(grid);
      k[a] = wave[i];
      nyquist = nyquist || (i == grid / 2);
    }
  };

  fftw_complex* buf = fftw_alloc_complex(count);
  fftw_plan fwd;
  fftw_plan bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    std::vector<int> shape(static_cast<std::size_t>(n), grid);
    fwd = fftw_plan_dft(n, shape.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft(n, shape.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  std::vector<double> derivative(count * dim, 0.0);
  double top = 0.0;
  double total = 0.0;
  std::vector<int> k(static_cast<std::size_t>(n));
  const double cutoff = 3.0 * grid / 8.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const bool is_angle = c >= static_cast<std::size_t>(d.l) && c < static_cast<std::size_t>(d.l + n);
    const std::vector<double> theta = is_angle ? identity_embedding(d, grid) : std::vector<double>{};
    for (std::size_t p = 0; p < count; ++p) {
      double v = embedding[p * dim + c];
      if (is_angle) v -= theta[p * dim + c];
      buf[p][0] = v;
      buf[p][1] = 0.0;
    }
    fftw_execute(fwd);
    for (std::size_t p = 0; p < count; ++p) {
      bool nyquist = false;
      index_modes(p, k, nyquist);
      const double energy = buf[p][0] * buf[p][0] + buf[p][1] * buf[p][1];
      bool is_zero = true;
      bool high = nyquist;
      double kw = 0.0;
      for (int a = 0; a < n; ++a) {
        is_zero = is_zero && k[a] == 0 && !nyquist;
        high = high || std::abs(k[a]) > cutoff;
        kw += k[a] * omega[a];
      }
      if (!is_zero) total += energy;
      if (high) top += energy;
      // multiply by i <k, w> / count (normalisation of the round trip)
      const double re = buf[p][0];
      const double im = buf[p][1];
      const double f = nyquist ? 0.0 : kw / static_cast<double>(count);
      buf[p][0] = -im * f;
      buf[p][1] = re * f;
    }
    fftw_execute(bwd);
    for (std::size_t p = 0; p < count; ++p) {
      derivative[p * dim + c] = buf[p][0] + (is_angle ? omega[static_cast<Eigen::Index>(c) - d.l] : 0.0);
    }
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(buf);

  InvarianceReport out;
  out.alias_fraction = total > 0.0 ? top / total : 0.0;
  if (out.alias_fraction > opt.alias_tol) {
    throw Error("invariance grid too coarse: top-quarter spectral energy fraction " +
                std::to_string(out.alias_fraction));
  }
  const FieldEvaluator X(vector_field(H, S).flattened());
  std::vector<double> field(count * dim, 0.0);
  if (kernels::thread_count() > 1) {
    evaluate_points_parallel(X, embedding, field);
  } else {
    evaluate_points_serial(X, embedding, field);
  }
  for (std::size_t p = 0; p < count; ++p) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double diff = derivative[p * dim + c] - field[p * dim + c];
      s += diff * diff;
    }
    out.residual = std::max(out.residual, std::sqrt(s));
  }
  return out;
}

}  // namespace kamtori
