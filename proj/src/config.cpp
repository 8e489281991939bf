#include "kamtori/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace kamtori {

using nlohmann::json;

// ---------------------------------------------------------------- presets

namespace {

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

}  // namespace

std::vector<std::string> preset_names() { return {"example1", "example2"}; }

std::map<std::string, double> preset_defaults(const std::string& name) {
  if (name == "example1") {
    return {{"alpha", 1.0}, {"beta", kGolden}, {"gamma_struct", 0.0}, {"eps", 1e-4}, {"z_coupling", 0.0},
            {"n0", 1.0}};
  }
  if (name == "example2") return {{"eps", 1e-4}, {"n0", 2.0}};
  throw ConfigError("unknown preset '" + name + "' (known: example1, example2)");
}

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  cfg.preset = name;
  cfg.preset_params = preset_defaults(name);
  if (name == "example1") {
    cfg.lambda.lo = {0.0};
    cfg.lambda.hi = {0.0};
  } else {
    cfg.lambda.lo = {1.0, kGolden};
    cfg.lambda.hi = {1.0, kGolden};
  }
  cfg.lambda.grid = 1;
  return cfg;
}

namespace {

int preset_lambda_dim(const std::string& name) { return name == "example1" ? 1 : 2; }

double param(const RunConfig& cfg, const std::string& key) {
  auto it = cfg.preset_params.find(key);
  if (it == cfg.preset_params.end()) throw ConfigError("preset parameter '" + key + "' missing");
  return it->second;
}

void add_real_cos(Series& s, std::span<const int> k, std::span<const int> i, std::span<const int> j, double amp) {
  // amp cos<k,x> = amp/2 (e^{i<k,x>} + e^{-i<k,x>})
  std::vector<int> mk(k.begin(), k.end());
  for (int& v : mk) v = -v;
  s.add_term(k, i, j, amp / 2.0);
  s.add_term(mk, i, j, amp / 2.0);
}

struct Skeleton {
  Dims dims;
  Eigen::MatrixXd E, C;
  int n0 = 1;
};

Skeleton skeleton(const RunConfig& cfg) {
  Skeleton sk;
  if (cfg.preset == "example1") {
    sk.dims = {2, 1, 1};
    const double gs = param(cfg, "gamma_struct");
    sk.E = Eigen::MatrixXd{{param(cfg, "alpha"), param(cfg, "beta")}};
    sk.C = Eigen::MatrixXd{{0.0, -gs}, {gs, 0.0}};
  } else if (cfg.preset == "example2") {
    sk.dims = {2, 3, 2};
    sk.E = Eigen::MatrixXd{{-1.0, 0.0}, {0.0, -1.0}, {0.0, 0.0}};
    sk.C = Eigen::MatrixXd{{0.0, 1.0}, {-1.0, 0.0}};
  } else if (cfg.preset.empty()) {
    const InlineProblem& p = cfg.problem;
    sk.dims = {p.n, p.l, p.m};
    sk.E = Eigen::MatrixXd::Zero(p.l, p.n);
    sk.C = Eigen::MatrixXd::Zero(p.n, p.n);
    for (int r = 0; r < p.l; ++r) {
      for (int c = 0; c < p.n; ++c) sk.E(r, c) = p.E.at(r).at(c);
    }
    for (int r = 0; r < p.n; ++r) {
      for (int c = 0; c < p.n; ++c) sk.C(r, c) = p.C.at(r).at(c);
    }
    sk.n0 = p.n0;
    return sk;
  } else {
    throw ConfigError("unknown preset '" + cfg.preset + "'");
  }
  sk.n0 = static_cast<int>(param(cfg, "n0"));
  return sk;
}

Eigen::VectorXd eval_poly(const std::vector<PolyTerm>& poly, const Eigen::VectorXd& lambda, int size) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
  for (const PolyTerm& t : poly) {
    double mon = 1.0;
    for (std::size_t a = 0; a < t.pow.size(); ++a) mon *= std::pow(lambda[static_cast<Eigen::Index>(a)], t.pow[a]);
    for (int b = 0; b < size; ++b) out[b] += t.value.at(static_cast<std::size_t>(b)) * mon;
  }
  return out;
}

Eigen::VectorXd preset_Omega(const RunConfig& cfg, const Eigen::VectorXd& lam) {
  if (cfg.preset == "example1") return Eigen::VectorXd::Constant(1, 1.0 + lam[0]);
  return Eigen::Vector3d(lam[0], lam[1], 0.0);
}

void check_lambda(const RunConfig& cfg, const Eigen::VectorXd& lambda) {
  if (static_cast<std::size_t>(lambda.size()) != cfg.lambda.lo.size()) {
    throw DimensionError("parameter point has " + std::to_string(lambda.size()) + " entries, expected " +
                         std::to_string(cfg.lambda.lo.size()));
  }
}

}  // namespace

std::function<Eigen::VectorXd(const Eigen::VectorXd&)> frequency_map(const RunConfig& cfg) {
  const Skeleton sk = skeleton(cfg);
  const Eigen::MatrixXd Et = sk.E.transpose();
  if (!cfg.preset.empty()) {
    return [cfg, Et](const Eigen::VectorXd& lam) -> Eigen::VectorXd { return -Et * preset_Omega(cfg, lam); };
  }
  const std::vector<PolyTerm> Omega = cfg.problem.Omega;
  const int l = cfg.problem.l;
  return [Omega, Et, l](const Eigen::VectorXd& lam) -> Eigen::VectorXd { return -Et * eval_poly(Omega, lam, l); };
}

ProblemInstance make_instance(const RunConfig& cfg, const Eigen::VectorXd& lambda) {
  check_lambda(cfg, lambda);
  const Skeleton sk = skeleton(cfg);
  const Dims d = sk.dims;
  const KamParams& kp = cfg.numerics;
  ProblemInstance inst;
  inst.S = PoissonStructure(sk.E, sk.C, d.m);
  inst.lambda = lambda;
  inst.n0 = sk.n0;
  inst.params = kp;
  const int l = d.l;
  const int m2 = 2 * d.m;
  NormalForm& N = inst.N;
  N.h = Series(d, kp.d_max, kp.K_hard);
  Series P(d, kp.d_max, kp.K_hard);

  if (cfg.preset == "example1") {
    const double lam = lambda[0];
    const double eps = param(cfg, "eps");
    N.e = lam + lam * lam / 2.0;
    N.Omega = preset_Omega(cfg, lambda);
    N.A = SeriesMatrix::constant(d, Eigen::MatrixXd::Identity(1, 1), kp.K_hard);
    N.B = SeriesMatrix::constant(d, Eigen::MatrixXd::Zero(1, 2), kp.K_hard);
    N.M = SeriesMatrix::constant(d, Eigen::Vector2d(1.0, -1.0).asDiagonal().toDenseMatrix(), kp.K_hard);
    const int i0[] = {0};
    const int j0[] = {0, 0};
    const int ju[] = {1, 0};
    const int k1[] = {1, 0};
    const int k2[] = {0, 1};
    add_real_cos(P, k1, i0, j0, eps);
    add_real_cos(P, k2, i0, j0, eps);
    const double zc = param(cfg, "z_coupling");
    if (zc != 0.0) add_real_cos(P, k1, i0, ju, eps * zc);
  } else if (cfg.preset == "example2") {
    const double eps = param(cfg, "eps");
    N.e = 0.5 * (lambda[0] * lambda[0] + lambda[1] * lambda[1]);
    N.Omega = preset_Omega(cfg, lambda);
    N.A = SeriesMatrix::constant(d, Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal().toDenseMatrix(), kp.K_hard);
    N.B = SeriesMatrix::constant(d, Eigen::MatrixXd::Zero(3, 4), kp.K_hard);
    N.M = SeriesMatrix::constant(d, Eigen::Vector4d(1.0, 1.0, -1.0, -2.0).asDiagonal().toDenseMatrix(), kp.K_hard);
    const int i0[] = {0, 0, 0};
    const int i3[] = {0, 0, 1};
    const int j0[] = {0, 0, 0, 0};
    const int k0[] = {0, 0};
    const int k1[] = {1, 0};
    const int k2[] = {0, 1};
    add_real_cos(P, k1, i0, j0, eps);
    add_real_cos(P, k2, i0, j0, eps);
    P.add_term(k0, i3, j0, eps);
    add_real_cos(P, k1, i3, j0, eps);
  } else {
    const InlineProblem& p = cfg.problem;
    N.e = eval_poly(p.e, lambda, 1)[0];
    N.Omega = eval_poly(p.Omega, lambda, l);
    N.A = SeriesMatrix(d, l, l, kp.K_hard);
    N.B = SeriesMatrix(d, l, m2, kp.K_hard);
    N.M = SeriesMatrix(d, m2, m2, kp.K_hard);
    auto fill = [&](SeriesMatrix& X, const std::vector<MatrixTerm>& terms) {
      for (const MatrixTerm& t : terms) X.at(t.row, t.col).add_term(Mode::from(t.k), 0, cplx(t.re, t.im));
    };
    fill(N.A, p.A);
    fill(N.B, p.B);
    fill(N.M, p.M);
    for (const CoeffTerm& t : p.h) N.h.add_term(t.k, t.i, t.j, cplx(t.re, t.im));
    for (const CoeffTerm& t : p.P) P.add_term(t.k, t.i, t.j, cplx(t.re, t.im));
  }
  N.validate(d);
  inst.P = std::move(P);
  return inst;
}

InstanceFactory make_factory(const RunConfig& cfg) {
  return [cfg](const Eigen::VectorXd& lam) { return make_instance(cfg, lam); };
}

Series hamiltonian(const ProblemInstance& inst) {
  const KamParams& p = inst.params;
  return add(normal_form_series(inst.N, inst.S.dims(), p.d_max, p.K_hard), inst.P.with_caps(p.d_max, p.K_hard));
}

std::vector<Eigen::VectorXd> lambda_points(const RunConfig& cfg) {
  const Eigen::VectorXd lo = Eigen::Map<const Eigen::VectorXd>(cfg.lambda.lo.data(), static_cast<Eigen::Index>(cfg.lambda.lo.size()));
  const Eigen::VectorXd hi = Eigen::Map<const Eigen::VectorXd>(cfg.lambda.hi.data(), static_cast<Eigen::Index>(cfg.lambda.hi.size()));
  return lambda_grid(lo, hi, cfg.lambda.grid);
}

// ---------------------------------------------------------------- YAML reading

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& path, const std::string& why) const {
    std::ostringstream msg;
    msg << source_;
    if (at.IsDefined() && !at.Mark().is_null()) msg << ":" << at.Mark().line + 1 << ":" << at.Mark().column + 1;
    msg << ": " << path << ": " << why;
    throw ConfigError(msg.str());
  }

  void keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) const {
    if (!node.IsMap()) fail(node, path, "expected a table");
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(kv.first, path + "." + key, "unknown key (allowed: " + list + ")");
      }
    }
  }

  double real(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected a number, got '" + n.Scalar() + "'");
    }
  }

  long long integer(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected an integer");
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected an integer, got '" + n.Scalar() + "'");
    }
  }

  bool boolean(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected true or false, got '" + n.Scalar() + "'");
    }
  }

  std::string text(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected a string");
    return n.Scalar();
  }

  std::vector<double> reals(const YAML::Node& n, const std::string& path) const {
    if (!n.IsSequence()) fail(n, path, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(real(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<int> ints(const YAML::Node& n, const std::string& path) const {
    if (!n.IsSequence()) fail(n, path, "expected a list of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
      out.push_back(static_cast<int>(integer(n[i], path + "[" + std::to_string(i) + "]")));
    }
    return out;
  }

  std::vector<std::vector<double>> matrix(const YAML::Node& n, const std::string& path, int rows, int cols) const {
    if (!n.IsSequence() || static_cast<int>(n.size()) != rows) {
      fail(n, path, "expected " + std::to_string(rows) + " rows");
    }
    std::vector<std::vector<double>> out;
    for (int r = 0; r < rows; ++r) {
      const std::string rp = path + "[" + std::to_string(r) + "]";
      std::vector<double> row = reals(n[r], rp);
      if (static_cast<int>(row.size()) != cols) fail(n[r], rp, "expected " + std::to_string(cols) + " columns");
      out.push_back(std::move(row));
    }
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

std::string policy_name(KPolicy p) {
  switch (p) {
    case KPolicy::log_power: return "log_power";
    case KPolicy::log_cubic: return "log_cubic";
    case KPolicy::fixed: return "fixed";
  }
  return "log_power";
}

std::string coupling_name(Coupling c) { return c == Coupling::full ? "full" : "literal"; }

void read_numerics(const Reader& rd, const YAML::Node& n, KamParams& p) {
  const std::string path = "numerics";
  rd.keys(n, path,
          {"gamma0", "tau", "sigma0", "d_max", "K_policy", "K_fixed", "K_hard", "a_star", "lie_order", "tol_residual",
           "tol_stop", "nu_max", "r0", "s0", "eps_clamp", "coeff_floor", "coupling", "dense_limit"});
  auto R = [&](const char* k, double& v) {
    if (n[k]) v = rd.real(n[k], path + "." + k);
  };
  auto I = [&](const char* k, int& v) {
    if (n[k]) v = static_cast<int>(rd.integer(n[k], path + "." + k));
  };
  R("gamma0", p.gamma0);
  R("tau", p.tau);
  R("sigma0", p.sigma0);
  I("d_max", p.d_max);
  I("K_fixed", p.K_fixed);
  I("K_hard", p.K_hard);
  I("a_star", p.a_star);
  I("lie_order", p.lie_order);
  R("tol_residual", p.tol_residual);
  R("tol_stop", p.tol_stop);
  I("nu_max", p.nu_max);
  R("r0", p.r0);
  R("s0", p.s0);
  R("eps_clamp", p.eps_clamp);
  R("coeff_floor", p.coeff_floor);
  if (n["dense_limit"]) {
    const long long v = rd.integer(n["dense_limit"], path + ".dense_limit");
    if (v < 0) rd.fail(n["dense_limit"], path + ".dense_limit", "must be non-negative");
    p.dense_limit = static_cast<std::size_t>(v);
  }
  if (n["K_policy"]) {
    const std::string v = rd.text(n["K_policy"], path + ".K_policy");
    if (v == "log_power") p.K_policy = KPolicy::log_power;
    else if (v == "log_cubic") p.K_policy = KPolicy::log_cubic;
    else if (v == "fixed") p.K_policy = KPolicy::fixed;
    else rd.fail(n["K_policy"], path + ".K_policy", "expected log_power, log_cubic or fixed");
  }
  if (n["coupling"]) {
    const std::string v = rd.text(n["coupling"], path + ".coupling");
    if (v == "full") p.coupling = Coupling::full;
    else if (v == "literal") p.coupling = Coupling::literal;
    else rd.fail(n["coupling"], path + ".coupling", "expected full or literal");
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    rd.fail(n, path, e.what());
  }
}

std::vector<PolyTerm> read_poly(const Reader& rd, const YAML::Node& n, const std::string& path, std::size_t dim,
                                std::size_t size) {
  if (!n.IsSequence()) rd.fail(n, path, "expected a list of {pow, value} terms");
  std::vector<PolyTerm> out;
  for (std::size_t t = 0; t < n.size(); ++t) {
    const std::string tp = path + "[" + std::to_string(t) + "]";
    rd.keys(n[t], tp, {"pow", "value"});
    PolyTerm term;
    if (!n[t]["pow"] || !n[t]["value"]) rd.fail(n[t], tp, "needs both pow and value");
    term.pow = rd.ints(n[t]["pow"], tp + ".pow");
    term.value = rd.reals(n[t]["value"], tp + ".value");
    if (term.pow.size() != dim) {
      rd.fail(n[t]["pow"], tp + ".pow", "needs one exponent per parameter (" + std::to_string(dim) + ")");
    }
    for (int e : term.pow) {
      if (e < 0) rd.fail(n[t]["pow"], tp + ".pow", "exponents must be non-negative");
    }
    if (term.value.size() != size) {
      rd.fail(n[t]["value"], tp + ".value", "needs " + std::to_string(size) + " entries");
    }
    out.push_back(std::move(term));
  }
  return out;
}

std::vector<MatrixTerm> read_matrix_terms(const Reader& rd, const YAML::Node& n, const std::string& path, int rows,
                                          int cols, int nang) {
  if (!n.IsSequence()) rd.fail(n, path, "expected a list of {row, col, k, re, im} terms");
  std::vector<MatrixTerm> out;
  for (std::size_t t = 0; t < n.size(); ++t) {
    const std::string tp = path + "[" + std::to_string(t) + "]";
    rd.keys(n[t], tp, {"row", "col", "k", "re", "im"});
    MatrixTerm m;
    if (!n[t]["row"] || !n[t]["col"]) rd.fail(n[t], tp, "needs row and col");
    m.row = static_cast<int>(rd.integer(n[t]["row"], tp + ".row"));
    m.col = static_cast<int>(rd.integer(n[t]["col"], tp + ".col"));
    if (m.row < 0 || m.row >= rows) rd.fail(n[t]["row"], tp + ".row", "out of range [0, " + std::to_string(rows) + ")");
    if (m.col < 0 || m.col >= cols) rd.fail(n[t]["col"], tp + ".col", "out of range [0, " + std::to_string(cols) + ")");
    m.k = n[t]["k"] ? rd.ints(n[t]["k"], tp + ".k") : std::vector<int>(static_cast<std::size_t>(nang), 0);
    if (static_cast<int>(m.k.size()) != nang) rd.fail(n[t]["k"], tp + ".k", "needs n entries");
    if (n[t]["re"]) m.re = rd.real(n[t]["re"], tp + ".re");
    if (n[t]["im"]) m.im = rd.real(n[t]["im"], tp + ".im");
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<CoeffTerm> read_coeffs(const Reader& rd, const YAML::Node& n, const std::string& path, Dims d) {
  if (!n.IsSequence()) rd.fail(n, path, "expected a list of {k, i, j, re, im} terms");
  std::vector<CoeffTerm> out;
  for (std::size_t t = 0; t < n.size(); ++t) {
    const std::string tp = path + "[" + std::to_string(t) + "]";
    rd.keys(n[t], tp, {"k", "i", "j", "re", "im"});
    CoeffTerm c;
    c.k = n[t]["k"] ? rd.ints(n[t]["k"], tp + ".k") : std::vector<int>(static_cast<std::size_t>(d.n), 0);
    c.i = n[t]["i"] ? rd.ints(n[t]["i"], tp + ".i") : std::vector<int>(static_cast<std::size_t>(d.l), 0);
    c.j = n[t]["j"] ? rd.ints(n[t]["j"], tp + ".j") : std::vector<int>(static_cast<std::size_t>(2 * d.m), 0);
    if (static_cast<int>(c.k.size()) != d.n) rd.fail(n[t]["k"], tp + ".k", "needs n entries");
    if (static_cast<int>(c.i.size()) != d.l) rd.fail(n[t]["i"], tp + ".i", "needs l entries");
    if (static_cast<int>(c.j.size()) != 2 * d.m) rd.fail(n[t]["j"], tp + ".j", "needs 2m entries");
    for (int e : c.i) {
      if (e < 0) rd.fail(n[t]["i"], tp + ".i", "exponents must be non-negative");
    }
    for (int e : c.j) {
      if (e < 0) rd.fail(n[t]["j"], tp + ".j", "exponents must be non-negative");
    }
    if (n[t]["re"]) c.re = rd.real(n[t]["re"], tp + ".re");
    if (n[t]["im"]) c.im = rd.real(n[t]["im"], tp + ".im");
    out.push_back(std::move(c));
  }
  return out;
}

/// A list of terms describes a real function when every term has a conjugate partner.
template <class T, class KeyFn>
void check_real(const Reader& rd, const YAML::Node& n, const std::string& path, const std::vector<T>& terms,
                KeyFn key) {
  std::map<decltype(key(terms.front(), false)), cplx> sum;
  for (const T& t : terms) sum[key(t, false)] += cplx(t.re, t.im);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto kk = key(terms[i], false);
    const auto km = key(terms[i], true);
    const cplx a = sum[kk];
    const cplx b = sum.count(km) ? sum[km] : cplx{};
    if (std::abs(a - std::conj(b)) > 1e-14 * std::max(1.0, std::abs(a))) {
      rd.fail(n[i], path + "[" + std::to_string(i) + "]",
              "the function must be real: this coefficient needs the complex-conjugate partner at -k");
    }
  }
}

void read_inline(const Reader& rd, const YAML::Node& n, RunConfig& cfg) {
  const std::string path = "problem.inline";
  rd.keys(n, path, {"n", "l", "m", "n0", "E", "C", "e", "Omega", "A", "B", "M", "h", "P"});
  InlineProblem& p = cfg.problem;
  for (const char* k : {"n", "l", "m", "E", "C", "Omega", "A", "M"}) {
    if (!n[k]) rd.fail(n, path, std::string("missing required key '") + k + "'");
  }
  p.n = static_cast<int>(rd.integer(n["n"], path + ".n"));
  p.l = static_cast<int>(rd.integer(n["l"], path + ".l"));
  p.m = static_cast<int>(rd.integer(n["m"], path + ".m"));
  if (p.n < 1 || p.n > kMaxAngles) rd.fail(n["n"], path + ".n", "must lie in [1, " + std::to_string(kMaxAngles) + "]");
  if (p.l < 1) rd.fail(n["l"], path + ".l", "must be positive");
  if (p.m < 0) rd.fail(n["m"], path + ".m", "must be non-negative");
  if (p.l + 2 * p.m > 10) rd.fail(n, path, "l + 2m must not exceed 10");
  p.n0 = n["n0"] ? static_cast<int>(rd.integer(n["n0"], path + ".n0")) : 1;
  if (p.n0 < 1 || p.n0 > p.l) rd.fail(n["n0"], path + ".n0", "must lie in [1, l]");
  p.E = rd.matrix(n["E"], path + ".E", p.l, p.n);
  p.C = rd.matrix(n["C"], path + ".C", p.n, p.n);
  for (int r = 0; r < p.n; ++r) {
    for (int c = 0; c < p.n; ++c) {
      if (p.C[r][c] != -p.C[c][r]) {
        std::ostringstream why;
        why << "C must be antisymmetric: C[" << r << "][" << c << "] = " << p.C[r][c] << " but C[" << c << "][" << r
            << "] = " << p.C[c][r];
        rd.fail(n["C"][r][c], path + ".C[" + std::to_string(r) + "][" + std::to_string(c) + "]", why.str());
      }
    }
  }
  const std::size_t dim = cfg.lambda.lo.size();
  p.e = n["e"] ? read_poly(rd, n["e"], path + ".e", dim, 1) : std::vector<PolyTerm>{};
  p.Omega = read_poly(rd, n["Omega"], path + ".Omega", dim, static_cast<std::size_t>(p.l));
  p.A = read_matrix_terms(rd, n["A"], path + ".A", p.l, p.l, p.n);
  p.B = n["B"] ? read_matrix_terms(rd, n["B"], path + ".B", p.l, 2 * p.m, p.n) : std::vector<MatrixTerm>{};
  p.M = read_matrix_terms(rd, n["M"], path + ".M", 2 * p.m, 2 * p.m, p.n);
  const Dims d{p.n, p.l, p.m};
  p.h = n["h"] ? read_coeffs(rd, n["h"], path + ".h", d) : std::vector<CoeffTerm>{};
  p.P = n["P"] ? read_coeffs(rd, n["P"], path + ".P", d) : std::vector<CoeffTerm>{};

  auto mkey = [](const MatrixTerm& t, bool neg) {
    std::vector<int> k = t.k;
    if (neg) {
      for (int& v : k) v = -v;
    }
    return std::make_tuple(t.row, t.col, k);
  };
  auto ckey = [](const CoeffTerm& t, bool neg) {
    std::vector<int> k = t.k;
    if (neg) {
      for (int& v : k) v = -v;
    }
    return std::make_tuple(k, t.i, t.j);
  };
  for (const char* name : {"A", "B", "M"}) {
    const auto& terms = std::string(name) == "A" ? p.A : std::string(name) == "B" ? p.B : p.M;
    if (!terms.empty()) check_real(rd, n[name], path + "." + name, terms, mkey);
  }
  if (!p.h.empty()) check_real(rd, n["h"], path + ".h", p.h, ckey);
  if (!p.P.empty()) check_real(rd, n["P"], path + ".P", p.P, ckey);
  for (std::size_t t = 0; t < p.h.size(); ++t) {
    int deg = 0;
    for (int e : p.h[t].i) deg += e;
    for (int e : p.h[t].j) deg += e;
    if (deg < 3) rd.fail(n["h"][t], path + ".h[" + std::to_string(t) + "]", "h holds only terms of degree >= 3 in (y, z)");
  }
  // symmetric blocks: every (row, col, k) needs an equal (col, row, k)
  for (const char* name : {"A", "M"}) {
    const auto& terms = std::string(name) == "A" ? p.A : p.M;
    std::map<std::tuple<int, int, std::vector<int>>, cplx> sum;
    for (const auto& t : terms) sum[std::make_tuple(t.row, t.col, t.k)] += cplx(t.re, t.im);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const auto& x = terms[t];
      const auto it = sum.find(std::make_tuple(x.col, x.row, x.k));
      const cplx other = it == sum.end() ? cplx{} : it->second;
      if (std::abs(sum[std::make_tuple(x.row, x.col, x.k)] - other) > 0.0) {
        rd.fail(n[name][t], path + "." + name + "[" + std::to_string(t) + "]",
                std::string(name) + " must be symmetric: entry (" + std::to_string(x.row) + ", " +
                    std::to_string(x.col) + ") has no equal transposed partner");
      }
    }
  }
}

}  // namespace

RunConfig load_config(const std::string& text, const std::string& source) {
  const Reader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream msg;
    msg << source << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": syntax error: " << e.msg;
    throw ConfigError(msg.str());
  }
  if (!root.IsMap()) rd.fail(root, "<root>", "the configuration must be a table");
  rd.keys(root, "<root>", {"problem", "lambda", "numerics", "sieve", "verify", "outputs", "seed"});
  if (!root["problem"]) rd.fail(root, "<root>", "missing required table 'problem'");
  const YAML::Node prob = root["problem"];
  rd.keys(prob, "problem", {"preset", "params", "inline"});
  const bool has_preset = static_cast<bool>(prob["preset"]);
  const bool has_inline = static_cast<bool>(prob["inline"]);
  if (has_preset == has_inline) rd.fail(prob, "problem", "give exactly one of 'preset' or 'inline'");

  RunConfig cfg;
  if (has_preset) {
    const std::string name = rd.text(prob["preset"], "problem.preset");
    try {
      cfg = preset_config(name);
    } catch (const ConfigError& e) {
      rd.fail(prob["preset"], "problem.preset", e.what());
    }
    if (prob["params"]) {
      const YAML::Node ps = prob["params"];
      std::set<std::string> allowed;
      for (const auto& [k, v] : cfg.preset_params) allowed.insert(k);
      rd.keys(ps, "problem.params", allowed);
      for (const auto& kv : ps) {
        const auto key = kv.first.as<std::string>();
        cfg.preset_params[key] = rd.real(kv.second, "problem.params." + key);
      }
    }
    const double n0 = cfg.preset_params.at("n0");
    const int l = name == "example1" ? 1 : 3;
    if (n0 != std::floor(n0) || n0 < 1 || n0 > l) {
      rd.fail(prob["params"] ? prob["params"]["n0"] : prob, "problem.params.n0",
              "must be an integer in [1, " + std::to_string(l) + "]");
    }
  } else if (prob["params"]) {
    rd.fail(prob["params"], "problem.params", "only presets take params");
  }

  if (root["lambda"]) {
    const YAML::Node lb = root["lambda"];
    rd.keys(lb, "lambda", {"lo", "hi", "grid"});
    if (lb["lo"]) cfg.lambda.lo = rd.reals(lb["lo"], "lambda.lo");
    if (lb["hi"]) cfg.lambda.hi = rd.reals(lb["hi"], "lambda.hi");
    if (lb["lo"] && !lb["hi"]) cfg.lambda.hi = cfg.lambda.lo;
    if (lb["grid"]) cfg.lambda.grid = static_cast<int>(rd.integer(lb["grid"], "lambda.grid"));
    if (cfg.lambda.grid < 1) rd.fail(lb["grid"], "lambda.grid", "must be positive");
    if (cfg.lambda.lo.size() != cfg.lambda.hi.size()) rd.fail(lb, "lambda", "lo and hi must have the same length");
    for (std::size_t a = 0; a < cfg.lambda.lo.size(); ++a) {
      if (!(cfg.lambda.lo[a] <= cfg.lambda.hi[a])) rd.fail(lb, "lambda", "lo must not exceed hi");
    }
  } else if (has_inline) {
    rd.fail(root, "lambda", "inline problems need a 'lambda' table");
  }
  if (has_preset && static_cast<int>(cfg.lambda.lo.size()) != preset_lambda_dim(cfg.preset)) {
    rd.fail(root["lambda"], "lambda", "preset " + cfg.preset + " has " +
                                          std::to_string(preset_lambda_dim(cfg.preset)) + " parameter(s)");
  }
  if (cfg.lambda.lo.empty()) rd.fail(root["lambda"], "lambda.lo", "needs at least one parameter");

  if (root["numerics"]) read_numerics(rd, root["numerics"], cfg.numerics);
  if (has_inline) read_inline(rd, prob["inline"], cfg);

  if (root["sieve"]) {
    const YAML::Node s = root["sieve"];
    rd.keys(s, "sieve", {"gammas", "tau", "K", "points", "monte_carlo"});
    if (s["gammas"]) cfg.sieve.gammas = rd.reals(s["gammas"], "sieve.gammas");
    for (double g : cfg.sieve.gammas) {
      if (!(g > 0.0)) rd.fail(s["gammas"], "sieve.gammas", "entries must be positive");
    }
    if (s["tau"]) cfg.sieve.tau = rd.real(s["tau"], "sieve.tau");
    if (s["K"]) cfg.sieve.K = static_cast<int>(rd.integer(s["K"], "sieve.K"));
    if (s["points"]) {
      const long long v = rd.integer(s["points"], "sieve.points");
      if (v < 1) rd.fail(s["points"], "sieve.points", "must be positive");
      cfg.sieve.points = static_cast<std::uint64_t>(v);
    }
    if (s["monte_carlo"]) cfg.sieve.monte_carlo = rd.boolean(s["monte_carlo"], "sieve.monte_carlo");
    if (cfg.sieve.K < 1) rd.fail(s["K"], "sieve.K", "must be positive");
  }
  if (root["verify"]) {
    const YAML::Node v = root["verify"];
    rd.keys(v, "verify", {"grid", "T", "dt", "escape_radius", "omega_probe"});
    if (v["grid"]) cfg.verify.grid = static_cast<int>(rd.integer(v["grid"], "verify.grid"));
    if (v["T"]) cfg.verify.T = rd.real(v["T"], "verify.T");
    if (v["dt"]) cfg.verify.dt = rd.real(v["dt"], "verify.dt");
    if (v["escape_radius"]) cfg.verify.escape_radius = rd.real(v["escape_radius"], "verify.escape_radius");
    if (v["omega_probe"]) cfg.verify.omega_probe = rd.real(v["omega_probe"], "verify.omega_probe");
    if (cfg.verify.grid < 4) rd.fail(v["grid"], "verify.grid", "must be at least 4");
    if (!(cfg.verify.T > 0.0) || !(cfg.verify.dt > 0.0)) rd.fail(v, "verify", "T and dt must be positive");
  }
  if (root["outputs"]) {
    const YAML::Node o = root["outputs"];
    rd.keys(o, "outputs", {"dir", "verbosity", "embed_grid"});
    if (o["dir"]) cfg.outputs.dir = rd.text(o["dir"], "outputs.dir");
    if (o["verbosity"]) cfg.outputs.verbosity = static_cast<int>(rd.integer(o["verbosity"], "outputs.verbosity"));
    if (o["embed_grid"]) cfg.outputs.embed_grid = static_cast<int>(rd.integer(o["embed_grid"], "outputs.embed_grid"));
    if (cfg.outputs.embed_grid < 0) rd.fail(o["embed_grid"], "outputs.embed_grid", "must be non-negative");
  }
  if (root["seed"]) {
    const long long v = rd.integer(root["seed"], "seed");
    if (v < 0) rd.fail(root["seed"], "seed", "must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(v);
  }

  // Structural invariants of the problem at the first parameter point.
  try {
    const Eigen::VectorXd lo =
        Eigen::Map<const Eigen::VectorXd>(cfg.lambda.lo.data(), static_cast<Eigen::Index>(cfg.lambda.lo.size()));
    (void)make_instance(cfg, lo);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    rd.fail(prob, "problem", e.what());
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str(), path);
}

// ---------------------------------------------------------------- YAML writing

namespace {

void emit_reals(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

void emit_ints(YAML::Emitter& out, const std::vector<int>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (int x : v) out << x;
  out << YAML::EndSeq;
}

}  // namespace

std::string dump_config(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "problem" << YAML::Value << YAML::BeginMap;
  if (!cfg.preset.empty()) {
    out << YAML::Key << "preset" << YAML::Value << cfg.preset;
    out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : cfg.preset_params) out << YAML::Key << k << YAML::Value << v;
    out << YAML::EndMap;
  } else {
    const InlineProblem& p = cfg.problem;
    out << YAML::Key << "inline" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n" << YAML::Value << p.n;
    out << YAML::Key << "l" << YAML::Value << p.l;
    out << YAML::Key << "m" << YAML::Value << p.m;
    out << YAML::Key << "n0" << YAML::Value << p.n0;
    for (const auto& [name, mat] : {std::pair{"E", &p.E}, std::pair{"C", &p.C}}) {
      out << YAML::Key << name << YAML::Value << YAML::BeginSeq;
      for (const auto& row : *mat) emit_reals(out, row);
      out << YAML::EndSeq;
    }
    for (const auto& [name, poly] : {std::pair{"e", &p.e}, std::pair{"Omega", &p.Omega}}) {
      out << YAML::Key << name << YAML::Value << YAML::BeginSeq;
      for (const PolyTerm& t : *poly) {
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "pow" << YAML::Value;
        emit_ints(out, t.pow);
        out << YAML::Key << "value" << YAML::Value;
        emit_reals(out, t.value);
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    for (const auto& [name, terms] : {std::pair{"A", &p.A}, std::pair{"B", &p.B}, std::pair{"M", &p.M}}) {
      out << YAML::Key << name << YAML::Value << YAML::BeginSeq;
      for (const MatrixTerm& t : *terms) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "row" << YAML::Value << t.row << YAML::Key << "col" << YAML::Value << t.col;
        out << YAML::Key << "k" << YAML::Value;
        emit_ints(out, t.k);
        out << YAML::Key << "re" << YAML::Value << t.re << YAML::Key << "im" << YAML::Value << t.im;
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    for (const auto& [name, terms] : {std::pair{"h", &p.h}, std::pair{"P", &p.P}}) {
      out << YAML::Key << name << YAML::Value << YAML::BeginSeq;
      for (const CoeffTerm& t : *terms) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "k" << YAML::Value;
        emit_ints(out, t.k);
        out << YAML::Key << "i" << YAML::Value;
        emit_ints(out, t.i);
        out << YAML::Key << "j" << YAML::Value;
        emit_ints(out, t.j);
        out << YAML::Key << "re" << YAML::Value << t.re << YAML::Key << "im" << YAML::Value << t.im;
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "lambda" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lo" << YAML::Value;
  emit_reals(out, cfg.lambda.lo);
  out << YAML::Key << "hi" << YAML::Value;
  emit_reals(out, cfg.lambda.hi);
  out << YAML::Key << "grid" << YAML::Value << cfg.lambda.grid;
  out << YAML::EndMap;

  const KamParams& p = cfg.numerics;
  out << YAML::Key << "numerics" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "gamma0" << YAML::Value << p.gamma0;
  out << YAML::Key << "tau" << YAML::Value << p.tau;
  out << YAML::Key << "sigma0" << YAML::Value << p.sigma0;
  out << YAML::Key << "d_max" << YAML::Value << p.d_max;
  out << YAML::Key << "K_policy" << YAML::Value << policy_name(p.K_policy);
  out << YAML::Key << "K_fixed" << YAML::Value << p.K_fixed;
  out << YAML::Key << "K_hard" << YAML::Value << p.K_hard;
  out << YAML::Key << "a_star" << YAML::Value << p.a_star;
  out << YAML::Key << "lie_order" << YAML::Value << p.lie_order;
  out << YAML::Key << "tol_residual" << YAML::Value << p.tol_residual;
  out << YAML::Key << "tol_stop" << YAML::Value << p.tol_stop;
  out << YAML::Key << "nu_max" << YAML::Value << p.nu_max;
  out << YAML::Key << "r0" << YAML::Value << p.r0;
  out << YAML::Key << "s0" << YAML::Value << p.s0;
  out << YAML::Key << "eps_clamp" << YAML::Value << p.eps_clamp;
  out << YAML::Key << "coeff_floor" << YAML::Value << p.coeff_floor;
  out << YAML::Key << "coupling" << YAML::Value << coupling_name(p.coupling);
  out << YAML::Key << "dense_limit" << YAML::Value << static_cast<unsigned long long>(p.dense_limit);
  out << YAML::EndMap;

  out << YAML::Key << "sieve" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "gammas" << YAML::Value;
  emit_reals(out, cfg.sieve.gammas);
  out << YAML::Key << "tau" << YAML::Value << cfg.sieve.tau;
  out << YAML::Key << "K" << YAML::Value << cfg.sieve.K;
  out << YAML::Key << "points" << YAML::Value << static_cast<unsigned long long>(cfg.sieve.points);
  out << YAML::Key << "monte_carlo" << YAML::Value << cfg.sieve.monte_carlo;
  out << YAML::EndMap;

  out << YAML::Key << "verify" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "grid" << YAML::Value << cfg.verify.grid;
  out << YAML::Key << "T" << YAML::Value << cfg.verify.T;
  out << YAML::Key << "dt" << YAML::Value << cfg.verify.dt;
  out << YAML::Key << "escape_radius" << YAML::Value << cfg.verify.escape_radius;
  out << YAML::Key << "omega_probe" << YAML::Value << cfg.verify.omega_probe;
  out << YAML::EndMap;

  out << YAML::Key << "outputs" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << cfg.outputs.dir;
  out << YAML::Key << "verbosity" << YAML::Value << cfg.outputs.verbosity;
  out << YAML::Key << "embed_grid" << YAML::Value << cfg.outputs.embed_grid;
  out << YAML::EndMap;

  out << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(cfg.seed);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------- JSON records

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json series_json(const Series& s) {
  const Dims d = s.dims();
  json terms = json::array();
  for (const auto& [k, blk] : s.blocks()) {
    for (std::size_t idx = 0; idx < blk.size(); ++idx) {
      if (blk[idx] == cplx{}) continue;
      const auto ex = s.basis().exponents(idx);
      json t;
      t["k"] = std::vector<int>(k.k.begin(), k.k.begin() + d.n);
      t["i"] = std::vector<int>(ex.begin(), ex.begin() + d.l);
      t["j"] = std::vector<int>(ex.begin() + d.l, ex.end());
      t["re"] = blk[idx].real();
      t["im"] = blk[idx].imag();
      terms.push_back(std::move(t));
    }
  }
  return json{{"n", d.n}, {"l", d.l}, {"m", d.m}, {"d_max", s.d_max()}, {"K_max", s.k_max()}, {"terms", terms}};
}

Series series_from(const json& j) {
  const Dims d{j.at("n").get<int>(), j.at("l").get<int>(), j.at("m").get<int>()};
  Series s(d, j.at("d_max").get<int>(), j.at("K_max").get<int>());
  for (const json& t : j.at("terms")) {
    const auto k = t.at("k").get<std::vector<int>>();
    const auto i = t.at("i").get<std::vector<int>>();
    const auto jj = t.at("j").get<std::vector<int>>();
    if (static_cast<int>(i.size()) != d.l || static_cast<int>(jj.size()) != 2 * d.m) {
      throw DimensionError("series term exponents do not match (l, m)");
    }
    if (!s.add_term(k, i, jj, cplx(t.at("re").get<double>(), t.at("im").get<double>()))) {
      throw DimensionError("series term outside the declared caps");
    }
  }
  return s;
}

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string series_to_json(const Series& s) { return series_json(s).dump(); }

Series series_from_json(const std::string& text) {
  try {
    return series_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed series: ") + e.what());
  }
}

std::string torus_record(std::size_t index, const TorusResult& r, const KamParams& p) {
  json j;
  j["index"] = index;
  j["lambda"] = vec_json(r.lambda);
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  j["steps"] = r.steps;
  j["Omega0"] = vec_json(r.Omega0);
  j["Omega_inf"] = vec_json(r.Omega_inf);
  j["omega_inf"] = vec_json(r.omega_inf);
  j["drift"] = r.drift;
  j["drift_components"] = vec_json(r.drift_components);
  j["final_residual"] = r.final_residual;
  if (r.embed_grid > 0) {
    j["embed_grid"] = r.embed_grid;
    j["embedding_distance"] = r.embedding_distance;
  }
  json gens = json::array();
  for (const Generator& g : generators(r.log, p)) {
    gens.push_back(json{{"y_star", vec_json(g.y_star)}, {"F", series_json(g.F)}});
  }
  j["generators"] = gens;
  return j.dump();
}

std::string step_record(std::size_t index, const StepDiagnostics& d) {
  json j;
  j["index"] = index;
  j["nu"] = d.nu;
  j["r"] = d.sch.r;
  j["s"] = d.sch.s;
  j["gamma"] = d.sch.gamma;
  j["K"] = d.sch.K;
  j["eps"] = d.sch.eps;
  j["eps_measured"] = d.eps_measured;
  j["norm_P"] = d.norm_P;
  j["norm_Pplus"] = d.norm_Pplus;
  j["Delta_formula"] = d.Delta;
  j["zeta"] = d.zeta;
  j["Gamma"] = d.Gamma;
  j["cond"] = d.cond;
  j["sieve_margin"] = d.sieve_margin;
  j["residual"] = d.residual;
  j["lie_tail"] = d.lie_tail;
  j["first_order_defect"] = d.first_order_defect;
  j["h1"] = d.h1;
  j["H1"] = d.H1;
  j["H2"] = d.H2;
  j["H4"] = d.H4;
  j["H5"] = d.H5;
  j["H6"] = d.H6;
  j["omega_drift"] = d.omega_drift;
  j["y_star_norm"] = d.y_star_norm;
  j["unknowns"] = d.unknowns;
  j["sparse"] = d.sparse;
  j["terms_Pplus"] = d.terms_Pplus;
  return j.dump();
}

TorusRecord parse_torus_record(const std::string& line, const std::string& where) {
  try {
    const json j = json::parse(line);
    TorusRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.lambda = vec_from(j.at("lambda"));
    r.status = j.at("status").get<std::string>();
    r.Omega_inf = vec_from(j.at("Omega_inf"));
    r.omega_inf = vec_from(j.at("omega_inf"));
    for (const json& g : j.at("generators")) r.generators.push_back({series_from(g.at("F")), vec_from(g.at("y_star"))});
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(where + ": malformed torus record: " + e.what());
  } catch (const Error& e) {
    throw ConfigError(where + ": inconsistent torus record: " + e.what());
  }
}

}  // namespace kamtori
