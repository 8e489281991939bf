#ifndef KAMTORI_CONFIG_HPP
#define KAMTORI_CONFIG_HPP

// Run configuration: a single YAML file with nested tables, the two built-in
// presets, construction of problem instances from either, and the
// line-delimited JSON records the command-line tool writes.
//
// Schema violations raise ConfigError with "file:line:column: path: reason".

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kamtori/driver.hpp"
#include "kamtori/kamstep.hpp"

namespace kamtori {

/// A polynomial in lambda with vector coefficients: sum_t value_t lambda^pow_t.
struct PolyTerm {
  std::vector<int> pow;
  std::vector<double> value;
  bool operator==(const PolyTerm&) const = default;
};

/// One Fourier-Taylor coefficient p_kij.
struct CoeffTerm {
  std::vector<int> k, i, j;
  double re = 0.0;
  double im = 0.0;
  bool operator==(const CoeffTerm&) const = default;
};

/// One Fourier coefficient of one entry of a matrix of functions of x.
struct MatrixTerm {
  int row = 0;
  int col = 0;
  std::vector<int> k;
  double re = 0.0;
  double im = 0.0;
  bool operator==(const MatrixTerm&) const = default;
};

struct InlineProblem {
  int n = 0, l = 0, m = 0;
  int n0 = 1;
  std::vector<std::vector<double>> E, C;
  std::vector<PolyTerm> e;      // scalar-valued
  std::vector<PolyTerm> Omega;  // l-valued
  std::vector<MatrixTerm> A, B, M;
  std::vector<CoeffTerm> h, P;
  bool operator==(const InlineProblem&) const = default;
};

struct LambdaBox {
  std::vector<double> lo, hi;
  int grid = 1;  // points per axis
  bool operator==(const LambdaBox&) const = default;
};

struct SieveSettings {
  std::vector<double> gammas{0.01, 0.02, 0.04, 0.08};
  double tau = 2.0;
  int K = 30;
  std::uint64_t points = 10000;
  bool monte_carlo = false;
  bool operator==(const SieveSettings&) const = default;
};

struct VerifySettings {
  int grid = 128;              // points per angle for the invariance residual
  double T = 1000.0;           // rotation-number integration time
  double dt = 0.01;
  double escape_radius = 1e-2;
  double omega_probe = 1e-3;   // perturbation of omega for the sensitivity probe
  bool operator==(const VerifySettings&) const = default;
};

struct OutputSettings {
  std::string dir = "kamtori-out";
  int verbosity = 1;
  int embed_grid = 0;  // > 0: run also writes embeddings on this grid
  bool operator==(const OutputSettings&) const = default;
};

struct RunConfig {
  std::string preset;                    // "example1", "example2", or empty for inline
  std::map<std::string, double> preset_params;  // includes n0
  InlineProblem problem;                 // used when preset is empty
  LambdaBox lambda;
  KamParams numerics;
  SieveSettings sieve;
  VerifySettings verify;
  OutputSettings outputs;
  std::uint64_t seed = 0;
  bool operator==(const RunConfig&) const = default;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();

/// Default parameter table of a preset (throws ConfigError for unknown names).
std::map<std::string, double> preset_defaults(const std::string& name);

/// A complete normalized configuration for a preset with all defaults.
RunConfig preset_config(const std::string& name);

/// Parses YAML text. `source` names the input in error messages.
RunConfig load_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config_file(const std::string& path);

/// Normalized YAML: every field present, fixed key order, round-trip exact doubles.
std::string dump_config(const RunConfig& cfg);

/// Problem instance at lambda.
ProblemInstance make_instance(const RunConfig& cfg, const Eigen::VectorXd& lambda);
InstanceFactory make_factory(const RunConfig& cfg);

/// lambda -> w(lambda) = -E^T Omega(lambda), without building series.
std::function<Eigen::VectorXd(const Eigen::VectorXd&)> frequency_map(const RunConfig& cfg);

/// The full Hamiltonian N + P at lambda as a series with the numerics' caps.
Series hamiltonian(const ProblemInstance& inst);

/// Parameter points of the configured box.
std::vector<Eigen::VectorXd> lambda_points(const RunConfig& cfg);

// ---------------------------------------------------------------- records

/// Series as {"n","l","m","d_max","K_max","terms":[{"k","i","j","re","im"}]}.
std::string series_to_json(const Series& s);
Series series_from_json(const std::string& json);

/// One line per torus: status, frequencies, drift, residual, generators.
std::string torus_record(std::size_t index, const TorusResult& r, const KamParams& p);
/// One line per KAM step.
std::string step_record(std::size_t index, const StepDiagnostics& d);

struct TorusRecord {
  std::size_t index = 0;
  Eigen::VectorXd lambda;
  std::string status;
  Eigen::VectorXd Omega_inf;
  Eigen::VectorXd omega_inf;
  std::vector<Generator> generators;
};

/// Parses a torus record; throws ConfigError naming `where` on malformed input.
TorusRecord parse_torus_record(const std::string& line, const std::string& where);

}  // namespace kamtori

#endif  // KAMTORI_CONFIG_HPP
