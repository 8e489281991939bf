// kamtori: batch front end for the hyperbolic-torus KAM engine.
//
//   kamtori check  --preset example1
//   kamtori run    --config run.yaml --out results/
//   kamtori sieve  --config sieve.yaml
//   kamtori verify --config run.yaml --results results/tori.jsonl

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "kamtori/config.hpp"
#include "kamtori/driver.hpp"
#include "kamtori/kernels.hpp"
#include "kamtori/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kamtori;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailures = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config;
  std::string preset;
  int jobs = 0;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::string results;
  bool dump_config = false;
};

RunConfig resolve_config(const Options& o) {
  if (!o.config.empty() && !o.preset.empty()) throw ConfigError("give either --config or --preset, not both");
  if (o.config.empty() && o.preset.empty()) throw ConfigError("give --config PATH or --preset NAME");
  RunConfig cfg = o.config.empty() ? preset_config(o.preset) : load_config_file(o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

fs::path output_dir(const Options& o, const RunConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("KAMTORI_OUT"); env && *env) return env;
  return cfg.outputs.dir;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name, std::ios::trunc);
  if (!f) throw Error("cannot write " + (dir / name).string());
  return f;
}

std::string fmt_vec(const Eigen::VectorXd& v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  s << ")";
  return s.str();
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------- check

RussmannResult russmann_over_box(const RunConfig& cfg, int n) {
  Eigen::VectorXd lo = to_vec(cfg.lambda.lo);
  Eigen::VectorXd hi = to_vec(cfg.lambda.hi);
  // The rank condition is a property of w near the box; a point box is widened to probe derivatives.
  for (Eigen::Index a = 0; a < lo.size(); ++a) {
    if (!(hi[a] > lo[a])) {
      lo[a] -= 0.05;
      hi[a] += 0.05;
    }
  }
  return check_russmann(frequency_map(cfg), lo, hi, n);
}

bool all_conditions(const RunConfig& cfg, std::ostream& out, const fs::path* dir) {
  const auto lams = lambda_points(cfg);
  std::vector<ConditionReport> reps(lams.size());
  kernels::for_each_index(lams.size(), [&](std::size_t i) { reps[i] = check_conditions(make_instance(cfg, lams[i])); });
  const ProblemInstance first = make_instance(cfg, lams.front());
  const RussmannResult rus = russmann_over_box(cfg, first.S.dims().n);

  std::optional<std::ofstream> file;
  if (dir) file = open_out(*dir, "check.jsonl");
  bool ok = true;
  out << std::setprecision(6);
  out << "problem: " << (cfg.preset.empty() ? std::string("inline") : cfg.preset) << ", n0 = " << first.n0 << "\n";
  out << "R (Ruessmann rank over the box): " << (rus.pass ? "pass" : "fail") << " (rank " << rus.max_rank << " of "
      << first.S.dims().n << ")\n";
  out << "lambda | H min|Re| | ND | [A] cond | eta | alpha | rho0 | mb | spectrum of J[M]\n";
  for (std::size_t i = 0; i < lams.size(); ++i) {
    const ConditionReport& r = reps[i];
    ok = ok && r.pass;
    std::ostringstream spectrum_text;
    spectrum_text << std::setprecision(6);
    for (std::size_t e = 0; e < r.hyperbolicity.spectrum.size(); ++e) {
      const auto z = r.hyperbolicity.spectrum[e];
      spectrum_text << (e ? " " : "") << z.real() << (z.imag() >= 0 ? "+" : "") << z.imag() << "i";
    }
    out << fmt_vec(lams[i]) << " | " << (r.hyperbolicity.pass ? "pass " : "FAIL ") << r.hyperbolicity.min_abs_re
        << " | " << (r.nd_pass ? "pass" : "FAIL") << " | " << r.A_avg_cond << " | " << r.eta.eta << " | "
        << r.eta.alpha << " | " << r.eta.rho0 << " | " << (r.nd_pass ? (r.mb.pass ? "pass" : "fail") : "-") << " | "
        << spectrum_text.str() << "\n";
    if (file) {
      json j;
      j["index"] = i;
      j["lambda"] = vec_json(lams[i]);
      j["hyperbolic"] = r.hyperbolicity.pass;
      j["min_abs_re"] = r.hyperbolicity.min_abs_re;
      json sp = json::array();
      for (const auto& z : r.hyperbolicity.spectrum) sp.push_back({z.real(), z.imag()});
      j["spectrum"] = sp;
      j["nd"] = r.nd_pass;
      j["nd_message"] = r.nd_message;
      j["A_avg_cond"] = std::isfinite(r.A_avg_cond) ? json(r.A_avg_cond) : json("inf");
      j["A_avg_singular"] = !(r.A_avg_cond < 1e12);
      j["eta"] = r.eta.eta;
      j["alpha"] = r.eta.alpha;
      j["rho0"] = r.eta.rho0;
      j["mb"] = r.mb.pass;
      j["russmann"] = rus.pass;
      j["russmann_rank"] = rus.max_rank;
      *file << j.dump() << "\n";
    }
  }
  out << (ok ? "all grid points pass H and ND\n" : "some grid points fail H or ND\n");
  return ok;
}

int cmd_check(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = output_dir(o, cfg);
  return all_conditions(cfg, std::cout, &dir) ? kExitOk : kExitFailures;
}

// ---------------------------------------------------------------- run

int cmd_run(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = output_dir(o, cfg);
  if (!o.force) {
    std::ostringstream sink;
    if (!all_conditions(cfg, sink, nullptr)) {
      std::cerr << sink.str() << "standing hypotheses fail; rerun with --force to iterate anyway\n";
      return kExitFailures;
    }
  }
  DriverOptions dopt;
  dopt.check = !o.force;
  dopt.embed_grid = cfg.outputs.embed_grid;
  const auto lams = lambda_points(cfg);
  const auto results = run(make_factory(cfg), lams, dopt);

  auto tori = open_out(dir, "tori.jsonl");
  auto steps = open_out(dir, "steps.jsonl");
  std::optional<std::ofstream> emb;
  if (cfg.outputs.embed_grid > 0) emb = open_out(dir, "embeddings.jsonl");
  std::map<std::string, int> counts;
  double max_drift = 0.0;
  double max_residual = 0.0;
  bool hard_failure = false;
  std::cout << std::setprecision(6);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const TorusResult& r = results[i];
    ++counts[to_string(r.status)];
    tori << torus_record(i, r, cfg.numerics) << "\n";
    for (const StepDiagnostics& d : r.diagnostics) steps << step_record(i, d) << "\n";
    if (emb && !r.embedding.empty()) {
      const Dims d = make_instance(cfg, r.lambda).S.dims();
      const auto dim = static_cast<std::size_t>(d.phase_dim());
      const std::vector<double> id = identity_embedding(d, r.embed_grid);
      for (std::size_t p = 0; p < r.embedding.size() / dim; ++p) {
        const auto at = [&](std::size_t off, int len) {
          return std::vector<double>(r.embedding.begin() + static_cast<std::ptrdiff_t>(p * dim + off),
                                     r.embedding.begin() + static_cast<std::ptrdiff_t>(p * dim + off + len));
        };
        json j;
        j["index"] = i;
        j["theta"] = std::vector<double>(id.begin() + static_cast<std::ptrdiff_t>(p * dim + d.l),
                                         id.begin() + static_cast<std::ptrdiff_t>(p * dim + d.l + d.n));
        j["y"] = at(0, d.l);
        j["x"] = at(static_cast<std::size_t>(d.l), d.n);
        j["z"] = at(static_cast<std::size_t>(d.l + d.n), 2 * d.m);
        *emb << j.dump() << "\n";
      }
    }
    if (r.status == TorusStatus::converged) {
      max_drift = std::max(max_drift, r.drift);
      max_residual = std::max(max_residual, r.final_residual);
    }
    if (r.status == TorusStatus::diverged || r.status == TorusStatus::check_failed) hard_failure = true;
    if (cfg.outputs.verbosity > 0) {
      std::cout << "lambda " << fmt_vec(r.lambda) << ": " << to_string(r.status) << " after " << r.steps
                << " step(s), |P| = " << r.final_residual << ", omega_inf = " << fmt_vec(r.omega_inf, 12)
                << ", drift = " << fmt_vec(r.drift_components, 3);
      if (!r.message.empty()) std::cout << " [" << r.message << "]";
      std::cout << "\n";
    }
  }
  json summary;
  summary["points"] = results.size();
  for (const char* s : {"converged", "sieved_out", "diverged", "check_failed"}) summary[s] = counts[s];
  summary["max_drift"] = max_drift;
  summary["max_final_residual"] = max_residual;
  auto sfile = open_out(dir, "summary.jsonl");
  sfile << summary.dump() << "\n";
  std::cout << "summary: " << results.size() << " point(s): " << counts["converged"] << " converged, "
            << counts["sieved_out"] << " sieved out, " << counts["diverged"] << " diverged, " << counts["check_failed"]
            << " failed checks; max drift " << max_drift << ", max final |P| " << max_residual << "\n";
  std::cout << "records written to " << dir.string() << "\n";
  return hard_failure ? kExitFailures : kExitOk;
}

// ---------------------------------------------------------------- sieve

int cmd_sieve(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = output_dir(o, cfg);
  std::optional<std::uint64_t> seed;
  if (cfg.sieve.monte_carlo) seed = cfg.seed;
  const MeasureTable t = measure_excluded(frequency_map(cfg), to_vec(cfg.lambda.lo), to_vec(cfg.lambda.hi),
                                          cfg.sieve.gammas, cfg.sieve.tau, cfg.sieve.K, cfg.sieve.points, seed);
  auto file = open_out(dir, "sieve.jsonl");
  std::cout << std::setprecision(6) << "gamma | excluded fraction (" << t.points << " samples, K = " << cfg.sieve.K
            << ", tau = " << cfg.sieve.tau << ")\n";
  for (std::size_t i = 0; i < t.gammas.size(); ++i) {
    std::cout << t.gammas[i] << " | " << t.fractions[i] << "\n";
    file << json{{"gamma", t.gammas[i]}, {"fraction", t.fractions[i]}, {"points", t.points}}.dump() << "\n";
  }
  file << json{{"slope", t.slope}}.dump() << "\n";
  std::cout << "fitted log-log slope: " << t.slope << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = output_dir(o, cfg);
  const fs::path results = o.results.empty() ? dir / "tori.jsonl" : fs::path(o.results);
  std::ifstream in(results);
  if (!in) throw ConfigError(results.string() + ": cannot open results file");
  std::vector<TorusRecord> recs;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (line.empty()) continue;
    recs.push_back(parse_torus_record(line, results.string() + ":" + std::to_string(ln)));
  }
  auto file = open_out(dir, "verify.jsonl");
  std::cout << std::setprecision(6) << "lambda | invariance residual | with omega probe | rotation numbers | energy drift\n";
  for (const TorusRecord& r : recs) {
    if (r.status != "converged") continue;
    const ProblemInstance inst = make_instance(cfg, r.lambda);
    const Dims d = inst.S.dims();
    const Series H = hamiltonian(inst);
    const auto emb = reconstruct_embedding(inst.S, r.generators, cfg.verify.grid);
    const InvarianceReport inv = invariance_residual(emb, cfg.verify.grid, r.omega_inf, H, inst.S);
    Eigen::VectorXd probe = r.omega_inf;
    probe[0] += cfg.verify.omega_probe;
    const InvarianceReport inv_probe = invariance_residual(emb, cfg.verify.grid, probe, H, inst.S);

    const auto dim = static_cast<Eigen::Index>(d.phase_dim());
    const Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(emb.data(), dim);
    IntegrateOptions iopt;
    iopt.escape_radius = cfg.verify.escape_radius;
    iopt.record_every = std::max<std::size_t>(1, static_cast<std::size_t>(1.0 / cfg.verify.dt));
    const Trajectory traj = integrate(H, inst.S, p0, cfg.verify.T, cfg.verify.dt, iopt);
    json j;
    j["index"] = r.index;
    j["lambda"] = vec_json(r.lambda);
    j["invariance_residual"] = inv.residual;
    j["alias_fraction"] = inv.alias_fraction;
    j["invariance_residual_probe"] = inv_probe.residual;
    j["energy_drift"] = energy_drift(traj);
    j["escaped"] = traj.escaped;
    std::string rot = "escaped at t = " + std::to_string(traj.escape_time);
    if (!traj.escaped) {
      const Eigen::VectorXd w = rotation_numbers(traj, d.n, d.l);
      j["rotation_numbers"] = vec_json(w);
      j["rotation_error"] = (w - r.omega_inf).cwiseAbs().maxCoeff();
      rot = fmt_vec(w, 10);
    } else {
      j["escape_time"] = traj.escape_time;
    }
    file << j.dump() << "\n";
    std::cout << fmt_vec(r.lambda) << " | " << inv.residual << " | " << inv_probe.residual << " | " << rot << " | "
              << energy_drift(traj) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAM iteration for hyperbolic invariant tori of generalized Hamiltonian systems"};
  app.require_subcommand(0, 1);
  Options o;
  app.add_option("--config", o.config, "YAML configuration file");
  app.add_option("--preset", o.preset, "built-in problem: example1 or example2");
  app.add_option("--jobs", o.jobs, "worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", o.out, "output directory (overrides KAMTORI_OUT and the config)");
  app.add_flag("--force", o.force, "iterate even when the standing hypotheses fail");
  app.add_option("--seed", o.seed, "seed for Monte-Carlo parameter sampling");
  app.add_flag("--dump-config", o.dump_config, "print the normalized configuration and exit");
  auto* check = app.add_subcommand("check", "evaluate H, R, ND, eta and (mb) over the parameter grid");
  auto* run = app.add_subcommand("run", "iterate KAM steps at every grid point and write torus records");
  auto* sieve = app.add_subcommand("sieve", "excluded parameter fraction against gamma");
  auto* verify = app.add_subcommand("verify", "invariance residuals, rotation numbers and energy drift");
  verify->add_option("--results", o.results, "torus records from run (default: OUT/tori.jsonl)");
  for (auto* sub : {check, run, sieve, verify}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every other parse error is a usage error.
    return app.exit(e) == 0 ? 0 : 2;
  }

  kernels::set_thread_count(o.jobs > 0 ? o.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  try {
    if (o.dump_config) {
      std::cout << dump_config(resolve_config(o));
      return kExitOk;
    }
    if (check->parsed()) return cmd_check(o);
    if (run->parsed()) return cmd_run(o);
    if (sieve->parsed()) return cmd_sieve(o);
    if (verify->parsed()) return cmd_verify(o);
    std::cout << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailures;
  }
}
