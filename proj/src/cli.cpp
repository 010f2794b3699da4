#include "prgrad/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "prgrad/experiments.hpp"

namespace prgrad {

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Model parse_model(const std::string& token) {
  if (token == "gaussian-real") return Model::GaussianReal;
  if (token == "gaussian-complex") return Model::GaussianComplex;
  if (token == "cdp1d") return Model::Cdp1d;
  if (token == "cdp2d") return Model::Cdp2d;
  throw std::invalid_argument("unknown model '" + token +
                              "' (gaussian-real, gaussian-complex, cdp1d, cdp2d)");
}

struct SolveOptions {
  std::string model = "gaussian-real";
  Index n = 32;
  Index n1 = 0;
  Index n2 = 0;
  Index m = 0;      // 0 = 8 * n
  int masks = 8;
  std::string algorithm = "trgrad";
  std::string stepsize = "sd";
  double alpha = 0.2;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> truth_seed;
  double noise_sigma = 0.0;
  int max_iters = 1000;
  double tol = 1e-6;
  double tau_x = 5.0;
  double tau_z = 5.0;
  double tau_h = 5.0;
  double alpha_y = 3.0;
  int power_iters = 100;
  double power_tol = 1e-8;
  std::string trace_out;
  std::string config_path;
};

struct ExperimentOptions {
  std::string experiment = "phase-transition";
  std::string model = "gaussian-real";
  Index n = 128;
  Index n1 = 0;
  Index n2 = 0;
  std::vector<int> ratios{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int ratio = 8;
  std::vector<double> snr{20, 25, 30, 35, 40, 45, 50, 55, 60};
  int trials = 50;
  std::vector<std::string> algorithms{"trgrad-sd"};
  double alpha = 0.2;
  std::uint64_t seed = 1;
  int workers = 0;
  int max_iters = 0;  // 0 = per-experiment default
  double tol = 1e-9;
  double success_dist = 1e-3;
  double tau_x = 5.0;
  double tau_z = 5.0;
  double tau_h = 5.0;
  double alpha_y = 3.0;
  int power_iters = 100;
  double power_tol = 1e-8;
  std::string out_path = "results.csv";
  std::string config_path;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands "--config FILE" into "--key value" tokens appended after the
// explicit arguments. Keys already given on the command line are dropped so
// flags always win; unknown keys surface as ordinary parse errors.
std::vector<std::string> apply_flat_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& tok = args[i];
    if (tok.rfind("--", 0) != 0) continue;
    const auto eq = tok.find('=');
    const std::string name = tok.substr(0, eq == std::string::npos ? tok.size() : eq);
    given.push_back(name);
    std::string value;
    if (eq != std::string::npos) {
      value = tok.substr(eq + 1);
    } else if (name != "--help" && i + 1 < args.size()) {
      value = args[++i];
    }
    if (name == "--config") path = value;
  }
  if (path.empty()) return args;

  std::ifstream f(path);
  if (!f.is_open()) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const auto eq = t.find('=');
    const std::string key = eq == std::string::npos ? std::string() : trim(t.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key=value");
    }
    const std::string name = "--" + key;
    if (std::find(given.begin(), given.end(), name) != given.end()) continue;
    args.push_back(name);
    args.push_back(trim(t.substr(eq + 1)));
  }
  return args;
}

void add_solve_options(CLI::App* cmd, SolveOptions& o) {
  cmd->add_option("--model", o.model,
                  "Measurement model: gaussian-real, gaussian-complex, cdp1d, cdp2d")
      ->capture_default_str();
  cmd->add_option("--n", o.n, "Signal length (1D models)")->capture_default_str();
  cmd->add_option("--n1", o.n1, "First image dimension (cdp2d)")->capture_default_str();
  cmd->add_option("--n2", o.n2, "Second image dimension (cdp2d)")->capture_default_str();
  cmd->add_option("--m", o.m, "Number of measurements (Gaussian models; 0 = 8*n)")
      ->capture_default_str();
  cmd->add_option("--masks", o.masks, "Number of diffraction masks (CDP models)")
      ->capture_default_str();
  cmd->add_option("--algorithm", o.algorithm, "rgrad or trgrad")->capture_default_str();
  cmd->add_option("--stepsize", o.stepsize, "sd (steepest descent) or const")
      ->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Stepsize for --stepsize const")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Stream seed for signal/ensemble/solver")
      ->capture_default_str();
  cmd->add_option("--truth-seed", o.truth_seed,
                  "Sample the planted signal from this separate seed and report dist_rel");
  cmd->add_option("--noise-sigma", o.noise_sigma,
                  "Relative noise level: ||noise|| = sigma * ||y||")
      ->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters, "Iteration cap")->capture_default_str();
  cmd->add_option("--tol", o.tol, "Relative residual stopping tolerance")
      ->capture_default_str();
  cmd->add_option("--tau-x", o.tau_x, "Truncation threshold on the data event")
      ->capture_default_str();
  cmd->add_option("--tau-z", o.tau_z, "Truncation threshold on the iterate event")
      ->capture_default_str();
  cmd->add_option("--tau-h", o.tau_h, "Truncation threshold on the residual event")
      ->capture_default_str();
  cmd->add_option("--alpha-y", o.alpha_y, "Spectral initializer truncation threshold")
      ->capture_default_str();
  cmd->add_option("--power-iters", o.power_iters, "Power iteration cap")
      ->capture_default_str();
  cmd->add_option("--power-tol", o.power_tol, "Power iteration tolerance")
      ->capture_default_str();
  cmd->add_option("--trace-out", o.trace_out, "Write the per-iteration trace CSV here")
      ->capture_default_str();
  cmd->add_option("--config", o.config_path,
                  "Flat key=value file with these keys; flags win");
}

void add_experiment_options(CLI::App* cmd, ExperimentOptions& o) {
  cmd->add_option("--experiment", o.experiment,
                  "phase-transition, trace, or noise")
      ->capture_default_str();
  cmd->add_option("--model", o.model,
                  "Measurement model: gaussian-real, gaussian-complex, cdp1d, cdp2d")
      ->capture_default_str();
  cmd->add_option("--n", o.n, "Signal length (1D models)")->capture_default_str();
  cmd->add_option("--n1", o.n1, "First image dimension (cdp2d)")->capture_default_str();
  cmd->add_option("--n2", o.n2, "Second image dimension (cdp2d)")->capture_default_str();
  cmd->add_option("--ratios", o.ratios,
                  "Oversampling (or mask-count) grid for phase-transition")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--ratio", o.ratio, "Fixed oversampling (or mask count) for trace/noise")
      ->capture_default_str();
  cmd->add_option("--snr", o.snr, "SNR grid in dB for noise (inf = noiseless)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--trials", o.trials, "Trials per grid point")->capture_default_str();
  cmd->add_option("--algorithms", o.algorithms,
                  "Comparison set: rgrad-sd, trgrad-sd, rgrad-const[:a], trgrad-const[:a]")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Stepsize for the *-const algorithms")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Base seed for per-trial stream derivation")
      ->capture_default_str();
  cmd->add_option("--workers", o.workers, "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters,
                  "Iteration cap (0 = default: 2500 phase, 200 trace, 400 noise)")
      ->capture_default_str();
  cmd->add_option("--tol", o.tol, "Relative residual stopping tolerance")
      ->capture_default_str();
  cmd->add_option("--success-dist", o.success_dist,
                  "Relative distance counted as a success")
      ->capture_default_str();
  cmd->add_option("--tau-x", o.tau_x, "Truncation threshold on the data event")
      ->capture_default_str();
  cmd->add_option("--tau-z", o.tau_z, "Truncation threshold on the iterate event")
      ->capture_default_str();
  cmd->add_option("--tau-h", o.tau_h, "Truncation threshold on the residual event")
      ->capture_default_str();
  cmd->add_option("--alpha-y", o.alpha_y, "Spectral initializer truncation threshold")
      ->capture_default_str();
  cmd->add_option("--power-iters", o.power_iters, "Power iteration cap")
      ->capture_default_str();
  cmd->add_option("--power-tol", o.power_tol, "Power iteration tolerance")
      ->capture_default_str();
  cmd->add_option("--out", o.out_path, "CSV output path")->capture_default_str();
  cmd->add_option("--config", o.config_path,
                  "Flat key=value file with these keys; flags win");
}

void check_positive_dim(Index n, const char* name) {
  if (n < 1) {
    throw std::invalid_argument(std::string(name) + " must be >= 1");
  }
}

template <class T>
MeasurementEnsemble<T> build_solve_ensemble(const SolveOptions& o, Model model,
                                            Index n, Index m, Rng& rng) {
  if constexpr (is_complex_v<T>) {
    switch (model) {
      case Model::GaussianComplex: return sample_gaussian_ensemble<T>(n, m, rng);
      case Model::Cdp1d: return sample_cdp_ensemble(n, o.masks, rng);
      case Model::Cdp2d: return sample_cdp_ensemble_2d(o.n1, o.n2, o.masks, rng);
      default: throw std::logic_error("model dispatch");
    }
  } else {
    return sample_gaussian_ensemble<T>(n, m, rng);
  }
}

template <class T>
int solve_impl(const SolveOptions& o, Model model, std::ostream& out) {
  Index n = o.n;
  if (model == Model::Cdp2d) {
    check_positive_dim(o.n1, "n1");
    check_positive_dim(o.n2, "n2");
    n = o.n1 * o.n2;
  } else {
    check_positive_dim(n, "n");
  }
  Index m = o.m;
  const bool gaussian = (model == Model::GaussianReal || model == Model::GaussianComplex);
  if (gaussian) {
    if (m == 0) m = 8 * n;
    if (m < 1) throw std::invalid_argument("m must be >= 1");
  } else if (o.masks < 1) {
    throw std::invalid_argument("masks must be >= 1");
  }

  Rng rng(o.seed);
  Vec<T> x;
  if (o.truth_seed) {
    Rng truth_rng(*o.truth_seed);
    x = sample_standard_signal<T>(n, truth_rng);
  } else {
    x = sample_standard_signal<T>(n, rng);
  }
  const MeasurementEnsemble<T> e = build_solve_ensemble<T>(o, model, n, m, rng);
  Measurements meas{e.forward_intensity(x), std::nullopt};
  if (o.noise_sigma > 0.0) {
    meas = add_noise(meas, o.noise_sigma, rng());
  } else if (o.noise_sigma != 0.0) {
    throw std::invalid_argument("noise-sigma must be >= 0");
  }

  SolverConfig cfg;
  if (o.algorithm == "rgrad") {
    cfg.variant = SolverVariant::RGrad;
  } else if (o.algorithm == "trgrad") {
    cfg.variant = SolverVariant::TRGrad;
  } else {
    throw std::invalid_argument("unknown algorithm '" + o.algorithm + "' (rgrad, trgrad)");
  }
  if (o.stepsize == "sd") {
    cfg.stepsize = StepsizeRule::steepest();
  } else if (o.stepsize == "const") {
    cfg.stepsize = StepsizeRule::constant(o.alpha);
  } else {
    throw std::invalid_argument("unknown stepsize '" + o.stepsize + "' (sd, const)");
  }
  cfg.max_iters = o.max_iters;
  cfg.tol_residual = o.tol;
  cfg.trunc = TruncationParams{o.tau_x, o.tau_z, o.tau_h};
  cfg.alpha_y = o.alpha_y;
  cfg.power_iters = o.power_iters;
  cfg.power_tol = o.power_tol;

  const SolveResult<T> res = solve<T>(e, meas, cfg, rng, std::optional<Vec<T>>(x));

  nlohmann::json j;
  j["status"] = to_string(res.status);
  j["iterations"] = res.iterations;
  j["relative_residual"] = relative_residual(e, meas, res.state);
  if (o.truth_seed) {
    j["dist_rel"] = dist_phase(res.estimate, x) / x.norm();
  }
  j["stepsize_rule"] =
      (o.stepsize == "sd") ? std::string("sd") : "constant:" + format_g17(o.alpha);
  double mask_fraction = 1.0;
  if (!res.trace.records.empty()) {
    mask_fraction = static_cast<double>(res.trace.records.back().mask_count) /
                    static_cast<double>(e.m());
  }
  j["mask_fraction_final"] = mask_fraction;
  out << j.dump(2) << "\n";

  if (!o.trace_out.empty()) {
    std::ofstream f(o.trace_out);
    if (!f) {
      throw IoError("cannot open trace output file '" + o.trace_out + "'");
    }
    f << "iteration,residual,dist_rel,stepsize,mask_count,applications,restarted\n";
    for (const TraceRecord& r : res.trace.records) {
      f << r.iteration << ',' << format_g17(r.residual) << ',' << format_g17(r.dist_rel)
        << ',' << format_g17(r.stepsize) << ',' << r.mask_count << ','
        << r.applications << ',' << (r.restarted ? 1 : 0) << '\n';
    }
    f.flush();
    if (!f) {
      throw IoError("failed writing trace output file '" + o.trace_out + "'");
    }
  }
  return 0;
}

int run_solve(const SolveOptions& o, std::ostream& out) {
  const Model model = parse_model(o.model);
  if (model == Model::GaussianReal) {
    return solve_impl<double>(o, model, out);
  }
  return solve_impl<Complex>(o, model, out);
}

int run_experiment_cmd(const ExperimentOptions& o, std::ostream& out) {
  ExperimentSpec spec;
  if (o.experiment == "phase-transition") {
    spec.kind = ExperimentKind::PhaseTransition;
  } else if (o.experiment == "trace") {
    spec.kind = ExperimentKind::ConvergenceTrace;
  } else if (o.experiment == "noise") {
    spec.kind = ExperimentKind::NoiseStability;
  } else {
    throw std::invalid_argument("unknown experiment '" + o.experiment +
                                "' (phase-transition, trace, noise)");
  }
  spec.model = parse_model(o.model);
  spec.n = o.n;
  spec.n1 = o.n1;
  spec.n2 = o.n2;
  if (spec.model == Model::Cdp2d) {
    check_positive_dim(o.n1, "n1");
    check_positive_dim(o.n2, "n2");
  } else {
    check_positive_dim(o.n, "n");
  }
  if (spec.kind == ExperimentKind::PhaseTransition) {
    spec.ratios = o.ratios;
  } else {
    if (o.ratio < 1) throw std::invalid_argument("ratio must be >= 1");
    spec.ratios = {o.ratio};
  }
  spec.snr_db = o.snr;
  spec.trials = o.trials;
  spec.success_dist = o.success_dist;
  spec.base_seed = o.seed;
  spec.workers = o.workers;
  spec.solver.tol_residual = o.tol;
  if (o.max_iters > 0) {
    spec.solver.max_iters = o.max_iters;
  } else if (o.max_iters == 0) {
    switch (spec.kind) {
      case ExperimentKind::PhaseTransition: spec.solver.max_iters = 2500; break;
      case ExperimentKind::ConvergenceTrace: spec.solver.max_iters = 200; break;
      case ExperimentKind::NoiseStability: spec.solver.max_iters = 400; break;
    }
  } else {
    throw std::invalid_argument("max-iters must be >= 0");
  }
  spec.solver.alpha_y = o.alpha_y;
  spec.solver.power_iters = o.power_iters;
  spec.solver.power_tol = o.power_tol;

  const TruncationParams trunc{o.tau_x, o.tau_z, o.tau_h};
  spec.algorithms.clear();
  for (const std::string& token : o.algorithms) {
    spec.algorithms.push_back(parse_algorithm(token, o.alpha, trunc));
  }

  const ExperimentResult result = run_experiment(spec);
  const std::string csv = to_csv(result);

  std::ofstream f(o.out_path);
  if (!f) {
    throw IoError("cannot open output file '" + o.out_path + "'");
  }
  f << csv;
  f.flush();
  if (!f) {
    throw IoError("failed writing output file '" + o.out_path + "'");
  }
  (void)out;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Phaseless reconstruction via rank-one Riemannian gradient descent"};
  app.name("prgrad");
  app.require_subcommand(1);

  SolveOptions so;
  ExperimentOptions eo;
  CLI::App* solve_cmd =
      app.add_subcommand("solve", "Solve one seeded instance; print a JSON summary");
  add_solve_options(solve_cmd, so);
  CLI::App* exp_cmd =
      app.add_subcommand("experiment", "Run a sweep; write aggregates as CSV");
  add_experiment_options(exp_cmd, eo);

  std::vector<std::string> expanded;
  try {
    expanded = apply_flat_config(args);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 2;
  }

  std::vector<std::string> rev(expanded.rbegin(), expanded.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(solve_cmd)) {
      return run_solve(so, out);
    }
    if (app.got_subcommand(exp_cmd)) {
      return run_experiment_cmd(eo, out);
    }
    err << "error: no subcommand\n";
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace prgrad
