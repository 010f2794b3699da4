#include "prgrad/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_set>
#include <utility>

namespace prgrad {

namespace {

Index effective_n(const ExperimentSpec& s) {
  if (s.model == Model::Cdp2d) {
    if (s.n1 < 1 || s.n2 < 1) {
      throw std::invalid_argument("ExperimentSpec: Cdp2d requires n1, n2 >= 1");
    }
    return s.n1 * s.n2;
  }
  if (s.n < 1) {
    throw std::invalid_argument("ExperimentSpec: n must be >= 1");
  }
  return s.n;
}

ExperimentSpec normalized(const ExperimentSpec& spec, ExperimentKind kind) {
  ExperimentSpec s = spec;
  s.kind = kind;
  effective_n(s);
  if (s.trials < 1) throw std::invalid_argument("ExperimentSpec: trials must be >= 1");
  if (!(s.success_dist > 0.0)) {
    throw std::invalid_argument("ExperimentSpec: success_dist must be positive");
  }
  if (s.algorithms.empty()) {
    throw std::invalid_argument("ExperimentSpec: at least one algorithm required");
  }
  if (s.ratios.empty()) {
    throw std::invalid_argument("ExperimentSpec: ratio grid must be nonempty");
  }
  for (int r : s.ratios) {
    if (r < 1) throw std::invalid_argument("ExperimentSpec: ratios must be >= 1");
  }
  std::sort(s.ratios.begin(), s.ratios.end());
  if (kind == ExperimentKind::NoiseStability) {
    if (s.snr_db.empty()) {
      throw std::invalid_argument("ExperimentSpec: SNR grid must be nonempty");
    }
    for (double v : s.snr_db) {
      if (std::isnan(v)) throw std::invalid_argument("ExperimentSpec: SNR must not be NaN");
    }
    std::sort(s.snr_db.begin(), s.snr_db.end());
  }
  if (kind != ExperimentKind::PhaseTransition && s.ratios.size() != 1) {
    throw std::invalid_argument("ExperimentSpec: this experiment uses a single grid point");
  }
  s.solver.validate();
  return s;
}

void check_seed_collisions(std::uint64_t base, std::size_t points, std::size_t trials) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(points * trials);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t t = 0; t < trials; ++t) {
      if (!seen.insert(derive_seed(base, p, t)).second) {
        throw std::logic_error("experiment seeding: derived seed collision");
      }
    }
  }
}

// Runs fn(0..count-1) on `workers` threads claiming slots from a shared
// counter. Aggregation stays sequential, so results do not depend on the
// worker count. The first exception wins and is rethrown.
void parallel_slots(std::size_t count, int workers,
                    const std::function<void(std::size_t)>& fn) {
  unsigned w = workers > 0 ? static_cast<unsigned>(workers)
                           : std::max(1u, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::size_t>(w, count));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned i = 0; i < w; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct TrialOutcome {
  double dist_rel = std::numeric_limits<double>::infinity();
  std::vector<double> residuals;  // ConvergenceTrace only
};

template <class T>
MeasurementEnsemble<T> sample_model(const ExperimentSpec& s, int ratio, Rng& rng) {
  const Index n = effective_n(s);
  if constexpr (is_complex_v<T>) {
    switch (s.model) {
      case Model::GaussianComplex:
        return sample_gaussian_ensemble<T>(n, static_cast<Index>(ratio) * n, rng);
      case Model::Cdp1d:
        return sample_cdp_ensemble(n, ratio, rng);
      case Model::Cdp2d:
        return sample_cdp_ensemble_2d(s.n1, s.n2, ratio, rng);
      default:
        throw std::logic_error("sample_model: scalar/model mismatch");
    }
  } else {
    if (s.model != Model::GaussianReal) {
      throw std::logic_error("sample_model: scalar/model mismatch");
    }
    return sample_gaussian_ensemble<T>(n, static_cast<Index>(ratio) * n, rng);
  }
}

template <class T>
TrialOutcome run_one(const ExperimentSpec& s, const AlgorithmSpec& alg, int ratio,
                     double sigma_noise, std::uint64_t seed, bool want_trace) {
  Rng rng(seed);
  const Index n = effective_n(s);
  const Vec<T> x = sample_standard_signal<T>(n, rng);
  const MeasurementEnsemble<T> e = sample_model<T>(s, ratio, rng);
  Measurements meas{e.forward_intensity(x), std::nullopt};
  if (sigma_noise > 0.0) {
    meas = add_noise(meas, sigma_noise, rng());
  }

  SolverConfig cfg = s.solver;
  cfg.variant = alg.variant;
  cfg.stepsize = alg.stepsize;
  cfg.trunc = alg.trunc;
  if (s.kind == ExperimentKind::PhaseTransition) {
    cfg.tol_dist = s.success_dist;
  } else {
    cfg.tol_dist.reset();
  }

  std::optional<RankOneState<T>> init;
  if (s.init_at_truth) {
    init = RankOneState<T>{x.squaredNorm(), x.normalized()};
  }

  const SolveResult<T> res = solve<T>(e, meas, cfg, rng, std::optional<Vec<T>>(x), init);

  TrialOutcome out;
  out.dist_rel = dist_phase(res.estimate, x) / x.norm();
  if (want_trace) {
    // Fixed-length residual series: iterations 0..max_iters, padded past an
    // early stop with the last recorded residual.
    out.residuals.assign(static_cast<std::size_t>(cfg.max_iters) + 1, 0.0);
    double last = 0.0;
    std::size_t pos = 0;
    for (const TraceRecord& rec : res.trace.records) {
      last = rec.residual;
      while (pos <= static_cast<std::size_t>(rec.iteration) && pos < out.residuals.size()) {
        out.residuals[pos++] = last;
      }
    }
    while (pos < out.residuals.size()) {
      out.residuals[pos++] = last;
    }
  }
  return out;
}

TrialOutcome run_one_dispatch(const ExperimentSpec& s, const AlgorithmSpec& alg,
                              int ratio, double sigma_noise, std::uint64_t seed,
                              bool want_trace) {
  if (s.model == Model::GaussianReal) {
    return run_one<double>(s, alg, ratio, sigma_noise, seed, want_trace);
  }
  return run_one<Complex>(s, alg, ratio, sigma_noise, seed, want_trace);
}

double clamp_mean(double mean, double lo, double hi) {
  return std::min(std::max(mean, lo), hi);
}

}  // namespace

AlgorithmSpec parse_algorithm(const std::string& token, double const_alpha,
                              const TruncationParams& trunc) {
  std::string name = token;
  double alpha = const_alpha;
  const std::size_t colon = token.find(':');
  if (colon != std::string::npos) {
    name = token.substr(0, colon);
    const std::string tail = token.substr(colon + 1);
    std::size_t used = 0;
    try {
      alpha = std::stod(tail, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("parse_algorithm: bad stepsize in '" + token + "'");
    }
    if (used != tail.size()) {
      throw std::invalid_argument("parse_algorithm: bad stepsize in '" + token + "'");
    }
  }

  AlgorithmSpec alg;
  alg.label = token;
  alg.trunc = trunc;
  if (name == "rgrad-sd") {
    alg.variant = SolverVariant::RGrad;
    alg.stepsize = StepsizeRule::steepest();
  } else if (name == "trgrad-sd") {
    alg.variant = SolverVariant::TRGrad;
    alg.stepsize = StepsizeRule::steepest();
  } else if (name == "rgrad-const") {
    alg.variant = SolverVariant::RGrad;
    alg.stepsize = StepsizeRule::constant(alpha);
  } else if (name == "trgrad-const") {
    alg.variant = SolverVariant::TRGrad;
    alg.stepsize = StepsizeRule::constant(alpha);
  } else {
    throw std::invalid_argument("parse_algorithm: unknown algorithm '" + token + "'");
  }
  return alg;
}

ExperimentResult run_phase_transition(const ExperimentSpec& spec) {
  const ExperimentSpec s = normalized(spec, ExperimentKind::PhaseTransition);
  const std::size_t points = s.ratios.size();
  const std::size_t trials = static_cast<std::size_t>(s.trials);
  const std::size_t algs = s.algorithms.size();
  check_seed_collisions(s.base_seed, points, trials);

  std::vector<double> dist(points * trials * algs);
  parallel_slots(dist.size(), s.workers, [&](std::size_t i) {
    const std::size_t a = i % algs;
    const std::size_t t = (i / algs) % trials;
    const std::size_t p = i / (algs * trials);
    const std::uint64_t seed = derive_seed(s.base_seed, p, t);
    dist[i] = run_one_dispatch(s, s.algorithms[a], s.ratios[p], 0.0, seed, false).dist_rel;
  });

  ExperimentResult out;
  out.kind = ExperimentKind::PhaseTransition;
  const Index n = effective_n(s);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t a = 0; a < algs; ++a) {
      PhaseTransitionRow row;
      row.ratio = s.ratios[p];
      row.m = static_cast<Index>(s.ratios[p]) * n;
      row.algorithm = s.algorithms[a].label;
      row.trials = s.trials;
      for (std::size_t t = 0; t < trials; ++t) {
        if (dist[(p * trials + t) * algs + a] <= s.success_dist) {
          ++row.successes;
        }
      }
      row.probability = static_cast<double>(row.successes) / static_cast<double>(s.trials);
      out.phase.push_back(std::move(row));
    }
  }
  return out;
}

ExperimentResult run_convergence_trace(const ExperimentSpec& spec) {
  const ExperimentSpec s = normalized(spec, ExperimentKind::ConvergenceTrace);
  const std::size_t trials = static_cast<std::size_t>(s.trials);
  const std::size_t algs = s.algorithms.size();
  check_seed_collisions(s.base_seed, 1, trials);

  std::vector<std::vector<double>> series(trials * algs);
  parallel_slots(series.size(), s.workers, [&](std::size_t i) {
    const std::size_t a = i % algs;
    const std::size_t t = i / algs;
    const std::uint64_t seed = derive_seed(s.base_seed, 0, t);
    series[i] = run_one_dispatch(s, s.algorithms[a], s.ratios.front(), 0.0, seed, true)
                    .residuals;
  });

  ExperimentResult out;
  out.kind = ExperimentKind::ConvergenceTrace;
  const std::size_t len = static_cast<std::size_t>(s.solver.max_iters) + 1;
  for (std::size_t it = 0; it < len; ++it) {
    for (std::size_t a = 0; a < algs; ++a) {
      TraceRow row;
      row.iteration = static_cast<int>(it);
      row.algorithm = s.algorithms[a].label;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      double sum = 0.0;
      for (std::size_t t = 0; t < trials; ++t) {
        const double v = series[t * algs + a][it];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      row.residual_min = lo;
      row.residual_max = hi;
      row.residual_mean = clamp_mean(sum / static_cast<double>(s.trials), lo, hi);
      out.trace.push_back(std::move(row));
    }
  }
  return out;
}

ExperimentResult run_noise_stability(const ExperimentSpec& spec) {
  const ExperimentSpec s = normalized(spec, ExperimentKind::NoiseStability);
  const std::size_t points = s.snr_db.size();
  const std::size_t trials = static_cast<std::size_t>(s.trials);
  const std::size_t algs = s.algorithms.size();
  check_seed_collisions(s.base_seed, points, trials);

  std::vector<double> err_db(points * trials * algs);
  parallel_slots(err_db.size(), s.workers, [&](std::size_t i) {
    const std::size_t a = i % algs;
    const std::size_t t = (i / algs) % trials;
    const std::size_t p = i / (algs * trials);
    const double sigma = std::pow(10.0, -s.snr_db[p] / 20.0);
    const std::uint64_t seed = derive_seed(s.base_seed, p, t);
    const double d =
        run_one_dispatch(s, s.algorithms[a], s.ratios.front(), sigma, seed, false).dist_rel;
    err_db[i] = 20.0 * std::log10(std::max(d, 1e-300));
  });

  ExperimentResult out;
  out.kind = ExperimentKind::NoiseStability;
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t a = 0; a < algs; ++a) {
      NoiseRow row;
      row.snr_db = s.snr_db[p];
      row.algorithm = s.algorithms[a].label;
      row.trials = s.trials;
      double sum = 0.0;
      for (std::size_t t = 0; t < trials; ++t) {
        sum += err_db[(p * trials + t) * algs + a];
      }
      row.mean_error_db = sum / static_cast<double>(s.trials);
      out.noise.push_back(std::move(row));
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::PhaseTransition: return run_phase_transition(spec);
    case ExperimentKind::ConvergenceTrace: return run_convergence_trace(spec);
    case ExperimentKind::NoiseStability: return run_noise_stability(spec);
  }
  throw std::invalid_argument("run_experiment: unknown kind");
}

std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string to_csv(const ExperimentResult& result) {
  std::string out;
  switch (result.kind) {
    case ExperimentKind::PhaseTransition:
      out = "ratio,m,algorithm,trials,successes,probability\n";
      for (const PhaseTransitionRow& r : result.phase) {
        out += std::to_string(r.ratio) + ',' + std::to_string(r.m) + ',' + r.algorithm +
               ',' + std::to_string(r.trials) + ',' + std::to_string(r.successes) + ',' +
               format_g17(r.probability) + '\n';
      }
      break;
    case ExperimentKind::ConvergenceTrace:
      out = "iteration,algorithm,residual_min,residual_mean,residual_max\n";
      for (const TraceRow& r : result.trace) {
        out += std::to_string(r.iteration) + ',' + r.algorithm + ',' +
               format_g17(r.residual_min) + ',' + format_g17(r.residual_mean) + ',' +
               format_g17(r.residual_max) + '\n';
      }
      break;
    case ExperimentKind::NoiseStability:
      out = "snr_db,algorithm,mean_error_db,trials\n";
      for (const NoiseRow& r : result.noise) {
        out += format_g17(r.snr_db) + ',' + r.algorithm + ',' +
               format_g17(r.mean_error_db) + ',' + std::to_string(r.trials) + '\n';
      }
      break;
  }
  return out;
}

}  // namespace prgrad
