#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prgrad/solver.hpp"

namespace prgrad {

enum class Model { GaussianReal, GaussianComplex, Cdp1d, Cdp2d };
enum class ExperimentKind { PhaseTransition, ConvergenceTrace, NoiseStability };

// One algorithm under comparison; the label names the CSV rows.
struct AlgorithmSpec {
  std::string label = "trgrad-sd";
  SolverVariant variant = SolverVariant::TRGrad;
  StepsizeRule stepsize{};
  TruncationParams trunc{};
};

// Parses "rgrad-sd", "trgrad-sd", "rgrad-const", "trgrad-const", optionally
// with an explicit stepsize suffix like "rgrad-const:0.1".
AlgorithmSpec parse_algorithm(const std::string& token, double const_alpha,
                              const TruncationParams& trunc);

// A full experiment description. Grids are sorted ascending before running;
// the per-trial stream seed is derive_seed(base_seed, point_index,
// trial_index) with point_index taken in the sorted grid. For the
// coded-diffraction models the grid values count masks instead of the
// oversampling ratio; m is the mask count times n either way.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::PhaseTransition;
  Model model = Model::GaussianReal;
  Index n = 128;
  Index n1 = 0, n2 = 0;            // Cdp2d shape; overrides n with n1 * n2
  std::vector<int> ratios{8};      // PhaseTransition grid; single entry otherwise
  std::vector<double> snr_db{};    // NoiseStability grid (dB; +inf = noiseless)
  int trials = 50;
  double success_dist = 1e-3;      // relative distance declared a success
  std::uint64_t base_seed = 1;
  int workers = 0;                 // 0 = hardware concurrency
  SolverConfig solver{};
  std::vector<AlgorithmSpec> algorithms{AlgorithmSpec{}};
  bool init_at_truth = false;      // diagnostic: skip spectral initialization

  ExperimentSpec() {
    solver.max_iters = 2500;
    solver.tol_residual = 1e-9;
  }
};

struct PhaseTransitionRow {
  int ratio = 0;
  Index m = 0;
  std::string algorithm;
  int trials = 0;
  int successes = 0;
  double probability = 0.0;
};

struct TraceRow {
  int iteration = 0;
  std::string algorithm;
  double residual_min = 0.0;
  double residual_mean = 0.0;
  double residual_max = 0.0;
};

struct NoiseRow {
  double snr_db = 0.0;
  std::string algorithm;
  double mean_error_db = 0.0;
  int trials = 0;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::PhaseTransition;
  std::vector<PhaseTransitionRow> phase;
  std::vector<TraceRow> trace;
  std::vector<NoiseRow> noise;
};

// Empirical success probability over the m/n (or mask-count) grid. Success:
// final relative distance to the planted signal <= success_dist.
ExperimentResult run_phase_transition(const ExperimentSpec& spec);

// Residual envelope (min/mean/max over trials) per iteration at a fixed grid
// point; traces stopped early are padded with their last residual.
ExperimentResult run_convergence_trace(const ExperimentSpec& spec);

// Mean reconstruction error in dB, 20 log10(dist / ||x||) averaged over
// trials, per SNR point with sigma = 10^(-SNR_dB / 20).
ExperimentResult run_noise_stability(const ExperimentSpec& spec);

ExperimentResult run_experiment(const ExperimentSpec& spec);

// CSV with a fixed header per experiment kind; doubles printed with 17
// significant digits so parsing recovers them exactly.
std::string to_csv(const ExperimentResult& result);

std::string format_g17(double x);

}  // namespace prgrad
