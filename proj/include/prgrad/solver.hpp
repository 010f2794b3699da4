#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prgrad/manifold.hpp"
#include "prgrad/measurement.hpp"

namespace prgrad {

enum class SolverVariant { RGrad, TRGrad };

// Thrown when the steepest-descent denominator vanishes (the masked operator
// annihilates the search direction). solve() converts it into a Degenerate
// status instead of propagating.
class DegenerateStepsize : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Truncation thresholds. +infinity disables an event (it then accepts every
// index); the derived mixed threshold tau_hz is computed, never user-set.
struct TruncationParams {
  double tau_x = 5.0;
  double tau_z = 5.0;
  double tau_h = 5.0;

  double tau_hz() const {
    return tau_z + std::sqrt(0.3 * tau_h * (tau_z + 1.2 * tau_x) + tau_z * tau_z);
  }

  static TruncationParams disabled() {
    const double inf = std::numeric_limits<double>::infinity();
    return TruncationParams{inf, inf, inf};
  }

  void validate() const {
    if (!(tau_x > 0.0) || !(tau_z > 0.0) || !(tau_h > 0.0)) {
      throw std::invalid_argument("TruncationParams: thresholds must be positive");
    }
  }
};

struct StepsizeRule {
  enum class Kind { Constant, Steepest };

  Kind kind = Kind::Steepest;
  double alpha = 0.2;  // Constant only

  static StepsizeRule constant(double a) { return StepsizeRule{Kind::Constant, a}; }
  static StepsizeRule steepest() { return StepsizeRule{Kind::Steepest, 0.0}; }

  void validate() const {
    if (kind == Kind::Constant && (!std::isfinite(alpha) || alpha <= 0.0)) {
      throw std::invalid_argument("StepsizeRule: constant stepsize must be finite and positive");
    }
  }
};

struct SolverConfig {
  SolverVariant variant = SolverVariant::TRGrad;
  StepsizeRule stepsize{};
  int max_iters = 1000;
  double tol_residual = 1e-6;
  // Benchmark-mode stop on relative distance to a known signal; ignored when
  // solve() receives no truth.
  std::optional<double> tol_dist;
  TruncationParams trunc{};
  double alpha_y = 3.0;  // spectral truncation threshold
  int power_iters = 100;
  double power_tol = 1e-8;

  void validate() const {
    stepsize.validate();
    trunc.validate();
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (!(tol_residual > 0.0)) throw std::invalid_argument("SolverConfig: tol_residual must be positive");
    if (tol_dist && !(*tol_dist > 0.0)) throw std::invalid_argument("SolverConfig: tol_dist must be positive");
    if (!(alpha_y > 0.0)) throw std::invalid_argument("SolverConfig: alpha_y must be positive");
    if (power_iters < 1) throw std::invalid_argument("SolverConfig: power_iters must be >= 1");
    if (!(power_tol > 0.0)) throw std::invalid_argument("SolverConfig: power_tol must be positive");
  }
};

// One row per iteration. dist_rel is NaN when no truth signal was supplied.
struct TraceRecord {
  int iteration = 0;
  double residual = 0.0;
  double dist_rel = std::numeric_limits<double>::quiet_NaN();
  double stepsize = 0.0;
  Index mask_count = 0;
  std::uint64_t applications = 0;  // cumulative operator applications
  bool restarted = false;          // iterate collapsed; reset to the initializer
};

struct IterationTrace {
  std::vector<TraceRecord> records;
  bool init_power_converged = true;
  int init_power_iterations = 0;
};

enum class SolveStatus { Converged, MaxIters, Degenerate };

const char* to_string(SolveStatus s);

template <class T>
struct SpectralInitResult {
  RankOneState<T> state;
  bool converged = false;
  int iterations = 0;
};

template <class T>
struct StepOutcome {
  RankOneState<T> state;
  TraceRecord record;
  bool converged = false;
};

template <class T>
struct SolveResult {
  SolveStatus status = SolveStatus::MaxIters;
  RankOneState<T> state;
  Vec<T> estimate;
  int iterations = 0;
  IterationTrace trace;
};

// Truncated spectral initializer: sigma = mean(y); u = leading eigenvector of
// (1/m) A^H diag(y 1{y <= alpha_y^2 sigma}) A by power iteration from a
// random start, converged when successive iterates agree up to phase.
template <class T>
SpectralInitResult<T> spectral_init(const MeasurementEnsemble<T>& e,
                                    const Measurements& meas, double alpha_y,
                                    int power_iters, double power_tol, Rng& rng);

// Acceptance mask of the three truncation events at the iterate
// z = sqrt(sigma) u. Disabled (infinite) thresholds accept everything.
template <class T>
Mask truncation_mask(const MeasurementEnsemble<T>& e, const Measurements& meas,
                     const RankOneState<T>& state, const TruncationParams& params);

// Gradient action g = G u with G = (1/m) A^H diag(mask (.) (y - A(z z^H))) A.
// An absent mask keeps every index (plain RGrad).
template <class T>
Vec<T> gradient_action(const MeasurementEnsemble<T>& e, const Measurements& meas,
                       const RankOneState<T>& state,
                       const std::optional<Mask>& mask = std::nullopt);

// Exact minimizer of the masked quadratic model along the projected gradient.
// au must be apply(u) for the current iterate (the caller already has it).
template <class T>
double steepest_stepsize(const MeasurementEnsemble<T>& e, const RankOneState<T>& state,
                         const TangentCoeffs<T>& t, const Vec<T>& au,
                         const std::optional<Mask>& mask = std::nullopt);

// One full iteration: residual check, mask (TRGrad), gradient, tangent split,
// stepsize, retraction. Uses at most four operator applications.
template <class T>
StepOutcome<T> step(const MeasurementEnsemble<T>& e, const Measurements& meas,
                    const RankOneState<T>& state, const SolverConfig& cfg);

// Full solve: spectral initialization (unless init is given), then step()
// until the residual tolerance, the optional distance tolerance (needs
// truth), or max_iters. Non-convergence is a status, not an exception.
template <class T>
SolveResult<T> solve(const MeasurementEnsemble<T>& e, const Measurements& meas,
                     const SolverConfig& cfg, Rng& rng,
                     const std::optional<Vec<T>>& truth = std::nullopt,
                     const std::optional<RankOneState<T>>& init = std::nullopt);

// ||y - A(z z^H)|| / ||y|| at the current iterate (one operator application).
template <class T>
double relative_residual(const MeasurementEnsemble<T>& e, const Measurements& meas,
                         const RankOneState<T>& state);

}  // namespace prgrad
