#include "prgrad/solver.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace prgrad {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

namespace {

// Events at z = sqrt(sigma) u, sharing the cached au = apply(u):
//   data:     sqrt(y_k) <= tau_x sqrt(||y||_1 / m)
//   iterate:  |<a_k, z>| <= tau_z ||z||
//   residual: |y_k - |<a_k, z>|^2| <= (tau_h / m) ||y - A(zz^H)||_1
//                                     * (|<a_k, z>| + sqrt(y_k)) / ||z||
// A non-finite threshold disables its event. Negative (noisy) y_k are clamped
// to zero under square roots only.
template <class T>
Mask mask_from_action(const Vec<T>& au, const VecR& y, double sigma,
                      const TruncationParams& p) {
  const Index m = y.size();
  const double znorm = std::sqrt(sigma);
  const bool fx = std::isfinite(p.tau_x);
  const bool fz = std::isfinite(p.tau_z);
  const bool fh = std::isfinite(p.tau_h);

  VecR az(m);
  VecR res(m);
  double res_l1 = 0.0;
  for (Index k = 0; k < m; ++k) {
    az(k) = znorm * std::abs(au(k));
    res(k) = std::abs(y(k) - az(k) * az(k));
    res_l1 += res(k);
  }
  const double scale_x = fx ? p.tau_x * std::sqrt(y.cwiseAbs().sum() / static_cast<double>(m)) : 0.0;
  const double scale_z = fz ? p.tau_z * znorm : 0.0;
  const double scale_h = fh ? p.tau_h * res_l1 / (static_cast<double>(m) * znorm) : 0.0;

  Mask mask(m);
  for (Index k = 0; k < m; ++k) {
    const double sqrt_y = std::sqrt(std::max(y(k), 0.0));
    const bool e1x = !fx || sqrt_y <= scale_x;
    const bool e1z = !fz || az(k) <= scale_z;
    const bool e2 = !fh || res(k) <= scale_h * (az(k) + sqrt_y);
    mask(k) = e1x && e1z && e2;
  }
  return mask;
}

// g = (1/m) A^H (mask (.) au (.) resid); rejected entries contribute zero.
template <class T>
Vec<T> gradient_from_residual(const MeasurementEnsemble<T>& e, const Vec<T>& au,
                              const VecR& resid, const std::optional<Mask>& mask) {
  const Index m = e.m();
  Vec<T> r(m);
  for (Index k = 0; k < m; ++k) {
    const bool keep = !mask || (*mask)(k);
    r(k) = keep ? T(au(k) * resid(k)) : T(0);
  }
  Vec<T> g = e.apply_adjoint(r);
  g /= static_cast<double>(m);
  return g;
}

inline Index count_mask(const std::optional<Mask>& mask, Index m) {
  return mask ? static_cast<Index>(mask->count()) : m;
}

}  // namespace

template <class T>
SpectralInitResult<T> spectral_init(const MeasurementEnsemble<T>& e,
                                    const Measurements& meas, double alpha_y,
                                    int power_iters, double power_tol, Rng& rng) {
  const VecR& y = meas.y;
  if (y.size() != e.m()) {
    throw std::invalid_argument("spectral_init: measurement length mismatch");
  }
  if (!(alpha_y > 0.0)) {
    throw std::invalid_argument("spectral_init: alpha_y must be positive");
  }
  if (power_iters < 1 || !(power_tol > 0.0)) {
    throw std::invalid_argument("spectral_init: invalid power-iteration settings");
  }
  if (y.cwiseAbs().maxCoeff() == 0.0) {
    throw std::invalid_argument("spectral_init: all-zero measurements");
  }

  const double sigma = y.sum() / static_cast<double>(e.m());
  const double cut = alpha_y * alpha_y * sigma;
  VecR w(e.m());
  for (Index k = 0; k < e.m(); ++k) {
    w(k) = (y(k) <= cut) ? y(k) : 0.0;
  }

  Vec<T> v = sample_standard_signal<T>(e.n(), rng);
  const double nv = v.norm();
  if (nv == 0.0) {
    v.setZero();
    v(0) = T(1);
  } else {
    v /= nv;
  }

  SpectralInitResult<T> out;
  for (int it = 0; it < power_iters; ++it) {
    Vec<T> av = e.apply(v);
    for (Index k = 0; k < e.m(); ++k) {
      av(k) *= w(k);
    }
    Vec<T> next = e.apply_adjoint(av);
    next /= static_cast<double>(e.m());
    const double nn = next.norm();
    out.iterations = it + 1;
    if (nn == 0.0) break;  // operator annihilated the iterate; keep current v
    next /= nn;
    const double delta = dist_phase(next, v);
    v = std::move(next);
    if (delta < power_tol) {
      out.converged = true;
      break;
    }
  }
  out.state.sigma = std::max(sigma, 0.0);
  out.state.u = std::move(v);
  return out;
}

template <class T>
Mask truncation_mask(const MeasurementEnsemble<T>& e, const Measurements& meas,
                     const RankOneState<T>& state, const TruncationParams& params) {
  params.validate();
  if (meas.y.size() != e.m()) {
    throw std::invalid_argument("truncation_mask: measurement length mismatch");
  }
  if (state.u.size() != e.n()) {
    throw std::invalid_argument("truncation_mask: state dimension mismatch");
  }
  if (!(state.sigma > 0.0)) {
    throw std::invalid_argument("truncation_mask: sigma must be positive");
  }
  const Vec<T> au = e.apply(state.u);
  return mask_from_action(au, meas.y, state.sigma, params);
}

template <class T>
Vec<T> gradient_action(const MeasurementEnsemble<T>& e, const Measurements& meas,
                       const RankOneState<T>& state, const std::optional<Mask>& mask) {
  if (meas.y.size() != e.m()) {
    throw std::invalid_argument("gradient_action: measurement length mismatch");
  }
  if (state.u.size() != e.n()) {
    throw std::invalid_argument("gradient_action: state dimension mismatch");
  }
  if (mask && mask->size() != e.m()) {
    throw std::invalid_argument("gradient_action: mask length mismatch");
  }
  const Vec<T> au = e.apply(state.u);
  VecR resid(e.m());
  for (Index k = 0; k < e.m(); ++k) {
    resid(k) = meas.y(k) - state.sigma * abs2(au(k));
  }
  return gradient_from_residual(e, au, resid, mask);
}

template <class T>
double steepest_stepsize(const MeasurementEnsemble<T>& e, const RankOneState<T>& state,
                         const TangentCoeffs<T>& t, const Vec<T>& au,
                         const std::optional<Mask>& mask) {
  if (au.size() != e.m()) {
    throw std::invalid_argument("steepest_stepsize: au length mismatch");
  }
  if (t.v.size() != e.n()) {
    throw std::invalid_argument("steepest_stepsize: tangent dimension mismatch");
  }
  if (mask && mask->size() != e.m()) {
    throw std::invalid_argument("steepest_stepsize: mask length mismatch");
  }
  if (t.c == 0.0 && t.s == 0.0) {
    throw std::invalid_argument("steepest_stepsize: zero tangent direction");
  }
  const Vec<T> av = e.apply(t.v);
  double den = 0.0;
  for (Index k = 0; k < e.m(); ++k) {
    if (mask && !(*mask)(k)) continue;
    const double cross = real_part(av(k) * conj_scalar(au(k)));
    const double entry = t.c * abs2(au(k)) + 2.0 * t.s * cross;
    den += entry * entry;
  }
  den /= static_cast<double>(e.m());
  if (den == 0.0) {
    throw DegenerateStepsize(
        "steepest_stepsize: masked operator annihilates the search direction");
  }
  return (t.c * t.c + 2.0 * t.s * t.s) / den;
}

template <class T>
StepOutcome<T> step(const MeasurementEnsemble<T>& e, const Measurements& meas,
                    const RankOneState<T>& state, const SolverConfig& cfg) {
  const VecR& y = meas.y;
  if (y.size() != e.m()) {
    throw std::invalid_argument("step: measurement length mismatch");
  }
  if (state.u.size() != e.n()) {
    throw std::invalid_argument("step: state dimension mismatch");
  }
  const double ynorm = y.norm();
  if (ynorm == 0.0) {
    throw std::invalid_argument("step: all-zero measurements");
  }

  StepOutcome<T> out;
  out.state = state;
  out.record.mask_count = e.m();
  const std::uint64_t before = e.apply_count();

  const Vec<T> au = e.apply(state.u);
  VecR resid(e.m());
  for (Index k = 0; k < e.m(); ++k) {
    resid(k) = y(k) - state.sigma * abs2(au(k));
  }
  out.record.residual = resid.norm() / ynorm;
  if (out.record.residual <= cfg.tol_residual) {
    out.converged = true;
    out.record.applications = e.apply_count() - before;
    return out;
  }

  std::optional<Mask> mask;
  if (cfg.variant == SolverVariant::TRGrad) {
    if (!(state.sigma > 0.0)) {
      throw std::invalid_argument("step: truncation requires sigma > 0");
    }
    mask.emplace(mask_from_action(au, y, state.sigma, cfg.trunc));
    out.record.mask_count = count_mask(mask, e.m());
  }

  const Vec<T> g = gradient_from_residual(e, au, resid, mask);
  const TangentCoeffs<T> t = tangent_from_action(g, state.u);
  if (t.c == 0.0 && t.s == 0.0) {
    // Stationary point of the (masked) objective; nothing to move along.
    out.converged = true;
    out.record.applications = e.apply_count() - before;
    return out;
  }

  double alpha = 0.0;
  if (cfg.stepsize.kind == StepsizeRule::Kind::Constant) {
    alpha = cfg.stepsize.alpha;
  } else {
    alpha = steepest_stepsize(e, state, t, au, mask);
  }
  out.record.stepsize = alpha;
  out.state = (alpha == 0.0) ? state : retract(state, t, alpha);
  out.record.applications = e.apply_count() - before;
  return out;
}

template <class T>
double relative_residual(const MeasurementEnsemble<T>& e, const Measurements& meas,
                         const RankOneState<T>& state) {
  if (meas.y.size() != e.m() || state.u.size() != e.n()) {
    throw std::invalid_argument("relative_residual: dimension mismatch");
  }
  const double ynorm = meas.y.norm();
  if (ynorm == 0.0) {
    throw std::invalid_argument("relative_residual: all-zero measurements");
  }
  const VecR iy = e.forward_intensity(state.u);
  return (meas.y - state.sigma * iy).norm() / ynorm;
}

template <class T>
SolveResult<T> solve(const MeasurementEnsemble<T>& e, const Measurements& meas,
                     const SolverConfig& cfg, Rng& rng,
                     const std::optional<Vec<T>>& truth,
                     const std::optional<RankOneState<T>>& init) {
  cfg.validate();
  if (meas.y.size() != e.m()) {
    throw std::invalid_argument("solve: measurement length mismatch");
  }
  if (meas.y.norm() == 0.0) {
    throw std::invalid_argument("solve: all-zero measurements");
  }
  double truth_norm = 0.0;
  if (truth) {
    if (truth->size() != e.n()) {
      throw std::invalid_argument("solve: truth dimension mismatch");
    }
    truth_norm = truth->norm();
    if (truth_norm == 0.0) {
      throw std::invalid_argument("solve: truth must be nonzero");
    }
  }

  SolveResult<T> res;
  const std::uint64_t base_applies = e.apply_count();
  if (init) {
    if (init->u.size() != e.n()) {
      throw std::invalid_argument("solve: init dimension mismatch");
    }
    res.state = *init;
  } else {
    SpectralInitResult<T> si =
        spectral_init<T>(e, meas, cfg.alpha_y, cfg.power_iters, cfg.power_tol, rng);
    res.state = std::move(si.state);
    res.trace.init_power_converged = si.converged;
    res.trace.init_power_iterations = si.iterations;
  }
  const RankOneState<T> restart_state = res.state;

  res.status = SolveStatus::MaxIters;
  bool final_recorded = false;

  if (cfg.variant == SolverVariant::TRGrad && !(res.state.sigma > 0.0)) {
    res.status = SolveStatus::Degenerate;
    final_recorded = true;
  }

  for (int l = 0; !final_recorded && l < cfg.max_iters; ++l) {
    double dist = std::numeric_limits<double>::quiet_NaN();
    if (truth) {
      dist = dist_phase(estimate_vector(res.state), *truth) / truth_norm;
    }
    if (truth && cfg.tol_dist && dist <= *cfg.tol_dist) {
      TraceRecord rec;
      rec.iteration = l;
      rec.residual = relative_residual(e, meas, res.state);
      rec.dist_rel = dist;
      rec.mask_count = e.m();
      rec.applications = e.apply_count() - base_applies;
      res.trace.records.push_back(rec);
      res.status = SolveStatus::Converged;
      final_recorded = true;
      break;
    }

    StepOutcome<T> out;
    try {
      out = step<T>(e, meas, res.state, cfg);
    } catch (const DegenerateStepsize&) {
      res.status = SolveStatus::Degenerate;
      final_recorded = true;
      break;
    }
    TraceRecord rec = out.record;
    rec.iteration = l;
    rec.dist_rel = dist;
    rec.applications = e.apply_count() - base_applies;
    if (out.converged) {
      res.trace.records.push_back(rec);
      res.status = SolveStatus::Converged;
      final_recorded = true;
      break;
    }
    res.state = std::move(out.state);
    res.iterations = l + 1;
    if (res.state.sigma == 0.0) {
      // Iterate collapsed to the zero matrix where the tangent space is
      // degenerate; restart from the initializer.
      if (restart_state.sigma == 0.0) {
        res.trace.records.push_back(rec);
        res.status = SolveStatus::Degenerate;
        final_recorded = true;
        break;
      }
      res.state = restart_state;
      rec.restarted = true;
    }
    res.trace.records.push_back(rec);
  }

  if (!final_recorded) {
    TraceRecord rec;
    rec.iteration = res.iterations;
    rec.residual = relative_residual(e, meas, res.state);
    if (truth) {
      rec.dist_rel = dist_phase(estimate_vector(res.state), *truth) / truth_norm;
    }
    rec.mask_count = e.m();
    rec.applications = e.apply_count() - base_applies;
    res.trace.records.push_back(rec);
  }
  res.estimate = estimate_vector(res.state);
  return res;
}

#define PRGRAD_INSTANTIATE(T)                                                        \
  template SpectralInitResult<T> spectral_init<T>(const MeasurementEnsemble<T>&,     \
                                                  const Measurements&, double, int,  \
                                                  double, Rng&);                     \
  template Mask truncation_mask<T>(const MeasurementEnsemble<T>&,                    \
                                   const Measurements&, const RankOneState<T>&,      \
                                   const TruncationParams&);                         \
  template Vec<T> gradient_action<T>(const MeasurementEnsemble<T>&,                  \
                                     const Measurements&, const RankOneState<T>&,    \
                                     const std::optional<Mask>&);                    \
  template double steepest_stepsize<T>(const MeasurementEnsemble<T>&,                \
                                       const RankOneState<T>&,                       \
                                       const TangentCoeffs<T>&, const Vec<T>&,       \
                                       const std::optional<Mask>&);                  \
  template StepOutcome<T> step<T>(const MeasurementEnsemble<T>&, const Measurements&,\
                                  const RankOneState<T>&, const SolverConfig&);      \
  template double relative_residual<T>(const MeasurementEnsemble<T>&,                \
                                       const Measurements&, const RankOneState<T>&); \
  template SolveResult<T> solve<T>(const MeasurementEnsemble<T>&, const Measurements&,\
                                   const SolverConfig&, Rng&,                        \
                                   const std::optional<Vec<T>>&,                     \
                                   const std::optional<RankOneState<T>>&);

PRGRAD_INSTANTIATE(double)
PRGRAD_INSTANTIATE(Complex)

#undef PRGRAD_INSTANTIATE

}  // namespace prgrad
