#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "prgrad/rng.hpp"
#include "prgrad/types.hpp"

namespace prgrad {

enum class EnsembleKind { GaussianDense, Cdp1d, Cdp2d };

// Level and seed of injected noise, kept alongside the data.
struct NoiseRecord {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// Intensity data y. Noiseless entries are nonnegative by construction; noisy
// entries are stored as-is, negatives included.
struct Measurements {
  VecR y;
  std::optional<NoiseRecord> noise;
};

namespace detail {

struct FftPlan;  // opaque FFTW wrapper, complex ensembles only

// Copyable atomic counter so instrumented ensembles stay value types.
struct ApplyCounter {
  mutable std::atomic<std::uint64_t> value{0};
  ApplyCounter() = default;
  ApplyCounter(const ApplyCounter& other) : value(other.value.load()) {}
  ApplyCounter& operator=(const ApplyCounter& other) {
    value.store(other.value.load());
    return *this;
  }
};

}  // namespace detail

// The sensing map A of |A x|^2 = y. apply(v) returns the entries <a_k, v>
// (conjugation on a_k), so forward_intensity(x) = |apply(x)|^2 entrywise.
//
// Fixed conventions, not configurable:
//  - complex Gaussian entries have variance 1/2 per real component, so
//    E |<a_k, x>|^2 = ||x||^2;
//  - coded-diffraction blocks are UNNORMALIZED DFTs of d_l (.) v, with 2D
//    signals flattened row-major and transformed by the unnormalized 2D DFT;
//    the adjoint uses the unnormalized conjugate transform.
template <class T>
class MeasurementEnsemble {
 public:
  // rows(k, :) holds a_k^H, so apply(v) = rows * v.
  static MeasurementEnsemble from_rows(Mat<T> rows);
  // 1D coded diffraction from explicit masks (complex scalar only).
  static MeasurementEnsemble cdp_from_masks(std::vector<VecC> masks);
  // 2D coded diffraction; masks are length n1*n2, flattened row-major.
  static MeasurementEnsemble cdp_from_masks_2d(Index n1, Index n2,
                                               std::vector<VecC> masks);

  EnsembleKind kind() const { return kind_; }
  Index n() const { return n_; }
  Index m() const { return m_; }
  Index shape1() const { return n1_; }
  Index shape2() const { return n2_; }
  Index mask_count() const { return static_cast<Index>(masks_.size()); }

  Vec<T> apply(const Vec<T>& v) const;
  Vec<T> apply_adjoint(const Vec<T>& r) const;
  VecR forward_intensity(const Vec<T>& x) const;

  const Mat<T>& dense_rows() const;            // GaussianDense only
  const std::vector<VecC>& cdp_masks() const;  // CDP only

  // Number of apply/apply_adjoint evaluations so far (thread-safe).
  std::uint64_t apply_count() const {
    return counter_.value.load(std::memory_order_relaxed);
  }

 private:
  MeasurementEnsemble() = default;

  EnsembleKind kind_ = EnsembleKind::GaussianDense;
  Index n_ = 0;
  Index m_ = 0;
  Index n1_ = 0;
  Index n2_ = 0;
  Mat<T> rows_;
  std::vector<VecC> masks_;
  std::shared_ptr<const detail::FftPlan> fft_;
  detail::ApplyCounter counter_;
};

// m rows of independent standard Gaussians (complex: N(0,1/2) per component),
// sampled row by row, entries left to right.
template <class T>
MeasurementEnsemble<T> sample_gaussian_ensemble(Index n, Index m, Rng& rng);

// Coded diffraction with iid uniform {1, -1, i, -i} mask entries.
MeasurementEnsemble<Complex> sample_cdp_ensemble(Index n, int masks, Rng& rng);
MeasurementEnsemble<Complex> sample_cdp_ensemble_2d(Index n1, Index n2, int masks,
                                                    Rng& rng);

// Signal with standard normal components (complex: N(0,1) + i N(0,1)).
template <class T>
Vec<T> sample_standard_signal(Index n, Rng& rng);

// y + e with e = sigma ||y|| w / ||w||, w standard Gaussian, so the returned
// data satisfies ||y_noisy - y|| = sigma ||y|| exactly.
Measurements add_noise(const Measurements& meas, double sigma, std::uint64_t seed);

}  // namespace prgrad
