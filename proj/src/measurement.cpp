#include "prgrad/measurement.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <new>
#include <stdexcept>
#include <utility>

namespace prgrad {
namespace detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

// One forward and one backward plan for a fixed shape. The FFTW planner is
// not thread-safe, so plan creation and destruction are serialized; execution
// through fftw_execute_dft on caller buffers is thread-safe. FFTW_UNALIGNED
// lets the plans run on arbitrary (Eigen-owned) buffers and keeps planning
// deterministic together with FFTW_ESTIMATE.
struct FftPlan {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  FftPlan(Index n1, Index n2) {
    const Index total = (n2 > 0) ? n1 * n2 : n1;
    fftw_complex* a = fftw_alloc_complex(static_cast<std::size_t>(total));
    fftw_complex* b = fftw_alloc_complex(static_cast<std::size_t>(total));
    if (a == nullptr || b == nullptr) {
      fftw_free(a);
      fftw_free(b);
      throw std::bad_alloc();
    }
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
      if (n2 > 0) {
        fwd = fftw_plan_dft_2d(static_cast<int>(n1), static_cast<int>(n2), a, b,
                               FFTW_FORWARD, flags);
        bwd = fftw_plan_dft_2d(static_cast<int>(n1), static_cast<int>(n2), a, b,
                               FFTW_BACKWARD, flags);
      } else {
        fwd = fftw_plan_dft_1d(static_cast<int>(n1), a, b, FFTW_FORWARD, flags);
        bwd = fftw_plan_dft_1d(static_cast<int>(n1), a, b, FFTW_BACKWARD, flags);
      }
    }
    fftw_free(a);
    fftw_free(b);
    if (fwd == nullptr || bwd == nullptr) {
      throw std::runtime_error("FftPlan: planner failed");
    }
  }

  ~FftPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd != nullptr) fftw_destroy_plan(fwd);
    if (bwd != nullptr) fftw_destroy_plan(bwd);
  }

  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  static fftw_complex* cast(const Complex* p) {
    return reinterpret_cast<fftw_complex*>(const_cast<Complex*>(p));
  }

  void forward(const Complex* in, Complex* out) const {
    fftw_execute_dft(fwd, cast(in), cast(out));
  }

  // Unnormalized conjugate transform (the adjoint of forward).
  void backward(const Complex* in, Complex* out) const {
    fftw_execute_dft(bwd, cast(in), cast(out));
  }
};

}  // namespace detail

namespace {

template <class T>
T sample_entry(Rng& rng) {
  if constexpr (is_complex_v<T>) {
    const double re = gaussian(rng);
    const double im = gaussian(rng);
    return Complex(re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0);
  } else {
    return gaussian(rng);
  }
}

VecC sample_cdp_mask(Index n, Rng& rng) {
  static const Complex alphabet[4] = {Complex(1.0, 0.0), Complex(-1.0, 0.0),
                                      Complex(0.0, 1.0), Complex(0.0, -1.0)};
  VecC d(n);
  for (Index j = 0; j < n; ++j) {
    d(j) = alphabet[rng() >> 62];
  }
  return d;
}

void check_masks(const std::vector<VecC>& masks, Index n) {
  if (masks.empty()) {
    throw std::invalid_argument("cdp_from_masks: at least one mask required");
  }
  for (const VecC& d : masks) {
    if (d.size() != n) {
      throw std::invalid_argument("cdp_from_masks: mask length mismatch");
    }
  }
}

}  // namespace

template <class T>
MeasurementEnsemble<T> MeasurementEnsemble<T>::from_rows(Mat<T> rows) {
  if (rows.rows() < 1 || rows.cols() < 1) {
    throw std::invalid_argument("from_rows: matrix must be nonempty");
  }
  MeasurementEnsemble e;
  e.kind_ = EnsembleKind::GaussianDense;
  e.m_ = rows.rows();
  e.n_ = rows.cols();
  e.rows_ = std::move(rows);
  return e;
}

template <class T>
MeasurementEnsemble<T> MeasurementEnsemble<T>::cdp_from_masks(std::vector<VecC> masks) {
  if constexpr (!is_complex_v<T>) {
    throw std::logic_error("cdp_from_masks: coded diffraction is complex-only");
  } else {
    if (masks.empty() || masks.front().size() < 1) {
      throw std::invalid_argument("cdp_from_masks: at least one nonempty mask required");
    }
    const Index n = masks.front().size();
    check_masks(masks, n);
    MeasurementEnsemble e;
    e.kind_ = EnsembleKind::Cdp1d;
    e.n_ = n;
    e.n1_ = n;
    e.m_ = static_cast<Index>(masks.size()) * n;
    e.masks_ = std::move(masks);
    e.fft_ = std::make_shared<const detail::FftPlan>(n, 0);
    return e;
  }
}

template <class T>
MeasurementEnsemble<T> MeasurementEnsemble<T>::cdp_from_masks_2d(
    Index n1, Index n2, std::vector<VecC> masks) {
  if constexpr (!is_complex_v<T>) {
    throw std::logic_error("cdp_from_masks_2d: coded diffraction is complex-only");
  } else {
    if (n1 < 1 || n2 < 1) {
      throw std::invalid_argument("cdp_from_masks_2d: shape must be positive");
    }
    check_masks(masks, n1 * n2);
    MeasurementEnsemble e;
    e.kind_ = EnsembleKind::Cdp2d;
    e.n_ = n1 * n2;
    e.n1_ = n1;
    e.n2_ = n2;
    e.m_ = static_cast<Index>(masks.size()) * e.n_;
    e.masks_ = std::move(masks);
    e.fft_ = std::make_shared<const detail::FftPlan>(n1, n2);
    return e;
  }
}

template <class T>
Vec<T> MeasurementEnsemble<T>::apply(const Vec<T>& v) const {
  if (v.size() != n_) {
    throw std::invalid_argument("apply: dimension mismatch");
  }
  counter_.value.fetch_add(1, std::memory_order_relaxed);
  if (kind_ == EnsembleKind::GaussianDense) {
    return rows_ * v;
  }
  if constexpr (is_complex_v<T>) {
    Vec<T> out(m_);
    VecC tmp(n_);
    for (std::size_t l = 0; l < masks_.size(); ++l) {
      tmp = masks_[l].cwiseProduct(v);
      fft_->forward(tmp.data(), out.data() + static_cast<Index>(l) * n_);
    }
    return out;
  } else {
    throw std::logic_error("apply: coded diffraction with real scalar");
  }
}

template <class T>
Vec<T> MeasurementEnsemble<T>::apply_adjoint(const Vec<T>& r) const {
  if (r.size() != m_) {
    throw std::invalid_argument("apply_adjoint: dimension mismatch");
  }
  counter_.value.fetch_add(1, std::memory_order_relaxed);
  if (kind_ == EnsembleKind::GaussianDense) {
    return rows_.adjoint() * r;
  }
  if constexpr (is_complex_v<T>) {
    Vec<T> out = Vec<T>::Zero(n_);
    VecC block(n_);
    for (std::size_t l = 0; l < masks_.size(); ++l) {
      fft_->backward(r.data() + static_cast<Index>(l) * n_, block.data());
      out += masks_[l].conjugate().cwiseProduct(block);
    }
    return out;
  } else {
    throw std::logic_error("apply_adjoint: coded diffraction with real scalar");
  }
}

template <class T>
VecR MeasurementEnsemble<T>::forward_intensity(const Vec<T>& x) const {
  const Vec<T> ax = apply(x);
  VecR y(m_);
  for (Index k = 0; k < m_; ++k) {
    y(k) = abs2(ax(k));
  }
  return y;
}

template <class T>
const Mat<T>& MeasurementEnsemble<T>::dense_rows() const {
  if (kind_ != EnsembleKind::GaussianDense) {
    throw std::logic_error("dense_rows: not a dense ensemble");
  }
  return rows_;
}

template <class T>
const std::vector<VecC>& MeasurementEnsemble<T>::cdp_masks() const {
  if (kind_ == EnsembleKind::GaussianDense) {
    throw std::logic_error("cdp_masks: not a coded-diffraction ensemble");
  }
  return masks_;
}

template <class T>
MeasurementEnsemble<T> sample_gaussian_ensemble(Index n, Index m, Rng& rng) {
  if (n < 1 || m < 1) {
    throw std::invalid_argument("sample_gaussian_ensemble: n and m must be >= 1");
  }
  Mat<T> rows(m, n);
  for (Index k = 0; k < m; ++k) {
    for (Index j = 0; j < n; ++j) {
      rows(k, j) = sample_entry<T>(rng);
    }
  }
  return MeasurementEnsemble<T>::from_rows(std::move(rows));
}

MeasurementEnsemble<Complex> sample_cdp_ensemble(Index n, int masks, Rng& rng) {
  if (n < 1 || masks < 1) {
    throw std::invalid_argument("sample_cdp_ensemble: n and mask count must be >= 1");
  }
  std::vector<VecC> d;
  d.reserve(static_cast<std::size_t>(masks));
  for (int l = 0; l < masks; ++l) {
    d.push_back(sample_cdp_mask(n, rng));
  }
  return MeasurementEnsemble<Complex>::cdp_from_masks(std::move(d));
}

MeasurementEnsemble<Complex> sample_cdp_ensemble_2d(Index n1, Index n2, int masks,
                                                    Rng& rng) {
  if (n1 < 1 || n2 < 1 || masks < 1) {
    throw std::invalid_argument(
        "sample_cdp_ensemble_2d: shape and mask count must be >= 1");
  }
  std::vector<VecC> d;
  d.reserve(static_cast<std::size_t>(masks));
  for (int l = 0; l < masks; ++l) {
    d.push_back(sample_cdp_mask(n1 * n2, rng));
  }
  return MeasurementEnsemble<Complex>::cdp_from_masks_2d(n1, n2, std::move(d));
}

template <class T>
Vec<T> sample_standard_signal(Index n, Rng& rng) {
  if (n < 1) {
    throw std::invalid_argument("sample_standard_signal: n must be >= 1");
  }
  Vec<T> x(n);
  for (Index j = 0; j < n; ++j) {
    if constexpr (is_complex_v<T>) {
      const double re = gaussian(rng);
      const double im = gaussian(rng);
      x(j) = Complex(re, im);
    } else {
      x(j) = gaussian(rng);
    }
  }
  return x;
}

Measurements add_noise(const Measurements& meas, double sigma, std::uint64_t seed) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw std::invalid_argument("add_noise: sigma must be finite and nonnegative");
  }
  if (sigma == 0.0) {
    return meas;
  }
  const double yn = meas.y.norm();
  if (yn == 0.0) {
    throw std::invalid_argument("add_noise: zero measurements with positive sigma");
  }
  Rng rng(seed);
  VecR w(meas.y.size());
  for (Index k = 0; k < w.size(); ++k) {
    w(k) = gaussian(rng);
  }
  double wn = w.norm();
  if (wn == 0.0) {
    w(0) = 1.0;
    wn = 1.0;
  }
  Measurements out;
  out.y = meas.y + (sigma * yn / wn) * w;
  out.noise = NoiseRecord{sigma, seed};
  return out;
}

template class MeasurementEnsemble<double>;
template class MeasurementEnsemble<Complex>;
template MeasurementEnsemble<double> sample_gaussian_ensemble<double>(Index, Index, Rng&);
template MeasurementEnsemble<Complex> sample_gaussian_ensemble<Complex>(Index, Index, Rng&);
template Vec<double> sample_standard_signal<double>(Index, Rng&);
template Vec<Complex> sample_standard_signal<Complex>(Index, Rng&);

}  // namespace prgrad
