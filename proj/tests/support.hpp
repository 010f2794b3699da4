#pragma once

// Shared helpers for the test suites: seeded random inputs, dense lifting of
// compressed states, and small independent reference computations.

#include <prgrad/manifold.hpp>
#include <prgrad/measurement.hpp>
#include <prgrad/oracle.hpp>
#include <prgrad/rng.hpp>
#include <prgrad/solver.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace testsup {

using prgrad::Complex;
using prgrad::Index;
using prgrad::Mask;
using prgrad::Mat;
using prgrad::Vec;
using prgrad::VecR;

template <class T>
Vec<T> random_vec(prgrad::Rng& rng, Index n) {
  return prgrad::sample_standard_signal<T>(n, rng);
}

template <class T>
Vec<T> random_unit(prgrad::Rng& rng, Index n) {
  Vec<T> v = random_vec<T>(rng, n);
  double nv = v.norm();
  while (nv == 0.0) {
    v = random_vec<T>(rng, n);
    nv = v.norm();
  }
  return v / nv;
}

template <class T>
Mat<T> random_mat(prgrad::Rng& rng, Index r, Index c) {
  Mat<T> a(r, c);
  for (Index j = 0; j < c; ++j) {
    a.col(j) = random_vec<T>(rng, r);
  }
  return a;
}

template <class T>
Mat<T> random_hermitian(prgrad::Rng& rng, Index n) {
  const Mat<T> a = random_mat<T>(rng, n, n);
  Mat<T> h = a + a.adjoint();
  h *= 0.5;
  return h;
}

template <class T>
prgrad::RankOneState<T> random_state(prgrad::Rng& rng, Index n, double sigma_scale = 1.0) {
  prgrad::RankOneState<T> st;
  st.u = random_unit<T>(rng, n);
  st.sigma = sigma_scale * (0.1 + prgrad::uniform01(rng));
  return st;
}

template <class T>
Mat<T> lift(const prgrad::RankOneState<T>& st) {
  Mat<T> z = st.u * st.u.adjoint();
  z *= st.sigma;
  return z;
}

template <class T>
Mat<T> lift_vec(const Vec<T>& z) {
  return z * z.adjoint();
}

// Dense form of the tangent element c u u^H + s (v u^H + u v^H).
template <class T>
Mat<T> lift_tangent(const Vec<T>& u, const prgrad::TangentCoeffs<T>& t) {
  Mat<T> w = u * u.adjoint();
  w *= t.c;
  Mat<T> cross = t.v * u.adjoint() + u * t.v.adjoint();
  cross *= t.s;
  return w + cross;
}

// Real Frobenius inner product Re tr(A^H B).
template <class T>
double frob_inner(const Mat<T>& A, const Mat<T>& B) {
  return prgrad::real_part((A.adjoint() * B).trace());
}

template <class A, class B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline bool masks_equal(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) return false;
  for (Index k = 0; k < a.size(); ++k) {
    if (a(k) != b(k)) return false;
  }
  return true;
}

// Entrywise transcription of the three acceptance events, written against
// explicit rows as an independent check on truncation_mask. rows(k, :) holds
// a_k^H, matching MeasurementEnsemble::from_rows.
template <class T>
Mask truncation_reference(const Mat<T>& rows, const VecR& y, const Vec<T>& z,
                          const prgrad::TruncationParams& p) {
  const Index m = rows.rows();
  const double znorm = z.norm();
  const Vec<T> az = rows * z;
  double y_l1 = 0.0;
  double res_l1 = 0.0;
  for (Index k = 0; k < m; ++k) {
    y_l1 += std::abs(y(k));
    res_l1 += std::abs(y(k) - prgrad::abs2(az(k)));
  }
  Mask mask(m);
  for (Index k = 0; k < m; ++k) {
    const double sy = std::sqrt(std::max(y(k), 0.0));
    const double a = std::abs(az(k));
    const bool e1x = !std::isfinite(p.tau_x) ||
                     sy <= p.tau_x * std::sqrt(y_l1 / static_cast<double>(m));
    const bool e1z = !std::isfinite(p.tau_z) || a <= p.tau_z * znorm;
    const bool e2 = !std::isfinite(p.tau_h) ||
                    std::abs(y(k) - prgrad::abs2(az(k))) <=
                        p.tau_h / static_cast<double>(m) * res_l1 * (a + sy) / znorm;
    mask(k) = e1x && e1z && e2;
  }
  return mask;
}

// One compressed step next to the dense reference step on the same instance;
// returns the Frobenius gap between the lifted results. Callers should pick a
// tol_residual small enough that the compressed step cannot stop early.
template <class T>
double step_vs_dense_gap(const prgrad::MeasurementEnsemble<T>& e,
                         const prgrad::Measurements& meas,
                         const prgrad::RankOneState<T>& st,
                         const prgrad::SolverConfig& cfg) {
  const prgrad::StepOutcome<T> out = prgrad::step<T>(e, meas, st, cfg);
  const auto op = prgrad::oracle::DenseLiftedOperator<T>::from_ensemble(e);
  std::optional<Mask> mask;
  if (cfg.variant == prgrad::SolverVariant::TRGrad) {
    mask = prgrad::truncation_mask<T>(e, meas, st, cfg.trunc);
    if (mask->count() == 0) {
      // Every measurement rejected: the compressed step must be a no-op and
      // the dense gradient vanishes, so both sides stay at the iterate.
      return (lift(out.state) - lift(st)).norm();
    }
  }
  const Mat<T> Z = lift(st);
  const double alpha = (cfg.stepsize.kind == prgrad::StepsizeRule::Kind::Constant)
                           ? cfg.stepsize.alpha
                           : op.dense_steepest_alpha(meas, Z, mask);
  const Mat<T> Zn = op.dense_step(meas, Z, alpha, mask);
  return (lift(out.state) - Zn).norm();
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.is_open()) {
    throw std::runtime_error("cannot open " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) {
      fields.push_back(field);
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace testsup
