#pragma once

#include <optional>
#include <utility>

#include "prgrad/manifold.hpp"
#include "prgrad/measurement.hpp"

namespace prgrad::oracle {

// Deliberately brute-force dense reference path used by tests to pin the
// compressed solver. Hard size guards (n <= 8, m <= 64) keep it from leaking
// into production use.
template <class T>
struct DenseLiftedOperator {
  Mat<T> rows;  // row k = a_k^H, matching MeasurementEnsemble::apply

  static DenseLiftedOperator from_rows(Mat<T> r);
  static DenseLiftedOperator from_ensemble(const MeasurementEnsemble<T>& e);

  Index n() const { return rows.cols(); }
  Index m() const { return rows.rows(); }

  // { a_k^H Z a_k }_k as real numbers (Z must be Hermitian).
  VecR lifted_forward(const Mat<T>& Z) const;

  // sum_k b_k a_k a_k^H, exact adjoint of lifted_forward.
  Mat<T> lifted_adjoint(const VecR& b) const;

  // One full dense iteration on Z = sigma u u^H: masked gradient, dense
  // tangent projection, dense eigendecomposition of Z + alpha P, retained
  // largest nonnegative eigenpair. Returns the next lifted matrix.
  Mat<T> dense_step(const Measurements& meas, const Mat<T>& Z, double alpha,
                    const std::optional<Mask>& mask = std::nullopt) const;

  // Exact line-search stepsize along the dense projected gradient at Z.
  double dense_steepest_alpha(const Measurements& meas, const Mat<T>& Z,
                              const std::optional<Mask>& mask = std::nullopt) const;
};

// Largest eigenpair of a Hermitian matrix via the dense solver; the
// independent route against which the closed 2x2 form is checked.
template <class T>
std::pair<double, Vec<T>> top_eigenpair(const Mat<T>& H);

}  // namespace prgrad::oracle
