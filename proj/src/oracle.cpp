#include "prgrad/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prgrad::oracle {

namespace {

constexpr Index kMaxN = 8;
constexpr Index kMaxM = 64;

template <class T>
void check_hermitian(const Mat<T>& Z, const char* where) {
  const double scale = Z.size() > 0 ? Z.cwiseAbs().maxCoeff() : 0.0;
  if ((Z - Z.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw std::invalid_argument(std::string(where) + ": matrix must be Hermitian");
  }
}

// Base point u and weight sigma of a rank-one PSD matrix, via the dense
// eigendecomposition; rejects anything that is not numerically rank one.
template <class T>
std::pair<double, Vec<T>> rank_one_factor(const Mat<T>& Z) {
  Eigen::SelfAdjointEigenSolver<Mat<T>> es(Z);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("rank_one_factor: eigensolver failed");
  }
  const Index n = Z.rows();
  const VecR evals = es.eigenvalues();
  const double sigma = evals(n - 1);
  double rest = 0.0;
  for (Index i = 0; i + 1 < n; ++i) {
    rest += std::abs(evals(i));
  }
  if (sigma < 0.0 || rest > 1e-8 * std::max(1.0, sigma)) {
    throw std::invalid_argument("dense_step: Z must be rank-one positive semidefinite");
  }
  return {sigma, es.eigenvectors().col(n - 1)};
}

}  // namespace

template <class T>
DenseLiftedOperator<T> DenseLiftedOperator<T>::from_rows(Mat<T> r) {
  if (r.rows() < 1 || r.cols() < 1) {
    throw std::invalid_argument("DenseLiftedOperator: matrix must be nonempty");
  }
  if (r.cols() > kMaxN || r.rows() > kMaxM) {
    throw std::invalid_argument("DenseLiftedOperator: size guard exceeded (n <= 8, m <= 64)");
  }
  DenseLiftedOperator op;
  op.rows = std::move(r);
  return op;
}

template <class T>
DenseLiftedOperator<T> DenseLiftedOperator<T>::from_ensemble(const MeasurementEnsemble<T>& e) {
  if (e.n() > kMaxN || e.m() > kMaxM) {
    throw std::invalid_argument("DenseLiftedOperator: size guard exceeded (n <= 8, m <= 64)");
  }
  Mat<T> r(e.m(), e.n());
  Vec<T> basis = Vec<T>::Zero(e.n());
  for (Index j = 0; j < e.n(); ++j) {
    basis(j) = T(1);
    r.col(j) = e.apply(basis);
    basis(j) = T(0);
  }
  DenseLiftedOperator op;
  op.rows = std::move(r);
  return op;
}

template <class T>
VecR DenseLiftedOperator<T>::lifted_forward(const Mat<T>& Z) const {
  if (Z.rows() != n() || Z.cols() != n()) {
    throw std::invalid_argument("lifted_forward: dimension mismatch");
  }
  check_hermitian(Z, "lifted_forward");
  VecR out(m());
  for (Index k = 0; k < m(); ++k) {
    // row k = a_k^H, so a_k = rows.row(k).adjoint()
    const Vec<T> ak = rows.row(k).adjoint();
    out(k) = real_part((ak.adjoint() * Z * ak)(0, 0));
  }
  return out;
}

template <class T>
Mat<T> DenseLiftedOperator<T>::lifted_adjoint(const VecR& b) const {
  if (b.size() != m()) {
    throw std::invalid_argument("lifted_adjoint: dimension mismatch");
  }
  Mat<T> out = Mat<T>::Zero(n(), n());
  for (Index k = 0; k < m(); ++k) {
    const Vec<T> ak = rows.row(k).adjoint();
    out += b(k) * (ak * ak.adjoint());
  }
  return out;
}

template <class T>
Mat<T> DenseLiftedOperator<T>::dense_step(const Measurements& meas, const Mat<T>& Z,
                                          double alpha,
                                          const std::optional<Mask>& mask) const {
  if (meas.y.size() != m()) {
    throw std::invalid_argument("dense_step: measurement length mismatch");
  }
  if (mask && mask->size() != m()) {
    throw std::invalid_argument("dense_step: mask length mismatch");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("dense_step: stepsize must be nonnegative and finite");
  }
  check_hermitian(Z, "dense_step");
  const Vec<T> u = rank_one_factor(Z).second;

  VecR r = meas.y - lifted_forward(Z);
  if (mask) {
    for (Index k = 0; k < m(); ++k) {
      if (!(*mask)(k)) r(k) = 0.0;
    }
  }
  Mat<T> G = lifted_adjoint(r);
  G /= static_cast<double>(m());
  const Mat<T> P = project_tangent_dense<T>(G, u);

  const Mat<T> W = Z + alpha * P;
  const auto [lam, q] = top_eigenpair<T>(W);
  const double sigma_next = std::max(lam, 0.0);
  return sigma_next * (q * q.adjoint());
}

template <class T>
double DenseLiftedOperator<T>::dense_steepest_alpha(const Measurements& meas,
                                                    const Mat<T>& Z,
                                                    const std::optional<Mask>& mask) const {
  if (meas.y.size() != m()) {
    throw std::invalid_argument("dense_steepest_alpha: measurement length mismatch");
  }
  if (mask && mask->size() != m()) {
    throw std::invalid_argument("dense_steepest_alpha: mask length mismatch");
  }
  check_hermitian(Z, "dense_steepest_alpha");
  const Vec<T> u = rank_one_factor(Z).second;

  VecR r = meas.y - lifted_forward(Z);
  if (mask) {
    for (Index k = 0; k < m(); ++k) {
      if (!(*mask)(k)) r(k) = 0.0;
    }
  }
  Mat<T> G = lifted_adjoint(r);
  G /= static_cast<double>(m());
  const Mat<T> P = project_tangent_dense<T>(G, u);

  const double num = P.squaredNorm();
  const VecR ap = lifted_forward(P);
  double den = 0.0;
  for (Index k = 0; k < m(); ++k) {
    if (mask && !(*mask)(k)) continue;
    den += ap(k) * ap(k);
  }
  den /= static_cast<double>(m());
  if (den == 0.0) {
    throw std::runtime_error("dense_steepest_alpha: degenerate search direction");
  }
  return num / den;
}

template <class T>
std::pair<double, Vec<T>> top_eigenpair(const Mat<T>& H) {
  if (H.rows() != H.cols() || H.rows() < 1) {
    throw std::invalid_argument("top_eigenpair: matrix must be square and nonempty");
  }
  check_hermitian(H, "top_eigenpair");
  Eigen::SelfAdjointEigenSolver<Mat<T>> es(H);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("top_eigenpair: eigensolver failed");
  }
  const Index n = H.rows();
  return {es.eigenvalues()(n - 1), es.eigenvectors().col(n - 1)};
}

template struct DenseLiftedOperator<double>;
template struct DenseLiftedOperator<Complex>;
template std::pair<double, Vec<double>> top_eigenpair<double>(const Mat<double>&);
template std::pair<double, Vec<Complex>> top_eigenpair<Complex>(const Mat<Complex>&);

}  // namespace prgrad::oracle
