#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "prgrad/types.hpp"

namespace prgrad {

// Manifold iterate Z = sigma * u u^H; the vector estimate is sqrt(sigma) * u.
template <class T>
struct RankOneState {
  double sigma = 0.0;
  Vec<T> u;
};

// Compressed tangent representation: P_T(G) = c u u^H + s (v u^H + u v^H)
// with v a unit vector orthogonal to u and s >= 0, so that
// ||P_T(G)||_F^2 = c^2 + 2 s^2.
template <class T>
struct TangentCoeffs {
  double c = 0.0;
  double s = 0.0;
  Vec<T> v;
};

struct Eig2 {
  double lambda1 = 0.0;  // lambda1 >= lambda2
  double lambda2 = 0.0;
  Eigen::Vector2d q1{1.0, 0.0};
  Eigen::Vector2d q2{0.0, 1.0};
};

// Closed-form eigendecomposition of [[a, b], [b, d]]. The eigenvector comes
// from the better-conditioned of the two defining rows, which keeps the
// result stable when a - d and b cancel.
Eig2 eig2x2_sym(double a, double b, double d);

namespace detail {

inline void check_unit(double norm, const char* where) {
  if (!(std::abs(norm - 1.0) <= 1e-8)) {
    throw std::invalid_argument(std::string(where) + ": u must be a unit vector");
  }
}

}  // namespace detail

template <class T>
Vec<T> estimate_vector(const RankOneState<T>& state) {
  return std::sqrt(state.sigma) * state.u;
}

// Deterministic unit vector orthogonal to u: the coordinate direction with
// the smallest |u_j|, orthonormalized against u. At n = 1 no orthogonal
// direction exists; u itself is returned (callers only pair this with s = 0).
template <class T>
Vec<T> orthogonal_unit(const Vec<T>& u) {
  Index j = 0;
  u.cwiseAbs().minCoeff(&j);
  Vec<T> v = Vec<T>::Zero(u.size());
  v(j) = T(1);
  const T coef = u.dot(v);
  v -= coef * u;
  const double nv = v.norm();
  if (nv == 0.0) return u;
  return v / nv;
}

// Splits the gradient action g = G u into tangent coefficients. c = Re(u^H g);
// the full complex coefficient (u^H g) u is subtracted when forming the
// orthogonal part so v stays orthogonal to u at machine precision.
template <class T>
TangentCoeffs<T> tangent_from_action(const Vec<T>& g, const Vec<T>& u) {
  if (u.size() == 0 || g.size() != u.size()) {
    throw std::invalid_argument("tangent_from_action: dimension mismatch");
  }
  detail::check_unit(u.norm(), "tangent_from_action");
  const T ug = u.dot(g);
  TangentCoeffs<T> t;
  t.c = real_part(ug);
  Vec<T> w = g - ug * u;
  const double s = w.norm();
  if (s == 0.0) {
    t.s = 0.0;
    t.v = orthogonal_unit(u);
  } else {
    t.s = s;
    t.v = w / s;
  }
  return t;
}

// One retraction: the rank-one projection of Z + alpha P_T(G), computed from
// the 2x2 matrix [[sigma + alpha c, alpha s], [alpha s, 0]] in the (u, v)
// basis. alpha = 0 is allowed as an algebraic no-op.
template <class T>
RankOneState<T> retract(const RankOneState<T>& state, const TangentCoeffs<T>& t,
                        double alpha) {
  if (state.u.size() == 0 || state.u.size() != t.v.size()) {
    throw std::invalid_argument("retract: dimension mismatch");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("retract: stepsize must be nonnegative and finite");
  }
  if (!(state.sigma >= 0.0)) {
    throw std::invalid_argument("retract: sigma must be nonnegative");
  }
  detail::check_unit(state.u.norm(), "retract");
  const Eig2 e = eig2x2_sym(state.sigma + alpha * t.c, alpha * t.s, 0.0);
  RankOneState<T> next;
  next.sigma = std::max(e.lambda1, 0.0);
  next.u = e.q1(0) * state.u + e.q1(1) * t.v;
  const double nu = next.u.norm();
  if (nu == 0.0) {
    next.u = state.u;  // n = 1 degeneracy where v == u
  } else {
    next.u /= nu;
  }
  return next;
}

// Distance up to global phase: min over |phi| = 1 of ||x1 - phi x2||.
// Computed as the explicitly aligned difference; the expanded square-root
// form cancels catastrophically near zero.
template <class T>
double dist_phase(const Vec<T>& x1, const Vec<T>& x2) {
  if (x1.size() != x2.size()) {
    throw std::invalid_argument("dist_phase: length mismatch");
  }
  const T p = x1.dot(x2);
  const double ap = std::abs(p);
  if (ap == 0.0) return std::hypot(x1.norm(), x2.norm());
  const T phase = conj_scalar(p) / ap;
  return (x1 - phase * x2).norm();
}

// Dense tangent projection u u^H W + W u u^H - u u^H W u u^H. Reference
// path; the solver itself never forms n x n matrices.
template <class T>
Mat<T> project_tangent_dense(const Mat<T>& W, const Vec<T>& u) {
  if (W.rows() != W.cols() || W.rows() != u.size() || u.size() == 0) {
    throw std::invalid_argument("project_tangent_dense: dimension mismatch");
  }
  detail::check_unit(u.norm(), "project_tangent_dense");
  const double scale = W.cwiseAbs().maxCoeff();
  if ((W - W.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw std::invalid_argument("project_tangent_dense: matrix must be Hermitian");
  }
  const Mat<T> P = u * u.adjoint();
  const Mat<T> PW = P * W;
  return PW + W * P - PW * P;
}

}  // namespace prgrad
