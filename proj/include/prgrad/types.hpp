#pragma once

#include <Eigen/Dense>

#include <complex>

namespace prgrad {

using Real = double;
using Complex = std::complex<double>;
using Index = Eigen::Index;

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using VecR = Vec<Real>;
using VecC = Vec<Complex>;
using MatR = Mat<Real>;
using MatC = Mat<Complex>;

// Acceptance mask over measurement indices; true = kept.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

template <class T>
inline constexpr bool is_complex_v = false;
template <>
inline constexpr bool is_complex_v<Complex> = true;

inline double real_part(double x) { return x; }
inline double real_part(const Complex& x) { return x.real(); }

inline double conj_scalar(double x) { return x; }
inline Complex conj_scalar(const Complex& x) { return std::conj(x); }

inline double abs2(double x) { return x * x; }
inline double abs2(const Complex& x) { return std::norm(x); }

}  // namespace prgrad
