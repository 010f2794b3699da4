#include "prgrad/manifold.hpp"

#include <cmath>
#include <stdexcept>

namespace prgrad {

Eig2 eig2x2_sym(double a, double b, double d) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(d)) {
    throw std::invalid_argument("eig2x2_sym: entries must be finite");
  }
  Eig2 out;
  if (b == 0.0) {
    if (a >= d) {
      out.lambda1 = a;
      out.lambda2 = d;
      out.q1 = {1.0, 0.0};
      out.q2 = {0.0, 1.0};
    } else {
      out.lambda1 = d;
      out.lambda2 = a;
      out.q1 = {0.0, 1.0};
      out.q2 = {-1.0, 0.0};
    }
    return out;
  }
  const double h = 0.5 * (a + d);
  const double r = std::hypot(0.5 * (a - d), b);
  const double det = a * d - b * b;
  // The eigenvalue farther from zero is computed directly; the other one via
  // det / lambda to dodge the h -+ r cancellation.
  if (h >= 0.0) {
    out.lambda1 = h + r;
    out.lambda2 = (out.lambda1 == 0.0) ? 0.0 : det / out.lambda1;
  } else {
    out.lambda2 = h - r;
    out.lambda1 = det / out.lambda2;
  }
  // (A - lambda1 I) q1 = 0 gives two candidate directions; keep the one with
  // the larger norm.
  const double c1x = b;
  const double c1y = out.lambda1 - a;
  const double c2x = out.lambda1 - d;
  const double c2y = b;
  const double n1 = std::hypot(c1x, c1y);
  const double n2 = std::hypot(c2x, c2y);
  if (n1 >= n2) {
    out.q1 = {c1x / n1, c1y / n1};
  } else {
    out.q1 = {c2x / n2, c2y / n2};
  }
  out.q2 = {-out.q1(1), out.q1(0)};
  return out;
}

}  // namespace prgrad
