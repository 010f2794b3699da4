#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <prgrad/measurement.hpp>
#include <prgrad/rng.hpp>

#include "support.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

using namespace prgrad;
using testsup::max_abs_diff;
using testsup::random_vec;

namespace {

constexpr double kPi = std::numbers::pi;

// Explicit dense rows equivalent to a one-dimensional coded diffraction
// ensemble: block l holds F diag(d_l) with the unnormalized DFT matrix F.
MatC cdp_dense_rows(Index n, const std::vector<VecC>& masks) {
  MatC f(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < n; ++k) {
      const double ang = -2.0 * kPi * static_cast<double>(j * k) / static_cast<double>(n);
      f(j, k) = Complex(std::cos(ang), std::sin(ang));
    }
  }
  MatC rows(static_cast<Index>(masks.size()) * n, n);
  for (std::size_t l = 0; l < masks.size(); ++l) {
    rows.block(static_cast<Index>(l) * n, 0, n, n) = f * masks[l].asDiagonal();
  }
  return rows;
}

MatC cdp_dense_rows_2d(Index n1, Index n2, const std::vector<VecC>& masks) {
  const Index n = n1 * n2;
  MatC f(n, n);
  for (Index j1 = 0; j1 < n1; ++j1) {
    for (Index j2 = 0; j2 < n2; ++j2) {
      for (Index k1 = 0; k1 < n1; ++k1) {
        for (Index k2 = 0; k2 < n2; ++k2) {
          const double ang = -2.0 * kPi *
                             (static_cast<double>(j1 * k1) / static_cast<double>(n1) +
                              static_cast<double>(j2 * k2) / static_cast<double>(n2));
          f(j1 * n2 + j2, k1 * n2 + k2) = Complex(std::cos(ang), std::sin(ang));
        }
      }
    }
  }
  MatC rows(static_cast<Index>(masks.size()) * n, n);
  for (std::size_t l = 0; l < masks.size(); ++l) {
    rows.block(static_cast<Index>(l) * n, 0, n, n) = f * masks[l].asDiagonal();
  }
  return rows;
}

}  // namespace

TEST_CASE("dense apply, adjoint, and intensity on hand values") {
  Mat<double> rows(2, 2);
  rows << 1.0, 0.0, 1.0, 1.0;
  const auto e = MeasurementEnsemble<double>::from_rows(rows);

  Vec<double> v(2);
  v << 1.0, 2.0;
  const Vec<double> av = e.apply(v);
  CHECK(av(0) == 1.0);
  CHECK(av(1) == 3.0);

  Vec<double> r(2);
  r << 1.0, 1.0;
  const Vec<double> ar = e.apply_adjoint(r);
  CHECK(ar(0) == 2.0);
  CHECK(ar(1) == 1.0);

  const VecR y = e.forward_intensity(v);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 9.0);
}

TEST_CASE("complex rows store conjugated sensing vectors") {
  MatC rows(1, 1);
  rows << Complex(0.0, 1.0);
  const auto e = MeasurementEnsemble<Complex>::from_rows(rows);

  VecC v(1);
  v << Complex(1.0, 0.0);
  CHECK(e.apply(v)(0) == Complex(0.0, 1.0));

  VecR r(1);
  r << 1.0;
  CHECK(e.apply_adjoint(r)(0) == Complex(0.0, -1.0));
}

TEST_CASE("coded diffraction apply matches the two-point DFT") {
  std::vector<VecC> masks(1);
  masks[0] = VecC::Ones(2);
  const auto e = MeasurementEnsemble<Complex>::cdp_from_masks(masks);

  VecC v(2);
  v << Complex(1.0, 0.0), Complex(2.0, 0.0);
  const VecC av = e.apply(v);
  CHECK(std::abs(av(0) - Complex(3.0, 0.0)) <= 1e-12);
  CHECK(std::abs(av(1) - Complex(-1.0, 0.0)) <= 1e-12);

  const VecR y = e.forward_intensity(v);
  CHECK(y(0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(y(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two-dimensional transform runs over rows then columns") {
  std::vector<VecC> masks(1);
  masks[0] = VecC::Ones(4);
  const auto e = MeasurementEnsemble<Complex>::cdp_from_masks_2d(2, 2, masks);

  // Row-major layout of the 2x2 array [[1, 2], [3, 4]].
  VecC v(4);
  v << Complex(1, 0), Complex(2, 0), Complex(3, 0), Complex(4, 0);
  const VecC av = e.apply(v);
  CHECK(std::abs(av(0) - Complex(10.0, 0.0)) <= 1e-12);
  CHECK(std::abs(av(1) - Complex(-2.0, 0.0)) <= 1e-12);
  CHECK(std::abs(av(2) - Complex(-4.0, 0.0)) <= 1e-12);
  CHECK(std::abs(av(3) - Complex(0.0, 0.0)) <= 1e-12);
}

TEST_CASE("coded diffraction ensembles match their dense materialization") {
  Rng rng(201);
  const Index n = 8;
  const auto e = sample_cdp_ensemble(n, 3, rng);
  const auto dense = MeasurementEnsemble<Complex>::from_rows(cdp_dense_rows(n, e.cdp_masks()));
  CHECK(e.m() == dense.m());

  for (int rep = 0; rep < 5; ++rep) {
    const VecC v = random_vec<Complex>(rng, n);
    const VecC r = VecC::Map(random_vec<Complex>(rng, e.m()).data(), e.m());
    CHECK((e.apply(v) - dense.apply(v)).norm() <= 1e-10 * (1.0 + dense.apply(v).norm()));
    VecR rr(e.m());
    for (Index k = 0; k < e.m(); ++k) rr(k) = gaussian(rng);
    CHECK((e.apply_adjoint(rr) - dense.apply_adjoint(rr)).norm() <=
          1e-10 * (1.0 + dense.apply_adjoint(rr).norm()));
    (void)r;
  }
}

TEST_CASE("two-dimensional coded diffraction matches its dense materialization") {
  Rng rng(202);
  const Index n1 = 2;
  const Index n2 = 3;
  const auto e = sample_cdp_ensemble_2d(n1, n2, 2, rng);
  const auto dense =
      MeasurementEnsemble<Complex>::from_rows(cdp_dense_rows_2d(n1, n2, e.cdp_masks()));

  for (int rep = 0; rep < 5; ++rep) {
    const VecC v = random_vec<Complex>(rng, n1 * n2);
    CHECK((e.apply(v) - dense.apply(v)).norm() <= 1e-10 * (1.0 + dense.apply(v).norm()));
    VecR rr(e.m());
    for (Index k = 0; k < e.m(); ++k) rr(k) = gaussian(rng);
    CHECK((e.apply_adjoint(rr) - dense.apply_adjoint(rr)).norm() <=
          1e-10 * (1.0 + dense.apply_adjoint(rr).norm()));
  }
}

TEST_CASE("mask entries come from the four-symbol alphabet") {
  Rng rng(203);
  const auto e = sample_cdp_ensemble(64, 3, rng);
  const std::vector<Complex> alphabet = {Complex(1, 0), Complex(-1, 0), Complex(0, 1),
                                         Complex(0, -1)};
  std::set<int> seen;
  for (const VecC& mask : e.cdp_masks()) {
    for (Index j = 0; j < mask.size(); ++j) {
      int hit = -1;
      for (std::size_t s = 0; s < alphabet.size(); ++s) {
        if (std::abs(mask(j) - alphabet[s]) == 0.0) hit = static_cast<int>(s);
      }
      CHECK(hit >= 0);
      seen.insert(hit);
    }
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("shapes and metadata") {
  Rng rng(204);
  const auto g = sample_gaussian_ensemble<double>(3, 7, rng);
  CHECK(g.kind() == EnsembleKind::GaussianDense);
  CHECK(g.n() == 3);
  CHECK(g.m() == 7);

  const auto c1 = sample_cdp_ensemble(4, 3, rng);
  CHECK(c1.kind() == EnsembleKind::Cdp1d);
  CHECK(c1.m() == 12);
  CHECK(c1.mask_count() == 3);
  CHECK(c1.cdp_masks().size() == 3);

  const auto c2 = sample_cdp_ensemble_2d(2, 2, 2, rng);
  CHECK(c2.kind() == EnsembleKind::Cdp2d);
  CHECK(c2.n() == 4);
  CHECK(c2.m() == 8);
  CHECK(c2.shape1() == 2);
  CHECK(c2.shape2() == 2);
}

TEST_CASE_TEMPLATE("adjoint identity over random pairs", T, double, Complex) {
  Rng rng(205);
  const Index n = 6;
  const Index m = 18;
  const auto e = sample_gaussian_ensemble<T>(n, m, rng);
  for (int rep = 0; rep < 200; ++rep) {
    const Vec<T> v = random_vec<T>(rng, n);
    VecR r(m);
    for (Index k = 0; k < m; ++k) r(k) = gaussian(rng);
    const auto lhs = e.apply(v).dot(r.cast<T>().eval());
    const auto rhs = v.dot(e.apply_adjoint(r));
    CHECK(std::abs(lhs - rhs) <=
          1e-10 * v.norm() * r.norm() * std::sqrt(static_cast<double>(n * m)));
  }
}

TEST_CASE("adjoint identity for coded diffraction ensembles") {
  Rng rng(206);
  for (int which = 0; which < 2; ++which) {
    const auto e = (which == 0) ? sample_cdp_ensemble(6, 3, rng)
                                : sample_cdp_ensemble_2d(2, 3, 3, rng);
    for (int rep = 0; rep < 200; ++rep) {
      const VecC v = random_vec<Complex>(rng, e.n());
      VecR r(e.m());
      for (Index k = 0; k < e.m(); ++k) r(k) = gaussian(rng);
      const Complex lhs = e.apply(v).dot(r.cast<Complex>().eval());
      const Complex rhs = v.dot(e.apply_adjoint(r));
      CHECK(std::abs(lhs - rhs) <=
            1e-10 * v.norm() * r.norm() * std::sqrt(static_cast<double>(e.n() * e.m())));
    }
  }
}

TEST_CASE("sensing vector second moments") {
  Rng rng(207);
  const Index n = 4;
  const Index m = 40000;

  const auto er = sample_gaussian_ensemble<double>(n, m, rng);
  const double mean_sq_real = er.dense_rows().squaredNorm() / static_cast<double>(n * m);
  CHECK(mean_sq_real > 0.95);
  CHECK(mean_sq_real < 1.05);

  const auto ec = sample_gaussian_ensemble<Complex>(n, m, rng);
  const double mean_sq_complex = ec.dense_rows().squaredNorm() / static_cast<double>(n * m);
  CHECK(mean_sq_complex > 0.95);
  CHECK(mean_sq_complex < 1.05);
}

TEST_CASE("sampling is reproducible from the seed") {
  Rng a(208);
  Rng b(208);
  const auto ea = sample_gaussian_ensemble<Complex>(5, 10, a);
  const auto eb = sample_gaussian_ensemble<Complex>(5, 10, b);
  CHECK(max_abs_diff(ea.dense_rows(), eb.dense_rows()) == 0.0);

  Rng c(209);
  Rng d(209);
  const auto ec = sample_cdp_ensemble(8, 4, c);
  const auto ed = sample_cdp_ensemble(8, 4, d);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(max_abs_diff(ec.cdp_masks()[l], ed.cdp_masks()[l]) == 0.0);
  }

  Rng s1(210);
  Rng s2(210);
  CHECK(max_abs_diff(sample_standard_signal<Complex>(16, s1),
                     sample_standard_signal<Complex>(16, s2)) == 0.0);
}

TEST_CASE("noise perturbation scales to the requested relative level") {
  Rng rng(211);
  const auto e = sample_gaussian_ensemble<double>(4, 32, rng);
  const VecR y = e.forward_intensity(random_vec<double>(rng, 4));
  const Measurements clean{y, std::nullopt};

  const Measurements noisy = add_noise(clean, 0.01, 42);
  CHECK((noisy.y - y).norm() / y.norm() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(noisy.noise.has_value());
  CHECK(noisy.noise->sigma == 0.01);
  CHECK(noisy.noise->seed == 42);

  const Measurements same = add_noise(clean, 0.01, 42);
  CHECK(max_abs_diff(same.y, noisy.y) == 0.0);

  const Measurements untouched = add_noise(clean, 0.0, 7);
  CHECK(max_abs_diff(untouched.y, y) == 0.0);
  CHECK(!untouched.noise.has_value());
}

TEST_CASE("noise argument validation") {
  const Measurements zero{VecR::Zero(4), std::nullopt};
  CHECK_THROWS_AS(add_noise(zero, 0.5, 1), std::invalid_argument);

  Measurements some{VecR::Ones(4), std::nullopt};
  CHECK_THROWS_AS(add_noise(some, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(add_noise(some, std::nan(""), 1), std::invalid_argument);
}

TEST_CASE("constructor and accessor guards") {
  Rng rng(212);
  CHECK_THROWS_AS(sample_gaussian_ensemble<double>(0, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_gaussian_ensemble<double>(4, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_cdp_ensemble(8, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_cdp_ensemble_2d(0, 3, 2, rng), std::invalid_argument);

  const auto cdp = sample_cdp_ensemble(4, 2, rng);
  CHECK_THROWS_AS(cdp.dense_rows(), std::logic_error);

  const auto dense = sample_gaussian_ensemble<Complex>(3, 6, rng);
  CHECK_THROWS_AS(dense.cdp_masks(), std::logic_error);

  std::vector<VecC> bad(2);
  bad[0] = VecC::Ones(3);
  bad[1] = VecC::Ones(4);
  CHECK_THROWS_AS(MeasurementEnsemble<Complex>::cdp_from_masks(bad), std::invalid_argument);
  CHECK_THROWS_AS(MeasurementEnsemble<Complex>::cdp_from_masks({}), std::invalid_argument);
  std::vector<VecC> ok(1);
  ok[0] = VecC::Ones(3);
  CHECK_THROWS_AS(MeasurementEnsemble<double>::cdp_from_masks(ok), std::logic_error);

  CHECK_THROWS_AS(dense.apply(random_vec<Complex>(rng, 5)), std::invalid_argument);
  VecR short_r = VecR::Ones(2);
  CHECK_THROWS_AS(dense.apply_adjoint(short_r), std::invalid_argument);
}

TEST_CASE("application counter tracks ensemble uses") {
  Rng rng(213);
  const auto e = sample_gaussian_ensemble<Complex>(4, 8, rng);
  CHECK(e.apply_count() == 0);

  const VecC v = random_vec<Complex>(rng, 4);
  (void)e.apply(v);
  (void)e.apply(v);
  VecR r = VecR::Ones(8);
  (void)e.apply_adjoint(r);
  (void)e.forward_intensity(v);
  CHECK(e.apply_count() == 4);
}

TEST_CASE("intensities scale quadratically with the signal") {
  Rng rng(214);
  const auto e = sample_gaussian_ensemble<Complex>(5, 15, rng);
  const VecC x = random_vec<Complex>(rng, 5);
  const Complex c(1.5, -2.0);
  const VecR base = e.forward_intensity(x);
  const VecR scaled = e.forward_intensity((c * x).eval());
  for (Index k = 0; k < 15; ++k) {
    CHECK(scaled(k) == doctest::Approx(std::norm(c) * base(k)).epsilon(1e-12));
  }
}
