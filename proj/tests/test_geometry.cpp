#include <doctest.h>

#include <cmath>

#include "vtx/bundle.hpp"
#include "vtx/geometry.hpp"
#include "vtx/operators.hpp"

using namespace vtx;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("torus volume is 2pi") {
  auto t2 = build_torus(1, {32, 32}, {1.0, 1.0});
  RealField one(t2, 1.0);
  CHECK(integrate(one) == doctest::Approx(kTwoPi).epsilon(1e-14));

  auto t4 = build_torus(2, {12, 12, 12, 12}, {1.0, 1.0, 1.0, 1.0});
  RealField one4(t4, 1.0);
  CHECK(integrate(one4) == doctest::Approx(kTwoPi).epsilon(1e-14));
}

TEST_CASE("odd or tiny grids are rejected") {
  CHECK_THROWS_AS(build_torus(1, {7, 8}, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(build_torus(1, {4, 8}, {1.0, 1.0}), Error);
  try {
    build_torus(1, {7, 8}, {1.0, 1.0});
  } catch (const Error& e) {
    CHECK(e.kind == ErrorKind::OddGrid);
  }
}

TEST_CASE("quadrature of a single trigonometric mode vanishes") {
  auto t = build_torus(1, {32, 32}, {1.0, 1.0});
  RealField f(t);
  for (long s = 0; s < t.nsites; ++s) {
    auto x = t.coords(s);
    f.v[s] = std::cos(kTwoPi * x[0] / t.grid[0]);
  }
  CHECK(std::abs(integrate(f)) < 1e-12);
}

TEST_CASE("integrate is linear and integrate(const c) = 2 pi c") {
  auto t = build_torus(1, {16, 16}, {2.0, 0.5});
  RealField a(t), b(t);
  for (long s = 0; s < t.nsites; ++s) {
    a.v[s] = std::sin(0.1 * s);
    b.v[s] = std::cos(0.2 * s);
  }
  RealField combo(t);
  for (long s = 0; s < t.nsites; ++s) combo.v[s] = 3.0 * a.v[s] - 0.5 * b.v[s];
  CHECK(integrate(combo) ==
        doctest::Approx(3.0 * integrate(a) - 0.5 * integrate(b)).epsilon(1e-13));
  RealField c(t, -1.7);
  CHECK(integrate(c) == doctest::Approx(-1.7 * kTwoPi).epsilon(1e-14));
}

TEST_CASE("spectral derivative of a Fourier mode is exact") {
  auto t = build_torus(1, {32, 32}, {1.0, 1.0});
  CplxField f(t);
  const int k = 3;
  for (long s = 0; s < t.nsites; ++s) {
    auto x = t.coords(s);
    f.v[s] = std::polar(1.0, kTwoPi * k * x[0] / t.grid[0]);
  }
  CplxField df = spectral_derivative(f, 0);
  const double expected_k = kTwoPi * k / t.lengths[0];
  double err = 0.0;
  for (long s = 0; s < t.nsites; ++s)
    err = std::max(err, std::abs(df.v[s] - cplx(0.0, expected_k) * f.v[s]));
  CHECK(err < 1e-11);

  // derivative of a constant is zero
  CplxField c(t, cplx(2.0, -1.0));
  CplxField dc = spectral_derivative(c, 1);
  double errc = 0.0;
  for (long s = 0; s < t.nsites; ++s) errc = std::max(errc, std::abs(dc.v[s]));
  CHECK(errc < 1e-13);
}

TEST_CASE("discrete laplacian annihilates constants and is symmetric") {
  auto t = build_torus(1, {16, 16}, {1.0, 1.0});
  RealField c(t, 4.2);
  RealField lc = laplace(t, c);
  for (long s = 0; s < t.nsites; ++s) CHECK(std::abs(lc.v[s]) < 1e-12);

  RealField a = random_band_limited(t, 11, 1.0);
  RealField b = random_band_limited(t, 22, 1.0);
  RealField la = laplace(t, a), lb = laplace(t, b);
  double iab = 0.0, iba = 0.0;
  for (long s = 0; s < t.nsites; ++s) {
    iab += la.v[s] * b.v[s];
    iba += a.v[s] * lb.v[s];
  }
  CHECK(iab * t.site_weight == doctest::Approx(iba * t.site_weight).epsilon(1e-11));
}

TEST_CASE("dealias padding preserves quadrature of band-limited products") {
  auto t = build_torus(1, {16, 16}, {1.0, 1.0});
  RealField a = random_band_limited(t, 5, 0.7);
  RealField b = random_band_limited(t, 6, 0.4);
  auto tp = padded_torus(t);
  RealField ap = pad_field(a, tp), bp = pad_field(b, tp);
  // the product of two fields band-limited to M/16 is exactly integrable on
  // both grids; the padded path must agree
  RealField prod(t), prodp(tp);
  for (long s = 0; s < t.nsites; ++s) prod.v[s] = a.v[s] * b.v[s];
  for (long s = 0; s < tp.nsites; ++s) prodp.v[s] = ap.v[s] * bp.v[s];
  CHECK(integrate(prod) == doctest::Approx(integrate(prodp)).epsilon(1e-12));
  // padding is spectral interpolation: values at common points survive
  CHECK(ap.v[0] == doctest::Approx(a.v[0]).epsilon(1e-12));
}

TEST_SUITE_END();
