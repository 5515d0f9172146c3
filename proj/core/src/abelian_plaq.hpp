#pragma once

// Internal helpers shared by the abelian flows: wrapped plaquette phases and
// the derived curvature fields, without the matrix machinery.

#include <cmath>

#include "vtx/bundle.hpp"

namespace vtx::detail {

inline double wrap_pi(double x) {
  x = std::fmod(x, kTwoPi);
  if (x <= -kTwoPi / 2) x += kTwoPi;
  if (x > kTwoPi / 2) x -= kTwoPi;
  return x;
}

inline double plaq_phase(const GaugeField& g, int mu, int nu, long s) {
  const LatticeTorus& t = *g.torus;
  const long smu = t.neighbor(s, mu, 1);
  const long snu = t.neighbor(s, nu, 1);
  return wrap_pi(g.angle(mu, s) + g.angle(nu, smu) - g.angle(mu, snu) - g.angle(nu, s));
}

struct AbelianCurv {
  RealField ilf;  // iΛF
  CplxField f02;  // unit-frame (0,2) coefficient, complex_dim 2 only
};

inline AbelianCurv abelian_curvature(const GaugeField& g, bool guard = true) {
  const LatticeTorus& t = *g.torus;
  AbelianCurv out{RealField(t), CplxField(t)};
  for (int j = 0; j < t.complex_dim; ++j) {
    const double c = 1.0 / (t.h[2 * j] * t.h[2 * j + 1] * t.metric_a[j]);
    for (long s = 0; s < t.nsites; ++s) {
      const double p = plaq_phase(g, 2 * j, 2 * j + 1, s);
      if (guard && std::abs(p) > kTwoPi / 2 - 0.1)
        fail(ErrorKind::NearBranchCut, "plaquette reached the branch-cut guard");
      out.ilf.v[s] += -p * c;
    }
  }
  if (t.complex_dim == 2) {
    const double frame = 2.0 / std::sqrt(t.metric_a[0] * t.metric_a[1]);
    for (long s = 0; s < t.nsites; ++s) {
      const cplx F02 = cplx(0, plaq_phase(g, 0, 2, s)) / (t.h[0] * t.h[2]);
      const cplx F13 = cplx(0, plaq_phase(g, 1, 3, s)) / (t.h[1] * t.h[3]);
      const cplx F03 = cplx(0, plaq_phase(g, 0, 3, s)) / (t.h[0] * t.h[3]);
      const cplx F12 = cplx(0, plaq_phase(g, 1, 2, s)) / (t.h[1] * t.h[2]);
      out.f02.v[s] = 0.25 * (F02 - F13 + cplx(0, 1) * (F03 + F12)) * frame;
    }
  }
  return out;
}

// θ-gradient stencil of a term Σ_s A(s)·p_{μν}(s): the angle θ_μ(s) enters
// p(s) with +1 and p(s−ν̂) with −1; θ_ν(s) enters p(s) with −1 and p(s−μ̂)
// with +1. A is the adjoint weight field dTerm/dp.
inline void add_plaq_grad(const LatticeTorus& t, int mu, int nu, const std::vector<double>& A,
                          std::vector<double>& g_mu, std::vector<double>& g_nu) {
  for (long s = 0; s < t.nsites; ++s) {
    const long smnu = t.neighbor(s, nu, -1);
    const long smmu = t.neighbor(s, mu, -1);
    g_mu[static_cast<size_t>(s)] += A[static_cast<size_t>(s)] - A[static_cast<size_t>(smnu)];
    g_nu[static_cast<size_t>(s)] += A[static_cast<size_t>(smmu)] - A[static_cast<size_t>(s)];
  }
}

} // namespace vtx::detail
