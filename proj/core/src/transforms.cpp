#include "vtx/transforms.hpp"

#include <cmath>

namespace vtx {

UTransform u_from_t(const LatticeTorus& torus, const RealField& t) {
  if (t.torus != &torus) fail(ErrorKind::Mismatch, "field/torus mismatch");
  UTransform out;
  out.t = t;
  out.tau = field_mean(t);
  RealField rhs(torus);
  for (long s = 0; s < torus.nsites; ++s) rhs.v[s] = out.tau - t.v[s];
  out.u = poisson_solve(torus, rhs);
  RealField back = laplace(torus, out.u);
  double err = 0.0;
  for (long s = 0; s < torus.nsites; ++s) err = std::max(err, std::abs(back.v[s] - rhs.v[s]));
  out.residual = err;
  return out;
}

std::pair<MetricField, Section> apply_u_transform(const MetricField& H, const Section& phi,
                                                  const RealField& u, bool forward) {
  const LatticeTorus& t = *u.torus;
  if (phi.torus != &t || H.torus != &t) fail(ErrorKind::Mismatch, "field/torus mismatch");
  MetricField K = H;
  Section psi = phi;
  const double sgn = forward ? 1.0 : -1.0;
  for (long s = 0; s < t.nsites; ++s) {
    if (H.rank == 1) {
      K.u.v[s] += sgn * u.v[s] / 2.0; // H = e^{2u_store}: K = H e^{±u}
    } else {
      const double e = std::exp(sgn * u.v[s]);
      for (int i = 0; i < H.rank * H.rank; ++i) K.mat.block(s)[i] *= e;
    }
    const double ph = std::exp(-sgn * u.v[s] / 2.0);
    for (int c = 0; c < phi.rank; ++c) psi.site(s)[c] *= ph;
  }
  return {std::move(K), std::move(psi)};
}

double dbar_defect(const DbarData& D, const Section& phi, const RealField& u) {
  const LatticeTorus& t = *D.torus;
  if (phi.torus != &t || u.torus != &t) fail(ErrorKind::Mismatch, "field/torus mismatch");
  // φ_u = e^{-u/2} φ
  Section phiu = phi;
  for (long s = 0; s < t.nsites; ++s) {
    const double e = std::exp(-u.v[s] / 2.0);
    for (int c = 0; c < phi.rank; ++c) phiu.site(s)[c] *= e;
  }
  FormComponents d = dbar_cov(D, phiu);
  // + ½ (∂̄u) φ_u, with ∂̄u in the same unit frames: d̄_j u
  CplxField uc(t);
  for (long s = 0; s < t.nsites; ++s) uc.v[s] = u.v[s];
  for (int j = 0; j < t.complex_dim; ++j) {
    CplxField dx = spectral_derivative(uc, 2 * j);
    CplxField dy = spectral_derivative(uc, 2 * j + 1);
    const double norm = 1.0 / std::sqrt(2.0 * t.metric_a[j]);
    for (long s = 0; s < t.nsites; ++s) {
      const cplx du = (dx.v[s] + cplx(0, 1) * dy.v[s]) * norm;
      for (int c = 0; c < phi.rank; ++c)
        d.comp[j][static_cast<size_t>(s) * phi.rank + c] += 0.5 * du * phiu.site(s)[c];
    }
  }
  return std::sqrt(form_norm_sq(t, d));
}

HatBundle hat_bundle(const BundleSpec& spec_l, const BundleSpec& spec_k) {
  if (spec_l.rank != 1 || spec_k.rank != 1)
    fail(ErrorKind::Unsupported, "hat bundle is built from line bundles");
  HatBundle out;
  out.spec.rank = 1;
  out.spec.role = RoleTag::Lhat;
  for (int j = 0; j < 2; ++j) {
    const int sum = spec_k.chern[static_cast<size_t>(j)] + spec_l.chern[static_cast<size_t>(j)];
    if (sum % 2 != 0) fail(ErrorKind::ParityError, "K⊗L has odd chern; no square root");
    out.spec.chern[static_cast<size_t>(j)] = sum / 2;
  }
  return out;
}

GaugeField hat_links(const GaugeField& a, const GaugeField* a_k) {
  if (a.spec.rank != 1) fail(ErrorKind::Unsupported, "hat links need an abelian connection");
  BundleSpec ks = a_k ? a_k->spec : BundleSpec{1, {0, 0}, RoleTag::L0};
  HatBundle hb = hat_bundle(a.spec, ks);
  GaugeField out = a;
  out.spec = hb.spec;
  for (size_t i = 0; i < out.det_angle.size(); ++i) {
    const double base = a_k ? a_k->det_angle[i] : 0.0;
    out.det_angle[i] = 0.5 * (a.det_angle[i] + base);
  }
  return out;
}

RealField parameter_from_perturbation(PerturbationMode mode, const RealField& f,
                                      const RealField* s, const GaugeField* b) {
  const LatticeTorus& t = *f.torus;
  RealField out = f;
  if (mode == PerturbationMode::ScalarCurvature) {
    if (!s) fail(ErrorKind::MissingField, "scalar curvature field s");
    for (long i = 0; i < t.nsites; ++i) out.v[i] -= 0.5 * s->v[i];
    return out;
  }
  if (!b) fail(ErrorKind::MissingField, "frame connection b");
  CurvatureDecomp c = curvature(*b);
  if (t.complex_dim == 2) {
    double defect = 0.0;
    for (cplx z : c.f02.v) defect += std::norm(z);
    defect = std::sqrt(defect * t.site_weight);
    if (defect > 1e-8)
      fail(ErrorKind::NonIntegrableFrame, "frame connection has a (0,2) curvature component");
  }
  // t = f + (i/2) ΛF_b ; ΛF_b is imaginary, so the shift is real
  for (long i = 0; i < t.nsites; ++i) out.v[i] += 0.5 * (cplx(0, 1) * c.lambda_f.v[i]).real();
  return out;
}

double sigma_from(double tau, double tau_prime) {
  if (!(tau > tau_prime)) fail(ErrorKind::NonPositiveSigma, "sigma needs tau > tau'");
  return 2.0 * kTwoPi / (tau - tau_prime);
}

} // namespace vtx
