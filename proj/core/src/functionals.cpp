#include "vtx/functionals.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>

#include "vtx/swkahler.hpp"

namespace vtx {

double ResidualReport::total() const {
  return std::sqrt(r_holo * r_holo + r_02 * r_02 + r_moment * r_moment + r_second * r_second);
}

std::string ResidualReport::to_json() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"r_holo\":%.17g,\"r_02\":%.17g,\"r_moment\":%.17g,\"r_second\":%.17g,"
                "\"total\":%.17g}",
                r_holo, r_02, r_moment, r_second, total());
  return buf;
}

MatField phi_phi_star(const Section& phi, const MetricField& H) {
  const LatticeTorus& t = *phi.torus;
  const int r = phi.rank;
  MatField out(t, r);
  for (long s = 0; s < t.nsites; ++s) {
    if (r == 1) {
      out.block(s)[0] = std::norm(phi.v[s]) * std::exp(2.0 * H.u.v[s]);
    } else {
      Eigen::Map<const Eigen::VectorXcd> p(phi.site(s), r);
      Eigen::Map<const Eigen::MatrixXcd> h(H.mat.block(s), r, r);
      Eigen::Map<Eigen::MatrixXcd> o(out.block(s), r, r);
      o = p * (p.adjoint() * h);
    }
  }
  return out;
}

RealField phi_norm_sq_pointwise(const Section& phi, const MetricField& H) {
  const LatticeTorus& t = *phi.torus;
  RealField out(t);
  const int r = phi.rank;
  for (long s = 0; s < t.nsites; ++s) {
    if (r == 1) {
      out.v[s] = std::norm(phi.v[s]) * std::exp(2.0 * H.u.v[s]);
    } else {
      Eigen::Map<const Eigen::VectorXcd> p(phi.site(s), r);
      Eigen::Map<const Eigen::MatrixXcd> h(H.mat.block(s), r, r);
      out.v[s] = (p.adjoint() * (h * p))(0).real();
    }
  }
  return out;
}

namespace {

double f_norm_sq(const LatticeTorus& t, const MatField& m) {
  double s = 0.0;
  for (cplx z : m.v) s += std::norm(z);
  return s * t.site_weight;
}

// ‖F‖² over all planes with orthonormal-frame weights
double curvature_norm_sq(const LatticeTorus& t, const CurvatureDecomp& c, bool dealias) {
  double acc = 0.0;
  int p = 0;
  LatticeTorus tp;
  if (dealias) tp = padded_torus(t);
  for (int mu = 0; mu < t.ndirs; ++mu)
    for (int nu = mu + 1; nu < t.ndirs; ++nu, ++p) {
      const double w = 1.0 / (t.axis_a(mu) * t.axis_a(nu));
      if (dealias) {
        MatField pf = pad_field(c.plane_f[static_cast<size_t>(p)], tp);
        acc += w * f_norm_sq(tp, pf);
      } else {
        acc += w * f_norm_sq(t, c.plane_f[static_cast<size_t>(p)]);
      }
    }
  return acc;
}

// residual matrix iΛF + φφ^{*} − t·I built from a curvature decomposition
MatField moment_residual(const CurvatureDecomp& c, const MatField& pps, const RealField* t_field,
                         double tau) {
  const LatticeTorus& t = *c.torus;
  const int r = c.rank;
  MatField out(t, r);
  for (long s = 0; s < t.nsites; ++s) {
    const double tv = t_field ? t_field->v[s] : tau;
    Eigen::Map<const Eigen::MatrixXcd> lf(c.lambda_f.block(s), r, r);
    Eigen::Map<const Eigen::MatrixXcd> pp(pps.block(s), r, r);
    Eigen::Map<Eigen::MatrixXcd> o(out.block(s), r, r);
    o = cplx(0, 1) * lf + pp - tv * Eigen::MatrixXcd::Identity(r, r);
  }
  return out;
}

const Section& need_phi(const SystemState& st) {
  if (!st.phi) fail(ErrorKind::MissingField, "phi");
  return *st.phi;
}
const DbarData& need_dbar(const SystemState& st) {
  if (!st.dbar) fail(ErrorKind::MissingField, "dbar (E-bundle operator data)");
  return *st.dbar;
}

} // namespace

double ymh(const DbarData& D, const Section& phi, double tau) {
  const LatticeTorus& t = *D.torus;
  if (phi.torus != &t || phi.rank != D.spec.rank) fail(ErrorKind::Mismatch, "state shape mismatch");
  const double f2 = curvature_norm_sq(t, D.base, false);
  const double kinetic = 2.0 * d_cov_energy(D, phi);
  MetricField unit = MetricField::unit(t, phi.rank);
  MatField pps = phi_phi_star(phi, unit);
  double higgs = 0.0;
  const int r = phi.rank;
  for (long s = 0; s < t.nsites; ++s) {
    Eigen::Map<const Eigen::MatrixXcd> pp(pps.block(s), r, r);
    higgs += (pp - tau * Eigen::MatrixXcd::Identity(r, r)).squaredNorm();
  }
  higgs *= t.site_weight;
  return f2 + kinetic + higgs;
}

double ymh(const GaugeField& g, const Section& phi, double tau) {
  DbarData D = assemble_dbar(g);
  return ymh(D, phi, tau);
}

double energy_identity_gap(const GaugeField& g, const Section& phi, double tau, bool dealias) {
  DbarData D = assemble_dbar(g);
  const LatticeTorus& t = *D.torus;
  const int r = phi.rank;

  const double e_dbar = form_norm_sq(t, dbar_cov(D, phi));
  const double e_d10 = form_norm_sq(t, d10_cov(D, phi));
  const double f2 = curvature_norm_sq(t, D.base, dealias);
  double f02sq = 0.0;
  if (t.complex_dim == 2) {
    if (dealias) {
      const LatticeTorus tp = padded_torus(t);
      f02sq = f_norm_sq(tp, pad_field(D.base.f02, tp));
    } else {
      f02sq = f_norm_sq(t, D.base.f02);
    }
  }

  // quartic terms evaluated with 3/2-rule padding when requested
  double higgs = 0.0, moment = 0.0;
  auto quartics = [&](const LatticeTorus& tt, const Section& ph, const MatField& lf) {
    for (long s = 0; s < tt.nsites; ++s) {
      Eigen::Map<const Eigen::VectorXcd> p(ph.site(s), r);
      Eigen::MatrixXcd pp = p * p.adjoint();
      Eigen::Map<const Eigen::MatrixXcd> f(lf.block(s), r, r);
      higgs += (pp - tau * Eigen::MatrixXcd::Identity(r, r)).squaredNorm();
      moment += (cplx(0, 1) * f + pp - tau * Eigen::MatrixXcd::Identity(r, r)).squaredNorm();
    }
    higgs *= tt.site_weight;
    moment *= tt.site_weight;
  };
  if (dealias) {
    const LatticeTorus tp = padded_torus(t);
    Section php(tp, r, 0);
    for (int c = 0; c < r; ++c) {
      CplxField plane(t);
      for (long s = 0; s < t.nsites; ++s) plane.v[s] = phi.site(s)[c];
      CplxField pl = pad_field(plane, tp);
      for (long s = 0; s < tp.nsites; ++s) php.site(s)[c] = pl.v[s];
    }
    MatField lfp = pad_field(D.base.lambda_f, tp);
    quartics(tp, php, lfp);
  } else {
    quartics(t, phi, D.base.lambda_f);
  }

  const double ymh_val = f2 + 2.0 * (e_dbar + e_d10) + higgs;
  const double reduced = 4.0 * f02sq + 4.0 * e_dbar + moment;
  return ymh_val - reduced;
}

namespace {

ResidualReport vortex_residuals(const SystemState& st, const ParamSet& params, bool use_t_field,
                                bool abelian_only) {
  const DbarData& D = need_dbar(st);
  const Section& phi = need_phi(st);
  if (abelian_only && D.spec.rank != 1) fail(ErrorKind::Mismatch, "abelian system requires rank 1");
  if (use_t_field && !params.t) fail(ErrorKind::MissingField, "params.t");
  const LatticeTorus& t = *D.torus;

  ResidualReport rep;
  rep.r_holo = std::sqrt(form_norm_sq(t, dbar_cov(D, phi)));
  MetricField unit = MetricField::unit(t, D.spec.rank);
  const MetricField& H = st.H ? *st.H : unit;
  CurvatureDecomp c = st.H ? chern_metric_curvature(D, H) : D.base;
  if (t.complex_dim == 2) rep.r_02 = std::sqrt(f_norm_sq(t, c.f02));
  MatField pps = phi_phi_star(phi, H);
  MatField R = moment_residual(c, pps, use_t_field ? &*params.t : nullptr, params.tau);
  rep.r_moment = std::sqrt(f_norm_sq(t, R));
  return rep;
}

ResidualReport coupled_residuals(const SystemState& st, const ParamSet& params, bool use_t_field) {
  const DbarData& E = need_dbar(st);
  if (!st.dbar2) fail(ErrorKind::MissingField, "dbar2 (L-bundle operator data)");
  const DbarData& L = *st.dbar2;
  const Section& phi = need_phi(st);
  if (L.spec.rank != 1) fail(ErrorKind::Unsupported, "second bundle must be a line bundle");
  if (use_t_field && (!params.t || !params.t_prime))
    fail(ErrorKind::MissingField, "params.t and params.t_prime");
  if ((st.H == nullptr) != (st.K == nullptr))
    fail(ErrorKind::MissingField, "metric picture needs both H and K");
  const LatticeTorus& t = *E.torus;

  ResidualReport rep;
  if (st.dbar_hom) {
    rep.r_holo = std::sqrt(form_norm_sq(t, dbar_cov(*st.dbar_hom, phi)));
  } else {
    DbarData hom = assemble_dbar(hom_gauge(E.gauge, L.gauge));
    rep.r_holo = std::sqrt(form_norm_sq(t, dbar_cov(hom, phi)));
  }

  MetricField unit_e = MetricField::unit(t, E.spec.rank);
  MetricField unit_l = MetricField::unit(t, 1);
  const MetricField& H = st.H ? *st.H : unit_e;
  const MetricField& K = st.K ? *st.K : unit_l;
  CurvatureDecomp ce = st.H ? chern_metric_curvature(E, H) : E.base;
  CurvatureDecomp cl = st.K ? chern_metric_curvature(L, K) : L.base;
  if (t.complex_dim == 2) rep.r_02 = std::sqrt(f_norm_sq(t, ce.f02) + f_norm_sq(t, cl.f02));

  // φφ^{*H,K} = e^{-2w} φφ†H ; |φ|²_{H,K} = e^{-2w} φ†Hφ
  const int r = E.spec.rank;
  MatField pps = phi_phi_star(phi, H);
  RealField pns = phi_norm_sq_pointwise(phi, H);
  for (long s = 0; s < t.nsites; ++s) {
    const double ew = std::exp(-2.0 * K.u.v[s]);
    for (int e = 0; e < r * r; ++e) pps.block(s)[e] *= ew;
    pns.v[s] *= ew;
  }
  MatField R1 = moment_residual(ce, pps, use_t_field ? &*params.t : nullptr, params.tau);
  rep.r_moment = std::sqrt(f_norm_sq(t, R1));
  double acc = 0.0;
  for (long s = 0; s < t.nsites; ++s) {
    const double tp = use_t_field ? params.t_prime->v[s] : params.tau_prime;
    const double ilf = -cl.lambda_f.v[s].imag();
    const double r2 = ilf - pns.v[s] - tp;
    acc += r2 * r2;
  }
  rep.r_second = std::sqrt(acc * t.site_weight);
  return rep;
}

ResidualReport framed_residuals(const SystemState& st, const ParamSet& params) {
  const DbarData& E = need_dbar(st);
  if (!st.frozen) fail(ErrorKind::MissingField, "frozen (fixed second connection)");
  const Section& phi = need_phi(st);
  const LatticeTorus& t = *E.torus;

  ResidualReport rep;
  if (st.dbar_hom) {
    rep.r_holo = std::sqrt(form_norm_sq(t, dbar_cov(*st.dbar_hom, phi)));
  } else {
    DbarData hom = assemble_dbar(hom_gauge(E.gauge, *st.frozen));
    rep.r_holo = std::sqrt(form_norm_sq(t, dbar_cov(hom, phi)));
  }
  MetricField unit_e = MetricField::unit(t, E.spec.rank);
  const MetricField& H = st.H ? *st.H : unit_e;
  CurvatureDecomp ce = st.H ? chern_metric_curvature(E, H) : E.base;
  if (t.complex_dim == 2) rep.r_02 = std::sqrt(f_norm_sq(t, ce.f02));
  MatField pps = phi_phi_star(phi, H);
  MatField R = moment_residual(ce, pps, params.t ? &*params.t : nullptr, params.tau);
  rep.r_moment = std::sqrt(f_norm_sq(t, R));
  return rep;
}

} // namespace

ResidualReport residuals(SystemKind kind, const SystemState& state, const ParamSet& params) {
  switch (kind) {
    case SystemKind::VE_ABELIAN:
      return vortex_residuals(state, params, params.t.has_value(), true);
    case SystemKind::NAVE:
      return vortex_residuals(state, params, false, false);
    case SystemKind::TMVE: {
      if (!state.H) fail(ErrorKind::MissingField, "H (metric)");
      return vortex_residuals(state, params, true, false);
    }
    case SystemKind::CVE:
      return coupled_residuals(state, params, false);
    case SystemKind::TMCVE:
      return coupled_residuals(state, params, true);
    case SystemKind::FVE:
      return framed_residuals(state, params);
    case SystemKind::SW_KAHLER_FIXED:
    case SystemKind::SW_KAHLER_COUPLED: {
      if (!state.dbar || !state.dbar2) fail(ErrorKind::MissingField, "dbar and dbar2 (A and b)");
      if (!state.phi || !state.beta) fail(ErrorKind::MissingField, "phi and beta spinor parts");
      SpinorPair psi{*state.phi, *state.beta};
      SwState sw{&state.dbar->gauge, &state.dbar2->gauge, &psi};
      return sw_residuals(kind == SystemKind::SW_KAHLER_FIXED ? SwKind::FixedB : SwKind::Coupled,
                          sw, params);
    }
  }
  fail(ErrorKind::InvalidConfig, "unknown system kind");
}

ConstraintResult constraint_check(SystemKind kind, const ParamSet& params, const Degrees& d) {
  ConstraintResult out;
  switch (kind) {
    case SystemKind::CVE:
    case SystemKind::TMCVE:
      out.violation = d.rank_e * params.t_mean() + params.t_prime_mean() - (d.deg_e + d.deg_l);
      break;
    case SystemKind::SW_KAHLER_COUPLED:
      out.violation =
          d.rank_e * params.f_mean() + params.f_prime_mean() - (d.deg_e - 0.5 * d.deg_l);
      break;
    default:
      out.violation = 0.0;
  }
  out.ok = std::abs(out.violation) <= 1e-8;
  return out;
}

ConstraintResult extension_constraint(int r1, double t1_mean, int r2, double t2_mean,
                                      double deg_e) {
  ConstraintResult out;
  out.violation = r1 * t1_mean + r2 * t2_mean - deg_e;
  out.ok = std::abs(out.violation) <= 1e-8;
  return out;
}

MatField moment_map(const DbarData& D, const Section& phi, const MetricField& H,
                    const MetricField* K) {
  CurvatureDecomp c = chern_metric_curvature(D, H);
  MatField pps = phi_phi_star(phi, K ? *K : H);
  MatField out = c.lambda_f;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= cplx(0, 1) * pps.v[i];
  return out;
}

double moment_map_level_norm(const MatField& mu, double tau) {
  const int r = mu.rank;
  double acc = 0.0;
  for (long s = 0; s < mu.torus->nsites; ++s) {
    Eigen::Map<const Eigen::MatrixXcd> m(mu.block(s), r, r);
    acc += (m + cplx(0, tau) * Eigen::MatrixXcd::Identity(r, r)).squaredNorm();
  }
  return std::sqrt(acc * mu.torus->site_weight);
}

} // namespace vtx
