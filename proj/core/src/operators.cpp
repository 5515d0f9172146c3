#include "vtx/operators.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "vtx/fft.hpp"

namespace vtx {

namespace {

using Mat = Eigen::MatrixXcd;
using EMap = Eigen::Map<Mat>;
using ECMap = Eigen::Map<const Mat>;

double wrap_pi(double x) {
  x = std::fmod(x, kTwoPi);
  if (x <= -kTwoPi / 2) x += kTwoPi;
  if (x > kTwoPi / 2) x -= kTwoPi;
  return x;
}

Mat link_matrix(const GaugeField& g, int d, long s) {
  const int r = g.spec.rank;
  Mat m;
  if (g.has_triv()) {
    m = ECMap(g.triv_block(d, s), r, r);
  } else {
    m = Mat::Identity(r, r);
  }
  return std::polar(1.0, g.angle(d, s)) * m;
}

// Schur factorisation of a unitary matrix: Q and the diagonal eigenphases.
void unitary_eigen(const Mat& w, Mat& q, std::vector<double>& phases) {
  const int n = static_cast<int>(w.rows());
  if (n == 1) {
    q = Mat::Identity(1, 1);
    phases = {std::arg(w(0, 0))};
    return;
  }
  Eigen::ComplexSchur<Mat> schur(w);
  q = schur.matrixU();
  phases.resize(n);
  for (int i = 0; i < n; ++i) phases[i] = std::arg(schur.matrixT()(i, i));
}

Mat principal_log_unitary(const Mat& p, double guard, const char* what) {
  Mat q;
  std::vector<double> ph;
  unitary_eigen(p, q, ph);
  const int n = static_cast<int>(p.rows());
  Mat d = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (std::abs(ph[i]) > kTwoPi / 2 - guard)
      fail(ErrorKind::NearBranchCut, std::string(what) + " phase within guard of the branch cut");
    d(i, i) = cplx(0.0, ph[i]);
  }
  return q * d * q.adjoint();
}

} // namespace

int plane_index(int mu, int nu, int ndirs) {
  int idx = 0;
  for (int a = 0; a < ndirs; ++a)
    for (int b = a + 1; b < ndirs; ++b) {
      if (a == mu && b == nu) return idx;
      ++idx;
    }
  fail(ErrorKind::Mismatch, "bad plane");
}

CurvatureDecomp curvature(const GaugeField& g) {
  const LatticeTorus& t = *g.torus;
  const int r = g.spec.rank;
  const int nd = t.ndirs;
  CurvatureDecomp out;
  out.torus = &t;
  out.rank = r;
  out.lambda_f = MatField(t, r);
  const int nplanes = nd * (nd - 1) / 2;
  out.plane_f.assign(nplanes, MatField(t, r));

  for (int mu = 0; mu < nd; ++mu) {
    for (int nu = mu + 1; nu < nd; ++nu) {
      const int pi_ = plane_index(mu, nu, nd);
      MatField& f = out.plane_f[pi_];
      const double inv_area = 1.0 / (t.h[mu] * t.h[nu]);
      for (long s = 0; s < t.nsites; ++s) {
        const long smu = t.neighbor(s, mu, 1);
        const long snu = t.neighbor(s, nu, 1);
        if (r == 1 && !g.has_triv()) {
          double phase = g.angle(mu, s) + g.angle(nu, smu) - g.angle(mu, snu) - g.angle(nu, s);
          phase = wrap_pi(phase);
          if (std::abs(phase) > kTwoPi / 2 - 0.1)
            fail(ErrorKind::NearBranchCut, "plaquette phase within 0.1 of ±π");
          f.block(s)[0] = cplx(0.0, phase) * inv_area;
        } else {
          Mat p = link_matrix(g, mu, s) * link_matrix(g, nu, smu) *
                  link_matrix(g, mu, snu).adjoint() * link_matrix(g, nu, s).adjoint();
          Mat lg = principal_log_unitary(p, 0.1, "plaquette");
          EMap(f.block(s), r, r) = lg * inv_area;
        }
      }
    }
  }

  // ΛF = Σ_j F_{x_j y_j} / a_j over the ω-planes
  for (int j = 0; j < t.complex_dim; ++j) {
    const MatField& f = out.plane_f[plane_index(2 * j, 2 * j + 1, nd)];
    const double inv_a = 1.0 / t.metric_a[j];
    for (size_t i = 0; i < out.lambda_f.v.size(); ++i) out.lambda_f.v[i] += f.v[i] * inv_a;
  }

  if (t.complex_dim == 2) {
    out.f20 = MatField(t, r);
    out.f02 = MatField(t, r);
    const MatField& f02p = out.plane_f[plane_index(0, 2, nd)];
    const MatField& f13p = out.plane_f[plane_index(1, 3, nd)];
    const MatField& f03p = out.plane_f[plane_index(0, 3, nd)];
    const MatField& f12p = out.plane_f[plane_index(1, 2, nd)];
    const double frame = 2.0 / std::sqrt(t.metric_a[0] * t.metric_a[1]);
    for (size_t i = 0; i < out.f02.v.size(); ++i) {
      const cplx a = f02p.v[i], b = f13p.v[i], c = f03p.v[i], d = f12p.v[i];
      out.f02.v[i] = 0.25 * (a - b + cplx(0, 1) * (c + d)) * frame;
      out.f20.v[i] = 0.25 * (a - b - cplx(0, 1) * (c + d)) * frame;
    }
  }
  return out;
}

CovariantDeriv::CovariantDeriv(const GaugeField& g, bool adjoint_rep) {
  const LatticeTorus& t = *g.torus;
  torus_ = &t;
  const int r = g.spec.rank;
  dim_ = adjoint_rep ? r * r : r;

  if (dim_ == 1 && !g.has_triv()) {
    // scalar fast path: cumulative phases per line, no matrix machinery
    for (int d = 0; d < t.ndirs; ++d) {
      const int m = t.grid[d];
      const long stride = t.stride[d];
      const long block = static_cast<long>(m) * stride;
      const long nlines = t.nsites / m;
      gauge_[d].assign(static_cast<size_t>(t.nsites), cplx{});
      hol_vec_[d].assign(static_cast<size_t>(nlines), cplx(1.0, 0.0));
      hol_phase_[d].assign(static_cast<size_t>(nlines), 0.0);
      for (long outer = 0; outer < t.nsites / block; ++outer) {
        for (long inner = 0; inner < stride; ++inner) {
          const long base = outer * block + inner;
          const long line = outer * stride + inner;
          double acc = 0.0;
          for (int j = 0; j < m; ++j)
            acc += adjoint_rep ? 0.0 : g.angle(d, base + static_cast<long>(j) * stride);
          const double theta = wrap_pi(acc);
          hol_phase_[d][static_cast<size_t>(line)] = theta;
          const double wph = theta / m;
          double gph = 0.0; // phase of G_j ; G_{j+1} = conj(T_j) G_j w
          for (int j = 0; j < m; ++j) {
            const long s = base + static_cast<long>(j) * stride;
            gauge_[d][static_cast<size_t>(s)] = std::polar(1.0, gph);
            gph += wph - (adjoint_rep ? 0.0 : g.angle(d, s));
          }
        }
      }
    }
    return;
  }

  for (int d = 0; d < t.ndirs; ++d) {
    const int m = t.grid[d];
    const long stride = t.stride[d];
    const long block = static_cast<long>(m) * stride;
    const long nlines = t.nsites / m;
    gauge_[d].assign(static_cast<size_t>(t.nsites) * dim_ * dim_, cplx{});
    hol_vec_[d].assign(static_cast<size_t>(nlines) * dim_ * dim_, cplx{});
    hol_phase_[d].assign(static_cast<size_t>(nlines) * dim_, 0.0);

    for (long outer = 0; outer < t.nsites / block; ++outer) {
      for (long inner = 0; inner < stride; ++inner) {
        const long base = outer * block + inner;
        const long line = outer * stride + inner;
        // line transports
        std::vector<Mat> tj(static_cast<size_t>(m));
        for (int j = 0; j < m; ++j) {
          const long s = base + static_cast<long>(j) * stride;
          Mat lk = link_matrix(g, d, s);
          if (adjoint_rep) {
            Mat ad(dim_, dim_);
            // vec(T M T†) = (conj(T) ⊗ T) vec(M), column-major
            for (int a = 0; a < r; ++a)
              for (int b = 0; b < r; ++b)
                for (int c = 0; c < r; ++c)
                  for (int e = 0; e < r; ++e)
                    ad(c + e * r, a + b * r) = lk(c, a) * std::conj(lk(e, b));
            tj[j] = ad;
          } else {
            tj[j] = lk;
          }
        }
        Mat hol = Mat::Identity(dim_, dim_);
        for (int j = 0; j < m; ++j) hol = hol * tj[j];
        Mat q;
        std::vector<double> ph;
        unitary_eigen(hol, q, ph);
        for (int i = 0; i < dim_; ++i) hol_phase_[d][line * dim_ + i] = ph[i];
        EMap(hol_vec_[d].data() + static_cast<size_t>(line) * dim_ * dim_, dim_, dim_) = q;
        // M-th root of the holonomy
        Mat w = Mat::Zero(dim_, dim_);
        for (int i = 0; i < dim_; ++i) w(i, i) = std::polar(1.0, ph[i] / m);
        w = q * w * q.adjoint();
        // line gauge: G_{j+1} = T_j† G_j w, G_0 = I
        Mat gj = Mat::Identity(dim_, dim_);
        for (int j = 0; j < m; ++j) {
          const long s = base + static_cast<long>(j) * stride;
          EMap(gauge_[d].data() + static_cast<size_t>(s) * dim_ * dim_, dim_, dim_) = gj;
          gj = tj[j].adjoint() * gj * w;
        }
      }
    }
  }
}

void CovariantDeriv::apply(int axis, const cplx* in, cplx* out) const {
  apply_general(axis, in, out);
}

void CovariantDeriv::apply_general(int d, const cplx* in, cplx* out) const {
  const LatticeTorus& t = *torus_;
  const int dim = dim_;
  const int m = t.grid[d];
  const long stride = t.stride[d];
  const long block = static_cast<long>(m) * stride;
  const double inv_h = 1.0 / t.h[d];

  if (dim == 1) {
    std::vector<cplx> psi(static_cast<size_t>(t.nsites));
    for (long s = 0; s < t.nsites; ++s) psi[static_cast<size_t>(s)] = std::conj(gauge_[d][static_cast<size_t>(s)]) * in[s];
    fft::axis(t, d, psi.data(), -1);
    for (long outer = 0; outer < t.nsites / block; ++outer) {
      for (long inner = 0; inner < stride; ++inner) {
        const long base = outer * block + inner;
        const long line = outer * stride + inner;
        const double th = hol_phase_[d][static_cast<size_t>(line)] / m;
        for (int k = 0; k < m; ++k) {
          const long s = base + static_cast<long>(k) * stride;
          psi[static_cast<size_t>(s)] *= cplx(0.0, wrap_pi(th + t.kappa[d][k]) * inv_h);
        }
      }
    }
    fft::axis(t, d, psi.data(), +1);
    const double inv_m = 1.0 / m;
    for (long s = 0; s < t.nsites; ++s)
      out[s] = gauge_[d][static_cast<size_t>(s)] * psi[static_cast<size_t>(s)] * inv_m;
    return;
  }

  // ψ = G† φ, site-wise
  std::vector<cplx> psi(static_cast<size_t>(t.nsites) * dim);
  for (long s = 0; s < t.nsites; ++s) {
    ECMap gj(gauge_[d].data() + static_cast<size_t>(s) * dim * dim, dim, dim);
    Eigen::Map<const Eigen::VectorXcd> x(in + static_cast<size_t>(s) * dim, dim);
    Eigen::Map<Eigen::VectorXcd> y(psi.data() + static_cast<size_t>(s) * dim, dim);
    y = gj.adjoint() * x;
  }

  // per-component line FFTs
  std::vector<std::vector<cplx>> planes(dim, std::vector<cplx>(static_cast<size_t>(t.nsites)));
  for (int c = 0; c < dim; ++c) {
    for (long s = 0; s < t.nsites; ++s) planes[c][s] = psi[static_cast<size_t>(s) * dim + c];
    fft::axis(t, d, planes[c].data(), -1);
  }

  // symbol: Q diag(i wrap(Θ_i/m + κ_k)) Q† per (line, k)
  Eigen::VectorXcd u(dim), w(dim);
  for (long outer = 0; outer < t.nsites / block; ++outer) {
    for (long inner = 0; inner < stride; ++inner) {
      const long base = outer * block + inner;
      const long line = outer * stride + inner;
      ECMap q(hol_vec_[d].data() + static_cast<size_t>(line) * dim * dim, dim, dim);
      const double* ph = hol_phase_[d].data() + static_cast<size_t>(line) * dim;
      for (int k = 0; k < m; ++k) {
        const long s = base + static_cast<long>(k) * stride;
        for (int c = 0; c < dim; ++c) u[c] = planes[c][s];
        w = q.adjoint() * u;
        for (int i = 0; i < dim; ++i)
          w[i] *= cplx(0.0, wrap_pi(ph[i] / m + t.kappa[d][k]) * inv_h);
        u = q * w;
        for (int c = 0; c < dim; ++c) planes[c][s] = u[c];
      }
    }
  }

  const double inv_m = 1.0 / m;
  for (int c = 0; c < dim; ++c) {
    fft::axis(t, d, planes[c].data(), +1);
    for (long s = 0; s < t.nsites; ++s)
      psi[static_cast<size_t>(s) * dim + c] = planes[c][s] * inv_m;
  }

  // φ' = G ψ'
  for (long s = 0; s < t.nsites; ++s) {
    ECMap gj(gauge_[d].data() + static_cast<size_t>(s) * dim * dim, dim, dim);
    Eigen::Map<const Eigen::VectorXcd> x(psi.data() + static_cast<size_t>(s) * dim, dim);
    Eigen::Map<Eigen::VectorXcd> y(out + static_cast<size_t>(s) * dim, dim);
    y = gj * x;
  }
}

DbarData assemble_dbar(const GaugeField& g) {
  DbarData d;
  d.torus = g.torus;
  d.spec = g.spec;
  d.gauge = g;
  d.fund = std::make_shared<CovariantDeriv>(g, false);
  if (g.spec.rank > 1) d.adj = std::make_shared<CovariantDeriv>(g, true);
  d.base = curvature(g);
  return d;
}

namespace {

// axis-pair combination (D_x ± i D_y)/√(2a_j) applied to dim-blocked data
void complex_axis_deriv(const CovariantDeriv& cd, const LatticeTorus& t, int j, int sign_i,
                        const cplx* in, cplx* out) {
  const long n = t.nsites * cd.dim();
  std::vector<cplx> dy(static_cast<size_t>(n));
  cd.apply(2 * j, in, out);
  cd.apply(2 * j + 1, in, dy.data());
  const double norm = 1.0 / std::sqrt(2.0 * t.metric_a[j]);
  const cplx iu(0.0, static_cast<double>(sign_i));
  for (long i = 0; i < n; ++i) out[i] = (out[i] + iu * dy[i]) * norm;
}

void check_section(const DbarData& D, const Section& s) {
  if (s.torus != D.torus || s.rank != D.spec.rank)
    fail(ErrorKind::Mismatch, "section does not match gauge field");
}

} // namespace

void covariant_complex_deriv(const CovariantDeriv& cd, int complex_axis, int sign_i,
                             const cplx* in, cplx* out) {
  complex_axis_deriv(cd, cd.torus(), complex_axis, sign_i, in, out);
}

FormComponents dbar_cov(const DbarData& D, const Section& phi) {
  check_section(D, phi);
  const LatticeTorus& t = *D.torus;
  FormComponents out;
  out.torus = &t;
  out.rank = phi.rank;
  out.comp.assign(t.complex_dim, std::vector<cplx>(phi.v.size()));
  for (int j = 0; j < t.complex_dim; ++j)
    complex_axis_deriv(*D.fund, t, j, +1, phi.v.data(), out.comp[j].data());
  return out;
}

FormComponents d10_cov(const DbarData& D, const Section& phi) {
  check_section(D, phi);
  const LatticeTorus& t = *D.torus;
  FormComponents out;
  out.torus = &t;
  out.rank = phi.rank;
  out.comp.assign(t.complex_dim, std::vector<cplx>(phi.v.size()));
  for (int j = 0; j < t.complex_dim; ++j)
    complex_axis_deriv(*D.fund, t, j, -1, phi.v.data(), out.comp[j].data());
  return out;
}

Section dbar_adj(const DbarData& D, const FormComponents& w) {
  const LatticeTorus& t = *D.torus;
  Section out(t, D.spec.rank, 0);
  std::vector<cplx> tmp(w.comp[0].size());
  for (int j = 0; j < t.complex_dim; ++j) {
    complex_axis_deriv(*D.fund, t, j, -1, w.comp[j].data(), tmp.data());
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tmp[i];
  }
  return out;
}

FormComponents dbar_adj02(const DbarData& D, const Section& beta) {
  const LatticeTorus& t = *D.torus;
  if (t.complex_dim != 2) fail(ErrorKind::Mismatch, "(0,2) data needs complex_dim 2");
  check_section(D, beta);
  FormComponents out;
  out.torus = &t;
  out.rank = beta.rank;
  out.comp.assign(2, std::vector<cplx>(beta.v.size()));
  // (∂̄*b)_1 = d_2 b ; (∂̄*b)_2 = -d_1 b   (unit frames)
  complex_axis_deriv(*D.fund, t, 1, -1, beta.v.data(), out.comp[0].data());
  std::vector<cplx> tmp(beta.v.size());
  complex_axis_deriv(*D.fund, t, 0, -1, beta.v.data(), tmp.data());
  for (size_t i = 0; i < tmp.size(); ++i) out.comp[1][i] = -tmp[i];
  return out;
}

FormComponents dirac_op(const DbarData& D, const Section& phi, const Section& beta) {
  FormComponents a = dbar_cov(D, phi);
  FormComponents b = dbar_adj02(D, beta);
  for (int j = 0; j < D.torus->complex_dim; ++j)
    for (size_t i = 0; i < a.comp[j].size(); ++i) a.comp[j][i] += b.comp[j][i];
  return a;
}

Section dbar_on01(const DbarData& D, const FormComponents& w) {
  const LatticeTorus& t = *D.torus;
  if (t.complex_dim != 2) fail(ErrorKind::Mismatch, "(0,2) output needs complex_dim 2");
  Section out(t, w.rank, 2);
  std::vector<cplx> tmp(w.comp[0].size());
  complex_axis_deriv(*D.fund, t, 0, +1, w.comp[1].data(), out.v.data());
  complex_axis_deriv(*D.fund, t, 1, +1, w.comp[0].data(), tmp.data());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tmp[i];
  return out;
}

double form_norm_sq(const LatticeTorus& t, const FormComponents& w) {
  double s = 0.0;
  for (const auto& c : w.comp)
    for (cplx x : c) s += std::norm(x);
  return s * t.site_weight;
}

double section_norm_sq(const Section& s) {
  double acc = 0.0;
  for (cplx x : s.v) acc += std::norm(x);
  return acc * s.torus->site_weight;
}

double d_cov_energy(const DbarData& D, const Section& phi) {
  return form_norm_sq(*D.torus, dbar_cov(D, phi)) + form_norm_sq(*D.torus, d10_cov(D, phi));
}

namespace {

void check_positive(const MetricField& H) {
  if (H.rank == 1) return;
  const int r = H.rank;
  for (long s = 0; s < H.torus->nsites; ++s) {
    ECMap h(H.mat.block(s), r, r);
    Eigen::LLT<Mat> llt(h);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::NonPositiveMetric, "metric not positive definite");
  }
}

} // namespace

CurvatureDecomp chern_metric_curvature(const DbarData& D, const MetricField& H) {
  const LatticeTorus& t = *D.torus;
  if (H.torus != &t || H.rank != D.spec.rank) fail(ErrorKind::Mismatch, "metric/bundle mismatch");
  check_positive(H);
  CurvatureDecomp out;
  out.torus = &t;
  out.rank = H.rank;
  out.lambda_f = D.base.lambda_f;
  out.f20 = D.base.f20;
  out.f02 = D.base.f02;

  if (H.rank == 1) {
    RealField two_u(t);
    for (long s = 0; s < t.nsites; ++s) two_u.v[s] = 2.0 * H.u.v[s];
    RealField du = laplace(t, two_u);
    for (long s = 0; s < t.nsites; ++s) out.lambda_f.v[s] += cplx(0.0, -du.v[s]);
    return out;
  }

  // iΛF_triv = -Σ_j d̄_j ( H⁻¹ d_j H ), endomorphism transport
  const int r = H.rank;
  const int dim = r * r;
  std::vector<cplx> dH(static_cast<size_t>(t.nsites) * dim);
  std::vector<cplx> w(static_cast<size_t>(t.nsites) * dim);
  std::vector<cplx> acc(static_cast<size_t>(t.nsites) * dim, cplx{});
  for (int j = 0; j < t.complex_dim; ++j) {
    complex_axis_deriv(*D.adj, t, j, -1, H.mat.v.data(), dH.data());
    for (long s = 0; s < t.nsites; ++s) {
      ECMap h(H.mat.block(s), r, r);
      ECMap d(dH.data() + static_cast<size_t>(s) * dim, r, r);
      EMap o(w.data() + static_cast<size_t>(s) * dim, r, r);
      o = h.inverse() * d;
    }
    complex_axis_deriv(*D.adj, t, j, +1, w.data(), dH.data());
    for (size_t i = 0; i < acc.size(); ++i) acc[i] -= dH[i];
  }
  // acc holds iΛF_triv ; ΛF += -i · acc
  for (size_t i = 0; i < acc.size(); ++i) out.lambda_f.v[i] += cplx(0.0, -1.0) * acc[i];
  return out;
}

RealField i_lambda_f_scalar(const CurvatureDecomp& c) {
  if (c.rank != 1) fail(ErrorKind::Mismatch, "scalar view needs rank 1");
  RealField out(*c.torus);
  for (long s = 0; s < c.torus->nsites; ++s) out.v[s] = -c.lambda_f.v[s].imag();
  return out;
}

RealField laplace(const LatticeTorus& t, const RealField& u) {
  if (u.torus != &t) fail(ErrorKind::Mismatch, "field/torus mismatch");
  std::vector<cplx> buf(u.v.begin(), u.v.end());
  fft::nd(t, buf.data(), -1);
  for (long s = 0; s < t.nsites; ++s) {
    auto x = t.coords(s);
    double sym = 0.0;
    for (int j = 0; j < t.complex_dim; ++j) {
      const double lx = t.lam[2 * j][x[2 * j]];
      const double ly = t.lam[2 * j + 1][x[2 * j + 1]];
      sym += (lx * lx + ly * ly) / (2.0 * t.metric_a[j]);
    }
    buf[s] *= sym;
  }
  fft::nd(t, buf.data(), +1);
  RealField out(t);
  const double inv_n = 1.0 / static_cast<double>(t.nsites);
  for (long s = 0; s < t.nsites; ++s) out.v[s] = buf[s].real() * inv_n;
  return out;
}

std::vector<double> laplace_symbol_table(const LatticeTorus& t) {
  std::vector<double> tab(static_cast<size_t>(t.nsites));
  for (long s = 0; s < t.nsites; ++s) {
    auto x = t.coords(s);
    double sym = 0.0;
    for (int j = 0; j < t.complex_dim; ++j) {
      const double lx = t.lam[2 * j][x[2 * j]];
      const double ly = t.lam[2 * j + 1][x[2 * j + 1]];
      sym += (lx * lx + ly * ly) / (2.0 * t.metric_a[j]);
    }
    tab[s] = sym;
  }
  return tab;
}

RealField poisson_solve(const LatticeTorus& t, const RealField& rhs) {
  if (rhs.torus != &t) fail(ErrorKind::Mismatch, "field/torus mismatch");
  if (std::abs(integrate(rhs)) > 1e-10)
    fail(ErrorKind::NonZeroMean, "poisson right-hand side must have zero mean");
  std::vector<cplx> buf(rhs.v.begin(), rhs.v.end());
  fft::nd(t, buf.data(), -1);
  auto tab = laplace_symbol_table(t);
  buf[0] = 0.0;
  for (long s = 1; s < t.nsites; ++s) buf[s] /= tab[s];
  fft::nd(t, buf.data(), +1);
  RealField out(t);
  const double inv_n = 1.0 / static_cast<double>(t.nsites);
  for (long s = 0; s < t.nsites; ++s) out.v[s] = buf[s].real() * inv_n;
  return out;
}

} // namespace vtx
