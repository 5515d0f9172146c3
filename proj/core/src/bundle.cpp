#include "vtx/bundle.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <random>

#include "vtx/fft.hpp"
#include "vtx/operators.hpp"

namespace vtx {

namespace {

double wrap_pi(double x) {
  x = std::fmod(x, kTwoPi);
  if (x <= -kTwoPi / 2) x += kTwoPi;
  if (x > kTwoPi / 2) x -= kTwoPi;
  return x;
}

} // namespace

GaugeField make_background(const LatticeTorus& torus, const BundleSpec& spec) {
  if (spec.rank < 1) fail(ErrorKind::InvalidConfig, "rank must be >= 1");
  GaugeField g;
  g.torus = &torus;
  g.spec = spec;
  g.det_angle.assign(static_cast<size_t>(torus.ndirs) * torus.nsites, 0.0);
  if (spec.rank > 1) {
    g.triv.assign(static_cast<size_t>(torus.ndirs) * torus.nsites * spec.rank * spec.rank, cplx{});
    for (int d = 0; d < torus.ndirs; ++d)
      for (long s = 0; s < torus.nsites; ++s) {
        cplx* b = g.triv_block(d, s);
        for (int i = 0; i < spec.rank; ++i) b[i * spec.rank + i] = 1.0;
      }
  }

  for (int j = 0; j < torus.complex_dim; ++j) {
    const int n = spec.chern[j];
    if (n == 0) continue;
    if (n % spec.rank != 0)
      fail(ErrorKind::InvalidConfig, "det chern must be divisible by rank for this background");
    const int nl = n / spec.rank; // winding of the abelian line factor
    const int mu = 2 * j, nu = 2 * j + 1;
    const int mmu = torus.grid[mu], mnu = torus.grid[nu];
    if (std::abs(kTwoPi * nl / (mmu * mnu)) > kTwoPi / 2 - 0.2)
      fail(ErrorKind::InvalidConfig, "chern too large for this grid");
    for (long s = 0; s < torus.nsites; ++s) {
      auto x = torus.coords(s);
      g.angle(nu, s) += -kTwoPi * nl * x[mu] / (static_cast<double>(mmu) * mnu);
      if (x[mu] == mmu - 1) g.angle(mu, s) += kTwoPi * nl * x[nu] / static_cast<double>(mnu);
    }
  }
  return g;
}

std::array<int, 2> chern_number(const GaugeField& g) {
  const LatticeTorus& t = *g.torus;
  const int r = g.spec.rank;
  // det-link phases
  std::vector<double> det_phase(static_cast<size_t>(t.ndirs) * t.nsites);
  for (int d = 0; d < t.ndirs; ++d)
    for (long s = 0; s < t.nsites; ++s) {
      double ph = r * g.angle(d, s);
      if (g.has_triv()) {
        Eigen::Map<const Eigen::MatrixXcd> v(g.triv_block(d, s), r, r);
        ph += std::arg(v.determinant());
      }
      det_phase[static_cast<size_t>(d) * t.nsites + s] = ph;
    }

  std::array<int, 2> out{0, 0};
  for (int j = 0; j < t.complex_dim; ++j) {
    const int mu = 2 * j, nu = 2 * j + 1;
    const long nslices = t.nsites / (static_cast<long>(t.grid[mu]) * t.grid[nu]);
    double first = 0.0;
    std::vector<double> winding; // one per slice through the (mu,nu) plane
    std::vector<double> acc(static_cast<size_t>(nslices), 0.0);
    for (long s = 0; s < t.nsites; ++s) {
      const long smu = t.neighbor(s, mu, 1);
      const long snu = t.neighbor(s, nu, 1);
      auto ph = [&](int d, long site) { return det_phase[static_cast<size_t>(d) * t.nsites + site]; };
      double p = wrap_pi(ph(mu, s) + ph(nu, smu) - ph(mu, snu) - ph(nu, s));
      if (std::abs(p) > kTwoPi / 2 - 0.1)
        fail(ErrorKind::NearBranchCut, "plaquette phase within 0.1 of ±π");
      // slice id: collapse the (mu,nu) coordinates
      auto x = t.coords(s);
      long slice = 0;
      for (int d = 0; d < t.ndirs; ++d) {
        if (d == mu || d == nu) continue;
        slice = slice * t.grid[d] + x[d];
      }
      acc[static_cast<size_t>(slice)] += p;
    }
    for (long sl = 0; sl < nslices; ++sl) {
      const double w = -acc[static_cast<size_t>(sl)] / kTwoPi;
      if (std::abs(w - std::lround(w)) > 1e-6)
        fail(ErrorKind::NearBranchCut, "plaquette winding is not an integer");
      if (sl == 0)
        first = static_cast<double>(std::lround(w));
      else if (std::lround(w) != std::lround(first))
        fail(ErrorKind::NearBranchCut, "slice windings disagree");
    }
    out[static_cast<size_t>(j)] = static_cast<int>(std::lround(first));
    (void)winding;
  }
  return out;
}

void apply_constant_twist(GaugeField& g, int component, const std::array<double, 4>& angles) {
  const LatticeTorus& t = *g.torus;
  const int r = g.spec.rank;
  if (!g.has_triv()) {
    if (r != 1) fail(ErrorKind::Mismatch, "no trivial part to twist");
    for (int d = 0; d < t.ndirs; ++d)
      for (long s = 0; s < t.nsites; ++s) g.angle(d, s) += angles[d];
    return;
  }
  if (component < 0 || component >= r) fail(ErrorKind::Mismatch, "bad component");
  for (int d = 0; d < t.ndirs; ++d) {
    const cplx ph = std::polar(1.0, angles[d]);
    for (long s = 0; s < t.nsites; ++s) {
      cplx* b = g.triv_block(d, s);
      for (int i = 0; i < r; ++i) b[component * r + i] *= ph; // column `component`
    }
  }
}

RealField random_band_limited(const LatticeTorus& torus, std::uint64_t seed, double amplitude) {
  RealField out(torus);
  if (amplitude == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, kTwoPi);

  std::vector<cplx> buf(static_cast<size_t>(torus.nsites), cplx{});
  // fixed physical band: identity defects then vanish under grid refinement
  std::array<int, 4> kc{};
  for (int d = 0; d < torus.ndirs; ++d) kc[d] = std::max(1, std::min(torus.grid[d] / 16, 3));

  std::array<int, 4> k{};
  // iterate the mode box, keep one of each ±k pair
  std::vector<std::array<int, 4>> modes;
  std::function<void(int)> rec = [&](int d) {
    if (d == torus.ndirs) {
      bool zero = true, lead_positive = false, decided = false;
      for (int e = 0; e < torus.ndirs; ++e) {
        if (k[e] != 0) zero = false;
        if (!decided && k[e] != 0) {
          lead_positive = k[e] > 0;
          decided = true;
        }
      }
      if (!zero && lead_positive) modes.push_back(k);
      return;
    }
    for (int kk = -kc[d]; kk <= kc[d]; ++kk) {
      k[d] = kk;
      rec(d + 1);
    }
  };
  rec(0);

  for (const auto& m : modes) {
    const double c = gauss(rng);
    const double ph = unif(rng);
    const cplx coef = 0.5 * c * std::polar(1.0, ph);
    long sp = 0, sm = 0;
    for (int d = 0; d < torus.ndirs; ++d) {
      int kp = m[d] >= 0 ? m[d] : m[d] + torus.grid[d];
      int km = (-m[d]) >= 0 ? -m[d] : -m[d] + torus.grid[d];
      sp += static_cast<long>(kp) * torus.stride[d];
      sm += static_cast<long>(km) * torus.stride[d];
    }
    buf[static_cast<size_t>(sp)] += coef;
    buf[static_cast<size_t>(sm)] += std::conj(coef);
  }
  fft::nd(torus, buf.data(), +1);
  double sup = 0.0;
  for (long s = 0; s < torus.nsites; ++s) sup = std::max(sup, std::abs(buf[s].real()));
  const double scale = sup > 0 ? amplitude / sup : 0.0;
  for (long s = 0; s < torus.nsites; ++s) out.v[s] = buf[s].real() * scale;
  return out;
}

std::pair<GaugeField, Section> random_state(const LatticeTorus& torus, const BundleSpec& spec,
                                            std::uint64_t seed, double amplitude) {
  if (amplitude < 0) fail(ErrorKind::InvalidConfig, "amplitude must be >= 0");
  GaugeField g = make_background(torus, spec);
  Section phi(torus, spec.rank, 0);
  if (amplitude == 0.0) return {std::move(g), std::move(phi)};

  std::mt19937_64 root(seed);
  // amplitude scales the gauge potential; link angles carry the extra h so
  // that the perturbation has a grid-independent continuum meaning
  for (int d = 0; d < torus.ndirs; ++d) {
    RealField dth = random_band_limited(torus, root(), amplitude * torus.h[d]);
    for (long s = 0; s < torus.nsites; ++s) g.angle(d, s) += dth.v[s];
  }
  if (spec.rank > 1) {
    const int r = spec.rank;
    for (int d = 0; d < torus.ndirs; ++d) {
      // Hermitian band-limited matrix field, exponentiated per link
      const double amp_d = amplitude * torus.h[d];
      std::vector<RealField> re, im;
      for (int i = 0; i < r; ++i)
        for (int j = i; j < r; ++j) {
          re.push_back(random_band_limited(torus, root(), amp_d));
          im.push_back(i == j ? RealField(torus) : random_band_limited(torus, root(), amp_d));
        }
      for (long s = 0; s < torus.nsites; ++s) {
        Eigen::MatrixXcd a(r, r);
        int idx = 0;
        for (int i = 0; i < r; ++i)
          for (int j = i; j < r; ++j) {
            cplx z(re[static_cast<size_t>(idx)].v[s], im[static_cast<size_t>(idx)].v[s]);
            a(i, j) = z;
            a(j, i) = std::conj(z);
            ++idx;
          }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
        Eigen::MatrixXcd u = es.eigenvectors();
        Eigen::VectorXcd ph(r);
        for (int i = 0; i < r; ++i) ph[i] = std::polar(1.0, es.eigenvalues()[i]);
        Eigen::MatrixXcd rot = u * ph.asDiagonal() * u.adjoint();
        Eigen::Map<Eigen::MatrixXcd> v(g.triv_block(d, s), r, r);
        v = rot * v;
      }
    }
  }
  // band-limited random section
  for (int c = 0; c < spec.rank; ++c) {
    RealField re = random_band_limited(torus, root(), amplitude);
    RealField im = random_band_limited(torus, root(), amplitude);
    for (long s = 0; s < torus.nsites; ++s) phi.site(s)[c] = cplx(re.v[s], im.v[s]);
  }
  return {std::move(g), std::move(phi)};
}

GaugeTransform random_gauge_transform(const LatticeTorus& torus, int rank, std::uint64_t seed) {
  GaugeTransform gt;
  gt.torus = &torus;
  gt.rank = rank;
  gt.g.assign(static_cast<size_t>(torus.nsites) * rank * rank, cplx{});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-kTwoPi / 2, kTwoPi / 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (long s = 0; s < torus.nsites; ++s) {
    cplx* b = gt.g.data() + static_cast<size_t>(s) * rank * rank;
    if (rank == 1) {
      b[0] = std::polar(1.0, unif(rng));
    } else {
      Eigen::MatrixXcd a(rank, rank);
      for (int i = 0; i < rank; ++i)
        for (int j = i; j < rank; ++j) {
          cplx z = i == j ? cplx(gauss(rng), 0.0) : cplx(gauss(rng), gauss(rng));
          a(i, j) = z;
          a(j, i) = std::conj(z);
        }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
      Eigen::VectorXcd ph(rank);
      for (int i = 0; i < rank; ++i) ph[i] = std::polar(1.0, es.eigenvalues()[i]);
      Eigen::Map<Eigen::MatrixXcd>(b, rank, rank) =
          es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    }
  }
  return gt;
}

GaugeField apply_gauge(const GaugeField& field, const GaugeTransform& t) {
  if (field.torus != t.torus || field.spec.rank != t.rank)
    fail(ErrorKind::Mismatch, "gauge transform mismatch");
  const LatticeTorus& torus = *field.torus;
  GaugeField out = field;
  const int r = t.rank;
  for (int d = 0; d < torus.ndirs; ++d)
    for (long s = 0; s < torus.nsites; ++s) {
      const long sn = torus.neighbor(s, d, 1);
      if (r == 1) {
        out.angle(d, s) += std::arg(t.g[static_cast<size_t>(s)]) - std::arg(t.g[static_cast<size_t>(sn)]);
      } else {
        Eigen::Map<const Eigen::MatrixXcd> gs(t.g.data() + static_cast<size_t>(s) * r * r, r, r);
        Eigen::Map<const Eigen::MatrixXcd> gn(t.g.data() + static_cast<size_t>(sn) * r * r, r, r);
        Eigen::Map<Eigen::MatrixXcd> v(out.triv_block(d, s), r, r);
        v = gs * v * gn.adjoint();
      }
    }
  return out;
}

Section apply_gauge(const Section& phi, const GaugeTransform& t) {
  if (phi.torus != t.torus || phi.rank != t.rank) fail(ErrorKind::Mismatch, "gauge transform mismatch");
  Section out = phi;
  const int r = t.rank;
  for (long s = 0; s < phi.torus->nsites; ++s) {
    Eigen::Map<const Eigen::MatrixXcd> gs(t.g.data() + static_cast<size_t>(s) * r * r, r, r);
    Eigen::Map<Eigen::VectorXcd> v(out.site(s), r);
    v = (gs * Eigen::Map<const Eigen::VectorXcd>(phi.site(s), r)).eval();
  }
  return out;
}

namespace {

double dot_re(const LatticeTorus& t, const std::vector<cplx>& a, const std::vector<cplx>& b,
              cplx* full = nullptr) {
  cplx s{};
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(b[i]) * a[i];
  s *= t.site_weight;
  if (full) *full = s;
  return s.real();
}

} // namespace

HoloBasis project_holomorphic(const GaugeField& g, int count) {
  if (count < 1) fail(ErrorKind::InvalidConfig, "count must be >= 1");
  const LatticeTorus& t = *g.torus;
  const int r = g.spec.rank;
  const long n = t.nsites * r;
  DbarData D = assemble_dbar(g);

  auto apply_ata = [&](const std::vector<cplx>& x, double shift, std::vector<cplx>& y) {
    Section sx(t, r, 0);
    sx.v = x;
    FormComponents w = dbar_cov(D, sx);
    Section ada = dbar_adj(D, w);
    y = ada.v;
    for (long i = 0; i < n; ++i) y[static_cast<size_t>(i)] += shift * x[static_cast<size_t>(i)];
  };

  // flat-symbol preconditioner
  auto symbol = laplace_symbol_table(t);
  const double shift = 1e-4;
  auto precond = [&](std::vector<cplx>& x) {
    for (int c = 0; c < r; ++c) {
      std::vector<cplx> plane(static_cast<size_t>(t.nsites));
      for (long s = 0; s < t.nsites; ++s) plane[s] = x[static_cast<size_t>(s) * r + c];
      fft::nd(t, plane.data(), -1);
      for (long s = 0; s < t.nsites; ++s) plane[s] /= (symbol[static_cast<size_t>(s)] + shift);
      fft::nd(t, plane.data(), +1);
      const double inv = 1.0 / static_cast<double>(t.nsites);
      for (long s = 0; s < t.nsites; ++s) x[static_cast<size_t>(s) * r + c] = plane[s] * inv;
    }
  };

  auto pcg = [&](const std::vector<cplx>& b, std::vector<cplx>& x) {
    x.assign(static_cast<size_t>(n), cplx{});
    std::vector<cplx> res = b, z = b, p, ap(static_cast<size_t>(n));
    precond(z);
    p = z;
    double rz = dot_re(t, res, z);
    const double b2 = dot_re(t, b, b);
    for (int it = 0; it < 2000; ++it) {
      apply_ata(p, shift, ap);
      const double pap = dot_re(t, ap, p);
      if (pap <= 0) break;
      const double alpha = rz / pap;
      for (long i = 0; i < n; ++i) {
        x[static_cast<size_t>(i)] += alpha * p[static_cast<size_t>(i)];
        res[static_cast<size_t>(i)] -= alpha * ap[static_cast<size_t>(i)];
      }
      const double r2 = dot_re(t, res, res);
      if (r2 < 1e-26 * std::max(1.0, b2)) break;
      z = res;
      precond(z);
      const double rz_new = dot_re(t, res, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (long i = 0; i < n; ++i)
        p[static_cast<size_t>(i)] = z[static_cast<size_t>(i)] + beta * p[static_cast<size_t>(i)];
    }
  };

  const int nb = count + 2; // one buffer vector beyond the reported window
  std::vector<std::vector<cplx>> basis(static_cast<size_t>(nb));
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& col : basis) {
    col.resize(static_cast<size_t>(n));
    for (auto& z : col) z = cplx(gauss(rng), gauss(rng));
  }

  auto orthonormalize = [&](std::vector<std::vector<cplx>>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) {
      for (size_t j = 0; j < i; ++j) {
        cplx pr{};
        dot_re(t, cols[i], cols[j], &pr);
        for (long k = 0; k < n; ++k) cols[i][static_cast<size_t>(k)] -= pr * cols[j][static_cast<size_t>(k)];
      }
      const double nn = std::sqrt(dot_re(t, cols[i], cols[i]));
      if (nn < 1e-300) fail(ErrorKind::DegenerateSpectrum, "basis collapse in subspace iteration");
      for (auto& z : cols[i]) z /= nn;
    }
  };
  orthonormalize(basis);

  std::vector<double> eigs(static_cast<size_t>(nb), 0.0);
  std::vector<cplx> tmp(static_cast<size_t>(n));
  for (int round = 0; round < 5; ++round) {
    std::vector<std::vector<cplx>> next(static_cast<size_t>(nb));
    for (int i = 0; i < nb; ++i) pcg(basis[static_cast<size_t>(i)], next[static_cast<size_t>(i)]);
    orthonormalize(next);
    // Rayleigh–Ritz on ∂̄†∂̄
    Eigen::MatrixXcd m(nb, nb);
    std::vector<std::vector<cplx>> an(static_cast<size_t>(nb));
    for (int i = 0; i < nb; ++i) {
      apply_ata(next[static_cast<size_t>(i)], 0.0, tmp);
      an[static_cast<size_t>(i)] = tmp;
    }
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        cplx pr{};
        dot_re(t, an[static_cast<size_t>(j)], next[static_cast<size_t>(i)], &pr);
        m(i, j) = pr;
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es((m + m.adjoint()) / 2.0);
    std::vector<std::vector<cplx>> rot(static_cast<size_t>(nb),
                                       std::vector<cplx>(static_cast<size_t>(n), cplx{}));
    for (int i = 0; i < nb; ++i) {
      for (int j = 0; j < nb; ++j) {
        const cplx c = es.eigenvectors()(j, i);
        for (long k = 0; k < n; ++k)
          rot[static_cast<size_t>(i)][static_cast<size_t>(k)] += c * next[static_cast<size_t>(j)][static_cast<size_t>(k)];
      }
      eigs[static_cast<size_t>(i)] = std::max(0.0, es.eigenvalues()[i]);
    }
    basis = std::move(rot);
  }

  HoloBasis out;
  for (int i = 0; i < count + 1; ++i)
    out.singular_values.push_back(std::sqrt(eigs[static_cast<size_t>(i)]));
  if (out.singular_values[static_cast<size_t>(count)] - out.singular_values[static_cast<size_t>(count - 1)] <
      1e-12)
    fail(ErrorKind::DegenerateSpectrum, "ambiguous span: singular values too close at the cut");
  for (int i = 0; i < count; ++i) {
    Section s(t, r, 0);
    s.v = basis[static_cast<size_t>(i)];
    FormComponents w = dbar_cov(D, s);
    out.residuals.push_back(std::sqrt(form_norm_sq(t, w)));
    out.sections.push_back(std::move(s));
  }
  return out;
}

double degree_of(const LatticeTorus& torus, const BundleSpec& spec) {
  if (torus.complex_dim == 1) return spec.chern[0];
  const double w0 = torus.metric_a[0] * torus.lengths[0] * torus.lengths[1];
  const double w1 = torus.metric_a[1] * torus.lengths[2] * torus.lengths[3];
  return spec.chern[0] * w1 + spec.chern[1] * w0;
}

GaugeField hom_gauge(const GaugeField& e, const GaugeField& l) {
  if (e.torus != l.torus) fail(ErrorKind::Mismatch, "bundles live on different tori");
  if (l.spec.rank != 1 || l.has_triv())
    fail(ErrorKind::Unsupported, "Hom composite needs an abelian second factor");
  GaugeField out = e;
  for (size_t i = 0; i < out.det_angle.size(); ++i) out.det_angle[i] -= l.det_angle[i];
  out.spec.chern[0] = e.spec.chern[0] - e.spec.rank * l.spec.chern[0];
  out.spec.chern[1] = e.spec.chern[1] - e.spec.rank * l.spec.chern[1];
  return out;
}

double max_unitarity_defect(const GaugeField& g) {
  if (!g.has_triv()) return 0.0;
  const int r = g.spec.rank;
  double worst = 0.0;
  for (int d = 0; d < g.torus->ndirs; ++d)
    for (long s = 0; s < g.torus->nsites; ++s) {
      Eigen::Map<const Eigen::MatrixXcd> v(g.triv_block(d, s), r, r);
      worst = std::max(worst, (v.adjoint() * v - Eigen::MatrixXcd::Identity(r, r)).norm());
    }
  return worst;
}

} // namespace vtx
