#include "vtx/solvers.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>

#include "vtx/fft.hpp"

namespace vtx {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Solution: return "Solution";
    case Verdict::NonExistence: return "NonExistence";
    case Verdict::MaxIters: return "MaxIters";
  }
  return "?";
}

namespace {

double wrap_pi(double x) {
  x = std::fmod(x, kTwoPi);
  if (x <= -kTwoPi / 2) x += kTwoPi;
  if (x > kTwoPi / 2) x -= kTwoPi;
  return x;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// spectral Δ applied in place through a scratch complex buffer
void laplace_into(const LatticeTorus& t, const std::vector<double>& sym, const RealField& v,
                  RealField& out) {
  std::vector<cplx> buf(v.v.begin(), v.v.end());
  fft::nd(t, buf.data(), -1);
  for (long s = 0; s < t.nsites; ++s) buf[static_cast<size_t>(s)] *= sym[static_cast<size_t>(s)];
  fft::nd(t, buf.data(), +1);
  const double inv = 1.0 / static_cast<double>(t.nsites);
  for (long s = 0; s < t.nsites; ++s) out.v[s] = buf[static_cast<size_t>(s)].real() * inv;
}

} // namespace

KwResult newton_kw(const LatticeTorus& torus, const RealField& q, const RealField& g,
                   const SolveOptions& opts) {
  KwResult out;
  out.v = RealField(torus, 0.0);
  const auto sym = laplace_symbol_table(torus);

  double sup_q = 0.0;
  for (double x : q.v) sup_q = std::max(sup_q, x);
  if (sup_q == 0.0) {
    // linear case: Δv = g
    if (std::abs(integrate(g)) > 1e-10) {
      out.verdict = Verdict::NonExistence;
      out.residual = std::abs(integrate(g)) / kTwoPi;
      return out;
    }
    out.v = poisson_solve(torus, g);
    out.converged = true;
    out.verdict = Verdict::Solution;
    out.residual = 0.0;
    return out;
  }

  RealField qe(torus), F(torus), lap_v(torus);
  auto eval_F = [&](const RealField& v) {
    for (long s = 0; s < torus.nsites; ++s) qe.v[s] = q.v[s] * std::exp(v.v[s]);
    laplace_into(torus, sym, v, lap_v);
    for (long s = 0; s < torus.nsites; ++s) F.v[s] = lap_v.v[s] + qe.v[s] - g.v[s];
  };
  auto energy = [&](const RealField& v) {
    laplace_into(torus, sym, v, lap_v);
    double e = 0.0;
    for (long s = 0; s < torus.nsites; ++s)
      e += 0.5 * v.v[s] * lap_v.v[s] + q.v[s] * std::exp(v.v[s]) - g.v[s] * v.v[s];
    return e * torus.site_weight;
  };

  eval_F(out.v);
  double E = energy(out.v);
  for (int it = 0; it < 200; ++it) {
    out.iterations = it;
    out.residual = std::sqrt(norm_sq(F));
    if (opts.record_trace) out.trace.push_back({it, E, out.residual, 0.0});
    if (out.residual < opts.tol) {
      out.converged = true;
      out.verdict = Verdict::Solution;
      return out;
    }
    // collapse detection: the zero-order term has died but the residual has not
    double sup_qe = 0.0, mean_v = 0.0;
    for (long s = 0; s < torus.nsites; ++s) {
      sup_qe = std::max(sup_qe, qe.v[s]);
      mean_v += out.v.v[s];
    }
    mean_v /= static_cast<double>(torus.nsites);
    if ((sup_qe < opts.collapse_tol * (1.0 + sup_q) || mean_v < -40.0) &&
        out.residual > opts.tol) {
      out.verdict = Verdict::NonExistence;
      return out;
    }

    // Newton direction: (Δ + qe) δ = -F by preconditioned CG
    double mean_qe = 0.0;
    for (long s = 0; s < torus.nsites; ++s) mean_qe += qe.v[s];
    mean_qe /= static_cast<double>(torus.nsites);
    const double pshift = std::max(mean_qe, 1e-12);

    RealField delta(torus), res = F, z(torus), p(torus), ap(torus);
    for (auto& x : res.v) x = -x;
    auto precond = [&](const RealField& r, RealField& zz) {
      std::vector<cplx> buf(r.v.begin(), r.v.end());
      fft::nd(torus, buf.data(), -1);
      for (long s = 0; s < torus.nsites; ++s)
        buf[static_cast<size_t>(s)] /= (sym[static_cast<size_t>(s)] + pshift);
      fft::nd(torus, buf.data(), +1);
      const double inv = 1.0 / static_cast<double>(torus.nsites);
      for (long s = 0; s < torus.nsites; ++s) zz.v[s] = buf[static_cast<size_t>(s)].real() * inv;
    };
    precond(res, z);
    p = z;
    double rz = 0.0, b2 = 0.0;
    for (long s = 0; s < torus.nsites; ++s) {
      rz += res.v[s] * z.v[s];
      b2 += res.v[s] * res.v[s];
    }
    for (int cg = 0; cg < 400; ++cg) {
      laplace_into(torus, sym, p, ap);
      for (long s = 0; s < torus.nsites; ++s) ap.v[s] += qe.v[s] * p.v[s];
      double pap = 0.0;
      for (long s = 0; s < torus.nsites; ++s) pap += p.v[s] * ap.v[s];
      if (pap <= 0) break;
      const double alpha = rz / pap;
      double r2 = 0.0;
      for (long s = 0; s < torus.nsites; ++s) {
        delta.v[s] += alpha * p.v[s];
        res.v[s] -= alpha * ap.v[s];
        r2 += res.v[s] * res.v[s];
      }
      if (r2 < 1e-24 * std::max(1.0, b2)) break;
      precond(res, z);
      double rz_new = 0.0;
      for (long s = 0; s < torus.nsites; ++s) rz_new += res.v[s] * z.v[s];
      const double beta = rz_new / rz;
      rz = rz_new;
      for (long s = 0; s < torus.nsites; ++s) p.v[s] = z.v[s] + beta * p.v[s];
    }

    // Armijo backtracking on the convex energy
    double slope = 0.0;
    for (long s = 0; s < torus.nsites; ++s) slope += F.v[s] * delta.v[s];
    slope *= torus.site_weight;
    double step = 1.0;
    RealField trial(torus);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (long s = 0; s < torus.nsites; ++s) trial.v[s] = out.v.v[s] + step * delta.v[s];
      const double Et = energy(trial);
      if (std::isfinite(Et) && Et <= E + opts.armijo * step * slope) {
        out.v = trial;
        E = Et;
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) {
      out.verdict = Verdict::MaxIters;
      return out;
    }
    eval_F(out.v);
  }
  out.residual = std::sqrt(norm_sq(F));
  out.verdict = Verdict::MaxIters;
  return out;
}

std::pair<MetricField, SolveReport> solve_metric_line(const DbarData& D, const Section& phi,
                                                      const RealField& t,
                                                      const SolveOptions& opts) {
  Timer timer;
  const LatticeTorus& torus = *D.torus;
  if (D.spec.rank != 1) fail(ErrorKind::Unsupported, "scalar reduction needs a line bundle");
  if (phi.torus != &torus || t.torus != &torus) fail(ErrorKind::Mismatch, "shape mismatch");

  SolveReport rep;
  const double r_holo = std::sqrt(form_norm_sq(torus, dbar_cov(D, phi)));
  if (r_holo > 1e-4)
    rep.notes.push_back("NonHolomorphicInput: |dbar phi| = " + std::to_string(r_holo) +
                        "; solving with phi as-is");

  RealField ilf0 = i_lambda_f_scalar(D.base);
  RealField q(torus), g(torus);
  for (long s = 0; s < torus.nsites; ++s) {
    q.v[s] = std::norm(phi.v[s]);
    g.v[s] = t.v[s] - ilf0.v[s];
  }
  KwResult kw = newton_kw(torus, q, g, opts);

  MetricField H = MetricField::unit(torus, 1);
  for (long s = 0; s < torus.nsites; ++s) H.u.v[s] = kw.v.v[s] / 2.0;

  rep.converged = kw.converged;
  rep.verdict = kw.verdict;
  rep.iterations = kw.iterations;
  rep.trace = std::move(kw.trace);
  rep.final_residuals.r_holo = r_holo;
  rep.final_residuals.r_moment = kw.residual;
  double pns = 0.0;
  for (long s = 0; s < torus.nsites; ++s) pns += q.v[s] * std::exp(kw.v.v[s]);
  rep.phi_norm_sq = pns * torus.site_weight;
  rep.wall_time_s = timer.seconds();
  return {std::move(H), std::move(rep)};
}

namespace {

struct MatrixFlowEval {
  MatField R;
  double phi_sq = 0.0;
  double res_norm = 0.0;
  bool degenerate = false; // metric lost positivity at working precision
};

MatrixFlowEval eval_matrix_residual(const DbarData& D, const MetricField& H, const Section& phi,
                                    const RealField& t) {
  const LatticeTorus& torus = *D.torus;
  const int r = D.spec.rank;
  MatrixFlowEval out;
  CurvatureDecomp c;
  try {
    c = chern_metric_curvature(D, H);
  } catch (const Error& e) {
    if (e.kind == ErrorKind::NonPositiveMetric) {
      out.degenerate = true;
      out.res_norm = std::numeric_limits<double>::infinity();
      out.R = MatField(torus, r);
      return out;
    }
    throw;
  }
  MatField pps = phi_phi_star(phi, H);
  out.R = MatField(torus, r);
  double acc = 0.0, pacc = 0.0;
  for (long s = 0; s < torus.nsites; ++s) {
    Eigen::Map<const Eigen::MatrixXcd> lf(c.lambda_f.block(s), r, r);
    Eigen::Map<const Eigen::MatrixXcd> pp(pps.block(s), r, r);
    Eigen::Map<Eigen::MatrixXcd> R(out.R.block(s), r, r);
    R = cplx(0, 1) * lf + pp - t.v[s] * Eigen::MatrixXcd::Identity(r, r);
    acc += R.squaredNorm();
    pacc += pp.trace().real();
  }
  out.res_norm = std::sqrt(acc * torus.site_weight);
  out.phi_sq = pacc * torus.site_weight;
  return out;
}

void fourier_filter_mat(const LatticeTorus& t, const std::vector<std::vector<double>>& sym_entry,
                        MatField& m) {
  const int rr = m.rank * m.rank;
  std::vector<cplx> plane(static_cast<size_t>(t.nsites));
  for (int e = 0; e < rr; ++e) {
    const auto& sym = sym_entry[static_cast<size_t>(sym_entry.size() == 1 ? 0 : e)];
    for (long s = 0; s < t.nsites; ++s) plane[static_cast<size_t>(s)] = m.v[static_cast<size_t>(s) * rr + e];
    fft::nd(t, plane.data(), -1);
    for (long s = 0; s < t.nsites; ++s)
      plane[static_cast<size_t>(s)] /= (1.0 + sym[static_cast<size_t>(s)]);
    fft::nd(t, plane.data(), +1);
    const double inv = 1.0 / static_cast<double>(t.nsites);
    for (long s = 0; s < t.nsites; ++s) m.v[static_cast<size_t>(s) * rr + e] = plane[static_cast<size_t>(s)] * inv;
  }
}

// For constant diagonal trivial links the endomorphism Laplacian is diagonal
// in plain Fourier space with twist-shifted wavenumbers; the matching
// preconditioner makes the heat flow contraction grid-uniform.
std::vector<std::vector<double>> endo_symbols(const LatticeTorus& t, const GaugeField& g) {
  const int r = g.spec.rank;
  std::vector<std::vector<double>> out;
  std::array<std::vector<double>, 4> beta; // per-direction diagonal phases
  bool constant_diag = g.has_triv();
  for (int d = 0; d < t.ndirs && constant_diag; ++d) {
    beta[static_cast<size_t>(d)].assign(static_cast<size_t>(r), 0.0);
    const cplx* v0 = g.triv_block(d, 0);
    for (int i = 0; i < r; ++i) beta[static_cast<size_t>(d)][static_cast<size_t>(i)] = std::arg(v0[i * r + i]);
    for (long s = 0; s < t.nsites && constant_diag; ++s) {
      const cplx* v = g.triv_block(d, s);
      for (int i = 0; i < r && constant_diag; ++i)
        for (int j = 0; j < r && constant_diag; ++j) {
          if (i == j) {
            if (std::abs(v[i * r + i] - v0[i * r + i]) > 1e-13) constant_diag = false;
          } else if (std::abs(v[j * r + i]) > 1e-13) {
            constant_diag = false;
          }
        }
    }
  }
  if (!constant_diag) {
    out.push_back(laplace_symbol_table(t));
    return out;
  }
  out.resize(static_cast<size_t>(r) * r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const int e = i + j * r; // column-major entry index of M(i,j)
      auto& tab = out[static_cast<size_t>(e)];
      tab.assign(static_cast<size_t>(t.nsites), 0.0);
      for (long s = 0; s < t.nsites; ++s) {
        auto k = t.coords(s);
        double sym = 0.0;
        for (int cj = 0; cj < t.complex_dim; ++cj) {
          for (int half = 0; half < 2; ++half) {
            const int d = 2 * cj + half;
            const double shift = beta[static_cast<size_t>(d)][static_cast<size_t>(i)] -
                                 beta[static_cast<size_t>(d)][static_cast<size_t>(j)];
            const double mu = wrap_pi(shift + kTwoPi * k[d] / t.grid[d]) / t.h[d];
            sym += mu * mu / (2.0 * t.metric_a[cj]);
          }
        }
        tab[static_cast<size_t>(s)] = sym;
      }
    }
  return out;
}

double metric_eigen_ratio(const MetricField& H) {
  const int r = H.rank;
  double worst = 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
  for (long s = 0; s < H.torus->nsites; ++s) {
    Eigen::Map<const Eigen::MatrixXcd> h(H.mat.block(s), r, r);
    es.compute(h, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(r - 1);
    if (hi > 0) worst = std::min(worst, lo / hi);
  }
  return worst;
}

// Donaldson-type energy whose gradient flow is the metric heat flow:
//   M(H) = M_Don(I,H) + ∫tr(φφ†H) − ∫ t·tr(log H),
// with the curvature part in the Simpson form
//   M_Don = ∫tr(s·iΛF₀) + Σ_j ∫⟨Ψ(s)(d̄_j s), d̄_j s⟩,  s = log H,
//   Ψ(a,b) = (e^{b−a} − (b−a) − 1)/(b−a)².
// Monotone along the flow even where ‖R‖ is not; the line search uses it.
double donaldson_energy(const DbarData& D, const MetricField& H, const Section& phi,
                        const RealField& t); // forward (public wrapper below)

double donaldson_energy(const DbarData& D, const MetricField& H, const Section& phi,
                        const RealField& t) {
  const LatticeTorus& torus = *D.torus;
  const int r = H.rank;
  const int dim = r * r;
  const long n = torus.nsites;

  // s = log H and the pieces that are pointwise in s
  std::vector<cplx> sfield(static_cast<size_t>(n) * dim);
  std::vector<Eigen::MatrixXcd> evec(static_cast<size_t>(n));
  std::vector<Eigen::VectorXd> eval(static_cast<size_t>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
  double acc = 0.0;
  MatField pps = phi_phi_star(phi, MetricField::unit(torus, r)); // φφ† (unit metric)
  for (long s = 0; s < n; ++s) {
    Eigen::Map<const Eigen::MatrixXcd> h(H.mat.block(s), r, r);
    es.compute(h);
    evec[static_cast<size_t>(s)] = es.eigenvectors();
    eval[static_cast<size_t>(s)] = es.eigenvalues();
    Eigen::VectorXd logl(r);
    double trlog = 0.0;
    for (int i = 0; i < r; ++i) {
      logl[i] = std::log(es.eigenvalues()(i));
      trlog += logl[i];
    }
    Eigen::MatrixXcd sm =
        es.eigenvectors() * logl.asDiagonal() * es.eigenvectors().adjoint();
    Eigen::Map<Eigen::MatrixXcd>(sfield.data() + static_cast<size_t>(s) * dim, r, r) = sm;
    // ∫ tr(s iΛF₀): iΛF₀ = i·ΛF_base
    Eigen::Map<const Eigen::MatrixXcd> lf(D.base.lambda_f.block(s), r, r);
    acc += (sm * (cplx(0, 1) * lf)).trace().real();
    // φ and t terms
    Eigen::Map<const Eigen::MatrixXcd> pp(pps.block(s), r, r);
    acc += (pp * h).trace().real() - (t.v[s]) * trlog;
  }

  // curvature quadratic term with the Ψ kernel, in the H eigenbasis
  std::vector<cplx> ds(static_cast<size_t>(n) * dim);
  for (int j = 0; j < torus.complex_dim; ++j) {
    covariant_complex_deriv(*D.adj, j, +1, sfield.data(), ds.data());
    for (long s = 0; s < n; ++s) {
      Eigen::Map<const Eigen::MatrixXcd> w(ds.data() + static_cast<size_t>(s) * dim, r, r);
      Eigen::MatrixXcd wt = evec[static_cast<size_t>(s)].adjoint() * w * evec[static_cast<size_t>(s)];
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) {
          const double d = eval[static_cast<size_t>(s)](b) == eval[static_cast<size_t>(s)](a)
                               ? 0.0
                               : std::log(eval[static_cast<size_t>(s)](b)) -
                                     std::log(eval[static_cast<size_t>(s)](a));
          double psi;
          if (std::abs(d) < 1e-6) {
            psi = 0.5 + d / 6.0 + d * d / 24.0;
          } else {
            psi = (std::exp(d) - d - 1.0) / (d * d);
          }
          acc += psi * std::norm(wt(a, b));
        }
    }
  }
  return acc * torus.site_weight;
}

} // namespace

double metric_flow_energy(const DbarData& D, const MetricField& H, const Section& phi,
                          const RealField& t) {
  return donaldson_energy(D, H, phi, t);
}

std::pair<MetricField, SolveReport> solve_metric_matrix(const DbarData& D, const Section& phi,
                                                        const RealField& t,
                                                        const SolveOptions& opts,
                                                        const MetricField* warm_start) {
  const LatticeTorus& torus = *D.torus;
  const int r = D.spec.rank;
  if (r == 1) return solve_metric_line(D, phi, t, opts);
  Timer timer;

  SolveReport rep;
  rep.final_residuals.r_holo = std::sqrt(form_norm_sq(torus, dbar_cov(D, phi)));
  const auto sym = laplace_symbol_table(torus);
  const auto sym_entry = endo_symbols(torus, D.gauge);
  const double t_mean = field_mean(t);

  MetricField H = warm_start ? *warm_start : MetricField::unit(torus, r);
  MatrixFlowEval cur = eval_matrix_residual(D, H, phi, t);
  double eps = 0.1 / (1.0 + std::abs(t_mean)) * opts.step0_scale;
  const double eps_max = 2.0;
  const double res0 = cur.res_norm;

  // ‖R‖ is not monotone along the heat flow; accept against a trailing
  // window and, when even that fails, advance the flow unconditionally for a
  // stretch (humps en route to either the solution or the collapse locus)
  std::vector<double> window(12, cur.res_norm);
  size_t wpos = 0;
  double plateau_ref = cur.res_norm;
  int plateau_at = 0;
  double collapse_metric = 1.0, collapse_ref = 1.0;
  MetricField trial = H;

  auto collapse_now = [&]() {
    return std::min(metric_eigen_ratio(H),
                    cur.phi_sq / (form_norm_sq(torus, dbar_cov(D, phi)) + 1.0 + cur.phi_sq));
  };
  collapse_metric = collapse_ref = collapse_now();

  auto take_step = [&](const MatField& dir, double step) {
    for (long s = 0; s < torus.nsites; ++s) {
      Eigen::Map<const Eigen::MatrixXcd> ss(dir.block(s), r, r);
      Eigen::Map<const Eigen::MatrixXcd> h(H.mat.block(s), r, r);
      Eigen::MatrixXcd x = (-0.5 * step * ss).exp();
      Eigen::Map<Eigen::MatrixXcd> ht(trial.mat.block(s), r, r);
      ht = x.adjoint() * h * x;
      ht = 0.5 * (ht + ht.adjoint()).eval();
    }
  };

  double best_since_check = cur.res_norm;
  for (int it = 0; it < opts.max_iters; ++it) {
    rep.iterations = it;
    best_since_check = std::min(best_since_check, cur.res_norm);
    if (opts.record_trace && it % opts.trace_stride == 0)
      rep.trace.push_back({it, cur.res_norm * cur.res_norm, cur.res_norm, eps});
    if (cur.res_norm < opts.tol) {
      rep.converged = true;
      rep.verdict = Verdict::Solution;
      break;
    }

    if (it % 10 == 0) collapse_metric = collapse_now();
    if ((cur.degenerate || collapse_metric < opts.collapse_tol) && cur.res_norm > opts.tol) {
      rep.verdict = Verdict::NonExistence;
      rep.notes.push_back("slope collapse: eigen-ratio/|phi|^2 metric " +
                          std::to_string(collapse_metric));
      break;
    }
    if (it - plateau_at >= opts.plateau_window) {
      const bool stalled = best_since_check > plateau_ref * (1.0 - opts.plateau_rtol);
      const bool collapsing = collapse_metric < collapse_ref * 0.7;
      plateau_ref = best_since_check;
      best_since_check = cur.res_norm;
      collapse_ref = collapse_metric;
      plateau_at = it;
      if (stalled && !collapsing) {
        rep.verdict = Verdict::MaxIters;
        rep.notes.push_back("residual plateau without collapse signature");
        break;
      }
    }

    MatField S = cur.R;
    fourier_filter_mat(torus, sym_entry, S);
    double ref = 0.0;
    for (double x : window) ref = std::max(ref, x);
    bool accepted = false;
    eps = std::min(eps * 1.3, eps_max);
    for (int bt = 0; bt < 12; ++bt) {
      take_step(S, eps);
      MatrixFlowEval nxt = eval_matrix_residual(D, trial, phi, t);
      if (nxt.res_norm <= ref * (1.0 - opts.armijo * std::min(eps, 1.0))) {
        std::swap(H.mat.v, trial.mat.v);
        cur = std::move(nxt);
        accepted = true;
        break;
      }
      eps *= opts.backtrack;
      if (eps < 1e-12) break;
    }

    // Newton–Krylov: matrix-free GMRES on the linearised residual with the
    // twist filter as right preconditioner, then Armijo on ‖R‖. Engaged
    // when the flow line search stalls.
    if (!accepted) {
      auto apply_j = [&](const MatField& x, MatField& out) {
        double sup = 0.0;
        for (cplx z : x.v) sup = std::max(sup, std::abs(z));
        const double sigma = 1e-5 / std::max(sup, 1e-30);
        take_step(x, -sigma); // e^{+σX/2} probe
        MatrixFlowEval plus = eval_matrix_residual(D, trial, phi, t);
        take_step(x, sigma); // e^{−σX/2} probe
        MatrixFlowEval minus = eval_matrix_residual(D, trial, phi, t);
        out = MatField(torus, r);
        const double inv = 0.5 / sigma;
        for (size_t i = 0; i < out.v.size(); ++i)
          out.v[i] = (plus.R.v[i] - minus.R.v[i]) * inv;
      };
      auto dot = [&](const MatField& a, const MatField& b) {
        double acc = 0.0;
        for (size_t i = 0; i < a.v.size(); ++i)
          acc += std::real(std::conj(b.v[i]) * a.v[i]);
        return acc * torus.site_weight;
      };

      const int m = 40;
      std::vector<MatField> basis;
      std::vector<MatField> zs; // preconditioned basis vectors
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);
      Eigen::VectorXd gvec = Eigen::VectorXd::Zero(m + 1);
      MatField r0 = cur.R;
      for (auto& z : r0.v) z = -z;
      const double beta = std::sqrt(dot(r0, r0));
      gvec(0) = beta;
      for (auto& z : r0.v) z /= beta;
      basis.push_back(r0);
      MatField w(torus, r);
      int used = 0;
      for (int k = 0; k < m; ++k) {
        MatField z = basis[static_cast<size_t>(k)];
        fourier_filter_mat(torus, sym_entry, z);
        zs.push_back(z);
        apply_j(z, w);
        for (int i = 0; i <= k; ++i) {
          hess(i, k) = dot(w, basis[static_cast<size_t>(i)]);
          for (size_t q = 0; q < w.v.size(); ++q)
            w.v[q] -= hess(i, k) * basis[static_cast<size_t>(i)].v[q];
        }
        hess(k + 1, k) = std::sqrt(dot(w, w));
        used = k + 1;
        if (hess(k + 1, k) < 1e-14 * beta) break;
        for (auto& z2 : w.v) z2 /= hess(k + 1, k);
        basis.push_back(w);
        Eigen::MatrixXd hk = hess.topLeftCorner(k + 2, k + 1);
        Eigen::VectorXd gk = gvec.head(k + 2);
        Eigen::VectorXd y = hk.colPivHouseholderQr().solve(gk);
        if ((hk * y - gk).norm() < 0.05 * beta) break;
      }
      Eigen::MatrixXd hk = hess.topLeftCorner(used + 1, used);
      Eigen::VectorXd y = hk.colPivHouseholderQr().solve(gvec.head(used + 1));
      MatField delta(torus, r);
      for (int i = 0; i < used; ++i)
        for (size_t q = 0; q < delta.v.size(); ++q)
          delta.v[q] += y(i) * zs[static_cast<size_t>(i)].v[q];
      // trust cap against exp overflow; Armijo handles bad large steps
      double dsup = 0.0;
      for (cplx z : delta.v) dsup = std::max(dsup, std::abs(z));
      if (dsup > 20.0)
        for (auto& z : delta.v) z *= 20.0 / dsup;
      double step = 1.0;
      const double res_before = cur.res_norm;
      for (int bt = 0; bt < 10; ++bt) {
        take_step(delta, -step); // take_step applies exp(−½·step·dir): flip
        MatrixFlowEval nxt = eval_matrix_residual(D, trial, phi, t);
        if (nxt.res_norm <= cur.res_norm * (1.0 - opts.armijo * step)) {
          std::swap(H.mat.v, trial.mat.v);
          cur = std::move(nxt);
          accepted = true;
          break;
        }
        step *= opts.backtrack;
      }
      if (opts.record_trace)
        rep.notes.push_back("newton@" + std::to_string(it) + ": " + std::to_string(res_before) +
                            (accepted ? " -> " + std::to_string(cur.res_norm) : " rejected") +
                            " (krylov " + std::to_string(used) + ")");
    }

    if (!accepted) {
      // unconditional flow burst with a conservative step; guarded against
      // blow-up so the collapse signature can develop
      const double step = 0.3;
      bool blown = false;
      for (int burst = 0; burst < 20; ++burst) {
        take_step(S, step);
        MatrixFlowEval nxt = eval_matrix_residual(D, trial, phi, t);
        if (!std::isfinite(nxt.res_norm) || nxt.res_norm > 30.0 * (res0 + 1.0)) {
          blown = true;
          break;
        }
        std::swap(H.mat.v, trial.mat.v);
        cur = std::move(nxt);
        S = cur.R;
        fourier_filter_mat(torus, sym_entry, S);
      }
      eps = 0.1 / (1.0 + std::abs(t_mean));
      if (blown) {
        collapse_metric = collapse_now();
        rep.verdict = collapse_metric < std::sqrt(opts.collapse_tol) ? Verdict::NonExistence
                                                                     : Verdict::MaxIters;
        rep.notes.push_back("flow blow-up; eigen metric " + std::to_string(collapse_metric));
        break;
      }
    }
    window[wpos] = cur.res_norm;
    wpos = (wpos + 1) % window.size();
  }

  rep.final_residuals.r_moment = cur.res_norm;
  rep.phi_norm_sq = cur.phi_sq;
  rep.wall_time_s = timer.seconds();
  if (!rep.converged && rep.verdict == Verdict::MaxIters && cur.res_norm < opts.tol) {
    rep.converged = true;
    rep.verdict = Verdict::Solution;
  }
  return {std::move(H), std::move(rep)};
}

CoupledResult solve_coupled(const DbarData& E, const DbarData& L, const Section& phi,
                            const RealField& t, const RealField& t_prime,
                            const SolveOptions& opts) {
  Timer timer;
  const LatticeTorus& torus = *E.torus;
  if (L.torus != &torus || phi.torus != &torus) fail(ErrorKind::Mismatch, "shape mismatch");
  if (L.spec.rank != 1) fail(ErrorKind::Unsupported, "second bundle must be a line bundle");

  ParamSet ps;
  ps.t = t;
  ps.t_prime = t_prime;
  Degrees dg{degree_of(torus, E.spec), degree_of(torus, L.spec), E.spec.rank};
  auto cc = constraint_check(SystemKind::TMCVE, ps, dg);
  if (!cc.ok)
    fail(ErrorKind::ConstraintViolation,
         "r·mean(t) + mean(t') - deg E - deg L = " + std::to_string(cc.violation));

  if (E.spec.rank != 1)
    fail(ErrorKind::Unsupported,
         "coupled solve is implemented for line bundles on both sides");

  CoupledResult out{MetricField::unit(torus, 1), MetricField::unit(torus, 1), {}};
  RealField ilf_e = i_lambda_f_scalar(E.base);
  RealField ilf_l = i_lambda_f_scalar(L.base);

  // difference equation: Δm + (iΛF_E − iΛF_L) + 2Q e^m = t − t'
  RealField q2(torus), gm(torus);
  for (long s = 0; s < torus.nsites; ++s) {
    q2.v[s] = 2.0 * std::norm(phi.v[s]);
    gm.v[s] = t.v[s] - t_prime.v[s] - (ilf_e.v[s] - ilf_l.v[s]);
  }
  KwResult kw = newton_kw(torus, q2, gm, opts);
  SolveReport& rep = out.report;
  rep.iterations = kw.iterations;
  rep.trace = std::move(kw.trace);
  rep.verdict = kw.verdict;
  if (kw.verdict != Verdict::Solution) {
    rep.wall_time_s = timer.seconds();
    return out;
  }

  // sum equation is linear: Δp = (t + t') − iΛF_E − iΛF_L, fixed by mean(v_H)=0
  RealField rhs(torus);
  for (long s = 0; s < torus.nsites; ++s)
    rhs.v[s] = t.v[s] + t_prime.v[s] - ilf_e.v[s] - ilf_l.v[s];
  const double m0 = field_mean(rhs);
  for (auto& x : rhs.v) x -= m0; // constraint holds to 1e-8; project the remainder
  RealField p = poisson_solve(torus, rhs);
  RealField vh(torus), vk(torus);
  for (long s = 0; s < torus.nsites; ++s) {
    vh.v[s] = 0.5 * (p.v[s] + kw.v.v[s]);
    vk.v[s] = 0.5 * (p.v[s] - kw.v.v[s]);
  }
  const double shift = integrate(vh) / kTwoPi;
  for (long s = 0; s < torus.nsites; ++s) {
    vh.v[s] -= shift;
    vk.v[s] -= shift;
    out.H.u.v[s] = vh.v[s] / 2.0;
    out.K.u.v[s] = vk.v[s] / 2.0;
  }

  // report residuals of both equations
  RealField lap_h = laplace(torus, vh), lap_k = laplace(torus, vk);
  double r1 = 0.0, r2 = 0.0, pns = 0.0;
  for (long s = 0; s < torus.nsites; ++s) {
    const double pw = std::norm(phi.v[s]) * std::exp(vh.v[s] - vk.v[s]);
    const double e1 = lap_h.v[s] + ilf_e.v[s] + pw - t.v[s];
    const double e2 = lap_k.v[s] + ilf_l.v[s] - pw - t_prime.v[s];
    r1 += e1 * e1;
    r2 += e2 * e2;
    pns += pw;
  }
  rep.final_residuals.r_moment = std::sqrt(r1 * torus.site_weight);
  rep.final_residuals.r_second = std::sqrt(r2 * torus.site_weight);
  rep.phi_norm_sq = pns * torus.site_weight;
  rep.converged = rep.final_residuals.r_moment < opts.tol * 2 &&
                  rep.final_residuals.r_second < opts.tol * 2;
  rep.verdict = rep.converged ? Verdict::Solution : Verdict::MaxIters;
  rep.wall_time_s = timer.seconds();
  return out;
}

std::vector<ScanRow> tau_scan(const ScanModel& model, const std::vector<double>& taus,
                              const SolveOptions& opts) {
  if (!model.dbar) fail(ErrorKind::MissingField, "scan model operator data");
  const LatticeTorus& torus = *model.dbar->torus;
  // continuation: sweep τ in ascending order and warm-start each solve from
  // the previous converged metric; rows are reported in the input order
  std::vector<size_t> order(taus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return taus[a] < taus[b]; });

  std::vector<ScanRow> rows(taus.size());
  std::optional<MetricField> warm;
  for (size_t idx : order) {
    const double tau = taus[idx];
    RealField t(torus, tau);
    if (model.t_profile)
      for (long s = 0; s < torus.nsites; ++s) t.v[s] += model.t_profile->v[s];
    auto [H, rep] =
        solve_metric_matrix(*model.dbar, model.phi, t, opts, warm ? &*warm : nullptr);
    ScanRow row;
    row.tau = tau;
    row.verdict = rep.verdict;
    row.phi_norm_sq = rep.phi_norm_sq;
    row.residual = rep.final_residuals.total();
    row.iterations = rep.iterations;
    rows[idx] = row;
    if (rep.verdict == Verdict::Solution && model.dbar->spec.rank > 1)
      warm = std::move(H);
    else if (rep.verdict != Verdict::Solution)
      warm.reset();
  }
  return rows;
}

namespace {

// ---- abelian YMH flow ----------------------------------------------------

struct FlowEval {
  double objective = 0.0;
  double r_holo = 0.0, r_02 = 0.0, r_moment = 0.0;
  double sup_phi = 0.0;
  double residual_total() const {
    return std::sqrt(r_holo * r_holo + r_02 * r_02 + r_moment * r_moment);
  }
};

struct FlowWork {
  const LatticeTorus* torus;
  GaugeField gauge;     // current links
  Section phi;          // current section
  double tau;
  // filled by eval()
  std::shared_ptr<CovariantDeriv> cd;
  FormComponents w;     // d̄_j φ
  RealField ilf;        // iΛF
  RealField R;          // iΛF + |φ|² − τ
  CplxField f02;        // (0,2) curvature coefficient (complex_dim 2)

  // plaquette phase of the ω- or mixed plane
  double plaq(int mu, int nu, long s) const {
    const LatticeTorus& t = *torus;
    const long smu = t.neighbor(s, mu, 1);
    const long snu = t.neighbor(s, nu, 1);
    return wrap_pi(gauge.angle(mu, s) + gauge.angle(nu, smu) - gauge.angle(mu, snu) -
                   gauge.angle(nu, s));
  }

  FlowEval eval(bool full) {
    const LatticeTorus& t = *torus;
    FlowEval out;
    // iΛF with branch guard
    for (int j = 0; j < t.complex_dim; ++j) {
      const double c = 1.0 / (t.h[2 * j] * t.h[2 * j + 1] * t.metric_a[j]);
      for (long s = 0; s < t.nsites; ++s) {
        const double p = plaq(2 * j, 2 * j + 1, s);
        if (std::abs(p) > kTwoPi / 2 - 0.1)
          fail(ErrorKind::NearBranchCut, "flow reached a plaquette branch cut");
        const double v = -p * c;
        if (j == 0)
          ilf.v[s] = v;
        else
          ilf.v[s] += v;
      }
    }
    double mom = 0.0;
    for (long s = 0; s < t.nsites; ++s) {
      R.v[s] = ilf.v[s] + std::norm(phi.v[s]) - tau;
      mom += R.v[s] * R.v[s];
      out.sup_phi = std::max(out.sup_phi, std::abs(phi.v[s]));
    }
    mom *= t.site_weight;

    double f02sq = 0.0;
    if (t.complex_dim == 2) {
      const double frame = 2.0 / std::sqrt(t.metric_a[0] * t.metric_a[1]);
      for (long s = 0; s < t.nsites; ++s) {
        const cplx F02 = cplx(0, plaq(0, 2, s)) / (t.h[0] * t.h[2]);
        const cplx F13 = cplx(0, plaq(1, 3, s)) / (t.h[1] * t.h[3]);
        const cplx F03 = cplx(0, plaq(0, 3, s)) / (t.h[0] * t.h[3]);
        const cplx F12 = cplx(0, plaq(1, 2, s)) / (t.h[1] * t.h[2]);
        f02.v[s] = 0.25 * (F02 - F13 + cplx(0, 1) * (F03 + F12)) * frame;
        f02sq += std::norm(f02.v[s]);
      }
      f02sq *= t.site_weight;
    }

    cd = std::make_shared<CovariantDeriv>(gauge, false);
    w.torus = &t;
    w.rank = 1;
    w.comp.assign(t.complex_dim, std::vector<cplx>(static_cast<size_t>(t.nsites)));
    std::vector<cplx> dx(static_cast<size_t>(t.nsites)), dy(static_cast<size_t>(t.nsites));
    double holo = 0.0;
    for (int j = 0; j < t.complex_dim; ++j) {
      cd->apply(2 * j, phi.v.data(), dx.data());
      cd->apply(2 * j + 1, phi.v.data(), dy.data());
      const double nrm = 1.0 / std::sqrt(2.0 * t.metric_a[j]);
      for (long s = 0; s < t.nsites; ++s) {
        w.comp[j][static_cast<size_t>(s)] = (dx[static_cast<size_t>(s)] + cplx(0, 1) * dy[static_cast<size_t>(s)]) * nrm;
        holo += std::norm(w.comp[j][static_cast<size_t>(s)]);
      }
    }
    holo *= t.site_weight;

    out.objective = 4.0 * f02sq + 4.0 * holo + mom;
    out.r_holo = std::sqrt(holo);
    out.r_02 = std::sqrt(f02sq);
    out.r_moment = std::sqrt(mom);
    (void)full;
    return out;
  }
};

} // namespace

std::pair<FlowState, SolveReport> minimize_ymh(const GaugeField& g0, const Section& phi0,
                                               double tau, const SolveOptions& opts) {
  Timer timer;
  const LatticeTorus& t = *g0.torus;
  if (g0.spec.rank != 1 || g0.has_triv())
    fail(ErrorKind::Unsupported, "the unitary flow is implemented for abelian bundles");
  if (phi0.torus != &t) fail(ErrorKind::Mismatch, "shape mismatch");

  SolveReport rep;
  FlowWork work{&t, g0, phi0, tau, nullptr, {}, RealField(t), RealField(t), CplxField(t)};
  FlowEval cur = work.eval(true);

  const auto sym = laplace_symbol_table(t);
  // preconditioner symbols: section and link-angle blocks
  std::vector<double> pphi(sym.size()), pth(sym.size());
  for (size_t i = 0; i < sym.size(); ++i) pphi[i] = 1.0 / (2.0 * (1.0 + std::abs(tau)) + 8.0 * sym[i]);
  // θ-Hessian scale of the moment term per plane: 2·w0·c² |1−e^{iκ}|² with
  // w0·c = 1 on complex curves; use λΔ as the generic curl magnitude
  for (size_t i = 0; i < sym.size(); ++i) pth[i] = 1.0 / (1.0 + 2.0 * sym[i]);

  auto filter = [&](std::vector<cplx>& data, const std::vector<double>& p) {
    fft::nd(t, data.data(), -1);
    for (long s = 0; s < t.nsites; ++s) data[static_cast<size_t>(s)] *= p[static_cast<size_t>(s)];
    fft::nd(t, data.data(), +1);
    const double inv = 1.0 / static_cast<double>(t.nsites);
    for (long s = 0; s < t.nsites; ++s) data[static_cast<size_t>(s)] *= inv;
  };

  double eps = (0.1 / (1.0 + std::abs(tau))) * opts.step0_scale;
  double plateau_ref = cur.residual_total();
  double sup_ref = cur.sup_phi;
  int plateau_at = 0;

  std::vector<std::vector<cplx>> gth(static_cast<size_t>(t.ndirs),
                                     std::vector<cplx>(static_cast<size_t>(t.nsites)));
  std::vector<cplx> gphi(static_cast<size_t>(t.nsites));
  GaugeField trial_g = work.gauge;
  Section trial_phi = work.phi;

  for (int it = 0; it < opts.max_iters; ++it) {
    rep.iterations = it;
    const double res = cur.residual_total();
    if (opts.record_trace && it % opts.trace_stride == 0)
      rep.trace.push_back({it, cur.objective, res, eps});
    if (res < opts.tol) {
      rep.converged = true;
      rep.verdict = Verdict::Solution;
      break;
    }
    if (cur.sup_phi < opts.collapse_tol && res > opts.tol) {
      rep.verdict = Verdict::NonExistence;
      rep.notes.push_back("field collapse: sup|phi| = " + std::to_string(cur.sup_phi));
      break;
    }
    if (it - plateau_at >= opts.plateau_window) {
      const bool stalled = res > plateau_ref * (1.0 - opts.plateau_rtol);
      const bool collapsing = cur.sup_phi < sup_ref * 0.7;
      plateau_ref = res;
      sup_ref = cur.sup_phi;
      plateau_at = it;
      if (stalled && !collapsing) {
        rep.verdict = Verdict::MaxIters;
        rep.notes.push_back("residual plateau without collapse");
        break;
      }
    }

    // ---- gradients -------------------------------------------------------
    // φ block: 4 ∂̄†(∂̄φ) + 2 R φ  (objective convention δO = 2Re⟨δφ, g⟩)
    {
      std::vector<cplx> tmp(static_cast<size_t>(t.nsites)), acc(static_cast<size_t>(t.nsites), cplx{});
      std::vector<cplx> dxa(static_cast<size_t>(t.nsites)), dya(static_cast<size_t>(t.nsites));
      for (int j = 0; j < t.complex_dim; ++j) {
        // d̄† = −d : apply (D_x − iD_y)/√(2a) and negate
        work.cd->apply(2 * j, work.w.comp[static_cast<size_t>(j)].data(), dxa.data());
        work.cd->apply(2 * j + 1, work.w.comp[static_cast<size_t>(j)].data(), dya.data());
        const double nrm = 1.0 / std::sqrt(2.0 * t.metric_a[j]);
        for (long s = 0; s < t.nsites; ++s)
          acc[static_cast<size_t>(s)] -= (dxa[static_cast<size_t>(s)] - cplx(0, 1) * dya[static_cast<size_t>(s)]) * nrm;
      }
      (void)tmp;
      for (long s = 0; s < t.nsites; ++s)
        gphi[static_cast<size_t>(s)] = 4.0 * acc[static_cast<size_t>(s)] + 2.0 * work.R.v[s] * work.phi.v[s];
      filter(gphi, pphi);
    }
    // θ block
    {
      const double w0 = t.site_weight;
      for (int d = 0; d < t.ndirs; ++d)
        std::fill(gth[static_cast<size_t>(d)].begin(), gth[static_cast<size_t>(d)].end(), cplx{});
      // moment term through iΛF (ω-planes only)
      for (int j = 0; j < t.complex_dim; ++j) {
        const int mu = 2 * j, nu = 2 * j + 1;
        const double c = 1.0 / (t.h[mu] * t.h[nu] * t.metric_a[j]);
        for (long s = 0; s < t.nsites; ++s) {
          const long smnu = t.neighbor(s, nu, -1);
          const long smmu = t.neighbor(s, mu, -1);
          gth[static_cast<size_t>(mu)][static_cast<size_t>(s)] +=
              2.0 * w0 * c * (work.R.v[smnu] - work.R.v[s]);
          gth[static_cast<size_t>(nu)][static_cast<size_t>(s)] +=
              2.0 * w0 * c * (work.R.v[s] - work.R.v[smmu]);
        }
      }
      // (0,2) term through the four mixed planes
      if (t.complex_dim == 2) {
        const double frame = 2.0 / std::sqrt(t.metric_a[0] * t.metric_a[1]);
        const struct {
          int mu, nu;
          cplx kappa;
        } planes[4] = {{0, 2, {1, 0}}, {1, 3, {-1, 0}}, {0, 3, {0, 1}}, {1, 2, {0, 1}}};
        for (const auto& pl : planes) {
          const cplx coef = 0.25 * frame * pl.kappa * cplx(0, 1) / (t.h[pl.mu] * t.h[pl.nu]);
          for (long s = 0; s < t.nsites; ++s) {
            // A(s) = 8 w0 Re[conj(f02) coef]
            const double A = 8.0 * w0 * std::real(std::conj(work.f02.v[s]) * coef);
            const long smnu = t.neighbor(s, pl.nu, -1);
            const long smmu = t.neighbor(s, pl.mu, -1);
            gth[static_cast<size_t>(pl.mu)][static_cast<size_t>(s)] += A;
            gth[static_cast<size_t>(pl.nu)][static_cast<size_t>(s)] -= A;
            // neighbour plaquettes
            const double Amnu = 8.0 * w0 * std::real(std::conj(work.f02.v[smnu]) * coef);
            const double Ammu = 8.0 * w0 * std::real(std::conj(work.f02.v[smmu]) * coef);
            gth[static_cast<size_t>(pl.mu)][static_cast<size_t>(s)] -= Amnu;
            gth[static_cast<size_t>(pl.nu)][static_cast<size_t>(s)] += Ammu;
          }
        }
      }
      // holomorphic term, one-hop transport proxy for δD/δθ
      for (int j = 0; j < t.complex_dim; ++j) {
        const double nrm = 1.0 / std::sqrt(2.0 * t.metric_a[j]);
        for (int half = 0; half < 2; ++half) {
          const int d = 2 * j + half;
          const cplx unit = half == 0 ? cplx(1, 0) : cplx(0, 1);
          const double inv_h = 1.0 / t.h[d];
          for (long s = 0; s < t.nsites; ++s) {
            const long sn = t.neighbor(s, d, 1);
            const cplx hop = std::polar(1.0, work.gauge.angle(d, s)) * work.phi.v[sn] * inv_h;
            gth[static_cast<size_t>(d)][static_cast<size_t>(s)] +=
                8.0 * w0 * nrm *
                std::real(std::conj(work.w.comp[static_cast<size_t>(j)][static_cast<size_t>(s)]) * unit *
                          cplx(0, 1) * hop * nrm);
          }
        }
      }
      for (int d = 0; d < t.ndirs; ++d) filter(gth[static_cast<size_t>(d)], pth);
    }

    // ---- backtracking line search -----------------------------------------
    eps = std::min(eps * 1.3, 50.0);
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (int d = 0; d < t.ndirs; ++d)
        for (long s = 0; s < t.nsites; ++s)
          trial_g.angle(d, s) =
              work.gauge.angle(d, s) - eps * gth[static_cast<size_t>(d)][static_cast<size_t>(s)].real();
      for (long s = 0; s < t.nsites; ++s)
        trial_phi.v[s] = work.phi.v[s] - eps * gphi[static_cast<size_t>(s)];
      FlowWork probe{&t, trial_g, trial_phi, tau, nullptr, {}, RealField(t), RealField(t), CplxField(t)};
      FlowEval nxt = probe.eval(false);
      if (nxt.objective <= cur.objective * (1.0 - opts.armijo * std::min(eps, 1.0)) ||
          nxt.objective < cur.objective - 1e-18) {
        work.gauge = std::move(probe.gauge);
        work.phi = std::move(probe.phi);
        work.cd = probe.cd;
        work.w = std::move(probe.w);
        work.ilf = std::move(probe.ilf);
        work.R = std::move(probe.R);
        work.f02 = std::move(probe.f02);
        cur = nxt;
        accepted = true;
        break;
      }
      eps *= opts.backtrack;
      if (eps < 1e-16) break;
    }
    if (!accepted) {
      if (cur.sup_phi < opts.collapse_tol && cur.residual_total() > opts.tol) {
        rep.verdict = Verdict::NonExistence;
        rep.notes.push_back("field collapse at stalled line search");
      } else {
        rep.verdict = Verdict::MaxIters;
        rep.notes.push_back("line search stalled");
      }
      break;
    }
  }

  rep.final_residuals.r_holo = cur.r_holo;
  rep.final_residuals.r_02 = cur.r_02;
  rep.final_residuals.r_moment = cur.r_moment;
  double pns = 0.0;
  for (long s = 0; s < t.nsites; ++s) pns += std::norm(work.phi.v[s]);
  rep.phi_norm_sq = pns * t.site_weight;
  rep.wall_time_s = timer.seconds();
  if (!rep.converged && cur.residual_total() < opts.tol) {
    rep.converged = true;
    rep.verdict = Verdict::Solution;
  }
  return {FlowState{std::move(work.gauge), std::move(work.phi)}, std::move(rep)};
}

} // namespace vtx
