#pragma once

#include <memory>

#include "vtx/bundle.hpp"

namespace vtx {

// Curvature data of a lattice gauge field. lambda_f is the skew-Hermitian
// contraction ΛF; f20/f02 hold the (2,0)/(0,2) coefficients in unit-norm
// frames (complex_dim 2 only). plane_f keeps the coordinate components
// F_{μν} = log(plaquette)/(h_μ h_ν) for each axis pair μ<ν.
struct CurvatureDecomp {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  MatField lambda_f;
  MatField f20, f02;
  std::vector<MatField> plane_f; // indexed by plane_index(mu,nu)
};

int plane_index(int mu, int nu, int ndirs); // mu < nu

CurvatureDecomp curvature(const GaugeField& g);

// Per-axis covariant spectral derivative: the principal matrix log of the
// one-hop covariant translation, diagonalised line by line through the
// holonomy twist. Anti-Hermitian in the lattice L² inner product; reduces to
// the plain spectral derivative on identity links.
class CovariantDeriv {
public:
  CovariantDeriv(const GaugeField& g, bool adjoint_rep);

  // in/out: site-major blocks of length dim()
  void apply(int axis, const cplx* in, cplx* out) const;
  int dim() const { return dim_; }
  const LatticeTorus& torus() const { return *torus_; }

private:
  const LatticeTorus* torus_;
  int dim_;
  // per axis: site-major dim x dim line-gauge matrices, and per-line holonomy
  // eigenvector/eigenphase tables
  std::array<std::vector<cplx>, 4> gauge_;
  std::array<std::vector<cplx>, 4> hol_vec_;   // [line * dim*dim]
  std::array<std::vector<double>, 4> hol_phase_; // [line * dim]
  std::array<bool, 4> trivial_{};
  void apply_general(int axis, const cplx* in, cplx* out) const;
};

// ∂̄ operator data assembled once per gauge field and reused.
struct DbarData {
  const LatticeTorus* torus = nullptr;
  BundleSpec spec;
  GaugeField gauge;
  std::shared_ptr<const CovariantDeriv> fund;
  std::shared_ptr<const CovariantDeriv> adj; // endomorphism rep, rank > 1
  CurvatureDecomp base;                      // curvature of the reference metric
};

DbarData assemble_dbar(const GaugeField& g);

// (0,q)-form components in unit-norm frames, one C^r plane per component.
struct FormComponents {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  std::vector<std::vector<cplx>> comp; // each of size nsites*rank
};

// unit-frame complex derivative (D_x + sign_i·iD_y)/√(2a_j) on dim-blocked data
void covariant_complex_deriv(const CovariantDeriv& cd, int complex_axis, int sign_i,
                             const cplx* in, cplx* out);

FormComponents dbar_cov(const DbarData& D, const Section& phi); // d̄_j φ
FormComponents d10_cov(const DbarData& D, const Section& phi);  // d_j φ
// ∂̄* on (0,1) data -> section values
Section dbar_adj(const DbarData& D, const FormComponents& w);
// ∂̄* on a (0,2) coefficient section -> (0,1) components (T⁴)
FormComponents dbar_adj02(const DbarData& D, const Section& beta);
// Kähler Dirac residual components: ∂̄φ + ∂̄*β
FormComponents dirac_op(const DbarData& D, const Section& phi, const Section& beta);
// (0,2) coefficient of ∂̄ acting on (0,1) data (T⁴)
Section dbar_on01(const DbarData& D, const FormComponents& w);

double form_norm_sq(const LatticeTorus& t, const FormComponents& w);
double section_norm_sq(const Section& s);

// Full covariant derivative energy ‖d_A φ‖² = ‖∂φ‖² + ‖∂̄φ‖².
double d_cov_energy(const DbarData& D, const Section& phi);

// Chern curvature of (∂̄_E, H): fixed background contribution plus the
// ∂̄(H⁻¹∂H) part of the trivial factor.
CurvatureDecomp chern_metric_curvature(const DbarData& D, const MetricField& H);

// iΛF as a Hermitian matrix field (real field view for rank 1 callers).
RealField i_lambda_f_scalar(const CurvatureDecomp& c);

// Δ := iΛ∂̄∂ on functions; fixed by the conformal-change identity.
RealField laplace(const LatticeTorus& t, const RealField& u);
std::vector<double> laplace_symbol_table(const LatticeTorus& t);
// unique mean-zero u with Δu = rhs (spectral); NonZeroMean if ∫rhs ≠ 0
RealField poisson_solve(const LatticeTorus& t, const RealField& rhs);

} // namespace vtx
