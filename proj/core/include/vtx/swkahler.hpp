#pragma once

#include "vtx/solvers.hpp"

namespace vtx {

// Spinor on a Kähler T⁴: φ the 0-form part, β the (0,2) part (coefficient in
// the unit-norm frame of dz̄₁∧dz̄₂), both valued in the same bundle.
struct SpinorPair {
  Section phi;
  Section beta;
};

// self-dual form in the ω/(2,0)/(0,2) split; scalar is the ω-coefficient,
// comp20/comp02 the unit-frame coefficients. Pointwise norm weights the
// ω slot by |ω|² = 2.
struct SelfDualForm {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  MatField scalar, comp20, comp02;
};

// i(Ψ⊗Ψ*)₀ in the equation normalisation: scalar = i(φφ* − Λ²ββ*),
// comp02 = β⊗φ*, comp20 = −φ⊗β*.
SelfDualForm quadratic_form(const SpinorPair& psi);

enum class SwKind { FixedB, Coupled };

struct SwState {
  const GaugeField* A = nullptr; // connection on E
  const GaugeField* b = nullptr; // connection on the spin^c line bundle L
  const SpinorPair* psi = nullptr;
};

// Residuals of the Kähler monopole systems as displayed: the Dirac part in
// r_holo, the (0,2)/(2,0) equations in r_02, the ΛF equation in r_moment;
// r_second carries the b-equation (coupled) or the frozen-b integrability
// defect (fixed). The coupled kind enforces the f/f' integral constraint.
ResidualReport sw_residuals(SwKind kind, const SwState& state, const ParamSet& params);

struct SwEnergy {
  double direct = 0.0;
  double expanded = 0.0;
  double gap = 0.0;
  // the cross terms of the coupled functional, for the pairing identity
  double cross_a = 0.0;      // ⟨F⁺_A, iQ⟩
  double cross_b_half = 0.0; // ½⟨F⁺_b, 2iTrQ⟩
  double cross_ab = 0.0;     // ⟨F⁺_{A,b}, iQ⟩
};

// Seiberg–Witten functional and its Bochner–Weitzenböck expansion on flat
// T⁴ (a synthetic scalar-curvature field may be supplied for the s-term).
// Abelian only; the Dirac operator carries the √2 normalisation that makes
// the expansion exact.
SwEnergy sw_functional(const SwState& state, const ParamSet& params, SwKind kind,
                       const RealField* s_synth = nullptr);

struct DecouplingConfig {
  const LatticeTorus* torus = nullptr;
  SwKind kind = SwKind::FixedB;
  double f_mean = 0.0;
  double f_prime_mean = 0.0; // coupled only; checked against the constraint
  int chern_l = 0;           // frozen/variable b topology (even for the square root)
  int seeds = 5;
  double amplitude = 0.3;
  SolveOptions opts;
};

struct DecouplingSeedRow {
  std::uint64_t seed = 0;
  std::string branch;
  double norm_phi = 0.0, norm_beta = 0.0;
  double ratio = 0.0;       // min/max of the two norms
  double sup_product = 0.0; // sup |φ||β| / (sup|φ|·sup|β| + 1)
  double residual = 0.0;
  int iterations = 0;
};

struct DecouplingReport {
  std::string predicted; // "phi", "beta" or "reducible"
  bool all_agree = false;
  std::vector<DecouplingSeedRow> rows;
  std::string to_json() const;
};

// Minimises the monopole-system residual functional from seeded starts and
// reports the achieved branch against the slope/mean prediction.
DecouplingReport decoupling_experiment(const DecouplingConfig& config);

} // namespace vtx
