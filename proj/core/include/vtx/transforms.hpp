#pragma once

#include "vtx/functionals.hpp"

namespace vtx {

// u solves Δu = τ − t with τ = t̄ and ∫u = 0; carries the re-application
// residual so callers can see the solve quality.
struct UTransform {
  RealField u;
  double tau = 0.0;
  RealField t;
  double residual = 0.0;
};

UTransform u_from_t(const LatticeTorus& torus, const RealField& t);

// forward: (K, φ_u) = (H e^u, e^{-u/2} φ); backward inverts exactly.
std::pair<MetricField, Section> apply_u_transform(const MetricField& H, const Section& phi,
                                                  const RealField& u, bool forward);

// ‖∂̄(φ_u) + ½(∂̄u)·φ_u‖ — the defect of the u-twisted section.
double dbar_defect(const DbarData& D, const Section& phi, const RealField& u);

struct HatBundle {
  BundleSpec spec; // chern = (chern K + chern L)/2
};

// L̂ = (K⊗L)^{1/2}; ParityError when K⊗L has odd chern.
HatBundle hat_bundle(const BundleSpec& spec_l, const BundleSpec& spec_k);

// half-sum of link angles: curvature(Â) = ½(curvature(A) + curvature(a_K)).
// a_K may be null on flat tori (the metric connection is flat there).
GaugeField hat_links(const GaugeField& a, const GaugeField* a_k);

enum class PerturbationMode { ScalarCurvature, FrameCurvature };

// t = f − s/2, or t = f + (i/2)ΛF_b with an integrable frame connection b.
RealField parameter_from_perturbation(PerturbationMode mode, const RealField& f,
                                      const RealField* s, const GaugeField* b);

double sigma_from(double tau, double tau_prime);

} // namespace vtx
