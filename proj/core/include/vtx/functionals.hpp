#pragma once

#include <optional>
#include <string>

#include "vtx/operators.hpp"

namespace vtx {

// Parameters of the equation systems. Constants live in tau/tau_prime; the
// function-valued variants in the optional fields. Means are taken as
// (1/2π)∫, matching the Vol(X) = 2π normalisation.
struct ParamSet {
  double tau = 0.0;
  double tau_prime = 0.0;
  std::optional<RealField> t, t_prime, f, f_prime, s;
  std::optional<double> sigma;

  double t_mean() const { return t ? field_mean(*t) : tau; }
  double t_prime_mean() const { return t_prime ? field_mean(*t_prime) : tau_prime; }
  double f_mean() const { return f ? field_mean(*f) : 0.0; }
  double f_prime_mean() const { return f_prime ? field_mean(*f_prime) : 0.0; }
};

enum class SystemKind {
  VE_ABELIAN,
  NAVE,
  TMVE,
  CVE,
  TMCVE,
  FVE,
  SW_KAHLER_FIXED,
  SW_KAHLER_COUPLED,
};

struct ResidualReport {
  double r_holo = 0.0;
  double r_02 = 0.0;
  double r_moment = 0.0;
  double r_second = 0.0;
  double total() const;
  std::string to_json() const;
};

// Optional handles; residuals() raises MissingField naming whatever the kind
// requires and the state lacks.
struct SystemState {
  const DbarData* dbar = nullptr;      // E-bundle ∂̄ data
  const DbarData* dbar2 = nullptr;     // second bundle (L)
  const DbarData* dbar_hom = nullptr;  // Hom(L,E) composite, assembled by caller
  const GaugeField* frozen = nullptr;  // framed frozen connection
  const Section* phi = nullptr;
  const Section* beta = nullptr;
  const MetricField* H = nullptr;
  const MetricField* K = nullptr;
};

double ymh(const DbarData& D, const Section& phi, double tau);
double ymh(const GaugeField& g, const Section& phi, double tau);

// YMH minus its Kähler-identity rewriting; analytically the topological
// constant (4πτ·deg E on complex curves).
double energy_identity_gap(const GaugeField& g, const Section& phi, double tau,
                           bool dealias = true);

ResidualReport residuals(SystemKind kind, const SystemState& state, const ParamSet& params);

struct Degrees {
  double deg_e = 0.0;
  double deg_l = 0.0;
  int rank_e = 1;
};
struct ConstraintResult {
  bool ok = true;
  double violation = 0.0;
};
ConstraintResult constraint_check(SystemKind kind, const ParamSet& params, const Degrees& d);

// extension variant: ∫(r₁t₁ + r₂t₂) = deg E in mean form
ConstraintResult extension_constraint(int r1, double t1_mean, int r2, double t2_mean,
                                      double deg_e);

// μ = ΛF_H − iφ⊗φ^{*K}; K defaults to H. Vortex states sit in μ = −iτI.
MatField moment_map(const DbarData& D, const Section& phi, const MetricField& H,
                    const MetricField* K = nullptr);
double moment_map_level_norm(const MatField& mu, double tau);

// pointwise φ⊗φ^{*H} (endomorphism field) and the scalar |φ|²_H
MatField phi_phi_star(const Section& phi, const MetricField& H);
RealField phi_norm_sq_pointwise(const Section& phi, const MetricField& H);

} // namespace vtx
