#pragma once

#include <cstdint>
#include <optional>

#include "vtx/functionals.hpp"

namespace vtx {

struct SolveOptions {
  double tol = 1e-8;
  int max_iters = 20000;
  double backtrack = 0.5;     // step shrink factor
  double armijo = 1e-4;       // sufficient-decrease constant
  double step0_scale = 1.0;   // scales the ε₀ = 0.1/(1+τ) default
  double collapse_tol = 1e-6; // min-field collapse threshold
  int plateau_window = 250;
  double plateau_rtol = 1e-3;
  std::uint64_t seed = 1;
  bool record_trace = true;
  int trace_stride = 1;
};

enum class Verdict { Solution, NonExistence, MaxIters };
const char* verdict_name(Verdict v);

struct TraceRow {
  int iter = 0;
  double energy = 0.0;
  double residual = 0.0;
  double step = 0.0;
};

struct SolveReport {
  bool converged = false;
  Verdict verdict = Verdict::MaxIters;
  ResidualReport final_residuals;
  std::vector<TraceRow> trace;
  double wall_time_s = 0.0;
  int iterations = 0;
  double phi_norm_sq = 0.0; // ∫|φ|² in the metric the solver worked with
  std::vector<std::string> notes;
};

struct FlowState {
  GaugeField gauge;
  Section phi;
};

// Gradient descent with backtracking on the Kähler-rewritten energy
// 4‖F^{0,2}‖² + 4‖∂̄_Aφ‖² + ‖iΛF + φφ* − τI‖² (the YMH functional minus its
// topological constant), over abelian link angles and the section.
std::pair<FlowState, SolveReport> minimize_ymh(const GaugeField& g0, const Section& phi0,
                                               double tau, const SolveOptions& opts);

// Newton iteration on u for the scalar reduction Δ(2u) + iΛF₀ + |φ|²e^{2u} = t.
std::pair<MetricField, SolveReport> solve_metric_line(const DbarData& D, const Section& phi,
                                                      const RealField& t, const SolveOptions& opts);

// Congruence-safe heat flow H ← X†HX, X = exp(−½ε·precond(R_H)), with a
// Newton–Krylov stage at stalls, adaptive ε and slope-collapse detection.
// warm_start seeds the flow (continuation across nearby parameters).
std::pair<MetricField, SolveReport> solve_metric_matrix(const DbarData& D, const Section& phi,
                                                        const RealField& t,
                                                        const SolveOptions& opts,
                                                        const MetricField* warm_start = nullptr);

struct CoupledResult {
  MetricField H, K;
  SolveReport report;
};

// Coupled metrics on (E, L) with φ ∈ Hom(L,E); the constraint
// r·t̄ + t̄' = deg E + deg L is rejected up front when violated.
CoupledResult solve_coupled(const DbarData& E, const DbarData& L, const Section& phi,
                            const RealField& t, const RealField& t_prime,
                            const SolveOptions& opts);

struct ScanModel {
  const DbarData* dbar = nullptr;
  Section phi;
  std::optional<RealField> t_profile; // zero-mean profile added to each τ
};

struct ScanRow {
  double tau = 0.0;
  Verdict verdict = Verdict::MaxIters;
  double phi_norm_sq = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

std::vector<ScanRow> tau_scan(const ScanModel& model, const std::vector<double>& taus,
                              const SolveOptions& opts);

// Donaldson-type energy of the metric flow: its gradient is the moment
// residual, so it decreases monotonically along solve_metric_matrix steps
// even where ‖R‖ does not.
double metric_flow_energy(const DbarData& D, const MetricField& H, const Section& phi,
                          const RealField& t);

// Shared scalar Kazdan–Warner core: minimise the convex energy of
// Δv + Q e^v = g by damped Newton. Also used by the coupled solver.
struct KwResult {
  RealField v;
  bool converged = false;
  Verdict verdict = Verdict::MaxIters;
  double residual = 0.0;
  int iterations = 0;
  std::vector<TraceRow> trace;
};
KwResult newton_kw(const LatticeTorus& torus, const RealField& q, const RealField& g,
                   const SolveOptions& opts);

} // namespace vtx
