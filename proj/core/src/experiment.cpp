#include "vtx/experiment.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "vtx/checkpoint.hpp"
#include "vtx/operators.hpp"
#include "vtx/solvers.hpp"
#include "vtx/stability.hpp"
#include "vtx/swkahler.hpp"
#include "vtx/transforms.hpp"

#ifndef VORTEXLAB_VERSION
#define VORTEXLAB_VERSION "0.0.0"
#endif

namespace vtx {

using nlohmann::json;

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_config(const std::string& key, const std::string& what) {
  fail(ErrorKind::InvalidConfig, key + ": " + what);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

LatticeTorus torus_from(const json& j) {
  if (!j.contains("torus")) bad_config("torus", "missing block");
  const json& t = j.at("torus");
  const int dim = get_or<int>(t, "complex_dim", 1);
  std::vector<int> grid = t.at("grid").get<std::vector<int>>();
  std::vector<double> lengths =
      get_or<std::vector<double>>(t, "lengths", std::vector<double>(grid.size(), 1.0));
  return build_torus(dim, grid, lengths);
}

BundleSpec bundle_from(const json& j, const std::string& key, RoleTag role) {
  if (!j.contains(key)) bad_config(key, "missing block");
  const json& b = j.at(key);
  BundleSpec spec;
  spec.rank = get_or<int>(b, "rank", 1);
  spec.role = role;
  auto chern = get_or<std::vector<int>>(b, "chern", {0});
  if (chern.empty() || chern.size() > 2) bad_config(key + ".chern", "needs 1 or 2 entries");
  spec.chern[0] = chern[0];
  spec.chern[1] = chern.size() > 1 ? chern[1] : 0;
  return spec;
}

// Function parameters are finite Fourier-mode lists: band-limitedness is a
// config-level guarantee, never a grid sample.
RealField field_from_spec(const LatticeTorus& t, const json& spec, const std::string& key) {
  RealField out(t, get_or<double>(spec, "mean", 0.0));
  if (!spec.contains("modes")) return out;
  for (const json& m : spec.at("modes")) {
    auto k = m.at("k").get<std::vector<int>>();
    if (static_cast<int>(k.size()) != t.ndirs) bad_config(key, "mode k needs one entry per axis");
    for (int d = 0; d < t.ndirs; ++d)
      if (std::abs(k[static_cast<size_t>(d)]) >= t.grid[d] / 4)
        bad_config(key, "mode beyond Nyquist/2");
    const double amp = m.at("amp").get<double>();
    const double phase = get_or<double>(m, "phase", 0.0);
    for (long s = 0; s < t.nsites; ++s) {
      auto x = t.coords(s);
      double arg = phase;
      for (int d = 0; d < t.ndirs; ++d)
        arg += kTwoPi * k[static_cast<size_t>(d)] * x[d] / t.grid[d];
      out.v[s] += amp * std::cos(arg);
    }
  }
  return out;
}

std::optional<RealField> opt_field(const LatticeTorus& t, const json& params,
                                   const std::string& key) {
  if (!params.contains(key)) return std::nullopt;
  return field_from_spec(t, params.at(key), "params." + key);
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::Io, "cannot open " + tmp);
    f << content;
  }
  std::remove(path.c_str());
  if (std::rename(tmp.c_str(), path.c_str()) != 0) fail(ErrorKind::Io, "rename failed: " + path);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::string s = "iter,energy,residual_total,step\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", r.iter, r.energy, r.residual, r.step);
    s += buf;
  }
  atomic_write(path, s);
}

json report_residuals(const ResidualReport& r) {
  return json{{"r_holo", r.r_holo},
              {"r_02", r.r_02},
              {"r_moment", r.r_moment},
              {"r_second", r.r_second},
              {"total", r.total()}};
}

json report_solve(const SolveReport& rep) {
  json j;
  j["converged"] = rep.converged;
  j["verdict"] = verdict_name(rep.verdict);
  j["iterations"] = rep.iterations;
  j["wall_time_s"] = rep.wall_time_s;
  j["phi_norm_sq"] = rep.phi_norm_sq;
  j["residuals"] = report_residuals(rep.final_residuals);
  j["notes"] = rep.notes;
  return j;
}

SolveOptions solver_from(const json& j) {
  SolveOptions opts;
  if (!j.contains("solver")) return opts;
  const json& s = j.at("solver");
  opts.tol = get_or<double>(s, "tol", opts.tol);
  opts.max_iters = get_or<int>(s, "max_iters", opts.max_iters);
  opts.seed = get_or<std::uint64_t>(s, "seed", opts.seed);
  opts.backtrack = get_or<double>(s, "backtrack", opts.backtrack);
  opts.armijo = get_or<double>(s, "armijo", opts.armijo);
  opts.step0_scale = get_or<double>(s, "step0_scale", opts.step0_scale);
  opts.collapse_tol = get_or<double>(s, "collapse_tol", opts.collapse_tol);
  opts.plateau_window = get_or<int>(s, "plateau_window", opts.plateau_window);
  opts.plateau_rtol = get_or<double>(s, "plateau_rtol", opts.plateau_rtol);
  opts.trace_stride = get_or<int>(s, "trace_stride", opts.trace_stride);
  return opts;
}

json resolved_solver(const SolveOptions& o) {
  return json{{"tol", o.tol},
              {"max_iters", o.max_iters},
              {"seed", o.seed},
              {"backtrack", o.backtrack},
              {"armijo", o.armijo},
              {"step0_scale", o.step0_scale},
              {"collapse_tol", o.collapse_tol},
              {"plateau_window", o.plateau_window},
              {"plateau_rtol", o.plateau_rtol},
              {"trace_stride", o.trace_stride}};
}

int scan_workers(size_t entries) {
  int n = static_cast<int>(std::min<size_t>(entries, 4));
  n = std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
  if (const char* env = std::getenv("VORTEXLAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

char hexdigit(std::uint64_t v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex64(std::uint64_t v) {
  std::string s = "0x";
  for (int i = 15; i >= 0; --i) s += hexdigit(v >> (4 * i));
  return s;
}

struct Context {
  json config;
  fs::path out;
  SolveOptions opts;
};

// ---- individual experiments ------------------------------------------------

int run_solve_vortex(Context& ctx, json& results) {
  LatticeTorus torus = torus_from(ctx.config);
  BundleSpec spec = bundle_from(ctx.config, "bundle", RoleTag::L);
  const json params = get_or<json>(ctx.config, "params", json::object());
  const double tau = get_or<double>(params, "tau", 0.0);
  std::optional<RealField> t_field = opt_field(torus, params, "t");
  const std::string method =
      get_or<std::string>(get_or<json>(ctx.config, "solver", json::object()), "method", "newton");

  RealField t = t_field ? *t_field : RealField(torus, tau);
  results["t_mean"] = field_mean(t);

  SolveReport rep;
  RealField phi_abs2(torus);
  if (method == "newton") {
    GaugeField g = make_background(torus, spec);
    Section phi(torus, spec.rank, 0);
    bool restored = false;
    const json solver = get_or<json>(ctx.config, "solver", json::object());
    if (solver.contains("init_checkpoint")) {
      StateBundle st = load_checkpoint(solver.at("init_checkpoint").get<std::string>(), torus);
      if (st.gauge) g = *st.gauge;
      if (!st.sections.empty()) phi = st.sections[0];
      restored = true;
    }
    DbarData D = assemble_dbar(g);
    if (!restored) {
      HoloBasis hb = project_holomorphic(g, 1);
      phi = hb.sections[0];
      results["holo_residual"] = hb.residuals[0];
    }
    auto [H, r] = solve_metric_line(D, phi, t, ctx.opts);
    rep = std::move(r);
    for (long s = 0; s < torus.nsites; ++s)
      phi_abs2.v[s] = std::norm(phi.v[s]) * std::exp(2.0 * H.u.v[s]);
    if (get_or<bool>(get_or<json>(ctx.config, "output", json::object()), "checkpoint", false)) {
      StateBundle st;
      st.gauge = g;
      st.sections.push_back(phi);
      st.metric = H;
      save_checkpoint((ctx.out / "state.vtxf").string(), st);
    }
    emit_grid(H.u, (ctx.out / "u.csv").string(), "u");
  } else if (method == "flow") {
    const double amplitude =
        get_or<double>(get_or<json>(ctx.config, "solver", json::object()), "amplitude", 0.2);
    auto [g0, phi0] = random_state(torus, spec, ctx.opts.seed, amplitude);
    auto [state, r] = minimize_ymh(g0, phi0, tau, ctx.opts);
    rep = std::move(r);
    for (long s = 0; s < torus.nsites; ++s) phi_abs2.v[s] = std::norm(state.phi.v[s]);
    results["chern_after"] = chern_number(state.gauge)[0];
  } else {
    bad_config("solver.method", "expected 'newton' or 'flow'");
  }

  results["solve"] = report_solve(rep);
  write_trace_csv((ctx.out / "trace.csv").string(), rep.trace);
  emit_grid(phi_abs2, (ctx.out / "phi_abs2.csv").string(), "phi_abs2");
  if (rep.verdict == Verdict::Solution) return 0;
  if (rep.verdict == Verdict::NonExistence) return 2;
  return 1;
}

int run_solve_coupled(Context& ctx, json& results) {
  LatticeTorus torus = torus_from(ctx.config);
  BundleSpec spec_e = bundle_from(ctx.config, "bundle", RoleTag::E);
  BundleSpec spec_l = bundle_from(ctx.config, "bundle_l", RoleTag::L);
  const json params = get_or<json>(ctx.config, "params", json::object());
  std::optional<RealField> t = opt_field(torus, params, "t");
  std::optional<RealField> tp = opt_field(torus, params, "t_prime");
  if (!t) t = RealField(torus, get_or<double>(params, "tau", 0.0));
  if (!tp) tp = RealField(torus, get_or<double>(params, "tau_prime", 0.0));

  GaugeField ge = make_background(torus, spec_e);
  GaugeField gl = make_background(torus, spec_l);
  DbarData De = assemble_dbar(ge);
  DbarData Dl = assemble_dbar(gl);
  GaugeField hom = hom_gauge(ge, gl);
  // the near-kernel of ∂̄ on Hom(L,E) has the dimension of its degree
  const int holo_count = std::max(1, hom.spec.chern[0]);
  HoloBasis hb = project_holomorphic(hom, holo_count);
  results["holo_residual"] = hb.residuals[0];

  CoupledResult res = solve_coupled(De, Dl, hb.sections[0], *t, *tp, ctx.opts);
  results["solve"] = report_solve(res.report);
  results["sigma"] = sigma_from(field_mean(*t), field_mean(*tp));
  write_trace_csv((ctx.out / "trace.csv").string(), res.report.trace);
  if (res.report.verdict == Verdict::Solution) return 0;
  if (res.report.verdict == Verdict::NonExistence) return 2;
  return 1;
}

SplitModel stability_model_from(const json& j) {
  if (!j.contains("stability")) bad_config("stability", "missing block");
  const json& s = j.at("stability");
  SplitModel m;
  m.summand_degrees = s.at("summand_degrees").get<std::vector<long long>>();
  m.phi_support = get_or<std::vector<int>>(s, "phi_support", {});
  if (m.phi_support.empty())
    for (int i = 0; i < m.rank(); ++i) m.phi_support.push_back(i);
  m.phi_line_degree = get_or<long long>(s, "phi_line_degree", 0);
  if (m.phi_support.size() == 1)
    m.phi_line_degree = m.summand_degrees[static_cast<size_t>(m.phi_support[0])];
  m.validate();
  return m;
}

int run_scan_tau(Context& ctx, json& results) {
  LatticeTorus torus = torus_from(ctx.config);
  BundleSpec spec = bundle_from(ctx.config, "bundle", RoleTag::E);
  const json params = get_or<json>(ctx.config, "params", json::object());
  std::vector<double> taus = params.at("tau_grid").get<std::vector<double>>();

  GaugeField g = make_background(torus, spec);
  Section phi(torus, spec.rank, 0);
  std::optional<SplitModel> oracle;
  if (ctx.config.contains("stability")) oracle = stability_model_from(ctx.config);

  if (spec.rank == 1) {
    HoloBasis hb = project_holomorphic(g, 1);
    phi = hb.sections[0];
  } else {
    // split model: one line-bundle summand per component, distinct flat twists
    auto twists = get_or<std::vector<std::vector<double>>>(
        get_or<json>(ctx.config, "bundle", json::object()), "twists", {});
    for (int c = 1; c < spec.rank; ++c) {
      std::array<double, 4> ang{0.9 * c, 1.7 * c, 0.0, 0.0};
      if (static_cast<int>(twists.size()) > c)
        for (size_t d = 0; d < twists[static_cast<size_t>(c)].size() && d < 4; ++d)
          ang[d] = twists[static_cast<size_t>(c)][d];
      apply_constant_twist(g, c, ang);
    }
    const int nl = spec.chern[0] / spec.rank;
    for (int c = 0; c < spec.rank; ++c) {
      GaugeField line = make_background(torus, BundleSpec{1, {nl, 0}, RoleTag::L});
      if (c > 0) {
        std::array<double, 4> ang{0.9 * c, 1.7 * c, 0.0, 0.0};
        if (static_cast<int>(twists.size()) > c)
          for (size_t d = 0; d < twists[static_cast<size_t>(c)].size() && d < 4; ++d)
            ang[d] = twists[static_cast<size_t>(c)][d];
        for (int d = 0; d < torus.ndirs; ++d)
          for (long s = 0; s < torus.nsites; ++s) line.angle(d, s) += ang[static_cast<size_t>(d)];
      }
      HoloBasis hb = project_holomorphic(line, 1);
      for (long s = 0; s < torus.nsites; ++s) phi.site(s)[c] = hb.sections[0].v[s];
    }
  }

  // boundary margin check against the oracle interval
  if (oracle) {
    AdmissibleInterval iv = admissible_interval(*oracle);
    for (double tau : taus) {
      auto near = [&](const Rational& edge) {
        const double e = static_cast<double>(edge.num) / static_cast<double>(edge.den);
        return std::abs(tau - e) < 0.05;
      };
      if ((!iv.lo_unbounded && near(iv.lo)) || (!iv.hi_unbounded && near(iv.hi)))
        bad_config("params.tau_grid", "value within 0.05 of a stability boundary");
    }
    results["oracle_interval"] = iv.str();
  }

  DbarData D = assemble_dbar(g);
  ScanModel model{&D, phi, std::nullopt};
  const json sp = get_or<json>(ctx.config, "params", json::object());
  if (sp.contains("t_profile")) {
    RealField prof = field_from_spec(torus, sp.at("t_profile"), "params.t_profile");
    const double m = field_mean(prof);
    for (auto& x : prof.v) x -= m;
    model.t_profile = std::move(prof);
  }

  // parallel over entries, reports assembled in grid order
  std::vector<ScanRow> rows(taus.size());
  const int workers = scan_workers(taus.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= taus.size()) return;
      std::vector<double> one{taus[i]};
      rows[i] = tau_scan(model, one, ctx.opts)[0];
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::string csv = "tau,verdict,stable_oracle,phi_norm_sq,residual,iterations\n";
  bool all_match = true;
  json jrows = json::array();
  for (const auto& row : rows) {
    std::string oracle_col = "-";
    if (oracle) {
      // exact rational τ for the oracle where the grid value allows it
      const long long num = std::llround(row.tau * 1000000.0);
      StabilityVerdict v = pair_stable(*oracle, Rational(num, 1000000));
      oracle_col = v.stable ? "stable" : "unstable";
      const bool solver_says = row.verdict == Verdict::Solution;
      if (solver_says != v.stable) all_match = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.10g,%s,%s,%.10g,%.10g,%d\n", row.tau,
                  verdict_name(row.verdict), oracle_col.c_str(), row.phi_norm_sq, row.residual,
                  row.iterations);
    csv += buf;
    jrows.push_back(json{{"tau", row.tau},
                         {"verdict", verdict_name(row.verdict)},
                         {"oracle", oracle_col},
                         {"phi_norm_sq", row.phi_norm_sq},
                         {"residual", row.residual},
                         {"iterations", row.iterations}});
  }
  atomic_write((ctx.out / "scan.csv").string(), csv);
  results["rows"] = jrows;
  results["oracle_match"] = all_match;
  return all_match ? 0 : 1;
}

int run_check_identities(Context& ctx, json& results) {
  LatticeTorus torus = torus_from(ctx.config);
  BundleSpec spec = bundle_from(ctx.config, "bundle", RoleTag::L);
  const json params = get_or<json>(ctx.config, "params", json::object());
  const double tau = get_or<double>(params, "tau", 2.0);
  const int nseeds = get_or<int>(params, "seeds", 5);
  const double amplitude = get_or<double>(params, "amplitude", 0.2);

  // convention lock on 10 band-limited samples
  GaugeField g = make_background(torus, spec);
  DbarData D = assemble_dbar(g);
  double lock_err = 0.0;
  for (int i = 0; i < 10; ++i) {
    RealField u = random_band_limited(torus, ctx.opts.seed + 100 + i, 0.4);
    MetricField h0 = MetricField::unit(torus, 1);
    MetricField h1 = h0;
    for (long s = 0; s < torus.nsites; ++s) h1.u.v[s] = u.v[s] / 2.0;
    RealField i0 = i_lambda_f_scalar(chern_metric_curvature(D, h0));
    RealField i1 = i_lambda_f_scalar(chern_metric_curvature(D, h1));
    RealField du = laplace(torus, u);
    for (long s = 0; s < torus.nsites; ++s)
      lock_err = std::max(lock_err, std::abs(i1.v[s] - i0.v[s] - du.v[s]));
  }
  results["convention_lock_sup"] = lock_err;

  double poisson_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    RealField f = random_band_limited(torus, ctx.opts.seed + 200 + i, 1.0);
    const double m = field_mean(f);
    for (auto& x : f.v) x -= m;
    RealField u = poisson_solve(torus, f);
    RealField back = laplace(torus, u);
    for (long s = 0; s < torus.nsites; ++s)
      poisson_err = std::max(poisson_err, std::abs(back.v[s] - f.v[s]));
  }
  results["poisson_roundtrip_sup"] = poisson_err;

  std::vector<double> gaps;
  for (int i = 0; i < nseeds; ++i) {
    auto [gg, phi] = random_state(torus, spec, ctx.opts.seed + i, amplitude);
    gaps.push_back(energy_identity_gap(gg, phi, tau, true));
  }
  double mean = 0.0;
  for (double x : gaps) mean += x;
  mean /= static_cast<double>(gaps.size());
  double sd = 0.0;
  for (double x : gaps) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(gaps.size()));
  results["gap_mean"] = mean;
  results["gap_std"] = sd;
  results["gap_expected"] = 2.0 * kTwoPi * tau * degree_of(torus, spec);
  return 0;
}

int run_stability(Context& ctx, json& results) {
  SplitModel m = stability_model_from(ctx.config);
  const json& s = ctx.config.at("stability");
  json verdicts = json::array();
  if (s.contains("tau_list")) {
    for (const json& jt : s.at("tau_list")) {
      Rational tau(jt.at(0).get<long long>(), jt.at(1).get<long long>());
      StabilityVerdict v = s.contains("deg_l")
                               ? triple_stable(m, s.at("deg_l").get<long long>(), tau)
                               : pair_stable(m, tau);
      verdicts.push_back(json::parse(v.to_json()));
    }
  }
  results["verdicts"] = verdicts;
  std::optional<long long> dl;
  if (s.contains("deg_l")) dl = s.at("deg_l").get<long long>();
  results["admissible_interval"] = admissible_interval(m, dl).str();
  return 0;
}

int run_transform_u(Context& ctx, json& results) {
  LatticeTorus torus = torus_from(ctx.config);
  const json params = get_or<json>(ctx.config, "params", json::object());
  if (!params.contains("t")) bad_config("params.t", "transform-u needs a t field spec");
  RealField t = field_from_spec(torus, params.at("t"), "params.t");
  UTransform ut = u_from_t(torus, t);
  results["tau"] = ut.tau;
  results["residual_sup"] = ut.residual;
  results["u_mean"] = field_mean(ut.u);
  emit_grid(ut.u, (ctx.out / "u.csv").string(), "u");
  return 0;
}

int run_sw_decouple(Context& ctx, json& results) {
  LatticeTorus torus = torus_from(ctx.config);
  const json sw = get_or<json>(ctx.config, "sw", json::object());
  DecouplingConfig cfg;
  cfg.torus = &torus;
  cfg.kind = get_or<std::string>(sw, "kind", "fixed") == "coupled" ? SwKind::Coupled : SwKind::FixedB;
  cfg.f_mean = get_or<double>(sw, "f_mean", 0.0);
  cfg.f_prime_mean = get_or<double>(sw, "f_prime_mean", -cfg.f_mean);
  cfg.chern_l = get_or<int>(sw, "chern_l", 0);
  cfg.seeds = get_or<int>(sw, "seeds", 5);
  cfg.amplitude = get_or<double>(sw, "amplitude", 0.3);
  cfg.opts = ctx.opts;
  DecouplingReport rep = decoupling_experiment(cfg);
  results["decoupling"] = json::parse(rep.to_json());
  return rep.all_agree ? 0 : 1;
}

} // namespace

void emit_grid(const RealField& field, const std::string& path, const std::string& name) {
  const LatticeTorus& t = *field.torus;
  std::string s = "# field=" + name + " complex_dim=" + std::to_string(t.complex_dim) + " grid=";
  for (int d = 0; d < t.ndirs; ++d) s += (d ? "," : "") + std::to_string(t.grid[d]);
  s += " lengths=";
  char buf[64];
  for (int d = 0; d < t.ndirs; ++d) {
    std::snprintf(buf, sizeof(buf), "%s%.12g", d ? "," : "", t.lengths[d]);
    s += buf;
  }
  s += "\n";
  const int ncols = t.grid[t.ndirs - 1];
  for (long i = 0; i < t.nsites; ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", field.v[i]);
    s += buf;
    s += (i % ncols == ncols - 1) ? '\n' : ',';
  }
  atomic_write(path, s);
}

RunResult run_experiment_json(const std::string& config_json, const RunOverrides& ov) {
  RunResult out;
  json config;
  json results;
  std::string experiment = "?";
  fs::path outdir = ".";
  try {
    config = json::parse(config_json);
    if (!config.contains("experiment")) bad_config("experiment", "missing key");
    experiment = config.at("experiment").get<std::string>();

    if (ov.seed) config["solver"]["seed"] = *ov.seed;
    if (ov.out_dir) config["output"]["dir"] = *ov.out_dir;
    outdir = get_or<std::string>(get_or<json>(config, "output", json::object()), "dir", ".");
    fs::create_directories(outdir);

    SolveOptions opts = solver_from(config);
    json extra = get_or<json>(config, "solver", json::object());
    config["solver"] = resolved_solver(opts);
    for (auto& [k, v] : extra.items())
      if (!config.at("solver").contains(k)) config["solver"][k] = v; // method, init_checkpoint
    Context ctx{config, outdir, opts};

    int code = 1;
    if (experiment == "solve-vortex") code = run_solve_vortex(ctx, results);
    else if (experiment == "solve-coupled") code = run_solve_coupled(ctx, results);
    else if (experiment == "scan-tau") code = run_scan_tau(ctx, results);
    else if (experiment == "check-identities") code = run_check_identities(ctx, results);
    else if (experiment == "stability") code = run_stability(ctx, results);
    else if (experiment == "transform-u") code = run_transform_u(ctx, results);
    else if (experiment == "sw-decouple") code = run_sw_decouple(ctx, results);
    else bad_config("experiment", "unknown experiment '" + experiment + "'");
    out.exit_code = code;
  } catch (const Error& e) {
    results["error"] = error_kind_name(e.kind);
    results["error_message"] = e.what();
    out.exit_code = 1;
  } catch (const json::exception& e) {
    results["error"] = "InvalidConfig";
    results["error_message"] = e.what();
    out.exit_code = 1;
  }

  json report;
  report["experiment"] = experiment;
  report["config"] = config;
  report["code_version"] = VORTEXLAB_VERSION;
  // the Δ symbol table pins the sign/normalisation conventions of every run
  try {
    LatticeTorus torus = torus_from(config);
    report["delta_symbol_hash"] = hex64(hash_doubles(laplace_symbol_table(torus)));
  } catch (...) {
    report["delta_symbol_hash"] = nullptr;
  }
  report["results"] = results;
  out.report_json = report.dump(2);
  try {
    fs::create_directories(outdir);
    out.report_path = (outdir / "report.json").string();
    atomic_write(out.report_path, out.report_json);
  } catch (...) {
    // report is still returned in-memory when the filesystem is unavailable
  }
  return out;
}

RunResult run_experiment_file(const std::string& config_path, const RunOverrides& ov) {
  std::ifstream f(config_path);
  if (!f) {
    RunResult r;
    r.exit_code = 1;
    r.report_json = std::string("{\"error\":\"Io\",\"error_message\":\"cannot open ") +
                    config_path + "\"}";
    return r;
  }
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return run_experiment_json(content, ov);
}

} // namespace vtx
