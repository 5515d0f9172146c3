#include "vtx/stability.hpp"

#include <algorithm>
#include <numeric>

namespace vtx {

Rational::Rational(long long n, long long d) {
  if (d == 0) fail(ErrorKind::InvalidConfig, "rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const long long g = std::gcd(n < 0 ? -n : n, d);
  num = g ? n / g : n;
  den = g ? d / g : d;
}

Rational Rational::operator+(const Rational& o) const {
  return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
  return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const { return Rational(num * o.num, den * o.den); }
Rational Rational::operator/(const Rational& o) const {
  if (o.num == 0) fail(ErrorKind::InvalidConfig, "division by zero rational");
  return Rational(num * o.den, den * o.num);
}
bool Rational::operator<(const Rational& o) const { return num * o.den < o.num * den; }

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational slope(long long deg, int rank) {
  if (rank < 1) fail(ErrorKind::InvalidConfig, "slope needs rank >= 1");
  return Rational(deg, rank);
}

long long SplitModel::degree() const {
  long long d = 0;
  for (long long x : summand_degrees) d += x;
  return d;
}

void SplitModel::validate() const {
  if (summand_degrees.empty()) fail(ErrorKind::InvalidConfig, "model needs at least one summand");
  if (phi_support.empty()) fail(ErrorKind::InvalidConfig, "phi_support must be nonempty");
  long long dmax = summand_degrees[static_cast<size_t>(phi_support[0])];
  for (int i : phi_support) {
    if (i < 0 || i >= rank()) fail(ErrorKind::InvalidConfig, "phi_support index out of range");
    dmax = std::max(dmax, summand_degrees[static_cast<size_t>(i)]);
  }
  // the saturation of φ injects into every summand sum containing its support
  if (phi_line_degree > dmax)
    fail(ErrorKind::InvalidConfig, "phi_line_degree exceeds the enclosing summand degrees");
  if (phi_support.size() == 1 &&
      phi_line_degree != summand_degrees[static_cast<size_t>(phi_support[0])])
    fail(ErrorKind::InvalidConfig, "single-summand phi saturates to that summand");
}

namespace {

struct Candidate {
  std::string desc;
  long long deg = 0;
  int rank = 0;
  bool contains_phi = false;
};

std::vector<Candidate> candidate_catalog(const SplitModel& m) {
  m.validate();
  const int r = m.rank();
  std::vector<Candidate> out;
  // every nonempty sub-sum of summands
  for (unsigned mask = 1; mask < (1u << r); ++mask) {
    Candidate c;
    bool support_in = true;
    for (int i = 0; i < r; ++i) {
      if (mask & (1u << i)) {
        c.deg += m.summand_degrees[static_cast<size_t>(i)];
        ++c.rank;
        c.desc += (c.desc.empty() ? "O(" : ")+O(") + std::to_string(m.summand_degrees[static_cast<size_t>(i)]);
      }
    }
    c.desc += ")";
    for (int i : m.phi_support)
      if (!(mask & (1u << i))) support_in = false;
    c.contains_phi = support_in;
    out.push_back(std::move(c));
  }
  // the saturated line subsheaf generated by φ
  Candidate line;
  line.desc = "phi-line(" + std::to_string(m.phi_line_degree) + ")";
  line.deg = m.phi_line_degree;
  line.rank = 1;
  line.contains_phi = true;
  out.push_back(std::move(line));
  return out;
}

} // namespace

std::string StabilityVerdict::to_json() const {
  std::string s = "{\"stable\":";
  s += stable ? "true" : "false";
  if (witness) {
    s += ",\"witness\":{\"candidate\":\"" + witness->candidate + "\",\"condition\":" +
         std::to_string(witness->condition) + ",\"lhs\":\"" + witness->lhs.str() + "\",\"rhs\":\"" +
         witness->rhs.str() + "\"}";
  }
  s += "}";
  return s;
}

StabilityVerdict pair_stable(const SplitModel& model, const Rational& tau) {
  StabilityVerdict v;
  const auto catalog = candidate_catalog(model);
  const int r = model.rank();
  const long long deg = model.degree();
  for (const auto& c : catalog) {
    // condition (1): μ(E') < τ for every subsheaf in the catalog
    const Rational mu = slope(c.deg, c.rank);
    if (!(mu < tau)) {
      v.stable = false;
      v.witness = Witness{c.desc, 1, mu, tau};
      return v;
    }
  }
  for (const auto& c : catalog) {
    // condition (2): μ(E/E'') > τ for every φ-containing E'' (E itself excluded)
    if (!c.contains_phi || c.rank == r) continue;
    const Rational muq = slope(deg - c.deg, r - c.rank);
    if (!(muq > tau)) {
      v.stable = false;
      v.witness = Witness{"E/(" + c.desc + ")", 2, muq, tau};
      return v;
    }
  }
  v.stable = true;
  return v;
}

StabilityVerdict triple_stable(const SplitModel& model, long long deg_l, const Rational& tau) {
  SplitModel shifted = model;
  for (auto& d : shifted.summand_degrees) d -= deg_l;
  shifted.phi_line_degree -= deg_l;
  return pair_stable(shifted, tau - Rational(deg_l));
}

ExtensionModel ExtensionModel::basic(int r1, long long d1, int r2, long long d2) {
  ExtensionModel m;
  m.total = {r1, r2, d1, d2};
  m.candidates.push_back({r1, 0, d1, 0}); // the sub E1
  m.candidates.push_back({r1, r2, d1, d2}); // the total E
  return m;
}

Rational alpha_slope(const ExtensionCandidate& c, const Rational& alpha) {
  const Rational mu = slope(c.degree(), c.rank());
  return mu + alpha * Rational(c.r2, c.rank());
}

ExtensionVerdict extension_alpha_stable(const ExtensionModel& model, const Rational& alpha) {
  ExtensionVerdict v;
  v.outside_theorem_scope = Rational(0) < alpha;
  if (model.candidates.empty()) fail(ErrorKind::InvalidConfig, "candidate list empty");
  const Rational mu_total = alpha_slope(model.total, alpha);
  for (const auto& c : model.candidates) {
    if (c.rank() == 0) fail(ErrorKind::InvalidConfig, "zero-rank candidate");
    if (c.rank() == model.total.rank() && c.degree() == model.total.degree()) continue; // non-trivial only
    const Rational mu = alpha_slope(c, alpha);
    if (!(mu < mu_total)) {
      v.stable = false;
      v.witness = Witness{"sub(r1'=" + std::to_string(c.r1) + ",d1'=" + std::to_string(c.d1) +
                              ",r2'=" + std::to_string(c.r2) + ",d2'=" + std::to_string(c.d2) + ")",
                          1, mu, mu_total};
      return v;
    }
  }
  v.stable = true;
  return v;
}

std::string AdmissibleInterval::str() const {
  if (empty) return "empty";
  std::string s = "(";
  s += lo_unbounded ? "-inf" : lo.str();
  s += ", ";
  s += hi_unbounded ? "+inf" : hi.str();
  s += ")";
  return s;
}

bool AdmissibleInterval::contains(const Rational& tau) const {
  if (empty) return false;
  if (!lo_unbounded && !(lo < tau)) return false;
  if (!hi_unbounded && !(tau < hi)) return false;
  return true;
}

AdmissibleInterval admissible_interval(const SplitModel& model, std::optional<long long> deg_l) {
  SplitModel m = model;
  long long shift = deg_l.value_or(0);
  for (auto& d : m.summand_degrees) d -= shift;
  m.phi_line_degree -= shift;

  const auto catalog = candidate_catalog(m);
  const int r = m.rank();
  const long long deg = m.degree();
  AdmissibleInterval out;
  out.lo_unbounded = true;
  out.hi_unbounded = true;
  for (const auto& c : catalog) {
    const Rational mu = slope(c.deg, c.rank); // need τ > μ
    if (out.lo_unbounded || out.lo < mu) {
      out.lo = mu;
      out.lo_unbounded = false;
    }
  }
  for (const auto& c : catalog) {
    if (!c.contains_phi || c.rank == r) continue;
    const Rational muq = slope(deg - c.deg, r - c.rank); // need τ < μ_q
    if (out.hi_unbounded || muq < out.hi) {
      out.hi = muq;
      out.hi_unbounded = false;
    }
  }
  if (!out.lo_unbounded && !out.hi_unbounded && !(out.lo < out.hi)) out.empty = true;
  if (!out.empty && deg_l) {
    // report in the original τ variable
    if (!out.lo_unbounded) out.lo = out.lo + Rational(shift);
    if (!out.hi_unbounded) out.hi = out.hi + Rational(shift);
  }
  return out;
}

} // namespace vtx
