#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vtx/error.hpp"

namespace vtx {

// Exact rational arithmetic for the stability oracle; no floating point.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n) : num(n), den(1) {}
  Rational(long long n, long long d);

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  bool operator<(const Rational& o) const;
  bool operator>(const Rational& o) const { return o < *this; }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator<=(const Rational& o) const { return *this < o || *this == o; }
  bool operator>=(const Rational& o) const { return o <= *this; }
  std::string str() const;
};

Rational slope(long long deg, int rank);

// Split bundle model: each summand a line bundle of the given degree. The
// subsheaf catalog is every sub-sum of summands plus the saturated line
// subsheaf generated by φ (declared degree); exact for rank ≤ 2 split models
// on an elliptic-curve base and a lower bound on instability above that.
struct SplitModel {
  std::vector<long long> summand_degrees;
  std::vector<int> phi_support;   // indices of summands with nonzero component
  long long phi_line_degree = 0;  // 0 for nowhere-vanishing φ across ≥ 2 summands
  std::string genus_tag = "elliptic";

  int rank() const { return static_cast<int>(summand_degrees.size()); }
  long long degree() const;
  void validate() const;
};

struct Witness {
  std::string candidate;
  int condition = 0; // 1: subsheaf slope too big; 2: quotient slope too small
  Rational lhs, rhs;
};

struct StabilityVerdict {
  bool stable = false;
  std::optional<Witness> witness;
  std::string to_json() const;
};

StabilityVerdict pair_stable(const SplitModel& model, const Rational& tau);

// triple (E, L, φ): stable iff the pair (E⊗L*, φ) is (τ − deg L)-stable
StabilityVerdict triple_stable(const SplitModel& model, long long deg_l, const Rational& tau);

struct ExtensionCandidate {
  int r1 = 0, r2 = 0;
  long long d1 = 0, d2 = 0;
  int rank() const { return r1 + r2; }
  long long degree() const { return d1 + d2; }
};

struct ExtensionModel {
  ExtensionCandidate total; // r1/d1 the sub, r2/d2 the quotient
  std::vector<ExtensionCandidate> candidates;

  // candidate list always carries the sub E1 and the total E
  static ExtensionModel basic(int r1, long long d1, int r2, long long d2);
};

Rational alpha_slope(const ExtensionCandidate& c, const Rational& alpha);

// α ≤ 0 is the regime of the correspondence; α > 0 is evaluated but flagged.
struct ExtensionVerdict {
  bool stable = false;
  bool outside_theorem_scope = false;
  std::optional<Witness> witness;
};
ExtensionVerdict extension_alpha_stable(const ExtensionModel& model, const Rational& alpha);

struct AdmissibleInterval {
  bool empty = false;
  bool lo_unbounded = false, hi_unbounded = false;
  Rational lo, hi; // open interval (lo, hi) where bounded
  std::string str() const;
  bool contains(const Rational& tau) const;
};

AdmissibleInterval admissible_interval(const SplitModel& model,
                                       std::optional<long long> deg_l = std::nullopt);

} // namespace vtx
