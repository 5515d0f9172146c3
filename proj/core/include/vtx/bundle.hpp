#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "vtx/geometry.hpp"

namespace vtx {

enum class RoleTag { E, L, L0, Lhat };

// chern[0] is the first Chern number of det on T²; on T⁴ the pair holds the
// two independent ω-plane windings. Rank > 1 bundles are an abelian
// constant-curvature line factor tensored with a topologically trivial rank-r
// part, so det-chern must be divisible by rank.
struct BundleSpec {
  int rank = 1;
  std::array<int, 2> chern{0, 0};
  RoleTag role = RoleTag::E;
};

// Lattice gauge field. The abelian line factor is stored as a phase per link
// (det_angle); the trivial rank-r part as unitary r x r matrices (rank > 1
// only). Full link = e^{i·det_angle} · triv.
struct GaugeField {
  const LatticeTorus* torus = nullptr;
  BundleSpec spec;
  std::vector<double> det_angle;  // [dir * nsites + site]
  std::vector<cplx> triv;         // [ (dir*nsites + site) * r*r ], empty for rank 1

  double angle(int d, long s) const { return det_angle[static_cast<size_t>(d) * torus->nsites + s]; }
  double& angle(int d, long s) { return det_angle[static_cast<size_t>(d) * torus->nsites + s]; }
  const cplx* triv_block(int d, long s) const {
    return triv.data() + (static_cast<size_t>(d) * torus->nsites + s) * spec.rank * spec.rank;
  }
  cplx* triv_block(int d, long s) {
    return triv.data() + (static_cast<size_t>(d) * torus->nsites + s) * spec.rank * spec.rank;
  }
  bool has_triv() const { return !triv.empty(); }
};

// Matter section: values in C^r per site. form_degree 0 or 2; the (0,2) case
// stores the scalar coefficient in the unit-norm frame of dz̄₁∧dz̄₂ (T⁴ only).
struct Section {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  int form_degree = 0;
  std::vector<cplx> v; // [site * rank + c]

  Section() = default;
  Section(const LatticeTorus& t, int r, int deg = 0)
      : torus(&t), rank(r), form_degree(deg), v(static_cast<size_t>(t.nsites) * r, cplx{}) {
    if (deg != 0 && deg != 2) fail(ErrorKind::InvalidConfig, "form_degree must be 0 or 2");
    if (deg == 2 && t.complex_dim != 2)
      fail(ErrorKind::InvalidConfig, "(0,2) sections need complex_dim 2");
  }
  cplx* site(long s) { return v.data() + static_cast<size_t>(s) * rank; }
  const cplx* site(long s) const { return v.data() + static_cast<size_t>(s) * rank; }
};

// Positive Hermitian metric field relative to the unit reference background.
// rank 1 stores the log scale u with H = e^{2u}; rank > 1 the full matrix.
struct MetricField {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  RealField u;
  MatField mat;

  static MetricField unit(const LatticeTorus& t, int r) {
    MetricField m;
    m.torus = &t;
    m.rank = r;
    if (r == 1) {
      m.u = RealField(t, 0.0);
    } else {
      m.mat = MatField(t, r);
      for (long s = 0; s < t.nsites; ++s)
        for (int i = 0; i < r; ++i) m.mat.block(s)[i * r + i] = 1.0;
    }
    return m;
  }
};

GaugeField make_background(const LatticeTorus& torus, const BundleSpec& spec);

// Winding of the det plaquette phases per ω-plane; exact integers, gauge
// invariant, guarded against the branch cut.
std::array<int, 2> chern_number(const GaugeField& g);

// Multiply the trivial-part links of one summand by constant phases (a flat
// twist); used to build split models whose line factors are non-isomorphic.
void apply_constant_twist(GaugeField& g, int component, const std::array<double, 4>& angles);

std::pair<GaugeField, Section> random_state(const LatticeTorus& torus, const BundleSpec& spec,
                                            std::uint64_t seed, double amplitude);

// Smooth band-limited real field with sup-norm `amplitude` (deterministic).
RealField random_band_limited(const LatticeTorus& torus, std::uint64_t seed, double amplitude);

struct GaugeTransform {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  std::vector<cplx> g; // site-major r x r unitary
};
GaugeTransform random_gauge_transform(const LatticeTorus& torus, int rank, std::uint64_t seed);
GaugeField apply_gauge(const GaugeField& field, const GaugeTransform& t);
Section apply_gauge(const Section& phi, const GaugeTransform& t);

struct HoloBasis {
  std::vector<Section> sections;      // L²-orthonormal under integrate
  std::vector<double> residuals;      // ‖∂̄_A φ_i‖
  std::vector<double> singular_values; // count+1 smallest singular values of ∂̄_A
};

// The `count` smallest right singular vectors of the discrete ∂̄_A operator
// (inverse subspace iteration; the dense SVD lives in the tests as the
// independent oracle).
HoloBasis project_holomorphic(const GaugeField& g, int count);

double degree_of(const LatticeTorus& torus, const BundleSpec& spec);
double max_unitarity_defect(const GaugeField& g);

// Links of Hom(L,E) = E ⊗ L* for a line bundle L: the line factors subtract.
GaugeField hom_gauge(const GaugeField& e, const GaugeField& l);

} // namespace vtx
