#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "vtx/error.hpp"

namespace vtx {

using cplx = std::complex<double>;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Flat lattice torus, volume normalised to 2π. complex_dim 1 lives on two real
// axes, complex_dim 2 on four. Spectral wave-number tables are precomputed per
// axis; the metric coefficient a_j per complex axis carries the normalisation.
struct LatticeTorus {
  int complex_dim = 1;
  int ndirs = 2;
  std::array<int, 4> grid{};
  std::array<double, 4> lengths{};
  double vol_scale = 1.0; // product of metric coefficients a_j

  long nsites = 0;
  std::array<long, 4> stride{};
  std::array<double, 4> h{};        // grid spacing per axis
  std::array<double, 2> metric_a{}; // metric coefficient per complex axis
  double site_weight = 0.0;         // dvol carried by one site (= 2π / nsites)

  std::array<std::vector<double>, 4> kappa; // principal phase 2πk/M per mode
  std::array<std::vector<double>, 4> lam;   // kappa / h : spectral wavenumber

  long index(const std::array<int, 4>& x) const {
    long s = 0;
    for (int d = 0; d < ndirs; ++d) s += static_cast<long>(x[d]) * stride[d];
    return s;
  }
  std::array<int, 4> coords(long s) const {
    std::array<int, 4> x{};
    for (int d = 0; d < ndirs; ++d) {
      x[d] = static_cast<int>((s / stride[d]) % grid[d]);
    }
    return x;
  }
  long neighbor(long s, int d, int step) const {
    int xd = static_cast<int>((s / stride[d]) % grid[d]);
    int yd = (xd + step) % grid[d];
    if (yd < 0) yd += grid[d];
    return s + static_cast<long>(yd - xd) * stride[d];
  }
  // metric coefficient of the complex axis that real axis d belongs to
  double axis_a(int d) const { return metric_a[d / 2]; }

  bool same_shape(const LatticeTorus& o) const {
    return complex_dim == o.complex_dim && grid == o.grid && lengths == o.lengths;
  }
};

LatticeTorus build_torus(int complex_dim, const std::vector<int>& grid,
                         const std::vector<double>& side_lengths);

// Internal variant without the even/size checks (used for dealiasing grids).
LatticeTorus build_torus_unchecked(int complex_dim, const std::vector<int>& grid,
                                   const std::vector<double>& side_lengths);

struct RealField {
  const LatticeTorus* torus = nullptr;
  std::vector<double> v;

  RealField() = default;
  explicit RealField(const LatticeTorus& t, double fill = 0.0)
      : torus(&t), v(static_cast<size_t>(t.nsites), fill) {}
};

struct CplxField {
  const LatticeTorus* torus = nullptr;
  std::vector<cplx> v;

  CplxField() = default;
  explicit CplxField(const LatticeTorus& t, cplx fill = {})
      : torus(&t), v(static_cast<size_t>(t.nsites), fill) {}
};

// r x r complex matrix per site, column-major blocks (Eigen layout).
struct MatField {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  std::vector<cplx> v;

  MatField() = default;
  MatField(const LatticeTorus& t, int r)
      : torus(&t), rank(r), v(static_cast<size_t>(t.nsites) * r * r, cplx{}) {}
  cplx* block(long s) { return v.data() + static_cast<size_t>(s) * rank * rank; }
  const cplx* block(long s) const { return v.data() + static_cast<size_t>(s) * rank * rank; }
  bool empty() const { return v.empty(); }
};

double integrate(const LatticeTorus& t, const std::vector<double>& field);
double integrate(const RealField& f);
cplx integrate(const CplxField& f);

// (1/2π) ∫ f — the mean in the Vol = 2π normalisation.
double field_mean(const RealField& f);

double norm_sq(const RealField& f);
double norm_sq(const CplxField& f);

// 3/2-rule padded torus for dealiased quadrature of low-order products.
LatticeTorus padded_torus(const LatticeTorus& t);

// Spectral interpolation of a field onto a finer grid of the same torus.
CplxField pad_field(const CplxField& f, const LatticeTorus& dst);
RealField pad_field(const RealField& f, const LatticeTorus& dst);
MatField pad_field(const MatField& f, const LatticeTorus& dst);

// Plain spectral derivative along real axis d (identity-link special case).
CplxField spectral_derivative(const CplxField& f, int axis);

// FNV-1a hash of a double table (used to stamp reports with the Δ symbol).
std::uint64_t hash_doubles(const std::vector<double>& v);

} // namespace vtx
