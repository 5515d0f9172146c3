#include "vtx/geometry.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "vtx/fft.hpp"

namespace vtx {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::OddGrid: return "OddGrid";
    case ErrorKind::Mismatch: return "Mismatch";
    case ErrorKind::NearBranchCut: return "NearBranchCut";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::NonPositiveMetric: return "NonPositiveMetric";
    case ErrorKind::NonZeroMean: return "NonZeroMean";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::ConstraintViolation: return "ConstraintViolation";
    case ErrorKind::NonIntegrableFrame: return "NonIntegrableFrame";
    case ErrorKind::ParityError: return "ParityError";
    case ErrorKind::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::Io: return "Io";
  }
  return "Error";
}

namespace {

double wrap_pi(double x) {
  // principal value in (-π, π]
  x = std::fmod(x, kTwoPi);
  if (x <= -kTwoPi / 2) x += kTwoPi;
  if (x > kTwoPi / 2) x -= kTwoPi;
  return x;
}

LatticeTorus make(int complex_dim, const std::vector<int>& grid,
                  const std::vector<double>& lengths, bool checked) {
  if (complex_dim != 1 && complex_dim != 2)
    fail(ErrorKind::InvalidConfig, "complex_dim must be 1 or 2");
  const int nd = 2 * complex_dim;
  if (static_cast<int>(grid.size()) != nd)
    fail(ErrorKind::InvalidConfig, "grid needs one entry per real axis");
  if (static_cast<int>(lengths.size()) != nd)
    fail(ErrorKind::InvalidConfig, "side_lengths needs one entry per real axis");

  LatticeTorus t;
  t.complex_dim = complex_dim;
  t.ndirs = nd;
  double vol_coord = 1.0;
  for (int d = 0; d < nd; ++d) {
    if (checked && (grid[d] % 2 != 0 || grid[d] < 8))
      fail(ErrorKind::OddGrid, "grid counts must be even and >= 8");
    if (grid[d] < 2) fail(ErrorKind::OddGrid, "grid count too small");
    if (!(lengths[d] > 0)) fail(ErrorKind::InvalidConfig, "side lengths must be positive");
    t.grid[d] = grid[d];
    t.lengths[d] = lengths[d];
    vol_coord *= lengths[d];
  }
  t.vol_scale = kTwoPi / vol_coord;
  if (complex_dim == 1) {
    t.metric_a = {t.vol_scale, 0.0};
  } else {
    const double a = std::sqrt(t.vol_scale);
    t.metric_a = {a, a};
  }
  t.nsites = 1;
  for (int d = 0; d < nd; ++d) t.nsites *= grid[d];
  // row-major strides
  for (int d = 0; d < nd; ++d) {
    long s = 1;
    for (int e = d + 1; e < nd; ++e) s *= grid[e];
    t.stride[d] = s;
  }
  for (int d = 0; d < nd; ++d) {
    t.h[d] = lengths[d] / grid[d];
    t.kappa[d].resize(grid[d]);
    t.lam[d].resize(grid[d]);
    for (int k = 0; k < grid[d]; ++k) {
      t.kappa[d][k] = wrap_pi(kTwoPi * k / grid[d]);
      t.lam[d][k] = t.kappa[d][k] / t.h[d];
    }
  }
  t.site_weight = kTwoPi / static_cast<double>(t.nsites);
  return t;
}

} // namespace

LatticeTorus build_torus(int complex_dim, const std::vector<int>& grid,
                         const std::vector<double>& side_lengths) {
  return make(complex_dim, grid, side_lengths, true);
}

LatticeTorus build_torus_unchecked(int complex_dim, const std::vector<int>& grid,
                                   const std::vector<double>& side_lengths) {
  return make(complex_dim, grid, side_lengths, false);
}

double integrate(const LatticeTorus& t, const std::vector<double>& field) {
  if (static_cast<long>(field.size()) != t.nsites)
    fail(ErrorKind::Mismatch, "field size does not match torus");
  // fixed-order reduction keeps results bit-identical across thread counts
  double s = 0.0;
  for (double x : field) s += x;
  return s * t.site_weight;
}

double integrate(const RealField& f) { return integrate(*f.torus, f.v); }

cplx integrate(const CplxField& f) {
  if (static_cast<long>(f.v.size()) != f.torus->nsites)
    fail(ErrorKind::Mismatch, "field size does not match torus");
  cplx s{};
  for (cplx x : f.v) s += x;
  return s * f.torus->site_weight;
}

double field_mean(const RealField& f) { return integrate(f) / kTwoPi; }

double norm_sq(const RealField& f) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  return s * f.torus->site_weight;
}

double norm_sq(const CplxField& f) {
  double s = 0.0;
  for (cplx x : f.v) s += std::norm(x);
  return s * f.torus->site_weight;
}

LatticeTorus padded_torus(const LatticeTorus& t) {
  std::vector<int> grid(t.ndirs);
  std::vector<double> lengths(t.ndirs);
  for (int d = 0; d < t.ndirs; ++d) {
    grid[d] = (3 * t.grid[d]) / 2;
    lengths[d] = t.lengths[d];
  }
  return build_torus_unchecked(t.complex_dim, grid, lengths);
}

namespace {

// copy spectrum of src (dims ms) into dst (dims md >= ms), preserving the
// signed mode identification k and -k
void copy_spectrum(const LatticeTorus& src, const std::vector<cplx>& shat, const LatticeTorus& dst,
                   std::vector<cplx>& dhat) {
  std::array<int, 4> k{};
  const int nd = src.ndirs;
  std::fill(dhat.begin(), dhat.end(), cplx{});
  for (long s = 0; s < src.nsites; ++s) {
    auto x = src.coords(s);
    long ds = 0;
    bool keep = true;
    for (int d = 0; d < nd; ++d) {
      int m = src.grid[d];
      int kk = x[d] <= m / 2 ? x[d] : x[d] - m; // signed mode
      if (kk == m / 2 && m % 2 == 0) {
        // Nyquist: keep at +m/2 slot in dst
      }
      int slot = kk >= 0 ? kk : kk + dst.grid[d];
      if (slot < 0 || slot >= dst.grid[d]) { keep = false; break; }
      ds += static_cast<long>(slot) * dst.stride[d];
      k[d] = kk;
    }
    (void)k;
    if (keep) dhat[static_cast<size_t>(ds)] = shat[static_cast<size_t>(s)];
  }
}

} // namespace

CplxField pad_field(const CplxField& f, const LatticeTorus& dst) {
  const LatticeTorus& src = *f.torus;
  std::vector<cplx> shat = f.v;
  fft::nd(src, shat.data(), -1);
  fft::scale(shat.data(), src.nsites, 1.0 / static_cast<double>(src.nsites));
  CplxField out(dst);
  copy_spectrum(src, shat, dst, out.v);
  fft::nd(dst, out.v.data(), +1);
  return out;
}

RealField pad_field(const RealField& f, const LatticeTorus& dst) {
  CplxField c(*f.torus);
  for (long s = 0; s < f.torus->nsites; ++s) c.v[s] = f.v[s];
  CplxField p = pad_field(c, dst);
  RealField out(dst);
  for (long s = 0; s < dst.nsites; ++s) out.v[s] = p.v[s].real();
  return out;
}

MatField pad_field(const MatField& f, const LatticeTorus& dst) {
  const LatticeTorus& src = *f.torus;
  const int rr = f.rank * f.rank;
  MatField out(dst, f.rank);
  CplxField plane(src);
  for (int e = 0; e < rr; ++e) {
    for (long s = 0; s < src.nsites; ++s) plane.v[s] = f.v[static_cast<size_t>(s) * rr + e];
    CplxField p = pad_field(plane, dst);
    for (long s = 0; s < dst.nsites; ++s) out.v[static_cast<size_t>(s) * rr + e] = p.v[s];
  }
  return out;
}

CplxField spectral_derivative(const CplxField& f, int axis) {
  const LatticeTorus& t = *f.torus;
  CplxField out = f;
  fft::nd(t, out.v.data(), -1);
  for (long s = 0; s < t.nsites; ++s) {
    int k = static_cast<int>((s / t.stride[axis]) % t.grid[axis]);
    out.v[s] *= cplx(0.0, t.lam[axis][k]);
  }
  fft::nd(t, out.v.data(), +1);
  fft::scale(out.v.data(), t.nsites, 1.0 / static_cast<double>(t.nsites));
  return out;
}

std::uint64_t hash_doubles(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffull;
      h *= 1099511628211ull;
    }
  }
  return h;
}

} // namespace vtx
