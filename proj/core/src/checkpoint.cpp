#include "vtx/checkpoint.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vtx {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'X', 'F'};
constexpr std::uint32_t kVersion = 1;

enum BlockKind : std::uint32_t {
  kGaugeAngles = 0,
  kGaugeTriv = 1,
  kSection = 2,
  kMetricLog = 3,
  kMetricMat = 4,
};

void put_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void put_i32(std::ofstream& f, std::int32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ofstream& f, std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64s(std::ofstream& f, const double* p, std::uint64_t n) {
  f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

std::uint32_t get_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  if (!f) fail(ErrorKind::CorruptCheckpoint, "truncated header");
  return v;
}
std::int32_t get_i32(std::ifstream& f) {
  std::int32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  if (!f) fail(ErrorKind::CorruptCheckpoint, "truncated header");
  return v;
}
std::uint64_t get_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  if (!f) fail(ErrorKind::CorruptCheckpoint, "truncated block header");
  return v;
}
void get_f64s(std::ifstream& f, double* p, std::uint64_t n, const char* what) {
  f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
  if (!f) fail(ErrorKind::CorruptCheckpoint, std::string("truncated block: ") + what);
}

} // namespace

void save_checkpoint(const std::string& path, const StateBundle& state) {
  const LatticeTorus* torus = nullptr;
  int rank = 1;
  std::array<int, 2> chern{0, 0};
  if (state.gauge) {
    torus = state.gauge->torus;
    rank = state.gauge->spec.rank;
    chern = state.gauge->spec.chern;
  } else if (!state.sections.empty()) {
    torus = state.sections[0].torus;
    rank = state.sections[0].rank;
  } else if (state.metric) {
    torus = state.metric->torus;
    rank = state.metric->rank;
  } else {
    fail(ErrorKind::InvalidConfig, "empty state bundle");
  }

  const std::string tmp = path + ".tmp";
  std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot open " + tmp);
  f.write(kMagic, 4);
  put_u32(f, kVersion);
  put_u32(f, static_cast<std::uint32_t>(torus->complex_dim));
  for (int d = 0; d < 4; ++d) put_u32(f, static_cast<std::uint32_t>(d < torus->ndirs ? torus->grid[d] : 0));
  put_u32(f, static_cast<std::uint32_t>(rank));
  put_i32(f, chern[0]);
  put_i32(f, chern[1]);

  std::uint32_t nblocks = 0;
  if (state.gauge) nblocks += state.gauge->has_triv() ? 2 : 1;
  nblocks += static_cast<std::uint32_t>(state.sections.size());
  if (state.metric) ++nblocks;
  put_u32(f, nblocks);

  if (state.gauge) {
    put_u32(f, kGaugeAngles);
    put_u64(f, state.gauge->det_angle.size());
    put_f64s(f, state.gauge->det_angle.data(), state.gauge->det_angle.size());
    if (state.gauge->has_triv()) {
      put_u32(f, kGaugeTriv);
      put_u64(f, 2 * state.gauge->triv.size());
      put_f64s(f, reinterpret_cast<const double*>(state.gauge->triv.data()),
               2 * state.gauge->triv.size());
    }
  }
  for (const Section& s : state.sections) {
    put_u32(f, kSection);
    put_u64(f, 2 * s.v.size() + 1);
    const double deg = s.form_degree;
    put_f64s(f, &deg, 1);
    put_f64s(f, reinterpret_cast<const double*>(s.v.data()), 2 * s.v.size());
  }
  if (state.metric) {
    if (state.metric->rank == 1) {
      put_u32(f, kMetricLog);
      put_u64(f, state.metric->u.v.size());
      put_f64s(f, state.metric->u.v.data(), state.metric->u.v.size());
    } else {
      put_u32(f, kMetricMat);
      put_u64(f, 2 * state.metric->mat.v.size());
      put_f64s(f, reinterpret_cast<const double*>(state.metric->mat.v.data()),
               2 * state.metric->mat.v.size());
    }
  }
  f.close();
  if (!f) fail(ErrorKind::Io, "write failed: " + tmp);
  std::remove(path.c_str());
  if (std::rename(tmp.c_str(), path.c_str()) != 0) fail(ErrorKind::Io, "rename failed: " + path);
}

StateBundle load_checkpoint(const std::string& path, const LatticeTorus& torus) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorKind::CorruptCheckpoint, "bad magic");
  if (get_u32(f) != kVersion) fail(ErrorKind::CorruptCheckpoint, "unsupported version");
  const auto cdim = get_u32(f);
  if (static_cast<int>(cdim) != torus.complex_dim)
    fail(ErrorKind::CorruptCheckpoint, "complex_dim mismatch");
  for (int d = 0; d < 4; ++d) {
    const auto g = get_u32(f);
    const std::uint32_t expect = d < torus.ndirs ? static_cast<std::uint32_t>(torus.grid[d]) : 0u;
    if (g != expect) fail(ErrorKind::CorruptCheckpoint, "grid mismatch");
  }
  const int rank = static_cast<int>(get_u32(f));
  std::array<int, 2> chern{get_i32(f), get_i32(f)};
  const auto nblocks = get_u32(f);

  StateBundle out;
  for (std::uint32_t b = 0; b < nblocks; ++b) {
    const auto kind = get_u32(f);
    const auto len = get_u64(f);
    switch (kind) {
      case kGaugeAngles: {
        GaugeField g;
        g.torus = &torus;
        g.spec = BundleSpec{rank, chern, RoleTag::E};
        if (len != static_cast<std::uint64_t>(torus.ndirs) * torus.nsites)
          fail(ErrorKind::CorruptCheckpoint, "gauge angle block size");
        g.det_angle.resize(len);
        get_f64s(f, g.det_angle.data(), len, "gauge angles");
        out.gauge = std::move(g);
        break;
      }
      case kGaugeTriv: {
        if (!out.gauge) fail(ErrorKind::CorruptCheckpoint, "trivial part without angles");
        const std::uint64_t expect =
            2ull * torus.ndirs * torus.nsites * static_cast<std::uint64_t>(rank) * rank;
        if (len != expect) fail(ErrorKind::CorruptCheckpoint, "trivial block size");
        out.gauge->triv.resize(len / 2);
        get_f64s(f, reinterpret_cast<double*>(out.gauge->triv.data()), len, "gauge matrices");
        if (max_unitarity_defect(*out.gauge) > 1e-12)
          fail(ErrorKind::CorruptCheckpoint, "restored links are not unitary");
        break;
      }
      case kSection: {
        const std::uint64_t values = 2ull * torus.nsites * static_cast<std::uint64_t>(rank);
        if (len != values + 1) fail(ErrorKind::CorruptCheckpoint, "section block size");
        double deg = 0;
        get_f64s(f, &deg, 1, "section degree");
        Section s(torus, rank, static_cast<int>(deg));
        get_f64s(f, reinterpret_cast<double*>(s.v.data()), values, "section values");
        out.sections.push_back(std::move(s));
        break;
      }
      case kMetricLog: {
        if (len != static_cast<std::uint64_t>(torus.nsites))
          fail(ErrorKind::CorruptCheckpoint, "metric block size");
        MetricField m = MetricField::unit(torus, 1);
        get_f64s(f, m.u.v.data(), len, "metric log");
        out.metric = std::move(m);
        break;
      }
      case kMetricMat: {
        const std::uint64_t expect = 2ull * torus.nsites * static_cast<std::uint64_t>(rank) * rank;
        if (len != expect) fail(ErrorKind::CorruptCheckpoint, "metric block size");
        MetricField m = MetricField::unit(torus, rank);
        get_f64s(f, reinterpret_cast<double*>(m.mat.v.data()), len, "metric matrices");
        for (long s = 0; s < torus.nsites; ++s) {
          Eigen::Map<const Eigen::MatrixXcd> h(m.mat.block(s), rank, rank);
          Eigen::LLT<Eigen::MatrixXcd> llt(h);
          if (llt.info() != Eigen::Success)
            fail(ErrorKind::CorruptCheckpoint, "restored metric is not positive definite");
        }
        out.metric = std::move(m);
        break;
      }
      default:
        fail(ErrorKind::CorruptCheckpoint, "unknown block kind");
    }
  }
  return out;
}

} // namespace vtx
