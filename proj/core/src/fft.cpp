#include "vtx/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace vtx::fft {

namespace {

std::mutex g_plan_mutex;

using PlanKey = std::tuple<std::vector<int>, int, int, int, int>; // dims, sign, howmany, stride, dist

std::map<PlanKey, fftw_plan>& plan_cache() {
  static std::map<PlanKey, fftw_plan> cache;
  return cache;
}

fftw_plan get_plan(const std::vector<int>& dims, int sign, int howmany, int stride, int dist) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  PlanKey key{dims, sign, howmany, stride, dist};
  auto& cache = plan_cache();
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  // Plan with a scratch buffer; FFTW_UNALIGNED lets the plan run on any array.
  long n = 1;
  for (int d : dims) n *= d;
  long total = static_cast<long>(howmany - 1) * dist + (n - 1) * static_cast<long>(stride) + 1;
  std::vector<cplx> scratch(static_cast<size_t>(total));
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p = fftw_plan_many_dft(static_cast<int>(dims.size()), dims.data(), howmany, buf,
                                   nullptr, stride, dist, buf, nullptr, stride, dist, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

void execute(fftw_plan p, cplx* data) {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, buf, buf);
}

} // namespace

void nd_dims(const int* dims, int ndim, cplx* data, int sign) {
  std::vector<int> d(dims, dims + ndim);
  fftw_plan p = get_plan(d, sign, 1, 1, 0);
  execute(p, data);
}

void nd(const LatticeTorus& t, cplx* data, int sign) {
  std::vector<int> dims(t.grid.begin(), t.grid.begin() + t.ndirs);
  fftw_plan p = get_plan(dims, sign, 1, 1, 0);
  execute(p, data);
}

void axis(const LatticeTorus& t, int ax, cplx* data, int sign) {
  const int m = t.grid[ax];
  const long s = t.stride[ax];
  // Row-major layout: sites decompose as outer * (m*s) + j*s + inner.
  const long block = static_cast<long>(m) * s;
  const long nouter = t.nsites / block;
  std::vector<int> dims{m};
  fftw_plan p = get_plan(dims, sign, static_cast<int>(s), static_cast<int>(s), 1);
  for (long o = 0; o < nouter; ++o) execute(p, data + o * block);
}

} // namespace vtx::fft
