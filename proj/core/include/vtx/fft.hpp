#pragma once

#include "vtx/geometry.hpp"

namespace vtx::fft {

// Unnormalised transforms; callers divide by the mode count after a backward
// pass. Plans are cached behind a mutex, execution is serial and
// deterministic.
void nd(const LatticeTorus& t, cplx* data, int sign);
void nd_dims(const int* dims, int ndim, cplx* data, int sign);
void axis(const LatticeTorus& t, int ax, cplx* data, int sign);

inline void scale(cplx* data, long n, double s) {
  for (long i = 0; i < n; ++i) data[i] *= s;
}

} // namespace vtx::fft
