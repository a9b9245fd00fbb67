// Compiled with -mavx2 (and without -mfma); only reached after a runtime CPU check.
#include <immintrin.h>

#include "vidmem/kernels.hpp"

namespace vidmem::kernels::avx2 {

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t blocked = n - n % 4;
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < blocked; i += 4) {
    const __m256d va = _mm256_loadu_pd(a.data() + i);
    const __m256d vb = _mm256_loadu_pd(b.data() + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (std::size_t i = blocked; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out) {
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = dot(matrix.subspan(r * dim, dim), query);
  }
}

}  // namespace vidmem::kernels::avx2
