#include "vidmem/kernels.hpp"

#include <atomic>

#include "vidmem/error.hpp"

namespace vidmem::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(VIDMEM_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

void check_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
                std::span<double> out) {
  if (dim == 0 || query.size() != dim || matrix.size() != out.size() * dim) {
    throw ContractError("dot_rows: matrix/query/output shapes disagree");
  }
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2:
      return "avx2";
    case Isa::scalar:
      break;
  }
  return "scalar";
}

Isa detected_isa() {
  static const Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

Isa set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2) isa = Isa::scalar;
  active().store(isa, std::memory_order_relaxed);
  return isa;
}

namespace scalar {

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t blocked = n - n % 4;
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  for (std::size_t i = 0; i < blocked; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  double sum = (l0 + l1) + (l2 + l3);
  for (std::size_t i = blocked; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out) {
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = dot(matrix.subspan(r * dim, dim), query);
  }
}

}  // namespace scalar

#if !defined(VIDMEM_HAVE_AVX2)
namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b) { return scalar::dot(a, b); }
void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out) {
  scalar::dot_rows(matrix, dim, query, out);
}
}  // namespace avx2
#endif

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("dot: dimension mismatch");
  return active_isa() == Isa::avx2 ? avx2::dot(a, b) : scalar::dot(a, b);
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out) {
  if (out.empty()) return;
  check_rows(matrix, dim, query, out);
  if (active_isa() == Isa::avx2) {
    avx2::dot_rows(matrix, dim, query, out);
  } else {
    scalar::dot_rows(matrix, dim, query, out);
  }
}

}  // namespace vidmem::kernels
