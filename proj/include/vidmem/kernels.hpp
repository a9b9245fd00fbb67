#pragma once
// Dot-product kernels used by every similarity scan.
//
// Two implementations exist: a portable scalar kernel and an AVX2 kernel.
// Both accumulate in four interleaved lanes (lane j sums elements i with
// i % 4 == j over the 4-aligned prefix), reduce as (l0 + l1) + (l2 + l3) and
// then add the tail sequentially. Neither uses fused multiply-add, so the two
// produce bit-identical results and dispatch never changes a score.

#include <cstddef>
#include <span>
#include <string_view>

namespace vidmem::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// Best ISA supported by the running CPU and compiled into the binary.
Isa detected_isa();

// ISA currently used by the dispatching entry points below.
Isa active_isa();

// Overrides dispatch (tests use this to compare paths). Requesting an ISA the
// CPU lacks falls back to scalar; returns the ISA actually selected.
Isa set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

// out[r] = dot(matrix row r, query) for a row-major matrix of width dim.
void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out);

namespace scalar {
double dot(std::span<const double> a, std::span<const double> b);
void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out);
}  // namespace scalar

namespace avx2 {
// Only callable when detected_isa() == Isa::avx2.
double dot(std::span<const double> a, std::span<const double> b);
void dot_rows(std::span<const double> matrix, std::size_t dim, std::span<const double> query,
              std::span<double> out);
}  // namespace avx2

}  // namespace vidmem::kernels
