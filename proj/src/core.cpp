#include "vidmem/core.hpp"

#include <algorithm>
#include <cmath>

#include "vidmem/error.hpp"
#include "vidmem/kernels.hpp"

namespace vidmem {

namespace {
constexpr double kMinTailSeconds = 0.5;
}

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ContractError("embedding dim must be positive");
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("embedding contains a non-finite value");
  }
}

Embedding Embedding::normalized(std::vector<double> values) {
  Embedding e(std::move(values));
  const double n = e.norm();
  if (n == 0.0) throw DomainError("cannot normalize the zero vector");
  for (double& v : e.values_) v /= n;
  return e;
}

double Embedding::norm() const { return std::sqrt(kernels::squared_norm(values_)); }

bool Embedding::is_normalized(double tol) const { return std::abs(norm() - 1.0) <= tol; }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
  const double na = kernels::squared_norm(a);
  const double nb = kernels::squared_norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine of a zero vector is undefined");
  const double c = kernels::dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const Embedding& a, const Embedding& b) { return cosine(a.values(), b.values()); }

double temporal_iou(const TimeWindow& a, const TimeWindow& b) {
  if (!a.valid() || !b.valid()) throw ContractError("temporal_iou: invalid window");
  const double inter = std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<SegmentIndex> slice_segments(double duration_s, double segment_duration_s) {
  if (!(segment_duration_s > 0.0)) throw ContractError("segment duration must be positive");
  if (!(duration_s > 0.0)) throw ContractError("video duration must be positive");
  std::vector<SegmentIndex> out;
  for (std::int64_t i = 0;; ++i) {
    const double start = static_cast<double>(i) * segment_duration_s;
    if (start >= duration_s) break;
    const double end = std::min(static_cast<double>(i + 1) * segment_duration_s, duration_s);
    if (end - start < kMinTailSeconds && !out.empty()) {
      out.back().end_s = end;
      break;
    }
    out.push_back({i, start, end});
  }
  return out;
}

}  // namespace vidmem
