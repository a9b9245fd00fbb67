#pragma once
// Shared domain types and the two numeric primitives every module relies on.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vidmem {

inline constexpr double kDefaultSegmentDuration = 2.0;
inline constexpr double kNormTolerance = 1e-6;

/// Fixed-length real vector. Values are always finite and dim is always > 0.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values);

  /// L2-normalized copy of `values`; throws DomainError on the zero vector.
  static Embedding normalized(std::vector<double> values);

  /// Normalized copy of this vector.
  Embedding renormalized() const { return normalized(values_); }

  std::size_t dim() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const;
  bool is_normalized(double tol = kNormTolerance) const;

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

struct TimeWindow {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  bool valid() const { return end_s >= start_s; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct SegmentIndex {
  std::int64_t index = 0;
  double start_s = 0.0;
  double end_s = 0.0;

  TimeWindow window() const { return {start_s, end_s}; }
  friend bool operator==(const SegmentIndex&, const SegmentIndex&) = default;
};

struct SegmentRecord {
  SegmentIndex segment;
  std::string caption;
  Embedding caption_emb;
  Embedding video_emb;

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

/// Cosine similarity clamped to [-1, 1].
/// Throws ContractError on dimension mismatch and DomainError on a zero vector.
double cosine(const Embedding& a, const Embedding& b);
double cosine(std::span<const double> a, std::span<const double> b);

/// Intersection over union of two time windows; 1 for identical zero-length windows.
double temporal_iou(const TimeWindow& a, const TimeWindow& b);

/// Splits [0, duration_s) into segments of length segment_duration_s. A final
/// piece shorter than 0.5 s is merged into the previous segment.
std::vector<SegmentIndex> slice_segments(double duration_s,
                                         double segment_duration_s = kDefaultSegmentDuration);

}  // namespace vidmem
