#pragma once
// Temporal memory: per-segment captions with caption-text and video embeddings,
// plus the two tools that read it (caption retrieval and segment localization).

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vidmem/backends.hpp"
#include "vidmem/core.hpp"

namespace vidmem {

inline constexpr std::size_t kCaptionWindowCap = 15;
inline constexpr std::size_t kLocalizationTopK = 5;

/// Weights of the query-caption (text) and query-video similarities.
struct EnsembleWeights {
  double w_text = 0.5;
  double w_video = 0.5;

  /// Normalizes a text:video ratio so the weights sum to 1.
  static EnsembleWeights from_ratio(double text, double video);
  /// Parses "T:V" (e.g. "18:11").
  static EnsembleWeights parse(std::string_view ratio);
};

/// Immutable after construction. Records are contiguous by segment index from 0.
class TemporalMemory {
 public:
  TemporalMemory() = default;
  TemporalMemory(std::vector<SegmentRecord> records, double segment_duration_s);

  const std::vector<SegmentRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  double segment_duration_s() const { return segment_duration_s_; }
  std::size_t caption_dim() const { return caption_dim_; }
  std::size_t video_dim() const { return video_dim_; }
  double end_s() const { return records_.empty() ? 0.0 : records_.back().segment.end_s; }

  // Row-major copies of the embeddings for batch scoring.
  std::span<const double> caption_matrix() const { return caption_matrix_; }
  std::span<const double> video_matrix() const { return video_matrix_; }

  friend bool operator==(const TemporalMemory& a, const TemporalMemory& b) {
    return a.segment_duration_s_ == b.segment_duration_s_ && a.records_ == b.records_;
  }

 private:
  std::vector<SegmentRecord> records_;
  double segment_duration_s_ = kDefaultSegmentDuration;
  std::size_t caption_dim_ = 0;
  std::size_t video_dim_ = 0;
  std::vector<double> caption_matrix_;
  std::vector<double> video_matrix_;
};

/// Captions each segment, embeds its video, and embeds the caption. Segments
/// are processed on up to `workers` threads (0 = hardware concurrency); the
/// output keeps input order. A backend failure aborts the build with a
/// BackendError naming the segment.
TemporalMemory build_temporal_memory(std::span<const SegmentMedia> segments, const BackendSuite& suite,
                                     unsigned workers = 0);

/// Inclusive [t_start, t_end] captions in index order; at most `cap` of them.
std::vector<std::pair<std::int64_t, std::string>> caption_retrieval(const TemporalMemory& mem,
                                                                     std::int64_t t_start, std::int64_t t_end,
                                                                     std::size_t cap = kCaptionWindowCap);

struct LocalizationHit {
  SegmentIndex segment;
  TimeWindow window;
  double score = 0.0;
  double text_score = 0.0;
  double video_score = 0.0;
};

/// Top-k segments by w_text * cos(query, caption) + w_video * cos(query, video),
/// ties broken by lower index. Each hit's window is its segment span widened by
/// `expand_s` on both sides and clipped to the video.
std::vector<LocalizationHit> segment_localization(const TemporalMemory& mem, std::string_view query,
                                                  const EnsembleWeights& weights, const BackendSuite& suite,
                                                  std::size_t k = kLocalizationTopK, double expand_s = 0.0);

}  // namespace vidmem
