#pragma once
// Object memory: re-identification of tracker occurrences into objects, the
// averaged feature table, and the relational occurrence rows.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vidmem/backends.hpp"
#include "vidmem/core.hpp"

namespace vidmem {

/// Re-ID similarity constants. Defaults are the grid-searched values the
/// method ships with; all of them are configuration.
struct ReidParams {
  double clip_gain = 20.0;
  double clip_midpoint = 0.925;
  double dino_gain = 4.1;
  double dino_midpoint = 0.5;
  double clip_weight = 0.15;
  double dino_weight = 0.85;
  double join_threshold = 0.5;     // every member must exceed this
  double anchor_threshold = 0.62;  // at least one member must exceed this
};

struct TrackingFeature {
  std::int64_t tracking_id = 0;
  Embedding clip_feat;
  Embedding dino_feat;
  std::vector<std::int64_t> frames;  // sorted, unique, non-empty
  std::string category;
};

struct PairSimilarity {
  double clip_s = 0.0;
  double dino_s = 0.0;
  double sim = 0.0;
};

/// Sigmoid-calibrated CLIP and DINOv2 similarities and their weighted blend.
PairSimilarity pair_similarity(const TrackingFeature& a, const TrackingFeature& b, const ReidParams& p = {});
PairSimilarity pair_similarity_from_cosines(double cos_clip, double cos_dino, const ReidParams& p = {});

bool frames_intersect(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

struct ReidGroup {
  std::int64_t object_id = 0;
  std::vector<std::int64_t> members;  // tracking ids in insertion order

  friend bool operator==(const ReidGroup&, const ReidGroup&) = default;
};

/// Strict weak order on frame indices; frames are visited in this order.
using FrameOrder = std::function<bool(std::int64_t, std::int64_t)>;

/// Greedy grouping: frames are visited in `frame_order`; each tracking id is
/// examined once, at its first frame (ties within a frame by ascending id). It
/// joins the first existing group where it shares no frame with any member,
/// exceeds join_threshold with every member and anchor_threshold with at least
/// one; otherwise it opens a new group. Groups get object ids 0, 1, ... in
/// creation order.
std::vector<ReidGroup> reid_group(std::span<const TrackingFeature> tracks, const ReidParams& p = {},
                                  const FrameOrder& frame_order = {});

/// Normalized mean of the given embeddings. Throws DomainError when empty.
Embedding mean_embedding(std::span<const Embedding> items);

/// Per-role normalized mean of crop features.
std::pair<Embedding, Embedding> tracking_feature_from_crops(std::span<const Embedding> crop_feats_clip,
                                                            std::span<const Embedding> crop_feats_dino);

/// Embeds every crop of `track` with both crop embedders and aggregates.
TrackingFeature featurize_track(const TrackResult& track, const BackendSuite& suite);

struct FrameMapping {
  double fps = 30.0;
  double segment_duration_s = kDefaultSegmentDuration;
  std::int64_t n_segments = 0;  // > 0: clamp to the last segment

  std::int64_t segment_of(std::int64_t frame) const;
};

struct ObjectRecord {
  std::int64_t object_id = 0;
  std::string category;
  std::vector<std::int64_t> segments;  // sorted segment indices
  Embedding feature;

  friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

struct OccurrenceRow {
  std::int64_t object_id = 0;
  std::string category;
  std::int64_t segment_index = 0;

  friend bool operator==(const OccurrenceRow&, const OccurrenceRow&) = default;
};

/// Immutable after construction; rows are the flattening of objects x segments
/// ordered by (object_id, segment_index).
class ObjectMemory {
 public:
  ObjectMemory() = default;
  explicit ObjectMemory(std::vector<ObjectRecord> objects);

  const std::vector<ObjectRecord>& objects() const { return objects_; }
  const std::vector<OccurrenceRow>& rows() const { return rows_; }
  std::size_t feature_dim() const { return dim_; }
  std::span<const double> feature_matrix() const { return matrix_; }
  bool empty() const { return objects_.empty(); }

  friend bool operator==(const ObjectMemory& a, const ObjectMemory& b) { return a.objects_ == b.objects_; }

 private:
  std::vector<ObjectRecord> objects_;
  std::vector<OccurrenceRow> rows_;
  std::vector<double> matrix_;
  std::size_t dim_ = 0;
};

/// Objects from re-ID groups: feature = normalized mean of member CLIP
/// features, category = majority vote (ties to the earliest member's), segments
/// = union of member frames mapped through `mapping`.
ObjectMemory build_object_memory(std::span<const ReidGroup> groups, std::span<const TrackingFeature> tracks,
                                 const FrameMapping& mapping);

struct OpenVocabParams {
  double threshold = 0.5;
  std::size_t top_k = 5;
};

/// Objects whose feature cosine with the CLIP text embedding of `description`
/// reaches the threshold, best first (ties by lower object id), at most top_k.
std::vector<std::pair<std::int64_t, double>> open_vocabulary_retrieval(const ObjectMemory& mem,
                                                                       std::string_view description,
                                                                       const BackendSuite& suite,
                                                                       const OpenVocabParams& params = {});

}  // namespace vidmem
