#include "vidmem/object_memory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "vidmem/error.hpp"
#include "vidmem/kernels.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

namespace {

double logistic(double gain, double x, double midpoint) { return 1.0 / (1.0 + std::exp(-gain * (x - midpoint))); }

}  // namespace

PairSimilarity pair_similarity_from_cosines(double cos_clip, double cos_dino, const ReidParams& p) {
  PairSimilarity s;
  s.clip_s = logistic(p.clip_gain, cos_clip, p.clip_midpoint);
  s.dino_s = logistic(p.dino_gain, cos_dino, p.dino_midpoint);
  s.sim = p.clip_weight * s.clip_s + p.dino_weight * s.dino_s;
  return s;
}

PairSimilarity pair_similarity(const TrackingFeature& a, const TrackingFeature& b, const ReidParams& p) {
  if (a.clip_feat.dim() != b.clip_feat.dim() || a.dino_feat.dim() != b.dino_feat.dim()) {
    throw ContractError("pair_similarity: feature dims differ between tracks " + std::to_string(a.tracking_id) +
                        " and " + std::to_string(b.tracking_id));
  }
  return pair_similarity_from_cosines(cosine(a.clip_feat, b.clip_feat), cosine(a.dino_feat, b.dino_feat), p);
}

bool frames_intersect(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

std::vector<ReidGroup> reid_group(std::span<const TrackingFeature> tracks, const ReidParams& p,
                                  const FrameOrder& frame_order) {
  const FrameOrder less = frame_order ? frame_order : FrameOrder(std::less<std::int64_t>{});
  std::unordered_set<std::int64_t> ids;
  std::vector<std::int64_t> first_frame(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!ids.insert(tracks[i].tracking_id).second) {
      throw ContractError("duplicate tracking id " + std::to_string(tracks[i].tracking_id));
    }
    if (tracks[i].frames.empty()) {
      throw ContractError("tracking id " + std::to_string(tracks[i].tracking_id) + " has no frames");
    }
    first_frame[i] = *std::min_element(tracks[i].frames.begin(), tracks[i].frames.end(), less);
  }

  // A track is first examined at its earliest frame, so visiting frames in
  // order is the same as visiting tracks by (first frame, tracking id).
  std::vector<std::size_t> visit(tracks.size());
  std::iota(visit.begin(), visit.end(), 0);
  std::sort(visit.begin(), visit.end(), [&](std::size_t a, std::size_t b) {
    if (less(first_frame[a], first_frame[b])) return true;
    if (less(first_frame[b], first_frame[a])) return false;
    return tracks[a].tracking_id < tracks[b].tracking_id;
  });

  const std::size_t n = tracks.size();
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sim[i * n + j] = sim[j * n + i] = pair_similarity(tracks[i], tracks[j], p).sim;
    }
  }

  std::vector<std::vector<std::size_t>> groups;
  for (const std::size_t t : visit) {
    bool placed = false;
    for (auto& g : groups) {
      bool ok = true;
      bool anchored = false;
      for (const std::size_t m : g) {
        const double s = sim[t * n + m];
        if (frames_intersect(tracks[t].frames, tracks[m].frames) || !(s > p.join_threshold)) {
          ok = false;
          break;
        }
        anchored = anchored || s > p.anchor_threshold;
      }
      if (ok && anchored) {
        g.push_back(t);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({t});
  }

  std::vector<ReidGroup> out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    ReidGroup rg;
    rg.object_id = static_cast<std::int64_t>(g);
    for (const std::size_t m : groups[g]) rg.members.push_back(tracks[m].tracking_id);
    out.push_back(std::move(rg));
  }
  return out;
}

Embedding mean_embedding(std::span<const Embedding> items) {
  if (items.empty()) throw DomainError("mean of an empty embedding list");
  const std::size_t dim = items.front().dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& e : items) {
    if (e.dim() != dim) throw ContractError("mean_embedding: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) sum[i] += e[i];
  }
  for (double& v : sum) v /= static_cast<double>(items.size());
  return Embedding::normalized(std::move(sum));
}

std::pair<Embedding, Embedding> tracking_feature_from_crops(std::span<const Embedding> crop_feats_clip,
                                                            std::span<const Embedding> crop_feats_dino) {
  if (crop_feats_clip.empty() || crop_feats_dino.empty()) {
    throw DomainError("tracking feature needs at least one crop per role");
  }
  return {mean_embedding(crop_feats_clip), mean_embedding(crop_feats_dino)};
}

TrackingFeature featurize_track(const TrackResult& track, const BackendSuite& suite) {
  if (!suite.crop_clip || !suite.crop_dino) throw ContractError("featurize_track: suite lacks crop embedders");
  if (track.crops.empty()) {
    throw BackendError("tracking id " + std::to_string(track.tracking_id) + " came without crops");
  }
  std::vector<Embedding> clip, dino;
  for (const auto& crop : track.crops) {
    clip.push_back(expect_dim(suite.crop_clip->embed_crop(crop), suite.crop_clip->dim(), "clip crop embedder"));
    dino.push_back(expect_dim(suite.crop_dino->embed_crop(crop), suite.crop_dino->dim(), "dino crop embedder"));
  }
  auto [c, d] = tracking_feature_from_crops(clip, dino);
  return {track.tracking_id, std::move(c), std::move(d), track.frames, track.category};
}

std::int64_t FrameMapping::segment_of(std::int64_t frame) const {
  if (!(fps > 0.0) || !(segment_duration_s > 0.0)) throw ContractError("frame mapping needs positive fps/duration");
  if (frame < 0) throw RangeError("negative frame index");
  auto seg = static_cast<std::int64_t>(std::floor(static_cast<double>(frame) / fps / segment_duration_s));
  if (n_segments > 0) seg = std::min(seg, n_segments - 1);
  return seg;
}

ObjectMemory::ObjectMemory(std::vector<ObjectRecord> objects) : objects_(std::move(objects)) {
  std::sort(objects_.begin(), objects_.end(),
            [](const ObjectRecord& a, const ObjectRecord& b) { return a.object_id < b.object_id; });
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    auto& o = objects_[i];
    if (i > 0 && o.object_id == objects_[i - 1].object_id) {
      throw ContractError("duplicate object id " + std::to_string(o.object_id));
    }
    if (o.feature.empty()) throw ContractError("object " + std::to_string(o.object_id) + " has no feature");
    if (dim_ == 0) dim_ = o.feature.dim();
    if (o.feature.dim() != dim_) throw ContractError("object feature dims differ");
    std::sort(o.segments.begin(), o.segments.end());
    o.segments.erase(std::unique(o.segments.begin(), o.segments.end()), o.segments.end());
    for (auto s : o.segments) rows_.push_back({o.object_id, o.category, s});
    matrix_.insert(matrix_.end(), o.feature.values().begin(), o.feature.values().end());
  }
}

ObjectMemory build_object_memory(std::span<const ReidGroup> groups, std::span<const TrackingFeature> tracks,
                                 const FrameMapping& mapping) {
  std::map<std::int64_t, const TrackingFeature*> by_id;
  for (const auto& t : tracks) by_id[t.tracking_id] = &t;

  std::vector<ObjectRecord> objects;
  for (const auto& g : groups) {
    if (g.members.empty()) throw ContractError("re-ID group " + std::to_string(g.object_id) + " is empty");
    std::vector<Embedding> feats;
    std::vector<std::string> categories;
    std::set<std::int64_t> segments;
    for (const auto id : g.members) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw ContractError("re-ID group references unknown tracking id " + std::to_string(id));
      feats.push_back(it->second->clip_feat);
      categories.push_back(it->second->category);
      for (const auto f : it->second->frames) segments.insert(mapping.segment_of(f));
    }
    // Majority vote; the earliest member's category wins ties.
    std::string best;
    std::ptrdiff_t best_count = 0;
    for (const auto& c : categories) {
      const auto count = std::count(categories.begin(), categories.end(), c);
      if (count > best_count) {
        best = c;
        best_count = count;
      }
    }
    ObjectRecord rec;
    rec.object_id = g.object_id;
    rec.category = best;
    rec.segments.assign(segments.begin(), segments.end());
    rec.feature = mean_embedding(feats);
    objects.push_back(std::move(rec));
  }
  return ObjectMemory(std::move(objects));
}

std::vector<std::pair<std::int64_t, double>> open_vocabulary_retrieval(const ObjectMemory& mem,
                                                                       std::string_view description,
                                                                       const BackendSuite& suite,
                                                                       const OpenVocabParams& params) {
  if (util::trim(description).empty()) throw ContractError("open_vocabulary_retrieval: empty description");
  if (mem.empty()) return {};
  if (!suite.clip_text) throw ContractError("open_vocabulary_retrieval: suite lacks a clip text encoder");
  const auto q = suite.clip_text->embed(description);
  if (q.dim() != mem.feature_dim()) throw ContractError("clip text dim does not match object feature dim");

  const auto& objs = mem.objects();
  std::vector<std::pair<std::int64_t, double>> scored;
  for (const auto& o : objs) {
    const double c = cosine(q, o.feature);
    if (c >= params.threshold) scored.emplace_back(o.object_id, c);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (scored.size() > params.top_k) scored.resize(params.top_k);
  return scored;
}

}  // namespace vidmem
