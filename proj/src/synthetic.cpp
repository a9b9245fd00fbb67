#include "vidmem/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

class SyntheticCaptioner final : public Captioner {
 public:
  explicit SyntheticCaptioner(std::shared_ptr<const SyntheticWorld> world) : world_(std::move(world)) {}
  std::string caption(const SegmentMedia& segment) const override {
    return world_->caption(segment.segment.index);
  }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
};

class SyntheticCrossModal final : public CrossModalEmbedder {
 public:
  SyntheticCrossModal(std::shared_ptr<const SyntheticWorld> world, std::size_t dim)
      : world_(std::move(world)), text_(std::string(salt::crossmodal), dim) {}

  Embedding embed_video(const SegmentMedia& segment) const override {
    if (!world_) throw BackendError("synthetic video encoder has no world attached");
    return text_.embed(world_->event_text(segment.segment.index));
  }
  Embedding embed_text(std::string_view text) const override { return text_.embed(text); }
  std::size_t dim() const override { return text_.dim(); }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
  HashTextEmbedder text_;
};

class SyntheticTracker final : public Tracker {
 public:
  SyntheticTracker(std::shared_ptr<const SyntheticWorld> world, int crop_frames)
      : world_(std::move(world)), crop_frames_(crop_frames) {}

  std::vector<TrackResult> track(const std::string& video_uri) const override {
    std::vector<TrackResult> out;
    for (const auto& t : world_tracks(*world_)) {
      TrackResult r;
      r.tracking_id = t.tracking_id;
      r.category = t.category;
      r.frames = t.frames;
      // Random crop frames, reproducible per (seed, tracking id).
      std::vector<std::int64_t> pool = t.frames;
      SplitMix64 rng(world_->seed ^ (static_cast<std::uint64_t>(t.tracking_id) * 0x9e3779b97f4a7c15ULL));
      const auto k = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(1, crop_frames_)));
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      }
      pool.resize(k);
      std::sort(pool.begin(), pool.end());
      for (auto f : pool) {
        r.crops.push_back({video_uri, t.tracking_id, f,
                           video_uri + "#frame=" + std::to_string(f) + "&track=" + std::to_string(t.tracking_id)});
      }
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
  int crop_frames_;
};

std::string stem(const std::string& token) {
  if (token.size() > 3 && token.ends_with("es") && (token.ends_with("ses") || token.ends_with("xes") ||
                                                    token.ends_with("ches") || token.ends_with("shes"))) {
    return token.substr(0, token.size() - 2);
  }
  if (token.size() > 2 && token.ends_with("s")) return token.substr(0, token.size() - 1);
  return token;
}

class SyntheticVqa final : public VqaModel {
 public:
  explicit SyntheticVqa(std::shared_ptr<const SyntheticWorld> world) : world_(std::move(world)) {}

  VqaResult answer(std::string_view question, const TimeWindow& window,
                   const std::string& /*video_uri*/) const override {
    const auto& w = *world_;
    if (!window.valid() || window.start_s < 0.0 || window.end_s > w.duration_s() + 1e-9) {
      throw BackendError("vqa window outside the video");
    }
    const auto first = static_cast<std::int64_t>(std::floor(window.start_s / w.segment_duration_s));
    auto last = static_cast<std::int64_t>(std::ceil(window.end_s / w.segment_duration_s)) - 1;
    last = std::clamp<std::int64_t>(last, first, w.n_segments - 1);

    std::string category;
    for (const auto& tok : hash_tokens(question)) {
      for (const auto& obj : w.objects) {
        if (tok == obj.category || stem(tok) == obj.category) {
          category = obj.category;
          break;
        }
      }
      if (!category.empty()) break;
    }

    VqaResult r;
    if (!category.empty()) {
      std::int64_t count = 0;
      for (const auto& obj : w.objects) {
        if (obj.category != category) continue;
        const bool seen = std::any_of(obj.segments.begin(), obj.segments.end(),
                                      [&](std::int64_t s) { return s >= first && s <= last; });
        count += seen ? 1 : 0;
      }
      if (count == 0) {
        r.description = "No " + category + " is visible in this clip.";
        r.answer = std::string(kVqaMiss);
      } else {
        r.description = "The clip shows " + std::to_string(count) + " " +
                        (count == 1 ? category : plural(category)) + ".";
        r.answer = std::to_string(count);
      }
      return r;
    }
    std::vector<std::string> events;
    for (auto s = first; s <= last; ++s) events.push_back(w.event_text(s));
    r.description = "The clip shows: " + util::join(events, "; ") + ".";
    r.answer = w.event_text(last) + ".";
    return r;
  }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      const std::string raw = util::to_lower(text.substr(i, j - i));
      if (raw != "#c" && raw != "#o") {
        std::string tok;
        for (char c : raw) {
          if (std::isalnum(static_cast<unsigned char>(c))) tok += c;
        }
        if (!tok.empty()) tokens.push_back(std::move(tok));
      }
    }
    i = j;
  }
  return tokens;
}

Embedding synth_text_embed(std::string_view text, std::size_t dim, std::string_view salt) {
  if (dim < 16) throw ContractError("synthetic text embedding needs dim >= 16");
  const auto tokens = hash_tokens(text);
  if (tokens.empty()) throw DomainError("no tokens left in text: '" + std::string(text) + "'");
  std::vector<double> v(dim, 0.0);
  for (const auto& tok : tokens) {
    const std::uint64_t h = salt.empty() ? fnv1a64(tok) : fnv1a64(std::string(salt) + "|" + tok);
    const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
    v[h % dim] += sign;
  }
  // Colliding tokens can cancel out entirely; that input has no usable direction.
  return Embedding::normalized(std::move(v));
}

HashTextEmbedder::HashTextEmbedder(std::string salt, std::size_t dim) : salt_(std::move(salt)), dim_(dim) {
  if (dim_ < 16) throw ContractError("synthetic text embedding needs dim >= 16");
}

Embedding HashTextEmbedder::embed(std::string_view text) const { return synth_text_embed(text, dim_, salt_); }

SyntheticCropEmbedder::SyntheticCropEmbedder(std::shared_ptr<const SyntheticWorld> world, std::string salt,
                                             std::size_t dim, double noise, std::int64_t bucket_frames)
    : world_(std::move(world)),
      tracks_(world_tracks(*world_)),
      salt_(std::move(salt)),
      dim_(dim),
      noise_(noise),
      bucket_frames_(std::max<std::int64_t>(1, bucket_frames)) {}

Embedding SyntheticCropEmbedder::embed_crop(const CropRef& crop) const {
  const auto it = std::find_if(tracks_.begin(), tracks_.end(),
                               [&](const WorldTrack& t) { return t.tracking_id == crop.tracking_id; });
  if (it == tracks_.end()) throw BackendError("unknown tracking id " + std::to_string(crop.tracking_id));
  const auto identity = synth_text_embed(world_->objects[it->object].identity, dim_, salt_);
  if (noise_ == 0.0) return identity;
  const std::string noise_token =
      "n" + std::to_string(crop.tracking_id) + "x" + std::to_string(crop.frame / bucket_frames_);
  const auto noise = synth_text_embed(noise_token, dim_, salt_);
  std::vector<double> v(dim_);
  for (std::size_t i = 0; i < dim_; ++i) v[i] = identity[i] + noise_ * noise[i];
  return Embedding::normalized(std::move(v));
}

BackendSuite world_to_suite(std::shared_ptr<const SyntheticWorld> world, const SyntheticDims& dims,
                            const SyntheticNoise& noise) {
  if (!world) throw ContractError("world_to_suite: null world");
  BackendSuite s = text_only_suite(dims);
  s.captioner = std::make_shared<SyntheticCaptioner>(world);
  s.crossmodal = std::make_shared<SyntheticCrossModal>(world, dims.crossmodal);
  s.crop_clip = std::make_shared<SyntheticCropEmbedder>(world, std::string(salt::clip), dims.clip, noise.clip,
                                                        noise.bucket_frames);
  s.crop_dino = std::make_shared<SyntheticCropEmbedder>(world, std::string(salt::dino), dims.dino, noise.dino,
                                                        noise.bucket_frames);
  s.tracker = std::make_shared<SyntheticTracker>(world, s.sampling.crop_frames);
  s.vqa = std::make_shared<SyntheticVqa>(world);
  return s;
}

BackendSuite text_only_suite(const SyntheticDims& dims) {
  BackendSuite s;
  s.crossmodal = std::make_shared<SyntheticCrossModal>(nullptr, dims.crossmodal);
  s.caption_text = std::make_shared<HashTextEmbedder>(std::string(salt::caption), dims.caption);
  s.clip_text = std::make_shared<HashTextEmbedder>(std::string(salt::clip), dims.clip);
  return s;
}

}  // namespace vidmem
