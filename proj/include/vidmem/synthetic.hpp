#pragma once
// Deterministic stand-ins for every model role, driven by a SyntheticWorld.
//
// All text encoders share one feature-hashing scheme; each role salts its
// tokens with the role name so embeddings from different roles never agree
// by accident.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vidmem/backends.hpp"
#include "vidmem/world.hpp"

namespace vidmem {

namespace salt {
inline constexpr std::string_view crossmodal = "crossmodal";
inline constexpr std::string_view caption = "caption";
inline constexpr std::string_view clip = "clip";
inline constexpr std::string_view dino = "dino";
}  // namespace salt

std::uint64_t fnv1a64(std::string_view bytes);

/// Lowercase, drop "#C"/"#O" markers, strip punctuation, split on whitespace.
std::vector<std::string> hash_tokens(std::string_view text);

/// Signed feature hashing of `text` into `dim` buckets, L2-normalized.
/// Throws DomainError when no token survives, ContractError when dim < 16.
Embedding synth_text_embed(std::string_view text, std::size_t dim, std::string_view salt = {});

class HashTextEmbedder final : public TextEmbedder {
 public:
  HashTextEmbedder(std::string salt, std::size_t dim);
  Embedding embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::string salt_;
  std::size_t dim_;
};

struct SyntheticDims {
  std::size_t caption = 256;
  std::size_t crossmodal = 256;
  std::size_t clip = 512;
  std::size_t dino = 768;
};

struct SyntheticNoise {
  double clip = 0.0;
  double dino = 0.0;
  // Frames per noise bucket: crops within one bucket share a noise token.
  std::int64_t bucket_frames = 30;
};

/// Crop feature = normalize(identity vector + amplitude * bucket noise vector).
class SyntheticCropEmbedder final : public CropEmbedder {
 public:
  SyntheticCropEmbedder(std::shared_ptr<const SyntheticWorld> world, std::string salt,
                        std::size_t dim, double noise, std::int64_t bucket_frames);
  Embedding embed_crop(const CropRef& crop) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
  std::vector<WorldTrack> tracks_;
  std::string salt_;
  std::size_t dim_;
  double noise_;
  std::int64_t bucket_frames_;
};

/// Answer string used when the asked-about category is absent from the window.
inline constexpr std::string_view kVqaMiss = "not visible";

/// Suite with every role except chat wired to `world`. Chat is left unset.
BackendSuite world_to_suite(std::shared_ptr<const SyntheticWorld> world,
                            const SyntheticDims& dims = {}, const SyntheticNoise& noise = {});

/// Text-only suite (crossmodal text, caption text, clip text). Enough for
/// localization and open-vocabulary retrieval over a loaded memory.
BackendSuite text_only_suite(const SyntheticDims& dims = {});

}  // namespace vidmem
