#pragma once
// The (temporal, object) memory pair, its on-disk layout, and the end-to-end
// construction from a backend suite.
//
//   manifest.json    {"version":1,"segment_count":n,"segment_duration_s":d,
//                     "caption_dim":c,"video_dim":v,"video_duration_s":t,"video_uri":"..."}
//   captions.jsonl   {"segment":i,"caption":"..."} per line, ascending i
//   caption_emb.bin  VAMEM1 matrix, n x c
//   video_emb.bin    VAMEM1 matrix, n x v
//   objects.jsonl    {"object_id":i,"category":"...","segments":[...]} per line
//   object_feat.bin  VAMEM1 matrix, one row per objects.jsonl line
//
// VAMEM1: magic "VAMEM1", u32 LE count, u32 LE dim, count*dim f32 LE row-major.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vidmem/backends.hpp"
#include "vidmem/object_memory.hpp"
#include "vidmem/temporal_memory.hpp"

namespace vidmem {

inline constexpr int kMemoryFormatVersion = 1;

struct MemoryBundle {
  TemporalMemory temporal;
  ObjectMemory objects;
  std::string video_uri;
  double video_duration_s = 0.0;

  friend bool operator==(const MemoryBundle&, const MemoryBundle&) = default;
};

struct F32Matrix {
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;
};

std::string encode_matrix(std::uint32_t count, std::uint32_t dim, std::span<const double> values);
/// Throws CorruptFileError on bad magic or a payload that disagrees with the header.
F32Matrix decode_matrix(std::string_view bytes, const std::string& what);

void save_memory(const MemoryBundle& bundle, const std::filesystem::path& dir);
MemoryBundle load_memory(const std::filesystem::path& dir);

/// Value after a trip through f32, for round-trip comparisons.
Embedding to_f32_precision(const Embedding& e);

struct BuildParams {
  ReidParams reid;
  double fps = 30.0;
  unsigned workers = 0;
};

/// Tracks -> crop features -> re-ID groups -> object memory.
ObjectMemory build_object_memory_from_tracks(std::span<const TrackResult> tracks, const BackendSuite& suite,
                                             const FrameMapping& mapping, const ReidParams& reid = {});

/// Full memory construction: temporal memory over `segments`, then tracking and
/// re-ID over the whole video.
MemoryBundle build_memory_bundle(std::span<const SegmentMedia> segments, const std::string& video_uri,
                                 double video_duration_s, const BackendSuite& suite, const BuildParams& params = {});

}  // namespace vidmem
