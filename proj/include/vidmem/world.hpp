#pragma once
// Seeded synthetic worlds: ground-truth timelines that drive the synthetic
// backends and supply evaluation labels.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidmem/backends.hpp"
#include "vidmem/core.hpp"

namespace vidmem {

/// splitmix64 stream. Fixed so worlds are identical across implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) { return next() % n; }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline constexpr const char* kFillerEvent = "C looks around";

struct WorldEvent {
  std::string text;  // empty: nothing happens in this segment
  bool camera_wearer = true;
};

struct WorldObject {
  std::string identity;  // e.g. "gray elephant obj0"
  std::string category;
  std::vector<std::int64_t> segments;  // sorted appearance set
};

struct NlqExample {
  std::string query;
  TimeWindow gt_window;
};

struct McqExample {
  std::string question;
  std::array<std::string, 5> options;
  int answer = 0;
};

struct SyntheticWorld {
  std::uint64_t seed = 0;
  std::int64_t n_segments = 0;
  double segment_duration_s = kDefaultSegmentDuration;
  double fps = 30.0;
  std::string video_uri = "synthetic://world";
  std::vector<WorldEvent> events;
  std::vector<WorldObject> objects;
  std::vector<NlqExample> nlq;
  std::vector<McqExample> mcq;

  double duration_s() const { return static_cast<double>(n_segments) * segment_duration_s; }
  std::int64_t frames_per_segment() const;
  // Event text of a segment with the filler substituted for empty events.
  const std::string& event_text(std::int64_t segment) const;
  std::string caption(std::int64_t segment) const;
  std::vector<SegmentMedia> segment_media() const;
};

struct WorldParams {
  std::int64_t n_segments = 44;
  std::int64_t n_objects = 6;
  std::int64_t n_nlq = 10;
  std::int64_t n_mcq = 5;
  std::optional<std::string> force_category;
};

SyntheticWorld gen_world(std::uint64_t seed, const WorldParams& params);

/// Ground-truth occurrence: one contiguous appearance run of one object.
struct WorldTrack {
  std::int64_t tracking_id = 0;
  std::size_t object = 0;  // index into world.objects
  std::string category;
  std::vector<std::int64_t> frames;
};

/// Tracks in ascending tracking_id; ids start at 1 and follow first frame.
std::vector<WorldTrack> world_tracks(const SyntheticWorld& world);

std::string plural(const std::string& category);
std::string number_word(std::int64_t n);

std::string world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const std::string& text);
SyntheticWorld load_world(const std::filesystem::path& path);

}  // namespace vidmem
