#pragma once
// HTTP/JSON client for model servers. One POST endpoint per role:
//
//   /v1/caption      {"frames":[...],"num_frames":n}          -> {"caption":"..."}
//   /v1/embed/video  {"frames":[...],"num_frames":n}          -> {"embedding":[...]}
//   /v1/embed/text   {"text":"...","space":"crossmodal|caption|clip"} -> {"embedding":[...]}
//   /v1/embed/crop   {"crop":"...","space":"clip|dino"}       -> {"embedding":[...]}
//   /v1/track        {"video_uri":"...","num_frames":n}       -> {"tracks":[TrackResult...]}
//   /v1/vqa          {"question":"...","start_s":x,"end_s":y,"video_uri":"..."}
//                                                             -> {"description":"...","answer":"..."}
//   /v1/chat         {"messages":[{"role":"...","content":"..."}]} -> {"content":"..."}

#include <string>

#include "json.hpp"
#include "vidmem/backends.hpp"

namespace vidmem {

struct RemoteConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8000" (an optional path prefix is kept)
  std::string api_key;   // sent as "Authorization: Bearer <key>" when non-empty
  double timeout_s = 120.0;
  std::size_t caption_dim = 3072;
  std::size_t crossmodal_dim = 768;
  std::size_t clip_dim = 768;
  std::size_t dino_dim = 1024;
  SamplingConfig sampling;

  /// Overrides base_url / api_key from VIDMEM_BACKEND_URL / VIDMEM_API_KEY when set.
  void apply_env();
};

/// Blocking JSON POST client; safe to share across threads (one connection per call).
class RemoteClient {
 public:
  explicit RemoteClient(RemoteConfig config);
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
  const RemoteConfig& config() const { return config_; }

 private:
  RemoteConfig config_;
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path prefix without trailing '/'
};

nlohmann::json track_to_json(const TrackResult& t);
TrackResult track_from_json(const nlohmann::json& j);

BackendSuite make_remote_suite(const RemoteConfig& config);

}  // namespace vidmem
