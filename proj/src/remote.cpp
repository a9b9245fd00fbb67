#include "vidmem/remote.hpp"

#include <cstdlib>

#include "httplib.h"
#include "vidmem/error.hpp"

namespace vidmem {

namespace {

using nlohmann::json;

Embedding embedding_from(const json& response, std::size_t dim, std::string_view role) {
  try {
    return expect_dim(Embedding::normalized(response.at("embedding").get<std::vector<double>>()), dim, role);
  } catch (const json::exception& e) {
    throw BackendError(std::string(role) + ": malformed response: " + e.what());
  } catch (const DomainError& e) {
    throw BackendError(std::string(role) + ": " + e.what());
  } catch (const ContractError& e) {
    throw BackendError(std::string(role) + ": " + e.what());
  }
}

std::string string_field(const json& response, const char* key, std::string_view role) {
  if (!response.contains(key) || !response.at(key).is_string()) {
    throw BackendError(std::string(role) + ": response lacks string field \"" + key + "\"");
  }
  return response.at(key).get<std::string>();
}

class RemoteCaptioner final : public Captioner {
 public:
  explicit RemoteCaptioner(std::shared_ptr<const RemoteClient> c) : client_(std::move(c)) {}
  std::string caption(const SegmentMedia& seg) const override {
    if (seg.frames.empty()) throw BackendError("caption: segment has no frames");
    const auto r = client_->post("/v1/caption",
                                 {{"frames", seg.frames}, {"num_frames", client_->config().sampling.caption_frames}});
    return string_field(r, "caption", "caption");
  }

 private:
  std::shared_ptr<const RemoteClient> client_;
};

class RemoteCrossModal final : public CrossModalEmbedder {
 public:
  explicit RemoteCrossModal(std::shared_ptr<const RemoteClient> c) : client_(std::move(c)) {}
  Embedding embed_video(const SegmentMedia& seg) const override {
    if (seg.frames.empty()) throw BackendError("embed/video: segment has no frames");
    const auto r = client_->post("/v1/embed/video",
                                 {{"frames", seg.frames}, {"num_frames", client_->config().sampling.video_frames}});
    return embedding_from(r, dim(), "embed/video");
  }
  Embedding embed_text(std::string_view text) const override {
    const auto r = client_->post("/v1/embed/text", {{"text", text}, {"space", "crossmodal"}});
    return embedding_from(r, dim(), "embed/text crossmodal");
  }
  std::size_t dim() const override { return client_->config().crossmodal_dim; }

 private:
  std::shared_ptr<const RemoteClient> client_;
};

class RemoteTextEmbedder final : public TextEmbedder {
 public:
  RemoteTextEmbedder(std::shared_ptr<const RemoteClient> c, std::string space, std::size_t dim)
      : client_(std::move(c)), space_(std::move(space)), dim_(dim) {}
  Embedding embed(std::string_view text) const override {
    const auto r = client_->post("/v1/embed/text", {{"text", text}, {"space", space_}});
    return embedding_from(r, dim_, "embed/text " + space_);
  }
  std::size_t dim() const override { return dim_; }

 private:
  std::shared_ptr<const RemoteClient> client_;
  std::string space_;
  std::size_t dim_;
};

class RemoteCropEmbedder final : public CropEmbedder {
 public:
  RemoteCropEmbedder(std::shared_ptr<const RemoteClient> c, std::string space, std::size_t dim)
      : client_(std::move(c)), space_(std::move(space)), dim_(dim) {}
  Embedding embed_crop(const CropRef& crop) const override {
    const auto r = client_->post("/v1/embed/crop", {{"crop", crop.ref}, {"space", space_}});
    return embedding_from(r, dim_, "embed/crop " + space_);
  }
  std::size_t dim() const override { return dim_; }

 private:
  std::shared_ptr<const RemoteClient> client_;
  std::string space_;
  std::size_t dim_;
};

class RemoteTracker final : public Tracker {
 public:
  explicit RemoteTracker(std::shared_ptr<const RemoteClient> c) : client_(std::move(c)) {}
  std::vector<TrackResult> track(const std::string& video_uri) const override {
    const auto r = client_->post("/v1/track",
                                 {{"video_uri", video_uri}, {"num_frames", client_->config().sampling.crop_frames}});
    std::vector<TrackResult> out;
    try {
      for (const auto& t : r.at("tracks")) {
        auto tr = track_from_json(t);
        for (auto& c : tr.crops) c.video_uri = video_uri;
        out.push_back(std::move(tr));
      }
    } catch (const json::exception& e) {
      throw BackendError(std::string("track: malformed response: ") + e.what());
    }
    return out;
  }

 private:
  std::shared_ptr<const RemoteClient> client_;
};

class RemoteVqa final : public VqaModel {
 public:
  explicit RemoteVqa(std::shared_ptr<const RemoteClient> c) : client_(std::move(c)) {}
  VqaResult answer(std::string_view question, const TimeWindow& window,
                   const std::string& video_uri) const override {
    const auto r = client_->post("/v1/vqa", {{"question", question},
                                             {"start_s", window.start_s},
                                             {"end_s", window.end_s},
                                             {"video_uri", video_uri}});
    return {string_field(r, "description", "vqa"), string_field(r, "answer", "vqa")};
  }

 private:
  std::shared_ptr<const RemoteClient> client_;
};

class RemoteChat final : public ChatModel {
 public:
  explicit RemoteChat(std::shared_ptr<const RemoteClient> c) : client_(std::move(c)) {}
  std::string complete(const std::vector<ChatTurn>& turns) override {
    json messages = json::array();
    for (const auto& t : turns) messages.push_back({{"role", to_string(t.role)}, {"content", t.content}});
    const auto r = client_->post("/v1/chat", {{"messages", messages}});
    return string_field(r, "content", "chat");
  }

 private:
  std::shared_ptr<const RemoteClient> client_;
};

}  // namespace

void RemoteConfig::apply_env() {
  if (const char* url = std::getenv("VIDMEM_BACKEND_URL"); url && *url) base_url = url;
  if (const char* key = std::getenv("VIDMEM_API_KEY"); key && *key) api_key = key;
}

RemoteClient::RemoteClient(RemoteConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) throw ContractError("backend URL needs a scheme: " + config_.base_url);
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  host_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    prefix_ = config_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
}

json RemoteClient::post(const std::string& path, const json& body) const {
  httplib::Client cli(host_);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const auto res = cli.Post(prefix_ + path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("POST " + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendError("POST " + path + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw BackendError("POST " + path + " returned invalid JSON: " + e.what());
  }
}

json track_to_json(const TrackResult& t) {
  json crops = json::array();
  for (const auto& c : t.crops) crops.push_back({{"frame", c.frame}, {"ref", c.ref}});
  return {{"tracking_id", t.tracking_id}, {"category", t.category}, {"frames", t.frames}, {"crops", crops}};
}

TrackResult track_from_json(const json& j) {
  TrackResult t;
  t.tracking_id = j.at("tracking_id").get<std::int64_t>();
  t.category = j.at("category").get<std::string>();
  t.frames = j.at("frames").get<std::vector<std::int64_t>>();
  std::sort(t.frames.begin(), t.frames.end());
  t.frames.erase(std::unique(t.frames.begin(), t.frames.end()), t.frames.end());
  if (t.frames.empty()) throw BackendError("track " + std::to_string(t.tracking_id) + " has no frames");
  for (const auto& c : j.value("crops", json::array())) {
    CropRef ref;
    ref.tracking_id = t.tracking_id;
    if (c.is_string()) {
      ref.ref = c.get<std::string>();
    } else {
      ref.frame = c.value("frame", std::int64_t{0});
      ref.ref = c.at("ref").get<std::string>();
    }
    t.crops.push_back(std::move(ref));
  }
  return t;
}

BackendSuite make_remote_suite(const RemoteConfig& config) {
  auto client = std::make_shared<const RemoteClient>(config);
  BackendSuite s;
  s.sampling = config.sampling;
  s.captioner = std::make_shared<RemoteCaptioner>(client);
  s.crossmodal = std::make_shared<RemoteCrossModal>(client);
  s.caption_text = std::make_shared<RemoteTextEmbedder>(client, "caption", config.caption_dim);
  s.clip_text = std::make_shared<RemoteTextEmbedder>(client, "clip", config.clip_dim);
  s.crop_clip = std::make_shared<RemoteCropEmbedder>(client, "clip", config.clip_dim);
  s.crop_dino = std::make_shared<RemoteCropEmbedder>(client, "dino", config.dino_dim);
  s.tracker = std::make_shared<RemoteTracker>(client);
  s.vqa = std::make_shared<RemoteVqa>(client);
  s.chat = std::make_shared<RemoteChat>(client);
  return s;
}

}  // namespace vidmem
