#pragma once
// Contracts for every external model the system talks to. Synthetic, scripted
// and remote implementations live in synthetic.hpp, scripted_chat.hpp and
// remote.hpp.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vidmem/core.hpp"

namespace vidmem {

/// One video segment as handed to captioner / video encoder. Frames are
/// references (URIs); decoding happens on the model side.
struct SegmentMedia {
  std::string video_uri;
  SegmentIndex segment;
  std::vector<std::string> frames;
};

struct CropRef {
  std::string video_uri;
  std::int64_t tracking_id = 0;
  std::int64_t frame = 0;
  std::string ref;

  friend bool operator==(const CropRef&, const CropRef&) = default;
};

/// One tracker-assigned occurrence. `frames` is sorted, unique and non-empty.
struct TrackResult {
  std::int64_t tracking_id = 0;
  std::string category;
  std::vector<std::int64_t> frames;
  std::vector<CropRef> crops;

  friend bool operator==(const TrackResult&, const TrackResult&) = default;
};

enum class ChatRole { system, user, assistant };

std::string_view to_string(ChatRole role);
ChatRole chat_role_from_string(std::string_view s);

struct ChatTurn {
  ChatRole role = ChatRole::user;
  std::string content;

  friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

struct VqaResult {
  std::string description;
  std::string answer;
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string caption(const SegmentMedia& segment) const = 0;
};

/// Video and text encoders sharing one embedding space.
class CrossModalEmbedder {
 public:
  virtual ~CrossModalEmbedder() = default;
  virtual Embedding embed_video(const SegmentMedia& segment) const = 0;
  virtual Embedding embed_text(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

class CropEmbedder {
 public:
  virtual ~CropEmbedder() = default;
  virtual Embedding embed_crop(const CropRef& crop) const = 0;
  virtual std::size_t dim() const = 0;
};

class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual std::vector<TrackResult> track(const std::string& video_uri) const = 0;
};

class VqaModel {
 public:
  virtual ~VqaModel() = default;
  virtual VqaResult answer(std::string_view question, const TimeWindow& window,
                           const std::string& video_uri) const = 0;
};

/// Chat completion. Not required to be thread-safe; one agent run owns it.
class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(const std::vector<ChatTurn>& turns) = 0;
};

/// Frame counts forwarded to model servers; not enforced locally.
struct SamplingConfig {
  int caption_frames = 4;
  int video_frames = 10;
  int crop_frames = 10;
};

struct BackendSuite {
  std::shared_ptr<const Captioner> captioner;
  std::shared_ptr<const CrossModalEmbedder> crossmodal;
  std::shared_ptr<const TextEmbedder> caption_text;
  std::shared_ptr<const TextEmbedder> clip_text;
  std::shared_ptr<const CropEmbedder> crop_clip;
  std::shared_ptr<const CropEmbedder> crop_dino;
  std::shared_ptr<const Tracker> tracker;
  std::shared_ptr<const VqaModel> vqa;
  std::shared_ptr<ChatModel> chat;
  // Chat used by the object-memory sub-agent; falls back to `chat` when unset.
  std::shared_ptr<ChatModel> memory_chat;
  SamplingConfig sampling;

  ChatModel& main_chat() const;
  ChatModel& memory_agent_chat() const;

  // Throws ContractError when a present member pair disagrees on dims
  // (e.g. clip text vs clip crop).
  void validate() const;
};

/// Validates that `e` has the dim declared by its producing role.
Embedding expect_dim(Embedding e, std::size_t dim, std::string_view role);

}  // namespace vidmem
