#pragma once
// Deterministic LLM stand-in that replays a transcript and refuses to improvise.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vidmem/backends.hpp"

namespace vidmem {

/// Flattened view of a prompt ("role: content" blocks joined by blank lines).
std::string flatten_prompt(const std::vector<ChatTurn>& turns);

struct ScriptEntry {
  // Every substring must occur in the flattened prompt. Empty accepts any prompt.
  std::vector<std::string> expect;
  // Static reply, used when `reply_fn` is empty.
  std::string reply;
  // Computed reply; receives the prompt turns (lets tests answer from observations).
  std::function<std::string(const std::vector<ChatTurn>&)> reply_fn;
};

/// Single-consumer: callers must serialize complete() calls.
class ScriptedChat final : public ChatModel {
 public:
  explicit ScriptedChat(std::vector<ScriptEntry> script);

  /// JSON array of {"expect": "..." | ["...", ...], "reply": "..."}.
  static ScriptedChat from_json(const std::string& text);
  static ScriptedChat load(const std::filesystem::path& path);

  std::string complete(const std::vector<ChatTurn>& turns) override;

  std::size_t consumed() const { return cursor_; }
  std::size_t remaining() const { return script_.size() - cursor_; }
  // Every prompt seen so far, flattened.
  const std::vector<std::string>& prompts() const { return prompts_; }

 private:
  std::vector<ScriptEntry> script_;
  std::size_t cursor_ = 0;
  std::vector<std::string> prompts_;
};

}  // namespace vidmem
