#include "vidmem/backends.hpp"

#include "vidmem/error.hpp"

namespace vidmem {

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system:
      return "system";
    case ChatRole::assistant:
      return "assistant";
    case ChatRole::user:
      break;
  }
  return "user";
}

ChatRole chat_role_from_string(std::string_view s) {
  if (s == "system") return ChatRole::system;
  if (s == "user") return ChatRole::user;
  if (s == "assistant") return ChatRole::assistant;
  throw ContractError("unknown chat role: " + std::string(s));
}

ChatModel& BackendSuite::main_chat() const {
  if (!chat) throw BackendError("no chat backend configured");
  return *chat;
}

ChatModel& BackendSuite::memory_agent_chat() const {
  if (memory_chat) return *memory_chat;
  return main_chat();
}

void BackendSuite::validate() const {
  if (clip_text && crop_clip && clip_text->dim() != crop_clip->dim()) {
    throw ContractError("clip text and clip crop embedders disagree on dim");
  }
}

Embedding expect_dim(Embedding e, std::size_t dim, std::string_view role) {
  if (e.dim() != dim) {
    throw BackendError(std::string(role) + " returned dim " + std::to_string(e.dim()) +
                       ", expected " + std::to_string(dim));
  }
  return e;
}

}  // namespace vidmem
