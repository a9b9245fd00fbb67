#include "vidmem/scripted_chat.hpp"

#include "json.hpp"
#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

std::string flatten_prompt(const std::vector<ChatTurn>& turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i) out += "\n\n";
    out += to_string(turns[i].role);
    out += ": ";
    out += turns[i].content;
  }
  return out;
}

ScriptedChat::ScriptedChat(std::vector<ScriptEntry> script) : script_(std::move(script)) {}

ScriptedChat ScriptedChat::from_json(const std::string& text) {
  std::vector<ScriptEntry> entries;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw CorruptFileError("chat script must be a JSON array");
    for (const auto& item : j) {
      ScriptEntry e;
      e.reply = item.at("reply").get<std::string>();
      if (item.contains("expect")) {
        const auto& ex = item.at("expect");
        if (ex.is_string()) {
          e.expect.push_back(ex.get<std::string>());
        } else {
          e.expect = ex.get<std::vector<std::string>>();
        }
      }
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("chat script: ") + e.what());
  }
  return ScriptedChat(std::move(entries));
}

ScriptedChat ScriptedChat::load(const std::filesystem::path& path) { return from_json(util::read_file(path)); }

std::string ScriptedChat::complete(const std::vector<ChatTurn>& turns) {
  std::string prompt = flatten_prompt(turns);
  prompts_.push_back(prompt);
  if (cursor_ >= script_.size()) {
    throw ScriptDivergenceError("chat script exhausted after " + std::to_string(script_.size()) + " replies",
                                std::move(prompt));
  }
  const auto& entry = script_[cursor_];
  for (const auto& needle : entry.expect) {
    if (prompt.find(needle) == std::string::npos) {
      throw ScriptDivergenceError("chat script entry " + std::to_string(cursor_) + " expected prompt to contain \"" +
                                      needle + "\"",
                                  std::move(prompt));
    }
  }
  ++cursor_;
  return entry.reply_fn ? entry.reply_fn(turns) : entry.reply;
}

}  // namespace vidmem
