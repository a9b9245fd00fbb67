#pragma once
// The tool-use loop: prompt rendering, Thought/Action parsing, tool dispatch
// over the two memories, and the nested object-memory agent.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vidmem/backends.hpp"
#include "vidmem/memory_bundle.hpp"
#include "vidmem/temporal_memory.hpp"

namespace vidmem {

namespace tool {
inline constexpr std::string_view caption_retrieval = "caption_retrieval";
inline constexpr std::string_view segment_localization = "segment_localization";
inline constexpr std::string_view visual_question_answering = "visual_question_answering";
inline constexpr std::string_view object_memory_querying = "object_memory_querying";
inline constexpr std::string_view database_querying = "database_querying";
inline constexpr std::string_view open_vocabulary_retrieval = "open_vocabulary_retrieval";
inline constexpr std::string_view stop = "stop";
}  // namespace tool

inline constexpr int kDefaultMaxStep = 10;
inline constexpr std::size_t kObservationCap = 4000;
inline constexpr std::string_view kTruncationMarker = "... [observation truncated]";

// Sent once after an unparsable completion.
inline constexpr std::string_view kFormatReminder =
    "Your last reply did not follow the required format. Respond in the required format: either "
    "\"Action:\" and \"Action Input:\" lines, or a \"Final Answer:\" line.";
// Appended to the prompt when the step budget runs out.
inline constexpr std::string_view kForceFinalInstruction =
    "You have used all available tool calls. Do not call any more tools. Based on the observations so far, "
    "reply with your best answer as a line starting with \"Final Answer:\".";

enum class TaskKind { mcq, open_ended, nlq };
std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

struct ToolSpec {
  std::string name;
  std::string description;
};

/// Tools of the top-level agent, in prompt order.
const std::vector<ToolSpec>& main_tools();
/// Tools of the object-memory agent.
const std::vector<ToolSpec>& memory_tools();

struct AgentStep {
  std::string thought;
  std::string action;
  std::string action_input;
  std::string observation;

  friend bool operator==(const AgentStep&, const AgentStep&) = default;
};

struct History {
  std::string query;
  std::vector<AgentStep> steps;

  friend bool operator==(const History&, const History&) = default;
};

struct AgentAnswer {
  std::string final_text;
  std::optional<int> choice_label;
  History transcript;
  bool forced = false;  // came from the terminal forced-answer call
};

/// {"query","steps":[{"thought","action","action_input","observation"}...],"final","choice"}
nlohmann::ordered_json transcript_to_json(const AgentAnswer& answer);

// ---- parsing -------------------------------------------------------------

struct ParsedAction {
  std::string thought;
  std::string action;
  std::string input;
};

struct ParsedFinal {
  std::string thought;
  std::string text;
};

using ParsedStep = std::variant<ParsedAction, ParsedFinal>;

/// Reads one completion. Markdown fences are dropped and anything from the
/// first "Observation:" line on is ignored (the model may hallucinate tool
/// output). A "Final Answer:" before any "Action:" wins; otherwise the first
/// Action after the last preceding "Thought:" is taken. Throws FormatError
/// when neither is present.
ParsedStep parse_step(std::string_view llm_text);

/// First integer in [0, 4] appearing in `text`.
std::optional<int> extract_choice(std::string_view text);

struct CaptionRetrievalArgs {
  std::int64_t start = 0;
  std::int64_t end = 0;
};
struct LocalizationArgs {
  std::string description;
};
struct VqaArgs {
  std::string question;
  std::int64_t segment = 0;
};
struct MemoryQueryArgs {
  std::string question;
};
struct SqlArgs {
  std::string program;
};
struct OpenVocabArgs {
  std::string description;
};

using ToolArgs = std::variant<CaptionRetrievalArgs, LocalizationArgs, VqaArgs, MemoryQueryArgs, SqlArgs, OpenVocabArgs>;

/// Typed arguments for `tool`. Throws FormatError with a message meant to be
/// shown to the model on arity/type mismatch, ContractError for unknown tools.
ToolArgs parse_tool_input(std::string_view tool, std::string_view raw);

// ---- rendering -----------------------------------------------------------

std::string render_localization(const TemporalMemory& mem, const std::vector<LocalizationHit>& hits);
std::string render_captions(const std::vector<std::pair<std::int64_t, std::string>>& captions);
std::string render_vqa(const VqaResult& r);
std::string render_open_vocab(const ObjectMemory& mem, const std::vector<std::pair<std::int64_t, double>>& hits);

/// Caps `obs` at `cap` bytes (on a UTF-8 boundary) and appends the marker.
std::string truncate_observation(std::string obs, std::size_t cap = kObservationCap);

/// Prompt templates keyed by task kind plus the memory-agent template. Each
/// template holds {tools}, {tool_names}, {input} and {agent_scratchpad}.
class PromptLibrary {
 public:
  /// Reads mcq.txt, open_ended.txt, nlq.txt and memory_agent.txt from `dir`.
  static PromptLibrary load(const std::filesystem::path& dir);
  /// $VIDMEM_PROMPT_DIR if set, else the directory configured at build time.
  static std::filesystem::path default_dir();

  PromptLibrary(std::map<TaskKind, std::string> task_templates, std::string memory_template);

  const std::string& task_template(TaskKind kind) const;
  const std::string& memory_template() const { return memory_; }

 private:
  std::map<TaskKind, std::string> tasks_;
  std::string memory_;
};

/// Scratchpad in the Thought/Action/Action Input/Observation format; empty
/// for no steps, otherwise it ends with "Thought: " for the next completion.
std::string render_scratchpad(const std::vector<AgentStep>& steps);

/// System turn: the template up to the question line. User turn: the question
/// line and the scratchpad.
std::vector<ChatTurn> render_prompt(const History& history, const std::vector<ToolSpec>& tools,
                                    std::string_view template_text);

/// "question\n0: option\n1: option..." as fed to {input}.
std::string format_mcq(std::string_view question, const std::array<std::string, 5>& options);

// ---- execution -----------------------------------------------------------

struct AgentOptions {
  TaskKind task = TaskKind::mcq;
  EnsembleWeights weights = EnsembleWeights::from_ratio(18, 11);
  double expand_s = 0.0;
  std::size_t caption_cap = kCaptionWindowCap;
  std::size_t localization_k = kLocalizationTopK;
  OpenVocabParams open_vocab;
  int max_step = kDefaultMaxStep;
  int memory_max_step = kDefaultMaxStep;
  std::size_t observation_cap = kObservationCap;
};

/// Observation for one tool call of the top-level agent. Tool failures of any
/// kind are rendered as "Error: ..." text instead of propagating.
std::string dispatch(std::string_view tool_name, std::string_view raw_input, const MemoryBundle& bundle,
                     const BackendSuite& suite, const PromptLibrary& prompts, const AgentOptions& options);

/// Nested agent over the object memory with database_querying and
/// open_vocabulary_retrieval. Returns its final answer; throws StepLimitError
/// when it runs out of steps or stops without answering.
std::string object_memory_querying(const ObjectMemory& mem, std::string_view nl_query, ChatModel& chat,
                                   const BackendSuite& suite, const PromptLibrary& prompts,
                                   const AgentOptions& options = {}, History* transcript = nullptr);

/// The top-level loop. Chat errors and twice-unparsable completions propagate;
/// tool errors become observations.
AgentAnswer run_agent(std::string_view query, const MemoryBundle& bundle, const BackendSuite& suite,
                      const PromptLibrary& prompts, const AgentOptions& options = {});

}  // namespace vidmem
