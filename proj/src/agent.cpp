#include "vidmem/agent.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "vidmem/error.hpp"
#include "vidmem/sql.hpp"
#include "vidmem/util.hpp"

#ifndef VIDMEM_PROMPT_DIR
#define VIDMEM_PROMPT_DIR "prompts"
#endif

namespace vidmem {

namespace {

// Position of `marker` at the start of a line (leading blanks allowed), at or
// after `from`; npos when absent.
std::size_t find_line_marker(std::string_view text, std::string_view marker, std::size_t from = 0) {
  for (std::size_t pos = text.find(marker, from); pos != std::string_view::npos; pos = text.find(marker, pos + 1)) {
    std::size_t k = pos;
    while (k > 0 && (text[k - 1] == ' ' || text[k - 1] == '\t')) --k;
    if (k == 0 || text[k - 1] == '\n') return pos;
  }
  return std::string_view::npos;
}

std::string drop_fences(std::string_view text) {
  std::string out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (util::trim(line).starts_with("```")) continue;
    if (!first) out += '\n';
    out += line;
    first = false;
  }
  return out;
}

std::string clean_name(std::string_view s) {
  std::string out(util::trim(s));
  const auto junk = [](char c) { return c == '\'' || c == '"' || c == '`' || c == '*' || c == ' '; };
  while (!out.empty() && junk(out.front())) out.erase(out.begin());
  while (!out.empty() && junk(out.back())) out.pop_back();
  return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = util::trim(s);
  const std::string unq = util::strip_quotes(s);
  s = unq;
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && p == end;
}

// Drops one pair of enclosing parentheses or brackets.
std::string_view unwrap_tuple(std::string_view s) {
  s = util::trim(s);
  if (s.size() >= 2 && ((s.front() == '(' && s.back() == ')') || (s.front() == '[' && s.back() == ']'))) {
    s = util::trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string_view>>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : values) {
        if (tmpl.substr(i).starts_with(key)) {
          out += value;
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

std::string tools_block(const std::vector<ToolSpec>& tools) {
  std::vector<std::string> lines;
  for (const auto& t : tools) lines.push_back(t.name + ": " + t.description);
  return util::join(lines, "\n");
}

std::string tool_names(const std::vector<ToolSpec>& tools) {
  std::vector<std::string> names;
  for (const auto& t : tools) names.push_back(t.name);
  return util::join(names, ", ");
}

bool has_tool(const std::vector<ToolSpec>& tools, std::string_view name) {
  return std::any_of(tools.begin(), tools.end(), [&](const ToolSpec& t) { return t.name == name; });
}

std::string invalid_tool(std::string_view name, const std::vector<ToolSpec>& tools) {
  return "Error: '" + std::string(name) + "' is not a valid tool, try one of [" + tool_names(tools) + "].";
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ParsedStep complete_and_parse(ChatModel& chat, const std::vector<ChatTurn>& turns) {
  const std::string text = chat.complete(turns);
  try {
    return parse_step(text);
  } catch (const FormatError&) {
    auto retry = turns;
    retry.push_back({ChatRole::assistant, text.empty() ? std::string("(empty)") : text});
    retry.push_back({ChatRole::user, std::string(kFormatReminder)});
    const std::string again = chat.complete(retry);
    try {
      return parse_step(again);
    } catch (const FormatError& e) {
      throw FormatError(std::string("model output unparsable after one corrective retry: ") + e.what());
    }
  }
}

struct LoopOutcome {
  History history;
  std::optional<ParsedFinal> final;
  bool stopped = false;
};

using ActFn = std::function<std::string(const std::string& action, const std::string& input)>;

LoopOutcome run_loop(std::string_view query, const std::vector<ToolSpec>& tools, std::string_view tmpl,
                     ChatModel& chat, int max_step, std::size_t obs_cap, const ActFn& act) {
  if (max_step < 0) throw ContractError("max_step must be non-negative");
  LoopOutcome out;
  out.history.query = std::string(query);
  for (int c = 0; c < max_step; ++c) {
    const auto parsed = complete_and_parse(chat, render_prompt(out.history, tools, tmpl));
    if (const auto* fin = std::get_if<ParsedFinal>(&parsed)) {
      out.final = *fin;
      return out;
    }
    const auto& a = std::get<ParsedAction>(parsed);
    AgentStep step{a.thought, a.action, a.input, ""};
    if (a.action == tool::stop) {
      out.history.steps.push_back(std::move(step));
      out.stopped = true;
      return out;
    }
    step.observation = truncate_observation(act(a.action, a.input), obs_cap);
    out.history.steps.push_back(std::move(step));
  }
  return out;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::mcq:
      return "mcq";
    case TaskKind::open_ended:
      return "open_ended";
    case TaskKind::nlq:
      return "nlq";
  }
  return "mcq";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "mcq") return TaskKind::mcq;
  if (s == "open_ended" || s == "open-ended") return TaskKind::open_ended;
  if (s == "nlq") return TaskKind::nlq;
  throw ContractError("unknown task kind '" + std::string(s) + "' (mcq, open_ended, nlq)");
}

const std::vector<ToolSpec>& main_tools() {
  static const std::vector<ToolSpec> tools = {
      {std::string(tool::caption_retrieval),
       "Input: a tuple (start_segment, end_segment) of segment IDs, both included. Returns the caption of each "
       "segment in that range, 15 captions at most per call, so end_segment must be below start_segment+15."},
      {std::string(tool::segment_localization),
       "Input: one text description. Returns how many segments the video has and the 5 segments whose "
       "content best matches the description, best match first."},
      {std::string(tool::visual_question_answering),
       "Input: a tuple (question, segment_id). Watches segments segment_id-1 through segment_id+1 and returns "
       "a description of that clip plus an answer to the question."},
      {std::string(tool::object_memory_querying),
       "Input: a question about objects or people, such as 'how many cups are there in the video?'. A helper "
       "agent answers it from the object memory; its answers can be wrong."},
  };
  return tools;
}

const std::vector<ToolSpec>& memory_tools() {
  static const std::vector<ToolSpec> tools = {
      {std::string(tool::database_querying),
       "Input: one SQL query over the objects table. Returns the result rows, or the error if the query is "
       "invalid."},
      {std::string(tool::open_vocabulary_retrieval),
       "Input: a short object description. Returns IDs of stored objects that look like the description, "
       "best match first."},
  };
  return tools;
}

nlohmann::ordered_json transcript_to_json(const AgentAnswer& answer) {
  nlohmann::ordered_json j;
  j["query"] = answer.transcript.query;
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : answer.transcript.steps) {
    nlohmann::ordered_json step;
    step["thought"] = s.thought;
    step["action"] = s.action;
    step["action_input"] = s.action_input;
    step["observation"] = s.observation;
    j["steps"].push_back(std::move(step));
  }
  j["final"] = answer.final_text;
  j["choice"] = answer.choice_label ? nlohmann::ordered_json(*answer.choice_label) : nlohmann::ordered_json(nullptr);
  return j;
}

ParsedStep parse_step(std::string_view llm_text) {
  std::string text = drop_fences(llm_text);
  if (const auto obs = find_line_marker(text, "Observation:"); obs != std::string::npos) text.resize(obs);
  const std::string_view t = text;

  const auto action = find_line_marker(t, "Action:");
  const auto final = t.find("Final Answer:");
  const auto thought_before = [&](std::size_t end) {
    const auto th = t.substr(0, end).rfind("Thought:");
    const std::size_t begin = th == std::string_view::npos ? 0 : th + 8;
    return std::string(util::trim(t.substr(begin, end - begin)));
  };

  if (final != std::string_view::npos && (action == std::string_view::npos || final < action)) {
    // A trailing Action block after the answer is not part of it.
    const auto cut = find_line_marker(t, "Action:", final + 13);
    std::string_view rest = t.substr(final + 13, cut == std::string_view::npos ? std::string_view::npos : cut - final - 13);
    return ParsedFinal{thought_before(final), std::string(util::trim(rest))};
  }
  if (action == std::string_view::npos) {
    throw FormatError("no 'Action:' or 'Final Answer:' in model output");
  }

  ParsedAction out;
  out.thought = thought_before(action);
  const auto eol = t.find('\n', action);
  const auto name_end = eol == std::string_view::npos ? t.size() : eol;
  out.action = clean_name(t.substr(action + 7, name_end - action - 7));
  if (out.action.empty()) throw FormatError("empty 'Action:' line");

  const auto input = find_line_marker(t, "Action Input:", name_end);
  if (input != std::string_view::npos) {
    std::size_t end = t.size();
    for (const auto* m : {"Thought:", "Action:", "Final Answer:"}) {
      end = std::min(end, find_line_marker(t, m, input + 13));
    }
    out.input = util::strip_quotes(util::trim(t.substr(input + 13, end - input - 13)));
  }
  return out;
}

std::optional<int> extract_choice(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i == 1 && text[i] <= '4') return text[i] - '0';
    i = j;
  }
  return std::nullopt;
}

ToolArgs parse_tool_input(std::string_view tool_name, std::string_view raw) {
  const auto text_arg = [&](std::string_view what) {
    std::string s = util::strip_quotes(util::trim(raw));
    if (util::trim(s).empty()) {
      throw FormatError(std::string(tool_name) + " expects " + std::string(what) + ", got an empty input");
    }
    return s;
  };

  if (tool_name == tool::caption_retrieval) {
    const auto inner = unwrap_tuple(util::strip_quotes(raw));
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t k = 0; k <= inner.size(); ++k) {
      if (k == inner.size() || inner[k] == ',') {
        parts.emplace_back(util::trim(inner.substr(start, k - start)));
        start = k + 1;
      }
    }
    CaptionRetrievalArgs a;
    if (parts.size() != 2 || !parse_int(parts[0], a.start) || !parse_int(parts[1], a.end)) {
      throw FormatError("caption_retrieval expects two segment IDs as (start_segment, end_segment), got: " +
                        std::string(util::trim(raw)));
    }
    return a;
  }
  if (tool_name == tool::visual_question_answering) {
    const std::string unq = util::strip_quotes(raw);
    const auto inner = unwrap_tuple(unq);
    const auto comma = inner.rfind(',');
    VqaArgs a;
    if (comma == std::string_view::npos || !parse_int(inner.substr(comma + 1), a.segment)) {
      throw FormatError("visual_question_answering expects (question, segment_id), got: " +
                        std::string(util::trim(raw)));
    }
    a.question = util::strip_quotes(util::trim(inner.substr(0, comma)));
    if (util::trim(a.question).empty()) {
      throw FormatError("visual_question_answering expects a non-empty question in (question, segment_id)");
    }
    return a;
  }
  if (tool_name == tool::segment_localization) return LocalizationArgs{text_arg("a text description")};
  if (tool_name == tool::object_memory_querying) return MemoryQueryArgs{text_arg("a question about objects")};
  if (tool_name == tool::open_vocabulary_retrieval) return OpenVocabArgs{text_arg("an object description")};
  if (tool_name == tool::database_querying) {
    const std::string program = util::strip_quotes(util::trim(drop_fences(raw)));
    if (util::trim(program).empty()) throw FormatError("database_querying expects a SQL query, got an empty input");
    return SqlArgs{program};
  }
  throw ContractError("parse_tool_input: unknown tool '" + std::string(tool_name) + "'");
}

std::string render_localization(const TemporalMemory& mem, const std::vector<LocalizationHit>& hits) {
  std::vector<std::string> entries;
  for (const auto& h : hits) {
    entries.push_back(std::to_string(h.segment.index) + ": " +
                      util::py_repr(mem.records()[static_cast<std::size_t>(h.segment.index)].caption));
  }
  const auto n = mem.size();
  return "There are " + std::to_string(n) + " segments in total, ranging from 0 to " + std::to_string(n - 1) +
         ". {" + util::join(entries, ", ") + "}";
}

std::string render_captions(const std::vector<std::pair<std::int64_t, std::string>>& captions) {
  std::vector<std::string> entries;
  for (const auto& [i, c] : captions) entries.push_back(std::to_string(i) + ": " + util::py_repr(c));
  return "{" + util::join(entries, ", ") + "}";
}

std::string render_vqa(const VqaResult& r) { return "Description: " + r.description + "\nAnswer: " + r.answer; }

std::string render_open_vocab(const ObjectMemory& mem, const std::vector<std::pair<std::int64_t, double>>& hits) {
  if (hits.empty()) return "No stored object matches the description.";
  std::vector<std::string> lines;
  for (const auto& [id, cos] : hits) {
    const auto& objs = mem.objects();
    const auto it = std::find_if(objs.begin(), objs.end(), [id = id](const ObjectRecord& o) { return o.object_id == id; });
    const std::string category = it == objs.end() ? "?" : it->category;
    lines.push_back("object_id " + std::to_string(id) + " (" + category + "), similarity " + format_fixed(cos, 3));
  }
  return util::join(lines, "\n");
}

std::string truncate_observation(std::string obs, std::size_t cap) {
  if (obs.size() <= cap) return obs;
  std::size_t cut = cap;
  // Back off to the start of a UTF-8 sequence.
  while (cut > 0 && (static_cast<unsigned char>(obs[cut]) & 0xC0) == 0x80) --cut;
  obs.resize(cut);
  obs += kTruncationMarker;
  return obs;
}

PromptLibrary::PromptLibrary(std::map<TaskKind, std::string> task_templates, std::string memory_template)
    : tasks_(std::move(task_templates)), memory_(std::move(memory_template)) {
  const auto check = [](const std::string& name, const std::string& t) {
    for (const auto* key : {"{tools}", "{tool_names}", "{input}", "{agent_scratchpad}"}) {
      if (t.find(key) == std::string::npos) throw ContractError("prompt template " + name + " lacks " + key);
    }
  };
  for (const auto& [kind, t] : tasks_) check(std::string(to_string(kind)), t);
  check("memory_agent", memory_);
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  const auto read = [&](const char* name) {
    std::string t = util::read_file(dir / name);
    if (!t.empty() && t.back() == '\n') t.pop_back();
    return t;
  };
  std::map<TaskKind, std::string> tasks;
  tasks[TaskKind::mcq] = read("mcq.txt");
  tasks[TaskKind::open_ended] = read("open_ended.txt");
  tasks[TaskKind::nlq] = read("nlq.txt");
  return PromptLibrary(std::move(tasks), read("memory_agent.txt"));
}

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("VIDMEM_PROMPT_DIR"); env && *env) return env;
  return VIDMEM_PROMPT_DIR;
}

const std::string& PromptLibrary::task_template(TaskKind kind) const {
  const auto it = tasks_.find(kind);
  if (it == tasks_.end()) throw ContractError("no prompt template for task " + std::string(to_string(kind)));
  return it->second;
}

std::string render_scratchpad(const std::vector<AgentStep>& steps) {
  std::string out;
  for (const auto& s : steps) {
    out += s.thought + "\nAction: " + s.action + "\nAction Input: " + s.action_input + "\nObservation: " +
           s.observation + "\nThought: ";
  }
  return out;
}

std::vector<ChatTurn> render_prompt(const History& history, const std::vector<ToolSpec>& tools,
                                    std::string_view template_text) {
  std::size_t split = 0;
  if (const auto input_pos = template_text.find("{input}"); input_pos != std::string_view::npos) {
    const auto nl = template_text.rfind('\n', input_pos);
    split = nl == std::string_view::npos ? 0 : nl + 1;
  }

  const std::string tools_text = tools_block(tools);
  const std::string names = tool_names(tools);
  const std::string scratchpad = render_scratchpad(history.steps);
  const std::vector<std::pair<std::string_view, std::string_view>> values = {
      {"{tools}", tools_text}, {"{tool_names}", names}, {"{input}", history.query}, {"{agent_scratchpad}", scratchpad}};

  std::vector<ChatTurn> turns;
  std::string system = fill(template_text.substr(0, split), values);
  while (!system.empty() && (system.back() == '\n' || system.back() == ' ')) system.pop_back();
  if (!system.empty()) turns.push_back({ChatRole::system, std::move(system)});
  turns.push_back({ChatRole::user, fill(template_text.substr(split), values)});
  return turns;
}

std::string format_mcq(std::string_view question, const std::array<std::string, 5>& options) {
  std::string out(question);
  for (std::size_t i = 0; i < options.size(); ++i) out += "\n" + std::to_string(i) + ": " + options[i];
  return out;
}

std::string dispatch(std::string_view tool_name, std::string_view raw_input, const MemoryBundle& bundle,
                     const BackendSuite& suite, const PromptLibrary& prompts, const AgentOptions& options) {
  if (!has_tool(main_tools(), tool_name)) return invalid_tool(tool_name, main_tools());
  try {
    const auto args = parse_tool_input(tool_name, raw_input);
    const auto& mem = bundle.temporal;
    if (const auto* a = std::get_if<CaptionRetrievalArgs>(&args)) {
      return render_captions(caption_retrieval(mem, a->start, a->end, options.caption_cap));
    }
    if (const auto* a = std::get_if<LocalizationArgs>(&args)) {
      return render_localization(
          mem, segment_localization(mem, a->description, options.weights, suite, options.localization_k,
                                    options.expand_s));
    }
    if (const auto* a = std::get_if<VqaArgs>(&args)) {
      const auto n = static_cast<std::int64_t>(mem.size());
      if (a->segment < 0 || a->segment >= n) {
        throw RangeError("segment_id " + std::to_string(a->segment) + " is outside 0.." + std::to_string(n - 1));
      }
      if (!suite.vqa) throw ContractError("no visual question answering backend configured");
      const auto lo = static_cast<std::size_t>(std::max<std::int64_t>(0, a->segment - 1));
      const auto hi = static_cast<std::size_t>(std::min<std::int64_t>(n - 1, a->segment + 1));
      const TimeWindow window{mem.records()[lo].segment.start_s, mem.records()[hi].segment.end_s};
      return render_vqa(suite.vqa->answer(a->question, window, bundle.video_uri));
    }
    const auto& q = std::get<MemoryQueryArgs>(args);
    return object_memory_querying(bundle.objects, q.question, suite.memory_agent_chat(), suite, prompts, options);
  } catch (const ScriptDivergenceError&) {
    throw;
  } catch (const std::exception& e) {
    return std::string("Error: ") + e.what();
  }
}

std::string object_memory_querying(const ObjectMemory& mem, std::string_view nl_query, ChatModel& chat,
                                   const BackendSuite& suite, const PromptLibrary& prompts,
                                   const AgentOptions& options, History* transcript) {
  if (util::trim(nl_query).empty()) throw ContractError("object_memory_querying: empty query");
  const ActFn act = [&](const std::string& action, const std::string& input) -> std::string {
    if (!has_tool(memory_tools(), action)) return invalid_tool(action, memory_tools());
    try {
      const auto args = parse_tool_input(action, input);
      if (const auto* a = std::get_if<SqlArgs>(&args)) return sql::execute_query(mem, a->program).render();
      const auto& a = std::get<OpenVocabArgs>(args);
      return render_open_vocab(mem, open_vocabulary_retrieval(mem, a.description, suite, options.open_vocab));
    } catch (const ScriptDivergenceError&) {
      throw;
    } catch (const std::exception& e) {
      return std::string("Error: ") + e.what();
    }
  };
  auto outcome = run_loop(util::trim(nl_query), memory_tools(), prompts.memory_template(), chat,
                          options.memory_max_step, options.observation_cap, act);
  if (transcript) *transcript = outcome.history;
  if (!outcome.final) {
    throw StepLimitError(outcome.stopped ? "object memory agent stopped without an answer"
                                         : "object memory agent used all " + std::to_string(options.memory_max_step) +
                                               " steps without an answer");
  }
  return outcome.final->text;
}

AgentAnswer run_agent(std::string_view query, const MemoryBundle& bundle, const BackendSuite& suite,
                      const PromptLibrary& prompts, const AgentOptions& options) {
  if (util::trim(query).empty()) throw ContractError("run_agent: empty query");
  if (bundle.temporal.empty()) throw ContractError("run_agent: memory bundle has no segments");
  ChatModel& chat = suite.main_chat();
  const auto& tmpl = prompts.task_template(options.task);
  const ActFn act = [&](const std::string& action, const std::string& input) {
    return dispatch(action, input, bundle, suite, prompts, options);
  };
  auto outcome = run_loop(query, main_tools(), tmpl, chat, options.max_step, options.observation_cap, act);

  AgentAnswer answer;
  answer.transcript = std::move(outcome.history);
  if (outcome.final) {
    answer.final_text = outcome.final->text;
  } else {
    auto turns = render_prompt(answer.transcript, main_tools(), tmpl);
    turns.push_back({ChatRole::user, std::string(kForceFinalInstruction)});
    const std::string text = chat.complete(turns);
    try {
      const auto parsed = parse_step(text);
      const auto* fin = std::get_if<ParsedFinal>(&parsed);
      answer.final_text = fin ? fin->text : std::string(util::trim(text));
    } catch (const FormatError&) {
      answer.final_text = std::string(util::trim(drop_fences(text)));
    }
    answer.forced = true;
  }
  if (options.task == TaskKind::mcq) answer.choice_label = extract_choice(answer.final_text);
  return answer;
}

}  // namespace vidmem
