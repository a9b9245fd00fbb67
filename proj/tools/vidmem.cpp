// vidmem: build video memories, query them, run the agent, evaluate.
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vidmem/agent.hpp"
#include "vidmem/config.hpp"
#include "vidmem/error.hpp"
#include "vidmem/eval.hpp"
#include "vidmem/memory_bundle.hpp"
#include "vidmem/remote.hpp"
#include "vidmem/scripted_chat.hpp"
#include "vidmem/sql.hpp"
#include "vidmem/synthetic.hpp"
#include "vidmem/util.hpp"
#include "vidmem/world.hpp"

namespace {

using namespace vidmem;
using nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;
};

Config make_config(const Globals& g) {
  Config cfg;
  try {
    if (!g.config_file.empty()) cfg.load_file(g.config_file);
    for (const auto& kv : g.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    util::write_file_atomic(out_path, text);
  }
}

std::vector<SegmentMedia> media_for_video(const std::string& uri, double duration_s, double seg_dur, double fps) {
  std::vector<SegmentMedia> out;
  for (const auto& seg : slice_segments(duration_s, seg_dur)) {
    SegmentMedia m{uri, seg, {}};
    const auto first = static_cast<std::int64_t>(seg.start_s * fps);
    const auto last = static_cast<std::int64_t>(seg.end_s * fps);
    for (auto f = first; f < last; ++f) m.frames.push_back(uri + "#frame=" + std::to_string(f));
    out.push_back(std::move(m));
  }
  return out;
}

// Suite for querying a stored memory. A world (synthetic mode) adds VQA.
BackendSuite query_suite(const Config& cfg, const std::string& world_path) {
  if (cfg.backend == "remote") return make_remote_suite(cfg.remote());
  if (!world_path.empty()) {
    auto world = std::make_shared<const SyntheticWorld>(load_world(world_path));
    return world_to_suite(world, cfg.synthetic_dims(), cfg.synthetic_noise());
  }
  return text_only_suite(cfg.synthetic_dims());
}

struct AskArgs {
  std::string mem;
  std::string world;
  std::string question;
  std::vector<std::string> options;
  int mcq_index = -1;
  std::string task = "mcq";
  std::string script;
  std::string memory_script;
  std::string out;
};

AgentAnswer run_ask(const Config& cfg, const AskArgs& a) {
  const auto bundle = load_memory(a.mem);
  auto suite = query_suite(cfg, a.world);
  if (!a.script.empty()) {
    suite.chat = std::make_shared<ScriptedChat>(ScriptedChat::load(a.script));
  } else if (cfg.backend != "remote") {
    throw UsageError("synthetic backend has no language model: pass --script");
  }
  if (!a.memory_script.empty()) suite.memory_chat = std::make_shared<ScriptedChat>(ScriptedChat::load(a.memory_script));

  std::string query = a.question;
  if (a.mcq_index >= 0) {
    if (a.world.empty()) throw UsageError("--mcq-index needs --world");
    const auto world = load_world(a.world);
    if (static_cast<std::size_t>(a.mcq_index) >= world.mcq.size()) throw UsageError("--mcq-index out of range");
    const auto& m = world.mcq[static_cast<std::size_t>(a.mcq_index)];
    query = format_mcq(m.question, m.options);
  } else if (!a.options.empty()) {
    if (a.options.size() != 5) throw UsageError("--option must be given exactly 5 times");
    std::array<std::string, 5> opts;
    std::copy(a.options.begin(), a.options.end(), opts.begin());
    query = format_mcq(a.question, opts);
  }
  if (util::trim(query).empty()) throw UsageError("pass --question or --mcq-index");

  TaskKind task;
  try {
    task = task_kind_from_string(a.task);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const auto prompts = PromptLibrary::load(cfg.prompts_path());
  return run_agent(query, bundle, suite, prompts, cfg.agent_options(task));
}

void add_ask_options(CLI::App* cmd, AskArgs& a) {
  cmd->add_option("--mem", a.mem, "memory directory")->required();
  cmd->add_option("--world", a.world, "world.json (synthetic VQA and --mcq-index)");
  cmd->add_option("--question,-q", a.question, "question text");
  cmd->add_option("--option", a.options, "answer option (repeat 5 times)");
  cmd->add_option("--mcq-index", a.mcq_index, "take the question from the world's MCQ list");
  cmd->add_option("--task", a.task, "mcq | open_ended | nlq")->capture_default_str();
  cmd->add_option("--script", a.script, "scripted chat JSON for the main agent");
  cmd->add_option("--memory-script", a.memory_script, "scripted chat JSON for the object-memory agent");
  cmd->add_option("-o,--out", a.out, "output file (default stdout)");
}

int run(int argc, char** argv) {
  CLI::App app{"vidmem: temporal and object memory over videos with a tool-using agent"};
  app.require_subcommand(1);
  app.footer("Config keys (JSON file via --config, overrides via --set KEY=VALUE):\n" + Config::describe_keys());

  Globals g;
  app.add_option("--config", g.config_file, "JSON config file with flat keys")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override one config key, KEY=VALUE");

  // gen-world
  std::uint64_t seed = 0;
  WorldParams wp;
  std::string category;
  std::string world_out;
  auto* gen = app.add_subcommand("gen-world", "generate a seeded synthetic world");
  gen->add_option("--seed", seed, "PRNG seed")->required();
  gen->add_option("--segments", wp.n_segments, "segment count")->capture_default_str();
  gen->add_option("--objects", wp.n_objects, "object count")->capture_default_str();
  gen->add_option("--nlq", wp.n_nlq, "NLQ examples")->capture_default_str();
  gen->add_option("--mcq", wp.n_mcq, "MCQ examples")->capture_default_str();
  gen->add_option("--category", category, "force every object into this category");
  gen->add_option("-o,--out", world_out, "output world.json")->required();

  // build-memory
  std::string bm_world, bm_uri, bm_out;
  double bm_duration = 0.0;
  auto* build = app.add_subcommand("build-memory", "build and save the temporal and object memories");
  build->add_option("--world", bm_world, "world.json (synthetic backend)");
  build->add_option("--video-uri", bm_uri, "video URI (remote backend)");
  build->add_option("--duration", bm_duration, "video duration in seconds (remote backend)");
  build->add_option("-o,--out", bm_out, "memory directory")->required();

  // localize
  std::string lz_mem, lz_query, lz_ratio, lz_out;
  std::optional<double> lz_expand;
  std::optional<std::size_t> lz_k;
  auto* localize = app.add_subcommand("localize", "rank segments for a text query");
  localize->add_option("--mem", lz_mem, "memory directory")->required();
  localize->add_option("--query,-q", lz_query, "query text")->required();
  localize->add_option("--ratio", lz_ratio, "ensemble ratio text:video, e.g. 18:11");
  localize->add_option("--k", lz_k, "number of hits");
  localize->add_option("--expand-s", lz_expand, "widen hit windows by this many seconds per side");
  localize->add_option("-o,--out", lz_out, "output file (default stdout)");

  AskArgs ask_args;
  auto* ask = app.add_subcommand("ask", "answer one question with the agent and print the final answer");
  add_ask_options(ask, ask_args);
  AskArgs export_args;
  auto* exp = app.add_subcommand("export-transcript", "run the agent on one question and write its transcript JSON");
  add_ask_options(exp, export_args);

  // objects
  std::string ob_mem, ob_sql;
  bool ob_json = false;
  auto* objects = app.add_subcommand("objects", "run a SQL query against the object memory");
  objects->add_option("--mem", ob_mem, "memory directory")->required();
  objects->add_option("--sql", ob_sql, "query over objects(object_id, category, segment_index)")->required();
  objects->add_flag("--json", ob_json, "print the result as JSON");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluation over a world's examples");
  eval->require_subcommand(1);
  std::string en_mem, en_examples, en_out;
  auto* eval_nlq = eval->add_subcommand("nlq", "temporal grounding recall (R1/R5 at IoU 0.3/0.5)");
  eval_nlq->add_option("--mem", en_mem, "memory directory")->required();
  eval_nlq->add_option("--examples", en_examples, "world.json holding the NLQ examples")->required();
  eval_nlq->add_option("-o,--out", en_out, "report.json (default stdout)");
  std::string em_mem, em_examples, em_scripts, em_out;
  auto* eval_mcq = eval->add_subcommand("mcq", "multiple-choice accuracy of the agent");
  eval_mcq->add_option("--mem", em_mem, "memory directory")->required();
  eval_mcq->add_option("--examples", em_examples, "world.json holding the MCQ examples")->required();
  eval_mcq->add_option("--scripts", em_scripts, "JSON array with one chat script per question");
  eval_mcq->add_option("-o,--out", em_out, "report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Config cfg = make_config(g);

    if (*gen) {
      if (!category.empty()) wp.force_category = category;
      SyntheticWorld w;
      try {
        w = gen_world(seed, wp);
      } catch (const ContractError& e) {
        throw UsageError(e.what());
      }
      util::write_file_atomic(world_out, world_to_json(w));
      return 0;
    }

    if (*build) {
      BuildParams params{cfg.reid, cfg.fps, cfg.workers};
      MemoryBundle bundle;
      if (!bm_world.empty()) {
        if (cfg.backend == "remote") throw UsageError("--world builds from the synthetic backend only");
        auto world = std::make_shared<const SyntheticWorld>(load_world(bm_world));
        const auto suite = world_to_suite(world, cfg.synthetic_dims(), cfg.synthetic_noise());
        params.fps = world->fps;
        bundle = build_memory_bundle(world->segment_media(), world->video_uri, world->duration_s(), suite, params);
      } else {
        if (cfg.backend != "remote") throw UsageError("build-memory needs --world with the synthetic backend");
        if (bm_uri.empty() || !(bm_duration > 0.0)) throw UsageError("remote build needs --video-uri and --duration");
        const auto suite = make_remote_suite(cfg.remote());
        bundle = build_memory_bundle(media_for_video(bm_uri, bm_duration, cfg.segment_duration_s, cfg.fps), bm_uri,
                                     bm_duration, suite, params);
      }
      save_memory(bundle, bm_out);
      return 0;
    }

    if (*localize) {
      const auto bundle = load_memory(lz_mem);
      const auto suite = query_suite(cfg, "");
      EnsembleWeights w;
      try {
        w = lz_ratio.empty() ? cfg.weights() : EnsembleWeights::parse(lz_ratio);
      } catch (const ContractError& e) {
        throw UsageError(e.what());
      }
      const auto hits = segment_localization(bundle.temporal, lz_query, w, suite, lz_k.value_or(cfg.localization_k),
                                             lz_expand.value_or(cfg.expand_s));
      ordered_json j;
      j["query"] = lz_query;
      j["w_text"] = w.w_text;
      j["w_video"] = w.w_video;
      j["segment_count"] = bundle.temporal.size();
      j["hits"] = ordered_json::array();
      for (const auto& h : hits) {
        ordered_json x;
        x["segment"] = h.segment.index;
        x["start_s"] = h.window.start_s;
        x["end_s"] = h.window.end_s;
        x["score"] = h.score;
        x["text_score"] = h.text_score;
        x["video_score"] = h.video_score;
        x["caption"] = bundle.temporal.records()[static_cast<std::size_t>(h.segment.index)].caption;
        j["hits"].push_back(std::move(x));
      }
      emit(lz_out, j.dump(2) + "\n");
      return 0;
    }

    if (*ask) {
      const auto answer = run_ask(cfg, ask_args);
      std::string text = answer.final_text + "\n";
      if (answer.choice_label) text = "choice: " + std::to_string(*answer.choice_label) + "\n" + text;
      emit(ask_args.out, text);
      return 0;
    }

    if (*exp) {
      const auto answer = run_ask(cfg, export_args);
      emit(export_args.out, transcript_to_json(answer).dump(2) + "\n");
      return 0;
    }

    if (*objects) {
      const auto bundle = load_memory(ob_mem);
      sql::ResultTable table;
      try {
        table = sql::execute_query(bundle.objects, ob_sql);
      } catch (const SqlError& e) {
        throw UsageError(e.what());
      }
      std::cout << (ob_json ? table.to_json().dump(2) : table.render()) << "\n";
      return 0;
    }

    if (*eval_nlq) {
      const auto bundle = load_memory(en_mem);
      const auto world = load_world(en_examples);
      const auto suite = query_suite(cfg, "");
      const auto ev = evaluate_nlq(bundle.temporal, world.nlq, cfg.weights(), suite, cfg.expand_s);
      emit(en_out, ev.to_json().dump(2) + "\n");
      return 0;
    }

    if (*eval_mcq) {
      const auto bundle = load_memory(em_mem);
      const auto world = load_world(em_examples);
      auto suite = query_suite(cfg, em_examples);
      std::vector<std::shared_ptr<ChatModel>> chats;
      if (!em_scripts.empty()) {
        const auto scripts = nlohmann::json::parse(util::read_file(em_scripts));
        if (!scripts.is_array() || scripts.size() != world.mcq.size()) {
          throw UsageError("--scripts must be a JSON array with one script per MCQ example");
        }
        for (const auto& s : scripts) chats.push_back(std::make_shared<ScriptedChat>(ScriptedChat::from_json(s.dump())));
      } else if (cfg.backend != "remote") {
        throw UsageError("synthetic backend has no language model: pass --scripts");
      }
      const auto prompts = PromptLibrary::load(cfg.prompts_path());
      const auto ev = evaluate_mcq(
          bundle, world.mcq, suite,
          [&](std::size_t i) { return chats.empty() ? suite.chat : chats[i]; }, prompts,
          cfg.agent_options(TaskKind::mcq));
      emit(em_out, ev.to_json().dump(2) + "\n");
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
