#include "vidmem/config.hpp"

#include <cmath>
#include <sstream>

#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

namespace {

using nlohmann::json;

constexpr const char* kMethod = "method default";
constexpr const char* kMethodGrid = "method default, grid-searched";
constexpr const char* kArtifact = "artifact default";

double as_double(const json& v, std::string_view key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    std::size_t used = 0;
    try {
      const double d = std::stod(s, &used);
      if (used == s.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
  }
  throw ContractError("config key " + std::string(key) + " expects a number, got " + v.dump());
}

std::int64_t as_int(const json& v, std::string_view key) {
  const double d = as_double(v, key);
  if (d != std::floor(d) || d < 0) throw ContractError("config key " + std::string(key) + " expects a non-negative integer");
  return static_cast<std::int64_t>(d);
}

std::string as_string(const json& v, std::string_view key) {
  if (!v.is_string()) throw ContractError("config key " + std::string(key) + " expects a string, got " + v.dump());
  return v.get<std::string>();
}

template <typename T>
Config::Key real_key(std::string name, std::string help, std::string origin, T Config::*field) {
  return {name, std::move(help), std::move(origin), [field](const Config& c) { return json(c.*field); },
          [field, name](Config& c, const json& v) { c.*field = static_cast<T>(as_double(v, name)); }};
}

template <typename T>
Config::Key int_key(std::string name, std::string help, std::string origin, T Config::*field) {
  return {name, std::move(help), std::move(origin), [field](const Config& c) { return json(c.*field); },
          [field, name](Config& c, const json& v) { c.*field = static_cast<T>(as_int(v, name)); }};
}

Config::Key string_key(std::string name, std::string help, std::string origin, std::string Config::*field) {
  return {name, std::move(help), std::move(origin), [field](const Config& c) { return json(c.*field); },
          [field, name](Config& c, const json& v) { c.*field = as_string(v, name); }};
}

Config::Key reid_key(std::string name, std::string help, double ReidParams::*field) {
  return {name, std::move(help), kMethodGrid, [field](const Config& c) { return json(c.reid.*field); },
          [field, name](Config& c, const json& v) { c.reid.*field = as_double(v, name); }};
}

}  // namespace

const std::vector<Config::Key>& Config::keys() {
  static const std::vector<Key> table = {
      string_key("backend", "model backend: synthetic or remote", kArtifact, &Config::backend),
      string_key("remote_url", "model server base URL (VIDMEM_BACKEND_URL overrides when set)", kArtifact,
                 &Config::remote_url),
      real_key("remote_timeout_s", "HTTP timeout per request, seconds", kArtifact, &Config::remote_timeout_s),
      int_key("remote_caption_dim", "dim reported by the remote caption-text encoder", kArtifact,
              &Config::remote_caption_dim),
      int_key("remote_crossmodal_dim", "dim reported by the remote video/text encoder", kArtifact,
              &Config::remote_crossmodal_dim),
      int_key("remote_clip_dim", "dim reported by the remote CLIP-role encoder", kArtifact, &Config::remote_clip_dim),
      int_key("remote_dino_dim", "dim reported by the remote DINOv2-role encoder", kArtifact, &Config::remote_dino_dim),
      int_key("caption_dim", "synthetic caption-text embedding dim", kArtifact, &Config::caption_dim),
      int_key("crossmodal_dim", "synthetic video/text embedding dim", kArtifact, &Config::crossmodal_dim),
      int_key("clip_dim", "synthetic CLIP-role embedding dim", kArtifact, &Config::clip_dim),
      int_key("dino_dim", "synthetic DINOv2-role embedding dim", kArtifact, &Config::dino_dim),
      real_key("clip_noise", "synthetic CLIP-role crop noise amplitude", kArtifact, &Config::clip_noise),
      real_key("dino_noise", "synthetic DINOv2-role crop noise amplitude", kArtifact, &Config::dino_noise),
      real_key("segment_duration_s", "segment length, seconds", kMethod, &Config::segment_duration_s),
      real_key("fps", "frame rate for frame -> segment mapping", kArtifact, &Config::fps),
      string_key("ratio",
                 "localization ensemble ratio text:video (18:11 for LaViLa+ViCLIP captions, 7:8 for Ego4D+ViCLIP)",
                 kMethodGrid, &Config::ratio),
      real_key("expand_s", "symmetric widening of localization windows, seconds", kArtifact, &Config::expand_s),
      int_key("caption_cap", "most captions one caption_retrieval call may return", kMethod, &Config::caption_cap),
      int_key("localization_k", "segments returned by segment_localization", kMethod, &Config::localization_k),
      reid_key("reid_clip_gain", "re-ID CLIP sigmoid gain", &ReidParams::clip_gain),
      reid_key("reid_clip_midpoint", "re-ID CLIP sigmoid midpoint", &ReidParams::clip_midpoint),
      reid_key("reid_dino_gain", "re-ID DINOv2 sigmoid gain", &ReidParams::dino_gain),
      reid_key("reid_dino_midpoint", "re-ID DINOv2 sigmoid midpoint", &ReidParams::dino_midpoint),
      reid_key("reid_clip_weight", "re-ID weight of the CLIP similarity", &ReidParams::clip_weight),
      reid_key("reid_dino_weight", "re-ID weight of the DINOv2 similarity", &ReidParams::dino_weight),
      reid_key("reid_join_threshold", "re-ID: similarity every group member must exceed", &ReidParams::join_threshold),
      reid_key("reid_anchor_threshold", "re-ID: similarity at least one member must exceed",
               &ReidParams::anchor_threshold),
      real_key("ov_threshold", "open-vocabulary retrieval minimum cosine", kArtifact, &Config::ov_threshold),
      int_key("ov_top_k", "open-vocabulary retrieval result limit", kArtifact, &Config::ov_top_k),
      int_key("max_step", "tool calls before the forced final answer", kArtifact, &Config::max_step),
      int_key("memory_max_step", "tool calls of the object-memory agent", kArtifact, &Config::memory_max_step),
      int_key("observation_cap", "characters kept per observation", kArtifact, &Config::observation_cap),
      string_key("prompt_dir", "directory with mcq.txt, open_ended.txt, nlq.txt, memory_agent.txt", kArtifact,
                 &Config::prompt_dir),
      int_key("workers", "threads for per-segment memory building (0 = all cores)", kArtifact, &Config::workers),
  };
  return table;
}

void Config::set(std::string_view key, const nlohmann::json& value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(*this, value);
      return;
    }
  }
  throw ContractError("unknown config key '" + std::string(key) + "'");
}

void Config::load_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(util::read_file(path));
  } catch (const json::parse_error& e) {
    throw ContractError("config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ContractError("config file " + path.string() + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) set(key, value);
}

void Config::validate() const {
  if (backend != "synthetic" && backend != "remote") {
    throw ContractError("backend must be 'synthetic' or 'remote', got '" + backend + "'");
  }
  (void)weights();
  if (!(segment_duration_s > 0.0) || !(fps > 0.0)) throw ContractError("segment_duration_s and fps must be positive");
  if (expand_s < 0.0) throw ContractError("expand_s must be non-negative");
  if (caption_cap == 0 || localization_k == 0) throw ContractError("caption_cap and localization_k must be positive");
  for (const auto d : {caption_dim, crossmodal_dim, clip_dim, dino_dim}) {
    if (d < 16) throw ContractError("embedding dims must be at least 16");
  }
}

nlohmann::ordered_json Config::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& k : keys()) j[k.name] = k.get(*this);
  return j;
}

std::string Config::describe_keys() {
  const Config defaults;
  std::ostringstream out;
  for (const auto& k : keys()) {
    out << "  " << k.name << " = " << k.get(defaults).dump() << "  [" << k.origin << "]  " << k.help << "\n";
  }
  return out.str();
}

AgentOptions Config::agent_options(TaskKind task) const {
  AgentOptions o;
  o.task = task;
  o.weights = weights();
  o.expand_s = expand_s;
  o.caption_cap = caption_cap;
  o.localization_k = localization_k;
  o.open_vocab = open_vocab();
  o.max_step = max_step;
  o.memory_max_step = memory_max_step;
  o.observation_cap = observation_cap;
  return o;
}

RemoteConfig Config::remote() const {
  RemoteConfig r;
  r.base_url = remote_url;
  r.timeout_s = remote_timeout_s;
  r.caption_dim = remote_caption_dim;
  r.crossmodal_dim = remote_crossmodal_dim;
  r.clip_dim = remote_clip_dim;
  r.dino_dim = remote_dino_dim;
  r.apply_env();
  if (r.base_url.empty()) throw ContractError("remote backend needs remote_url or VIDMEM_BACKEND_URL");
  return r;
}

std::filesystem::path Config::prompts_path() const {
  return prompt_dir.empty() ? PromptLibrary::default_dir() : std::filesystem::path(prompt_dir);
}

}  // namespace vidmem
