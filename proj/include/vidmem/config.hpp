#pragma once
// Operator configuration. A JSON file with flat keys; command-line overrides
// are applied on top with Config::set. Environment variables only supply the
// remote URL and API key.

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vidmem/agent.hpp"
#include "vidmem/object_memory.hpp"
#include "vidmem/remote.hpp"
#include "vidmem/synthetic.hpp"
#include "vidmem/temporal_memory.hpp"

namespace vidmem {

struct Config {
  std::string backend = "synthetic";  // synthetic | remote
  std::string remote_url;
  double remote_timeout_s = 120.0;
  std::size_t remote_caption_dim = 3072;
  std::size_t remote_crossmodal_dim = 768;
  std::size_t remote_clip_dim = 768;
  std::size_t remote_dino_dim = 1024;

  std::size_t caption_dim = 256;
  std::size_t crossmodal_dim = 256;
  std::size_t clip_dim = 512;
  std::size_t dino_dim = 768;
  double clip_noise = 0.0;
  double dino_noise = 0.0;

  double segment_duration_s = kDefaultSegmentDuration;
  double fps = 30.0;
  std::string ratio = "18:11";
  double expand_s = 0.0;
  std::size_t caption_cap = kCaptionWindowCap;
  std::size_t localization_k = kLocalizationTopK;

  ReidParams reid;
  double ov_threshold = 0.5;
  std::size_t ov_top_k = 5;

  int max_step = kDefaultMaxStep;
  int memory_max_step = kDefaultMaxStep;
  std::size_t observation_cap = kObservationCap;
  std::string prompt_dir;  // empty: PromptLibrary::default_dir()
  unsigned workers = 0;

  struct Key {
    std::string name;
    std::string help;
    std::string origin;
    std::function<nlohmann::json(const Config&)> get;
    std::function<void(Config&, const nlohmann::json&)> set;
  };
  static const std::vector<Key>& keys();

  /// Sets one key from JSON; strings are parsed for numeric keys so CLI
  /// overrides can pass text. Throws ContractError on unknown keys or bad values.
  void set(std::string_view key, const nlohmann::json& value);
  void load_file(const std::filesystem::path& path);
  void validate() const;
  nlohmann::ordered_json to_json() const;
  /// One line per key: name, default, origin, help.
  static std::string describe_keys();

  EnsembleWeights weights() const { return EnsembleWeights::parse(ratio); }
  OpenVocabParams open_vocab() const { return {ov_threshold, ov_top_k}; }
  SyntheticDims synthetic_dims() const { return {caption_dim, crossmodal_dim, clip_dim, dino_dim}; }
  SyntheticNoise synthetic_noise() const { return {clip_noise, dino_noise, 30}; }
  AgentOptions agent_options(TaskKind task) const;
  RemoteConfig remote() const;
  std::filesystem::path prompts_path() const;
};

}  // namespace vidmem
