#pragma once
// Helpers shared by the unit and acceptance tests: seeded generators,
// fixture paths, and the two replayed agent cases.

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vidmem/agent.hpp"
#include "vidmem/memory_bundle.hpp"
#include "vidmem/object_memory.hpp"
#include "vidmem/scripted_chat.hpp"
#include "vidmem/synthetic.hpp"
#include "vidmem/world.hpp"

namespace vt {

using namespace vidmem;

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(VIDMEM_FIXTURE_DIR) / name;
}

inline PromptLibrary prompts() { return PromptLibrary::load(VIDMEM_PROMPT_DIR_TEST); }

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 salt(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("vidmem_" + tag + "_" + std::to_string(salt()));
  std::filesystem::create_directories(dir);
  return dir;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) : path(temp_dir(tag)) {}
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::vector<double> gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return v;
}

inline Embedding random_unit(std::size_t dim, std::mt19937_64& rng) { return Embedding::normalized(gaussian(dim, rng)); }

/// Unit vectors whose pairwise cosines are `gram` (must be positive definite),
/// via Cholesky: row i of L is vector i in the first n coordinates of `dim`.
inline std::vector<Embedding> vectors_with_gram(const std::vector<std::vector<double>>& gram, std::size_t dim) {
  const std::size_t n = gram.size();
  std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = gram[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      L[i][j] = i == j ? std::sqrt(s) : s / L[j][j];
    }
  }
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim, 0.0);
    for (std::size_t k = 0; k < n; ++k) v[k] = L[i][k];
    out.push_back(Embedding::normalized(std::move(v)));
  }
  return out;
}

/// DINO-role cosine that yields blended similarity `sim` when the CLIP-role
/// cosine is 1 (identical CLIP features).
inline double dino_cos_for_sim(double sim, const ReidParams& p = {}) {
  const double clip_s = 1.0 / (1.0 + std::exp(-p.clip_gain * (1.0 - p.clip_midpoint)));
  const double dino_s = (sim - p.clip_weight * clip_s) / p.dino_weight;
  return p.dino_midpoint + std::log(dino_s / (1.0 - dino_s)) / p.dino_gain;
}

/// Random temporal memory with `n` segments. With `pool` > 0 the embeddings
/// are drawn from that many distinct vectors, so exact score ties are common.
inline TemporalMemory random_memory(std::size_t n, std::size_t caption_dim, std::size_t video_dim,
                                    std::mt19937_64& rng, std::size_t pool = 0) {
  std::vector<Embedding> cap_pool, vid_pool;
  for (std::size_t i = 0; i < pool; ++i) {
    cap_pool.push_back(random_unit(caption_dim, rng));
    vid_pool.push_back(random_unit(video_dim, rng));
  }
  std::vector<SegmentRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    SegmentRecord r;
    r.segment = {static_cast<std::int64_t>(i), 2.0 * static_cast<double>(i), 2.0 * static_cast<double>(i + 1)};
    r.caption = "#C segment " + std::to_string(i);
    if (pool) {
      r.caption_emb = cap_pool[rng() % pool];
      r.video_emb = vid_pool[rng() % pool];
    } else {
      r.caption_emb = random_unit(caption_dim, rng);
      r.video_emb = random_unit(video_dim, rng);
    }
    recs.push_back(std::move(r));
  }
  return TemporalMemory(std::move(recs), 2.0);
}

/// Plain-loop cosine in long double, independent of the SIMD kernels.
inline double reference_cosine(const Embedding& a, const Embedding& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

struct OracleHit {
  std::size_t index = 0;
  double score = 0.0;
};

/// Exhaustive scoring of every segment, best first, ties by lower index.
inline std::vector<OracleHit> brute_force_localization(const TemporalMemory& mem, std::string_view query,
                                                       const EnsembleWeights& w, const BackendSuite& suite) {
  const auto tq = suite.caption_text->embed(query);
  const auto vq = suite.crossmodal->embed_text(query);
  std::vector<OracleHit> all;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto& r = mem.records()[i];
    all.push_back({i, w.w_text * reference_cosine(r.caption_emb, tq) + w.w_video * reference_cosine(r.video_emb, vq)});
  }
  std::stable_sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) { return a.score > b.score; });
  return all;
}

/// Empty when `hits` is a valid top-k of the oracle ranking: scores agree
/// within `tol` position by position and each returned segment carries the
/// oracle score of its position. Otherwise a description of the mismatch.
inline std::string compare_with_oracle(const std::vector<LocalizationHit>& hits, const std::vector<OracleHit>& oracle,
                                       std::size_t k, double tol = 1e-9) {
  const auto expect = std::min(k, oracle.size());
  if (hits.size() != expect) return "hit count " + std::to_string(hits.size()) + " != " + std::to_string(expect);
  std::vector<double> by_index(oracle.size());
  for (const auto& o : oracle) by_index[o.index] = o.score;
  for (std::size_t r = 0; r < hits.size(); ++r) {
    const auto idx = static_cast<std::size_t>(hits[r].segment.index);
    if (std::abs(hits[r].score - oracle[r].score) > tol || std::abs(by_index[idx] - oracle[r].score) > tol) {
      return "rank " + std::to_string(r) + ": got segment " + std::to_string(idx) + " score " +
             std::to_string(hits[r].score) + ", oracle segment " + std::to_string(oracle[r].index) + " score " +
             std::to_string(oracle[r].score);
    }
    if (r > 0 && hits[r - 1].score == hits[r].score && hits[r - 1].segment.index > hits[r].segment.index) {
      return "tie at rank " + std::to_string(r) + " not broken by lower index";
    }
  }
  return {};
}

inline std::vector<std::int64_t> frame_range(std::int64_t a, std::int64_t b) {
  std::vector<std::int64_t> f;
  for (auto i = a; i < b; ++i) f.push_back(i);
  return f;
}

/// Hand-built 44-segment world whose captions 15, 22 and 37..42 are the ones
/// quoted in the drone transcript.
inline std::shared_ptr<const SyntheticWorld> drone_world() {
  return std::make_shared<const SyntheticWorld>(load_world(fixture("drone_world.json")));
}

inline MemoryBundle bundle_for(const SyntheticWorld& world, const BackendSuite& suite) {
  BuildParams params;
  params.fps = world.fps;
  params.workers = 2;
  return build_memory_bundle(world.segment_media(), world.video_uri, world.duration_s(), suite, params);
}

/// World for the elephant-count case: seed 7, two objects forced to elephants.
inline std::shared_ptr<const SyntheticWorld> elephant_world() {
  WorldParams p;
  p.n_objects = 2;
  p.force_category = "elephant";
  return std::make_shared<const SyntheticWorld>(gen_world(7, p));
}

inline const std::array<std::string, 5> kElephantOptions = {"one", "four", "three", "six", "two"};

inline std::string last_observation(const std::vector<ChatTurn>& turns) {
  const auto& text = turns.back().content;
  const auto at = text.rfind("Observation: ");
  if (at == std::string::npos) return {};
  const auto end = text.find("\nThought: ", at);
  return text.substr(at + 13, end == std::string::npos ? std::string::npos : end - at - 13);
}

/// Elephant-count script whose replies are computed from what the tools
/// return: the sub-agent reads the SQL count, the main agent maps the number
/// word onto the options.
inline std::shared_ptr<ScriptedChat> elephant_chat() {
  std::vector<ScriptEntry> s;
  s.push_back({{"Question: how many elephants are there"},
               "I should use the 'object_memory_querying' tool to find out how many elephants are in the video.\n"
               "Action: object_memory_querying\nAction Input: 'how many elephants are there in the video?'",
               {}});
  s.push_back({{"objects(object_id INT, category TEXT, segment_index INT)",
                "Question: how many elephants are there in the video?"},
               "Count the distinct elephant objects.\nAction: database_querying\n"
               "Action Input: SELECT COUNT(DISTINCT object_id) FROM objects WHERE category = 'elephant'",
               {}});
  s.push_back({{"Observation: COUNT(DISTINCT object_id)\n"}, "", [](const std::vector<ChatTurn>& turns) {
                 const auto obs = last_observation(turns);
                 const auto n = std::stoll(obs.substr(obs.find('\n') + 1));
                 return "The query returned " + std::to_string(n) + ".\nFinal Answer: There are " + std::to_string(n) +
                        " elephants in the video.";
               }});
  s.push_back({{"Observation: There are "}, "", [](const std::vector<ChatTurn>& turns) {
                 const auto obs = last_observation(turns);
                 const auto n = std::stoll(obs.substr(10));
                 const auto word = number_word(n);
                 for (std::size_t i = 0; i < kElephantOptions.size(); ++i) {
                   if (kElephantOptions[i] == word) return "I now know the final answer.\nFinal Answer: " + std::to_string(i);
                 }
                 return std::string("I cannot match the count.\nFinal Answer: unknown");
               }});
  return std::make_shared<ScriptedChat>(std::move(s));
}

}  // namespace vt
