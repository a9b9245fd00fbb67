#include <cstdlib>

#include "doctest.h"
#include "support.hpp"
#include "vidmem/config.hpp"
#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

using namespace vidmem;

namespace {

MemoryBundle f32_copy(const MemoryBundle& b) {
  std::vector<SegmentRecord> recs = b.temporal.records();
  for (auto& r : recs) {
    r.caption_emb = to_f32_precision(r.caption_emb);
    r.video_emb = to_f32_precision(r.video_emb);
  }
  std::vector<ObjectRecord> objs = b.objects.objects();
  for (auto& o : objs) o.feature = to_f32_precision(o.feature);
  MemoryBundle out = b;
  out.temporal = TemporalMemory(std::move(recs), b.temporal.segment_duration_s());
  out.objects = ObjectMemory(std::move(objs));
  return out;
}

MemoryBundle saved_drone(const std::filesystem::path& dir) {
  const auto world = vt::drone_world();
  const auto b = vt::bundle_for(*world, world_to_suite(world));
  save_memory(b, dir);
  return b;
}

template <class E>
void expect_load_error(const std::filesystem::path& dir, const std::string& needle) {
  try {
    load_memory(dir);
    FAIL("load succeeded");
  } catch (const E& e) {
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
  }
}

}  // namespace

TEST_CASE("memory round trip is exact at f32 precision") {
  vt::TempDir tmp("persist");
  const auto b = saved_drone(tmp.path);
  const auto loaded = load_memory(tmp.path);
  CHECK(loaded == f32_copy(b));
  CHECK(loaded.video_uri == b.video_uri);
  CHECK(loaded.video_duration_s == 88.0);
  // Saving what was loaded reproduces the files byte for byte.
  vt::TempDir tmp2("persist2");
  save_memory(loaded, tmp2.path);
  for (const char* f : {"manifest.json", "captions.jsonl", "caption_emb.bin", "video_emb.bin", "objects.jsonl",
                        "object_feat.bin"}) {
    CAPTURE(f);
    CHECK(util::read_file(tmp.path / f) == util::read_file(tmp2.path / f));
  }
}

TEST_CASE("round trip over random bundles, including an empty object memory") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    MemoryBundle b;
    b.temporal = vt::random_memory(1 + rng() % 40, 16 + rng() % 20, 16 + rng() % 20, rng);
    std::vector<ObjectRecord> objs;
    const auto n_obj = trial == 0 ? 0 : rng() % 6;
    for (std::size_t i = 0; i < n_obj; ++i) {
      objs.push_back({static_cast<std::int64_t>(i), "cat" + std::to_string(i % 2),
                      {static_cast<std::int64_t>(rng() % b.temporal.size())}, vt::random_unit(24, rng)});
    }
    b.objects = ObjectMemory(objs);
    b.video_uri = "file:///v" + std::to_string(trial) + ".mp4";
    b.video_duration_s = b.temporal.end_s();
    vt::TempDir tmp("persist");
    save_memory(b, tmp.path);
    CHECK(load_memory(tmp.path) == f32_copy(b));
  }
}

TEST_CASE("matrix codec") {
  const std::vector<double> v = {1.0, -2.5, 0.125, 3.0};
  const auto bytes = encode_matrix(2, 2, v);
  CHECK(bytes.size() == 14 + 16);
  CHECK(bytes.substr(0, 6) == "VAMEM1");
  CHECK(bytes[6] == 2);
  CHECK(bytes[10] == 2);
  const auto m = decode_matrix(bytes, "x");
  CHECK(m.count == 2);
  CHECK(m.dim == 2);
  CHECK(m.values == std::vector<float>{1.0f, -2.5f, 0.125f, 3.0f});
  CHECK_THROWS_AS(encode_matrix(3, 2, v), ContractError);
  CHECK_THROWS_AS(decode_matrix("VAMEM2" + bytes.substr(6), "x"), CorruptFileError);
  CHECK_THROWS_AS(decode_matrix(bytes.substr(0, bytes.size() - 1), "x"), CorruptFileError);
  CHECK_THROWS_AS(decode_matrix("VAM", "x"), CorruptFileError);
}

TEST_CASE("corrupt memory directories are rejected") {
  for (const char* bin : {"caption_emb.bin", "video_emb.bin", "object_feat.bin"}) {
    CAPTURE(bin);
    {
      vt::TempDir tmp("persist");
      saved_drone(tmp.path);
      auto bytes = util::read_file(tmp.path / bin);
      bytes[0] = 'X';
      util::write_file_atomic(tmp.path / bin, bytes);
      expect_load_error<CorruptFileError>(tmp.path, "bad magic");
    }
    {
      // Header count one short of the payload.
      vt::TempDir tmp("persist");
      saved_drone(tmp.path);
      auto bytes = util::read_file(tmp.path / bin);
      bytes[6] = static_cast<char>(bytes[6] - 1);
      util::write_file_atomic(tmp.path / bin, bytes);
      expect_load_error<CorruptFileError>(tmp.path, bin);
    }
  }
  {
    vt::TempDir tmp("persist");
    saved_drone(tmp.path);
    auto m = nlohmann::json::parse(util::read_file(tmp.path / "manifest.json"));
    m["version"] = 2;
    util::write_file_atomic(tmp.path / "manifest.json", m.dump());
    expect_load_error<VersionMismatchError>(tmp.path, "version 2");
  }
  {
    vt::TempDir tmp("persist");
    saved_drone(tmp.path);
    auto lines = util::read_file(tmp.path / "captions.jsonl");
    lines.resize(lines.rfind('\n', lines.size() - 2) + 1);
    util::write_file_atomic(tmp.path / "captions.jsonl", lines);
    expect_load_error<CorruptFileError>(tmp.path, "captions.jsonl");
  }
  {
    vt::TempDir tmp("persist");
    saved_drone(tmp.path);
    util::write_file_atomic(tmp.path / "objects.jsonl", "{\"object_id\":0,\"category\":\"cup\",\"segments\":[99]}\n");
    expect_load_error<CorruptFileError>(tmp.path, "object");
  }
  CHECK_THROWS_AS(load_memory("/nonexistent/memory"), ContractError);
}

TEST_CASE("config defaults, overrides and validation") {
  Config c;
  CHECK(c.weights().w_text == doctest::Approx(18.0 / 29.0));
  CHECK(c.caption_cap == 15);
  CHECK(c.reid.join_threshold == 0.5);
  c.set("ratio", "7:8");
  c.set("max_step", "3");
  c.set("reid_join_threshold", 0.4);
  c.set("expand_s", "2.5");
  CHECK(c.weights().w_video == doctest::Approx(8.0 / 15.0));
  CHECK(c.max_step == 3);
  CHECK(c.reid.join_threshold == 0.4);
  CHECK(c.agent_options(TaskKind::nlq).expand_s == 2.5);
  CHECK(c.agent_options(TaskKind::nlq).task == TaskKind::nlq);
  CHECK_THROWS_AS(c.set("nope", 1), ContractError);
  CHECK_THROWS_AS(c.set("max_step", "-1"), ContractError);
  CHECK_THROWS_AS(c.set("max_step", "1.5"), ContractError);
  CHECK_THROWS_AS(c.set("fps", "fast"), ContractError);
  CHECK_THROWS_AS(c.set("backend", 3), ContractError);

  Config bad;
  bad.backend = "cloud";
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = Config{};
  bad.caption_dim = 8;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  Config{}.validate();

  // Every key is listed and round-trips through to_json.
  const auto j = Config{}.to_json();
  CHECK(j.size() == Config::keys().size());
  Config d;
  for (const auto& [k, v] : j.items()) d.set(k, v);
  CHECK(d.to_json() == j);
  CHECK(Config::describe_keys().find("reid_anchor_threshold = 0.62") != std::string::npos);
}

TEST_CASE("config files") {
  vt::TempDir tmp("persist");
  util::write_file_atomic(tmp.path / "c.json", R"({"ratio": "1:1", "workers": 2, "prompt_dir": "/p"})");
  Config c;
  c.load_file(tmp.path / "c.json");
  CHECK(c.weights().w_text == 0.5);
  CHECK(c.workers == 2);
  CHECK(c.prompts_path() == "/p");
  util::write_file_atomic(tmp.path / "bad.json", "[1, 2]");
  CHECK_THROWS_AS(c.load_file(tmp.path / "bad.json"), ContractError);
  util::write_file_atomic(tmp.path / "broken.json", "{");
  CHECK_THROWS_AS(c.load_file(tmp.path / "broken.json"), ContractError);
  util::write_file_atomic(tmp.path / "unknown.json", R"({"colour": "red"})");
  CHECK_THROWS_AS(c.load_file(tmp.path / "unknown.json"), ContractError);
}

TEST_CASE("remote config needs a URL") {
  Config c;
  c.backend = "remote";
  ::unsetenv("VIDMEM_BACKEND_URL");
  CHECK_THROWS_AS(c.remote(), ContractError);
  c.remote_url = "http://127.0.0.1:9";
  CHECK(c.remote().base_url == "http://127.0.0.1:9");
  CHECK(c.remote().caption_dim == 3072);
}
