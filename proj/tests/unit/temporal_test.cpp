#include <atomic>

#include "doctest.h"
#include "support.hpp"
#include "vidmem/error.hpp"

using namespace vidmem;

namespace {

class FailingCaptioner final : public Captioner {
 public:
  explicit FailingCaptioner(std::shared_ptr<const Captioner> inner) : inner_(std::move(inner)) {}
  std::string caption(const SegmentMedia& s) const override {
    if (s.segment.index == 3) throw std::runtime_error("decoder crashed");
    return inner_->caption(s);
  }

 private:
  std::shared_ptr<const Captioner> inner_;
};

}  // namespace

TEST_CASE("ensemble weights") {
  const auto w = EnsembleWeights::parse("18:11");
  CHECK(w.w_text == doctest::Approx(18.0 / 29.0).epsilon(1e-15));
  CHECK(w.w_video == doctest::Approx(11.0 / 29.0).epsilon(1e-15));
  CHECK(w.w_text == doctest::Approx(0.62069).epsilon(1e-5));
  const auto w2 = EnsembleWeights::parse("7:8");
  CHECK(w2.w_text == doctest::Approx(7.0 / 15.0));
  CHECK(w2.w_video == doctest::Approx(8.0 / 15.0));
  CHECK(EnsembleWeights::parse(" 1 : 0 ").w_video == 0.0);
  CHECK_THROWS_AS(EnsembleWeights::parse("18-11"), ContractError);
  CHECK_THROWS_AS(EnsembleWeights::parse("a:b"), ContractError);
  CHECK_THROWS_AS(EnsembleWeights::parse("0:0"), ContractError);
  CHECK_THROWS_AS(EnsembleWeights::from_ratio(-1, 2), ContractError);
}

TEST_CASE("build_temporal_memory over the drone world") {
  const auto world = vt::drone_world();
  const auto suite = world_to_suite(world);
  const auto media = world->segment_media();
  const auto mem = build_temporal_memory(media, suite, 1);
  REQUIRE(mem.size() == 44);
  CHECK(mem.records()[39].caption == "#O A man x adjusts a drone on the");
  CHECK(mem.end_s() == 88.0);
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto& r = mem.records()[i];
    CHECK(r.segment.index == static_cast<std::int64_t>(i));
    CHECK(r.caption_emb == suite.caption_text->embed(r.caption).renormalized());
    CHECK(r.video_emb == suite.crossmodal->embed_video(media[i]).renormalized());
  }
  // Worker count does not change the result.
  CHECK(build_temporal_memory(media, suite, 4) == mem);
}

TEST_CASE("a failing backend aborts the build and names the segment") {
  const auto world = vt::drone_world();
  auto suite = world_to_suite(world);
  suite.captioner = std::make_shared<FailingCaptioner>(suite.captioner);
  const auto media = world->segment_media();
  try {
    build_temporal_memory(media, suite, 3);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(std::string(e.what()).find("segment 3") != std::string::npos);
  }
}

TEST_CASE("temporal memory rejects non-contiguous records") {
  std::mt19937_64 rng(1);
  auto mem = vt::random_memory(3, 32, 32, rng);
  auto recs = mem.records();
  recs[1].segment.index = 5;
  CHECK_THROWS_AS(TemporalMemory(recs, 2.0), ContractError);
  recs = mem.records();
  recs[2].caption_emb = vt::random_unit(16, rng);
  CHECK_THROWS_AS(TemporalMemory(recs, 2.0), ContractError);
}

TEST_CASE("caption_retrieval examples") {
  const auto world = vt::drone_world();
  const auto mem = build_temporal_memory(world->segment_media(), world_to_suite(world), 1);

  const auto c = caption_retrieval(mem, 37, 42);
  REQUIRE(c.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(c[i].first == static_cast<std::int64_t>(37 + i));
    CHECK(c[i].second == mem.records()[37 + i].caption);
  }
  CHECK(caption_retrieval(mem, 5, 5).size() == 1);
  CHECK(caption_retrieval(mem, 0, 14).size() == 15);
  try {
    caption_retrieval(mem, 0, 15);
    FAIL("expected WindowCapError");
  } catch (const WindowCapError& e) {
    CHECK(e.requested == 16);
    CHECK(e.cap == 15);
  }
  CHECK_THROWS_AS(caption_retrieval(mem, -1, 3), RangeError);
  CHECK_THROWS_AS(caption_retrieval(mem, 40, 44), RangeError);
  CHECK_THROWS_AS(caption_retrieval(mem, 9, 8), RangeError);
  // The range check comes before the cap check.
  CHECK_THROWS_AS(caption_retrieval(mem, 0, 100), RangeError);
}

TEST_CASE("caption_retrieval fuzz: never more than the cap, errors exactly when expected") {
  std::mt19937_64 rng(2);
  const auto mem = vt::random_memory(44, 16, 16, rng);
  std::uniform_int_distribution<std::int64_t> pos(-5, 50);
  std::uniform_int_distribution<std::size_t> caps(1, 20);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto a = pos(rng), b = pos(rng);
    const auto cap = trial % 2 ? caps(rng) : kCaptionWindowCap;
    const bool in_range = a >= 0 && b >= 0 && a < 44 && b < 44 && a <= b;
    try {
      const auto out = caption_retrieval(mem, a, b, cap);
      CHECK(in_range);
      CHECK(out.size() <= cap);
      CHECK(out.size() == static_cast<std::size_t>(b - a + 1));
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].first == a + static_cast<std::int64_t>(i));
    } catch (const WindowCapError& e) {
      CHECK(in_range);
      CHECK(static_cast<std::size_t>(b - a + 1) > cap);
      CHECK(e.requested == static_cast<std::size_t>(b - a + 1));
    } catch (const RangeError&) {
      CHECK(!in_range);
    }
  }
}

TEST_CASE("segment_localization matches brute force on random memories") {
  std::mt19937_64 rng(3);
  const SyntheticDims dims{64, 48, 512, 768};
  const auto suite = text_only_suite(dims);
  const std::vector<std::string> queries = {"man in red", "C opens the fridge", "drone near the car", "x"};
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = 1 + rng() % 120;
    const auto mem = vt::random_memory(n, dims.caption, dims.crossmodal, rng, trial % 3 == 0 ? 4 : 0);
    for (const auto* ratio : {"18:11", "7:8"}) {
      const auto w = EnsembleWeights::parse(ratio);
      const auto& q = queries[static_cast<std::size_t>(trial) % queries.size()];
      const auto hits = segment_localization(mem, q, w, suite);
      const auto oracle = vt::brute_force_localization(mem, q, w, suite);
      const auto err = vt::compare_with_oracle(hits, oracle, 5);
      CHECK_MESSAGE(err.empty(), err);
      for (const auto& h : hits) {
        // Decomposition and the reported window.
        CHECK(h.score == doctest::Approx(w.w_text * h.text_score + w.w_video * h.video_score).epsilon(1e-12));
        CHECK(h.window == h.segment.window());
      }
      // Dominance: nothing outside the top-k scores higher than the k-th hit.
      std::vector<bool> in(n, false);
      for (const auto& h : hits) in[static_cast<std::size_t>(h.segment.index)] = true;
      for (const auto& o : oracle) {
        if (!in[o.index]) CHECK(o.score <= hits.back().score + 1e-9);
      }
    }
  }
}

TEST_CASE("localization: ensemble is monotone in both component scores") {
  std::mt19937_64 rng(4);
  const SyntheticDims dims{64, 64, 512, 768};
  const auto suite = text_only_suite(dims);
  const auto mem = vt::random_memory(150, 64, 64, rng);
  const auto hits = segment_localization(mem, "a query about cups", EnsembleWeights::parse("18:11"), suite, 150);
  REQUIRE(hits.size() == 150);
  for (const auto& a : hits) {
    for (const auto& b : hits) {
      if (a.text_score >= b.text_score && a.video_score >= b.video_score) CHECK(a.score >= b.score);
    }
  }
}

TEST_CASE("localization: text-only and video-only ratios reduce to one similarity") {
  std::mt19937_64 rng(5);
  const SyntheticDims dims{32, 32, 512, 768};
  const auto suite = text_only_suite(dims);
  const auto mem = vt::random_memory(30, 32, 32, rng);
  for (const auto& h : segment_localization(mem, "cup", EnsembleWeights::from_ratio(1, 0), suite, 30)) {
    CHECK(h.score == doctest::Approx(h.text_score));
  }
  for (const auto& h : segment_localization(mem, "cup", EnsembleWeights::from_ratio(0, 1), suite, 30)) {
    CHECK(h.score == doctest::Approx(h.video_score));
  }
}

TEST_CASE("localization windows widen by expand_s and clip to the video") {
  std::mt19937_64 rng(6);
  const SyntheticDims dims{32, 32, 512, 768};
  const auto suite = text_only_suite(dims);
  const auto mem = vt::random_memory(10, 32, 32, rng);
  for (const auto& h : segment_localization(mem, "cup", {}, suite, 10, 3.0)) {
    CHECK(h.window.start_s == std::max(0.0, h.segment.start_s - 3.0));
    CHECK(h.window.end_s == std::min(20.0, h.segment.end_s + 3.0));
  }
  CHECK_THROWS_AS(segment_localization(mem, "   ", {}, suite), ContractError);
  CHECK(segment_localization(mem, "cup", {}, suite, 50).size() == 10);
}

TEST_CASE("hashing keeps related captions closer than unrelated ones") {
  const auto a = synth_text_embed("man opens fridge", 256);
  const auto b = synth_text_embed("man closes fridge", 256);
  const auto c = synth_text_embed("dog runs park", 256);
  CHECK(cosine(a, b) > cosine(a, c));
}
