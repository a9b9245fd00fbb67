#include <map>
#include <set>

#include "doctest.h"
#include "reid_oracle.hpp"
#include "support.hpp"
#include "vidmem/error.hpp"

using namespace vidmem;

using vt::oracle_sim;
using vt::track;

TEST_CASE("pair similarity closed form") {
  auto p = pair_similarity_from_cosines(1.0, 1.0);
  CHECK(std::abs(p.clip_s - 0.817574) <= 1e-6);
  CHECK(std::abs(p.dino_s - 0.885948) <= 1e-6);
  CHECK(std::abs(p.sim - 0.875692) <= 1e-6);
  p = pair_similarity_from_cosines(0.925, 0.5);
  CHECK(p.clip_s == 0.5);
  CHECK(p.dino_s == 0.5);
  CHECK(p.sim == 0.5);
  p = pair_similarity_from_cosines(0.0, 0.0);
  CHECK(std::abs(p.sim - 0.096945) <= 1e-6);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double c = u(rng), d = u(rng);
    CHECK(pair_similarity_from_cosines(c, d).sim == doctest::Approx(oracle_sim(c, d)).epsilon(1e-12));
  }
}

TEST_CASE("pair similarity on features is symmetric and checks dims") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto a = track(1, vt::random_unit(32, rng), vt::random_unit(48, rng), {0});
    const auto b = track(2, vt::random_unit(32, rng), vt::random_unit(48, rng), {1});
    CHECK(pair_similarity(a, b).sim == pair_similarity(b, a).sim);
    CHECK(pair_similarity(a, b).sim ==
          doctest::Approx(oracle_sim(cosine(a.clip_feat, b.clip_feat), cosine(a.dino_feat, b.dino_feat))));
  }
  const auto a = track(1, vt::random_unit(32, rng), vt::random_unit(48, rng), {0});
  const auto b = track(2, vt::random_unit(16, rng), vt::random_unit(48, rng), {1});
  CHECK_THROWS_AS(pair_similarity(a, b), ContractError);
}

TEST_CASE("re-ID: trivial cases") {
  CHECK(reid_group({}).empty());
  std::mt19937_64 rng(3);
  const auto clip = vt::random_unit(16, rng);
  const auto dino = vt::random_unit(16, rng);
  std::vector<TrackingFeature> one{track(5, clip, dino, {3, 4})};
  const auto g = reid_group(one);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == ReidGroup{0, {5}});

  // Identical features give the highest attainable similarity (about 0.876).
  std::vector<TrackingFeature> two{track(1, clip, dino, {0, 1, 2}), track(2, clip, dino, {5, 6})};
  CHECK(reid_group(two) == std::vector<ReidGroup>{{0, {1, 2}}});
  two[1].frames = {2, 3};
  CHECK(reid_group(two) == std::vector<ReidGroup>{{0, {1}}, {1, {2}}});

  std::vector<TrackingFeature> dup{track(1, clip, dino, {0}), track(1, clip, dino, {1})};
  CHECK_THROWS_AS(reid_group(dup), ContractError);
}

TEST_CASE("re-ID: chain A-B 0.7, B-C 0.7, A-C 0.45 gives {A,B},{C}") {
  const double ab = vt::dino_cos_for_sim(0.7);
  const double ac = vt::dino_cos_for_sim(0.45);
  const auto dino = vt::vectors_with_gram({{1, ab, ac}, {ab, 1, ab}, {ac, ab, 1}}, 64);
  std::mt19937_64 rng(4);
  const auto clip = vt::random_unit(64, rng);
  std::vector<TrackingFeature> t{track(10, clip, dino[0], vt::frame_range(0, 10)),
                                 track(11, clip, dino[1], vt::frame_range(10, 20)),
                                 track(12, clip, dino[2], vt::frame_range(20, 30))};
  CHECK(pair_similarity(t[0], t[1]).sim == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(pair_similarity(t[1], t[2]).sim == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(pair_similarity(t[0], t[2]).sim == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(reid_group(t) == std::vector<ReidGroup>{{0, {10, 11}}, {1, {12}}});
}

TEST_CASE("re-ID: a member above 0.5 but no anchor above 0.62 opens a new group") {
  const double c = vt::dino_cos_for_sim(0.56);
  const auto dino = vt::vectors_with_gram({{1, c}, {c, 1}}, 32);
  std::mt19937_64 rng(5);
  const auto clip = vt::random_unit(32, rng);
  std::vector<TrackingFeature> t{track(1, clip, dino[0], {0}), track(2, clip, dino[1], {1})};
  CHECK(reid_group(t).size() == 2);
}

TEST_CASE("re-ID: visiting order follows first frame, then tracking id") {
  std::mt19937_64 rng(6);
  const auto clip = vt::random_unit(16, rng);
  const auto dino = vt::random_unit(16, rng);
  std::vector<TrackingFeature> t{track(9, clip, dino, {50, 51}), track(3, clip, dino, {10}),
                                 track(4, clip, dino, {10, 11})};
  // 3 and 4 share frame 10, so 4 cannot join 3; 9 joins the first group.
  CHECK(reid_group(t) == std::vector<ReidGroup>{{0, {3, 9}}, {1, {4}}});
  // Under a reversed frame order each track is first seen at its last frame:
  // 9 (51), 4 (11), 3 (10). 4 joins 9; 3 then collides with 4 on frame 10.
  const auto g = reid_group(t, {}, [](std::int64_t a, std::int64_t b) { return a > b; });
  CHECK(g == std::vector<ReidGroup>{{0, {9, 4}}, {1, {3}}});
}


TEST_CASE("re-ID invariants on random instances") {
  std::mt19937_64 rng(7);
  std::size_t merged_groups = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = vt::random_reid_instance(rng);
    const auto groups = reid_group(inst.tracks);
    std::map<std::int64_t, const TrackingFeature*> by_id;
    for (const auto& t : inst.tracks) by_id[t.tracking_id] = &t;

    std::multiset<std::int64_t> seen;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      CHECK(groups[g].object_id == static_cast<std::int64_t>(g));
      merged_groups += groups[g].members.size() > 1;
      for (std::size_t i = 0; i < groups[g].members.size(); ++i) {
        seen.insert(groups[g].members[i]);
        const auto& a = *by_id.at(groups[g].members[i]);
        bool anchored = i == 0;
        for (std::size_t j = 0; j < groups[g].members.size(); ++j) {
          if (i == j) continue;
          const auto& b = *by_id.at(groups[g].members[j]);
          CHECK(!frames_intersect(a.frames, b.frames));
          CHECK(pair_similarity(a, b).sim > 0.5);
          if (j < i) anchored = anchored || pair_similarity(a, b).sim > 0.62;
        }
        CHECK(anchored);
      }
    }
    CHECK(seen.size() == inst.tracks.size());
    for (const auto& t : inst.tracks) CHECK(seen.count(t.tracking_id) == 1);

    const auto expect = vt::replay_reid(inst.tracks);
    REQUIRE(groups.size() == expect.size());
    for (std::size_t g = 0; g < groups.size(); ++g) CHECK(groups[g].members == expect[g]);
  }
  // The generator must actually exercise merging.
  CHECK(merged_groups > 50);
}

TEST_CASE("crop aggregation") {
  const Embedding u({1, 0, 0}), v({0, 1, 0});
  const auto m = mean_embedding(std::vector<Embedding>{u, v});
  CHECK(m[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m[2] == 0.0);
  CHECK(mean_embedding(std::vector<Embedding>{u}) == u);
  CHECK(mean_embedding(std::vector<Embedding>{u, u}) == u);
  CHECK_THROWS_AS(mean_embedding(std::vector<Embedding>{}), DomainError);
  CHECK_THROWS_AS(mean_embedding(std::vector<Embedding>{Embedding({1.0, 0.0}), Embedding({-1.0, 0.0})}), DomainError);
  const auto [c, d] = tracking_feature_from_crops(std::vector<Embedding>{u, v}, std::vector<Embedding>{v});
  CHECK(c == m);
  CHECK(d == v);
  CHECK_THROWS_AS(tracking_feature_from_crops(std::vector<Embedding>{}, std::vector<Embedding>{v}), DomainError);
}

TEST_CASE("frame to segment mapping") {
  const FrameMapping m{30.0, 2.0, 44};
  CHECK(m.segment_of(0) == 0);
  CHECK(m.segment_of(59) == 0);
  CHECK(m.segment_of(60) == 1);
  CHECK(m.segment_of(100000) == 43);
  CHECK_THROWS_AS(m.segment_of(-1), RangeError);
}

TEST_CASE("object memory from groups: two elephants over segments 0..3 and 2..5") {
  std::mt19937_64 rng(8);
  const auto fa = vt::random_unit(16, rng), fb = vt::random_unit(16, rng);
  const auto d = vt::random_unit(16, rng);
  std::vector<TrackingFeature> tracks{track(1, fa, d, vt::frame_range(0, 240), "elephant"),
                                      track(2, fb, d, vt::frame_range(120, 360), "elephant")};
  const std::vector<ReidGroup> groups{{0, {1}}, {1, {2}}};
  const auto mem = build_object_memory(groups, tracks, {30.0, 2.0, 0});
  std::vector<OccurrenceRow> expect;
  for (std::int64_t s = 0; s <= 3; ++s) expect.push_back({0, "elephant", s});
  for (std::int64_t s = 2; s <= 5; ++s) expect.push_back({1, "elephant", s});
  CHECK(mem.rows() == expect);
  CHECK(mem.objects()[0].feature == fa);
  CHECK(mem.feature_dim() == 16);
  CHECK(mem.feature_matrix().size() == 32);
}

TEST_CASE("object memory: majority vote and mean feature") {
  const Embedding u({1, 0, 0}), v({0, 1, 0}), w({0, 0, 1});
  std::vector<TrackingFeature> tracks{track(1, u, u, {0}, "cup"), track(2, v, u, {100}, "bowl"),
                                      track(3, w, u, {200}, "bowl"), track(4, u, u, {300}, "cup"),
                                      track(5, v, u, {400}, "bowl")};
  const std::vector<ReidGroup> groups{{0, {1, 2, 3}}, {1, {4, 5}}};
  const auto mem = build_object_memory(groups, tracks, {30.0, 2.0, 0});
  CHECK(mem.objects()[0].category == "bowl");
  CHECK(mem.objects()[1].category == "cup");  // tie goes to the earliest member
  CHECK(mem.objects()[0].feature == mean_embedding(std::vector<Embedding>{u, v, w}));
  CHECK(mem.objects()[0].segments == std::vector<std::int64_t>{0, 1, 3});
  CHECK_THROWS_AS(build_object_memory(std::vector<ReidGroup>{{0, {99}}}, tracks, {}), ContractError);
}

TEST_CASE("zero-noise worlds: re-ID recovers the ground-truth objects") {
  std::size_t gapped = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto r = vt::recovery(seed);
    CAPTURE(seed);
    CHECK(r.exact);
    gapped += r.tracks > r.objects;
  }
  CHECK(gapped == 10);
}

TEST_CASE("open-vocabulary retrieval equals brute-force scoring") {
  const auto world = std::make_shared<const SyntheticWorld>(gen_world(31, {}));
  const auto suite = world_to_suite(world);
  const auto bundle = vt::bundle_for(*world, suite);
  const auto& mem = bundle.objects;
  REQUIRE(mem.objects().size() == 6);
  for (const auto& o : world->objects) {
    for (const double threshold : {-1.0, 0.0, 0.3, 0.5}) {
      const OpenVocabParams params{threshold, 4};
      const auto got = open_vocabulary_retrieval(mem, o.identity, suite, params);
      const auto q = suite.clip_text->embed(o.identity);
      std::vector<std::pair<std::int64_t, double>> expect;
      for (const auto& rec : mem.objects()) {
        const double c = vt::reference_cosine(q, rec.feature);
        if (c >= threshold) expect.emplace_back(rec.object_id, c);
      }
      std::stable_sort(expect.begin(), expect.end(), [](auto& a, auto& b) { return a.second > b.second; });
      if (expect.size() > 4) expect.resize(4);
      REQUIRE(got.size() == expect.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].second == doctest::Approx(expect[i].second).epsilon(1e-9));
      }
    }
    // The full identity text retrieves its own object first, with cosine 1.
    const auto hits = open_vocabulary_retrieval(mem, o.identity, suite);
    REQUIRE(!hits.empty());
    CHECK(hits[0].second == doctest::Approx(1.0));
  }
  CHECK(open_vocabulary_retrieval(ObjectMemory{}, "cup", suite).empty());
  CHECK_THROWS_AS(open_vocabulary_retrieval(mem, "  ", suite), ContractError);
}
