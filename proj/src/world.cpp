#include "vidmem/world.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <set>

#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array kWearerSubjects = {"C"};
constexpr std::array kOtherSubjects = {"The man X", "The woman Y", "A man Z", "The boy B"};
constexpr std::array kVerbs = {"opens",  "closes",  "picks up", "puts down", "holds",
                               "washes", "cuts",    "moves",    "stirs",     "wipes",
                               "checks", "carries", "drops",    "adjusts",   "fills",
                               "pours",  "folds",   "cleans",   "touches",   "pushes"};
constexpr std::array kNouns = {"the fridge", "the cup",    "the knife", "the bottle", "the door",
                               "the drawer", "the bowl",   "the towel", "the phone",  "the book",
                               "the box",    "the chair",  "the pan",   "the plate",  "the bag",
                               "the lid",    "the basket", "the spoon", "the jar",    "the laptop"};
constexpr std::array kPlaces = {"in the kitchen", "on the table",   "near the sink", "in the garage",
                                "on the counter", "by the window",  "in the hallway", "on the floor",
                                "in the garden",  "at the desk"};
constexpr std::array kCategories = {"elephant", "cup",   "dog",   "bottle", "chair", "car",
                                    "bird",     "book",  "plant", "phone",  "bowl",  "bag"};
constexpr std::array kColors = {"red", "blue", "green", "gray", "brown", "white", "black", "yellow"};
constexpr std::array kNumberWords = {"zero", "one", "two",   "three", "four", "five",
                                     "six",  "seven", "eight", "nine",  "ten"};

template <typename Array>
const char* pick(SplitMix64& rng, const Array& arr) {
  return arr[rng.below(arr.size())];
}

std::string sorted_token_key(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : util::to_lower(text)) {
    if (c == ' ') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  std::sort(tokens.begin(), tokens.end());
  return util::join(tokens, " ");
}

std::string paraphrase_lite(const std::string& event) {
  std::vector<std::string> kept;
  std::string cur;
  const auto flush = [&] {
    if (!cur.empty() && cur != "the" && cur != "a" && cur != "an") kept.push_back(cur);
    cur.clear();
  };
  for (char c : util::to_lower(event)) {
    if (c == ' ') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return util::join(kept, " ");
}

// Partial Fisher-Yates: the first `k` elements become a uniform sample.
template <typename T>
void sample_prefix(std::vector<T>& items, std::size_t k, SplitMix64& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(items.size() - i);
    std::swap(items[i], items[j]);
  }
}

std::vector<std::int64_t> gen_appearance(SplitMix64& rng, std::int64_t n_segments) {
  std::vector<std::int64_t> segs;
  const std::int64_t runs = 1 + static_cast<std::int64_t>(rng.below(3));
  const std::int64_t max_len = std::max<std::int64_t>(1, n_segments / 8);
  std::int64_t pos = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n_segments)));
  for (std::int64_t r = 0; r < runs && pos < n_segments; ++r) {
    const std::int64_t len = 1 + static_cast<std::int64_t>(rng.below(max_len));
    for (std::int64_t s = pos; s < std::min(n_segments, pos + len); ++s) segs.push_back(s);
    pos += len + 1 + static_cast<std::int64_t>(rng.below(3));
  }
  return segs;
}

}  // namespace

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::int64_t SyntheticWorld::frames_per_segment() const {
  return std::max<std::int64_t>(1, std::llround(fps * segment_duration_s));
}

const std::string& SyntheticWorld::event_text(std::int64_t segment) const {
  static const std::string filler = kFillerEvent;
  if (segment < 0 || segment >= static_cast<std::int64_t>(events.size())) {
    throw RangeError("segment " + std::to_string(segment) + " outside world");
  }
  const auto& e = events[static_cast<std::size_t>(segment)];
  return e.text.empty() ? filler : e.text;
}

std::string SyntheticWorld::caption(std::int64_t segment) const {
  const auto& e = events.at(static_cast<std::size_t>(segment));
  const bool wearer = e.text.empty() || e.camera_wearer;
  return (wearer ? "#C " : "#O ") + event_text(segment);
}

std::vector<SegmentMedia> SyntheticWorld::segment_media() const {
  std::vector<SegmentMedia> out;
  const auto fps_seg = frames_per_segment();
  for (std::int64_t i = 0; i < n_segments; ++i) {
    SegmentMedia m;
    m.video_uri = video_uri;
    m.segment = {i, static_cast<double>(i) * segment_duration_s,
                 static_cast<double>(i + 1) * segment_duration_s};
    for (std::int64_t f = i * fps_seg; f < (i + 1) * fps_seg; ++f) {
      m.frames.push_back(video_uri + "#frame=" + std::to_string(f));
    }
    out.push_back(std::move(m));
  }
  return out;
}

SyntheticWorld gen_world(std::uint64_t seed, const WorldParams& params) {
  if (params.n_segments <= 0 || params.n_objects < 0 || params.n_nlq < 0 || params.n_mcq < 0) {
    throw ContractError("gen_world: parameters must be positive");
  }
  SplitMix64 rng(seed);
  SyntheticWorld w;
  w.seed = seed;
  w.n_segments = params.n_segments;

  std::set<std::string> seen;
  for (std::int64_t i = 0; i < params.n_segments; ++i) {
    WorldEvent ev;
    if (rng.below(8) == 0) {
      w.events.push_back(ev);
      continue;
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
      ev.camera_wearer = rng.below(3) != 0;
      const char* subject = ev.camera_wearer ? pick(rng, kWearerSubjects) : pick(rng, kOtherSubjects);
      std::string text = std::string(subject) + " " + pick(rng, kVerbs) + " " + pick(rng, kNouns) +
                         " " + pick(rng, kPlaces);
      if (seen.insert(sorted_token_key(text)).second) {
        ev.text = std::move(text);
        break;
      }
    }
    w.events.push_back(ev);
  }

  for (std::int64_t o = 0; o < params.n_objects; ++o) {
    WorldObject obj;
    obj.category = params.force_category ? *params.force_category : pick(rng, kCategories);
    obj.identity = std::string(pick(rng, kColors)) + " " + obj.category + " obj" + std::to_string(o);
    obj.segments = gen_appearance(rng, params.n_segments);
    w.objects.push_back(std::move(obj));
  }

  std::vector<std::int64_t> candidates;
  for (std::int64_t i = 0; i < params.n_segments; ++i) {
    if (!w.events[static_cast<std::size_t>(i)].text.empty()) candidates.push_back(i);
  }
  sample_prefix(candidates, static_cast<std::size_t>(params.n_nlq), rng);
  const auto n_nlq = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(params.n_nlq));
  for (std::size_t q = 0; q < n_nlq; ++q) {
    const auto seg = candidates[q];
    w.nlq.push_back({paraphrase_lite(w.event_text(seg)),
                     {static_cast<double>(seg) * w.segment_duration_s,
                      static_cast<double>(seg + 1) * w.segment_duration_s}});
  }

  std::vector<std::string> present;
  for (const auto& obj : w.objects) {
    if (std::find(present.begin(), present.end(), obj.category) == present.end()) {
      present.push_back(obj.category);
    }
  }
  for (std::int64_t q = 0; q < params.n_mcq && !present.empty(); ++q) {
    const auto& cat = present[rng.below(present.size())];
    const auto count = std::count_if(w.objects.begin(), w.objects.end(),
                                     [&](const WorldObject& o) { return o.category == cat; });
    std::vector<std::string> distractors;
    for (std::int64_t n = 1; n <= 10; ++n) {
      if (n != count) distractors.push_back(number_word(n));
    }
    sample_prefix(distractors, 4, rng);
    McqExample mcq;
    mcq.question = "how many " + plural(cat) + " are there";
    mcq.answer = static_cast<int>(rng.below(5));
    std::size_t d = 0;
    for (int k = 0; k < 5; ++k) {
      mcq.options[static_cast<std::size_t>(k)] = k == mcq.answer ? number_word(count) : distractors[d++];
    }
    w.mcq.push_back(std::move(mcq));
  }
  return w;
}

std::vector<WorldTrack> world_tracks(const SyntheticWorld& world) {
  std::vector<WorldTrack> tracks;
  const auto per_seg = world.frames_per_segment();
  for (std::size_t o = 0; o < world.objects.size(); ++o) {
    const auto& segs = world.objects[o].segments;
    for (std::size_t i = 0; i < segs.size();) {
      std::size_t j = i;
      while (j + 1 < segs.size() && segs[j + 1] == segs[j] + 1) ++j;
      WorldTrack t;
      t.object = o;
      t.category = world.objects[o].category;
      for (std::int64_t f = segs[i] * per_seg; f < (segs[j] + 1) * per_seg; ++f) t.frames.push_back(f);
      tracks.push_back(std::move(t));
      i = j + 1;
    }
  }
  std::stable_sort(tracks.begin(), tracks.end(), [](const WorldTrack& a, const WorldTrack& b) {
    return a.frames.front() < b.frames.front();
  });
  for (std::size_t i = 0; i < tracks.size(); ++i) tracks[i].tracking_id = static_cast<std::int64_t>(i + 1);
  return tracks;
}

std::string plural(const std::string& category) {
  if (category.ends_with("s") || category.ends_with("x") || category.ends_with("ch") ||
      category.ends_with("sh")) {
    return category + "es";
  }
  return category + "s";
}

std::string number_word(std::int64_t n) {
  if (n >= 0 && n < static_cast<std::int64_t>(kNumberWords.size())) {
    return kNumberWords[static_cast<std::size_t>(n)];
  }
  return std::to_string(n);
}

std::string world_to_json(const SyntheticWorld& w) {
  ojson j;
  j["seed"] = w.seed;
  j["n_segments"] = w.n_segments;
  j["segment_duration_s"] = w.segment_duration_s;
  j["fps"] = w.fps;
  j["video_uri"] = w.video_uri;
  j["events"] = ojson::array();
  for (const auto& e : w.events) {
    j["events"].push_back({{"text", e.text}, {"actor", e.camera_wearer ? "C" : "O"}});
  }
  j["objects"] = ojson::array();
  for (const auto& o : w.objects) {
    j["objects"].push_back({{"identity", o.identity}, {"category", o.category}, {"segments", o.segments}});
  }
  j["nlq"] = ojson::array();
  for (const auto& q : w.nlq) {
    j["nlq"].push_back({{"query", q.query}, {"start_s", q.gt_window.start_s}, {"end_s", q.gt_window.end_s}});
  }
  j["mcq"] = ojson::array();
  for (const auto& q : w.mcq) {
    j["mcq"].push_back({{"question", q.question}, {"options", q.options}, {"answer", q.answer}});
  }
  return j.dump(2) + "\n";
}

SyntheticWorld world_from_json(const std::string& text) {
  SyntheticWorld w;
  try {
    const auto j = nlohmann::json::parse(text);
    w.seed = j.value("seed", std::uint64_t{0});
    w.n_segments = j.at("n_segments").get<std::int64_t>();
    w.segment_duration_s = j.value("segment_duration_s", kDefaultSegmentDuration);
    w.fps = j.value("fps", 30.0);
    w.video_uri = j.value("video_uri", std::string("synthetic://world"));
    for (const auto& e : j.at("events")) {
      w.events.push_back({e.at("text").get<std::string>(), e.value("actor", std::string("C")) == "C"});
    }
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
      WorldObject obj{o.at("identity").get<std::string>(), o.at("category").get<std::string>(),
                      o.at("segments").get<std::vector<std::int64_t>>()};
      std::sort(obj.segments.begin(), obj.segments.end());
      obj.segments.erase(std::unique(obj.segments.begin(), obj.segments.end()), obj.segments.end());
      w.objects.push_back(std::move(obj));
    }
    for (const auto& q : j.value("nlq", nlohmann::json::array())) {
      w.nlq.push_back({q.at("query").get<std::string>(),
                       {q.at("start_s").get<double>(), q.at("end_s").get<double>()}});
    }
    for (const auto& q : j.value("mcq", nlohmann::json::array())) {
      McqExample m;
      m.question = q.at("question").get<std::string>();
      const auto opts = q.at("options").get<std::vector<std::string>>();
      if (opts.size() != 5) throw ContractError("mcq needs exactly 5 options");
      std::copy(opts.begin(), opts.end(), m.options.begin());
      m.answer = q.at("answer").get<int>();
      w.mcq.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("world.json: ") + e.what());
  }
  if (w.n_segments <= 0 || static_cast<std::int64_t>(w.events.size()) != w.n_segments) {
    throw CorruptFileError("world.json: events must list exactly n_segments entries");
  }
  for (const auto& o : w.objects) {
    for (auto s : o.segments) {
      if (s < 0 || s >= w.n_segments) throw CorruptFileError("world.json: object segment out of range");
    }
    if (o.segments.empty()) throw CorruptFileError("world.json: object with no appearances");
  }
  for (const auto& q : w.mcq) {
    if (q.answer < 0 || q.answer > 4) throw CorruptFileError("world.json: mcq answer out of range");
  }
  return w;
}

SyntheticWorld load_world(const std::filesystem::path& path) {
  return world_from_json(util::read_file(path));
}

}  // namespace vidmem
