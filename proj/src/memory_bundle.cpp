#include "vidmem/memory_bundle.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "json.hpp"
#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

namespace {

constexpr std::string_view kMagic = "VAMEM1";
constexpr std::size_t kHeaderSize = 6 + 4 + 4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(util::read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!util::trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptFileError(what + ": " + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw CorruptFileError(what + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CorruptFileError(what + ": bad type for \"" + key + "\"");
  }
}

std::vector<Embedding> rows_of(const F32Matrix& m) {
  std::vector<Embedding> rows;
  rows.reserve(m.count);
  for (std::uint32_t r = 0; r < m.count; ++r) {
    const auto* p = m.values.data() + static_cast<std::size_t>(r) * m.dim;
    rows.emplace_back(std::vector<double>(p, p + m.dim));
  }
  return rows;
}

}  // namespace

std::string encode_matrix(std::uint32_t count, std::uint32_t dim, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(count) * dim) {
    throw ContractError("encode_matrix: " + std::to_string(values.size()) + " values for " + std::to_string(count) +
                        "x" + std::to_string(dim));
  }
  std::string out(kMagic);
  put_u32(out, count);
  put_u32(out, dim);
  out.reserve(kHeaderSize + values.size() * 4);
  for (const double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

F32Matrix decode_matrix(std::string_view bytes, const std::string& what) {
  if (bytes.size() < kHeaderSize || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CorruptFileError(what + ": bad magic (expected VAMEM1)");
  }
  F32Matrix m;
  m.count = get_u32(bytes, 6);
  m.dim = get_u32(bytes, 10);
  const std::uint64_t expected = static_cast<std::uint64_t>(m.count) * m.dim * 4;
  if (bytes.size() - kHeaderSize != expected) {
    throw CorruptFileError(what + ": header says " + std::to_string(m.count) + "x" + std::to_string(m.dim) +
                           " but payload has " + std::to_string(bytes.size() - kHeaderSize) + " bytes");
  }
  m.values.resize(static_cast<std::size_t>(m.count) * m.dim);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderSize + 4 * i));
    if (!std::isfinite(m.values[i])) throw CorruptFileError(what + ": non-finite value");
  }
  return m;
}

Embedding to_f32_precision(const Embedding& e) {
  std::vector<double> v(e.values().begin(), e.values().end());
  for (double& x : v) x = static_cast<float>(x);
  return Embedding(std::move(v));
}

void save_memory(const MemoryBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& mem = bundle.temporal;
  const auto n = static_cast<std::uint32_t>(mem.size());

  nlohmann::ordered_json manifest;
  manifest["version"] = kMemoryFormatVersion;
  manifest["segment_count"] = n;
  manifest["segment_duration_s"] = mem.segment_duration_s();
  manifest["caption_dim"] = mem.caption_dim();
  manifest["video_dim"] = mem.video_dim();
  manifest["video_duration_s"] = bundle.video_duration_s > 0.0 ? bundle.video_duration_s : mem.end_s();
  manifest["video_uri"] = bundle.video_uri;

  std::string captions;
  for (const auto& r : mem.records()) {
    nlohmann::ordered_json line;
    line["segment"] = r.segment.index;
    line["caption"] = r.caption;
    captions += line.dump() + "\n";
  }

  std::string objects;
  for (const auto& o : bundle.objects.objects()) {
    nlohmann::ordered_json line;
    line["object_id"] = o.object_id;
    line["category"] = o.category;
    line["segments"] = o.segments;
    objects += line.dump() + "\n";
  }

  util::write_file_atomic(dir / "captions.jsonl", captions);
  util::write_file_atomic(dir / "caption_emb.bin",
                          encode_matrix(n, static_cast<std::uint32_t>(mem.caption_dim()), mem.caption_matrix()));
  util::write_file_atomic(dir / "video_emb.bin",
                          encode_matrix(n, static_cast<std::uint32_t>(mem.video_dim()), mem.video_matrix()));
  util::write_file_atomic(dir / "objects.jsonl", objects);
  util::write_file_atomic(dir / "object_feat.bin",
                          encode_matrix(static_cast<std::uint32_t>(bundle.objects.objects().size()),
                                        static_cast<std::uint32_t>(bundle.objects.feature_dim()),
                                        bundle.objects.feature_matrix()));
  // Manifest last: its presence marks a complete directory.
  util::write_file_atomic(dir / "manifest.json", manifest.dump() + "\n");
}

MemoryBundle load_memory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ContractError("memory directory not found: " + dir.string());
  const auto manifest = parse_json(util::read_file(dir / "manifest.json"), "manifest.json");
  const int version = field<int>(manifest, "version", "manifest.json");
  if (version != kMemoryFormatVersion) {
    throw VersionMismatchError("manifest.json: format version " + std::to_string(version) + ", expected " +
                               std::to_string(kMemoryFormatVersion));
  }
  const auto n = field<std::uint64_t>(manifest, "segment_count", "manifest.json");
  const auto seg_dur = field<double>(manifest, "segment_duration_s", "manifest.json");
  const auto caption_dim = field<std::uint64_t>(manifest, "caption_dim", "manifest.json");
  const auto video_dim = field<std::uint64_t>(manifest, "video_dim", "manifest.json");
  if (!(seg_dur > 0.0)) throw CorruptFileError("manifest.json: segment_duration_s must be positive");

  MemoryBundle bundle;
  bundle.video_duration_s = manifest.value("video_duration_s", static_cast<double>(n) * seg_dur);
  bundle.video_uri = manifest.value("video_uri", std::string());

  const auto cap = decode_matrix(util::read_file(dir / "caption_emb.bin"), "caption_emb.bin");
  const auto vid = decode_matrix(util::read_file(dir / "video_emb.bin"), "video_emb.bin");
  if (cap.count != n || vid.count != n) {
    throw CorruptFileError("embedding row counts (" + std::to_string(cap.count) + ", " + std::to_string(vid.count) +
                           ") disagree with segment_count " + std::to_string(n));
  }
  if (cap.dim != caption_dim || vid.dim != video_dim) {
    throw CorruptFileError("embedding dims disagree with manifest.json");
  }
  const auto caption_lines = read_lines(dir / "captions.jsonl");
  if (caption_lines.size() != n) {
    throw CorruptFileError("captions.jsonl has " + std::to_string(caption_lines.size()) + " lines, expected " +
                           std::to_string(n));
  }
  const auto spans = slice_segments(bundle.video_duration_s, seg_dur);
  if (spans.size() != n) throw CorruptFileError("video_duration_s does not yield segment_count segments");

  auto cap_rows = rows_of(cap);
  auto vid_rows = rows_of(vid);
  std::vector<SegmentRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string what = "captions.jsonl line " + std::to_string(i + 1);
    const auto line = parse_json(caption_lines[i], what);
    if (field<std::int64_t>(line, "segment", what) != static_cast<std::int64_t>(i)) {
      throw CorruptFileError(what + ": segments out of order");
    }
    records.push_back({spans[i], field<std::string>(line, "caption", what), std::move(cap_rows[i]),
                       std::move(vid_rows[i])});
  }
  bundle.temporal = TemporalMemory(std::move(records), seg_dur);

  const auto object_lines = read_lines(dir / "objects.jsonl");
  const auto feat = decode_matrix(util::read_file(dir / "object_feat.bin"), "object_feat.bin");
  if (feat.count != object_lines.size()) {
    throw CorruptFileError("object_feat.bin has " + std::to_string(feat.count) + " rows for " +
                           std::to_string(object_lines.size()) + " objects");
  }
  auto feat_rows = rows_of(feat);
  std::vector<ObjectRecord> objects;
  for (std::size_t i = 0; i < object_lines.size(); ++i) {
    const std::string what = "objects.jsonl line " + std::to_string(i + 1);
    const auto line = parse_json(object_lines[i], what);
    ObjectRecord rec;
    rec.object_id = field<std::int64_t>(line, "object_id", what);
    rec.category = field<std::string>(line, "category", what);
    rec.segments = field<std::vector<std::int64_t>>(line, "segments", what);
    for (const auto s : rec.segments) {
      if (s < 0 || static_cast<std::uint64_t>(s) >= n) throw CorruptFileError(what + ": segment out of range");
    }
    rec.feature = std::move(feat_rows[i]);
    objects.push_back(std::move(rec));
  }
  bundle.objects = ObjectMemory(std::move(objects));
  return bundle;
}

ObjectMemory build_object_memory_from_tracks(std::span<const TrackResult> tracks, const BackendSuite& suite,
                                             const FrameMapping& mapping, const ReidParams& reid) {
  std::vector<TrackingFeature> feats;
  feats.reserve(tracks.size());
  for (const auto& t : tracks) feats.push_back(featurize_track(t, suite));
  const auto groups = reid_group(feats, reid);
  return build_object_memory(groups, feats, mapping);
}

MemoryBundle build_memory_bundle(std::span<const SegmentMedia> segments, const std::string& video_uri,
                                 double video_duration_s, const BackendSuite& suite, const BuildParams& params) {
  MemoryBundle bundle;
  bundle.video_uri = video_uri;
  bundle.temporal = build_temporal_memory(segments, suite, params.workers);
  bundle.video_duration_s = video_duration_s > 0.0 ? video_duration_s : bundle.temporal.end_s();
  if (suite.tracker) {
    const auto tracks = suite.tracker->track(video_uri);
    const FrameMapping mapping{params.fps, bundle.temporal.segment_duration_s(),
                               static_cast<std::int64_t>(bundle.temporal.size())};
    bundle.objects = build_object_memory_from_tracks(tracks, suite, mapping, params.reid);
  }
  return bundle;
}

}  // namespace vidmem
