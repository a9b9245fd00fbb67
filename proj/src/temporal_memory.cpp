#include "vidmem/temporal_memory.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

#include "vidmem/error.hpp"
#include "vidmem/kernels.hpp"
#include "vidmem/util.hpp"

namespace vidmem {

namespace {

double parse_ratio_part(std::string_view s) {
  s = util::trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ContractError("bad ensemble ratio component: '" + std::string(s) + "'");
  }
  return v;
}

// Cosine of every row against `query`.
std::vector<double> scan_cosines(std::span<const double> matrix, std::size_t dim, const Embedding& query) {
  if (query.dim() != dim) {
    throw ContractError("query dim " + std::to_string(query.dim()) + " does not match memory dim " +
                        std::to_string(dim));
  }
  const std::size_t rows = matrix.size() / dim;
  std::vector<double> out(rows);
  kernels::dot_rows(matrix, dim, query.values(), out);
  const double qn = query.norm();
  if (qn == 0.0) throw DomainError("query embedding is the zero vector");
  for (std::size_t r = 0; r < rows; ++r) {
    const double rn = std::sqrt(kernels::squared_norm(matrix.subspan(r * dim, dim)));
    out[r] = std::clamp(out[r] / (qn * rn), -1.0, 1.0);
  }
  return out;
}

}  // namespace

EnsembleWeights EnsembleWeights::from_ratio(double text, double video) {
  if (!(text >= 0.0) || !(video >= 0.0) || text + video <= 0.0 || !std::isfinite(text + video)) {
    throw ContractError("ensemble ratio needs non-negative parts with a positive sum");
  }
  const double total = text + video;
  return {text / total, video / total};
}

EnsembleWeights EnsembleWeights::parse(std::string_view ratio) {
  const auto colon = ratio.find(':');
  if (colon == std::string_view::npos) throw ContractError("ensemble ratio must look like T:V");
  return from_ratio(parse_ratio_part(ratio.substr(0, colon)), parse_ratio_part(ratio.substr(colon + 1)));
}

TemporalMemory::TemporalMemory(std::vector<SegmentRecord> records, double segment_duration_s)
    : records_(std::move(records)), segment_duration_s_(segment_duration_s) {
  if (!(segment_duration_s_ > 0.0)) throw ContractError("segment duration must be positive");
  if (records_.empty()) return;
  caption_dim_ = records_.front().caption_emb.dim();
  video_dim_ = records_.front().video_emb.dim();
  caption_matrix_.reserve(records_.size() * caption_dim_);
  video_matrix_.reserve(records_.size() * video_dim_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.segment.index != static_cast<std::int64_t>(i)) {
      throw ContractError("temporal memory records must be contiguous from segment 0");
    }
    if (!(r.segment.end_s > r.segment.start_s)) throw ContractError("segment with empty span");
    if (r.caption.empty()) throw ContractError("segment " + std::to_string(i) + " has an empty caption");
    if (r.caption_emb.dim() != caption_dim_ || r.video_emb.dim() != video_dim_) {
      throw ContractError("segment " + std::to_string(i) + " embedding dims differ from segment 0");
    }
    caption_matrix_.insert(caption_matrix_.end(), r.caption_emb.values().begin(), r.caption_emb.values().end());
    video_matrix_.insert(video_matrix_.end(), r.video_emb.values().begin(), r.video_emb.values().end());
  }
}

TemporalMemory build_temporal_memory(std::span<const SegmentMedia> segments, const BackendSuite& suite,
                                     unsigned workers) {
  if (segments.empty()) throw ContractError("build_temporal_memory: no segments");
  if (!suite.captioner || !suite.crossmodal || !suite.caption_text) {
    throw ContractError("build_temporal_memory: suite lacks captioner or embedders");
  }
  const double duration = segments.front().segment.end_s - segments.front().segment.start_s;

  std::vector<std::optional<SegmentRecord>> slots(segments.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<std::pair<std::size_t, std::string>> first_error;

  const auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= segments.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      const auto& seg = segments[i];
      try {
        SegmentRecord rec;
        rec.segment = seg.segment;
        rec.caption = std::string(util::trim(suite.captioner->caption(seg)));
        if (rec.caption.empty()) throw BackendError("captioner returned an empty caption");
        rec.video_emb = expect_dim(suite.crossmodal->embed_video(seg), suite.crossmodal->dim(), "video encoder")
                            .renormalized();
        rec.caption_emb =
            expect_dim(suite.caption_text->embed(rec.caption), suite.caption_text->dim(), "caption embedder")
                .renormalized();
        slots[i] = std::move(rec);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error || i < first_error->first) first_error = {i, e.what()};
      }
    }
  };

  unsigned n = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
  n = static_cast<unsigned>(std::min<std::size_t>(n, segments.size()));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  if (first_error) {
    const auto idx = segments[first_error->first].segment.index;
    throw BackendError("segment " + std::to_string(idx) + ": " + first_error->second);
  }

  std::vector<SegmentRecord> records;
  records.reserve(slots.size());
  for (auto& s : slots) records.push_back(std::move(*s));
  return TemporalMemory(std::move(records), duration);
}

std::vector<std::pair<std::int64_t, std::string>> caption_retrieval(const TemporalMemory& mem, std::int64_t t_start,
                                                                     std::int64_t t_end, std::size_t cap) {
  const auto n = static_cast<std::int64_t>(mem.size());
  if (t_start < 0 || t_end < 0 || t_start >= n || t_end >= n) {
    throw RangeError("segment range (" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                     ") outside 0.." + std::to_string(n - 1));
  }
  if (t_end < t_start) {
    throw RangeError("end segment " + std::to_string(t_end) + " precedes start segment " + std::to_string(t_start));
  }
  const auto count = static_cast<std::size_t>(t_end - t_start + 1);
  if (count > cap) throw WindowCapError(count, cap);
  std::vector<std::pair<std::int64_t, std::string>> out;
  out.reserve(count);
  for (auto i = t_start; i <= t_end; ++i) out.emplace_back(i, mem.records()[static_cast<std::size_t>(i)].caption);
  return out;
}

std::vector<LocalizationHit> segment_localization(const TemporalMemory& mem, std::string_view query,
                                                  const EnsembleWeights& weights, const BackendSuite& suite,
                                                  std::size_t k, double expand_s) {
  if (util::trim(query).empty()) throw ContractError("segment_localization: empty query");
  if (mem.empty()) throw ContractError("segment_localization: empty memory");
  if (!suite.caption_text || !suite.crossmodal) throw ContractError("segment_localization: suite lacks text encoders");

  const auto text_q = suite.caption_text->embed(query);
  const auto video_q = suite.crossmodal->embed_text(query);
  const auto text_scores = scan_cosines(mem.caption_matrix(), mem.caption_dim(), text_q);
  const auto video_scores = scan_cosines(mem.video_matrix(), mem.video_dim(), video_q);

  std::vector<double> scores(mem.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = weights.w_text * text_scores[i] + weights.w_video * video_scores[i];
  }
  std::vector<std::size_t> order(mem.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });

  std::vector<LocalizationHit> hits;
  hits.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto i = order[r];
    const auto& seg = mem.records()[i].segment;
    LocalizationHit h;
    h.segment = seg;
    h.window = {std::max(0.0, seg.start_s - expand_s), std::min(mem.end_s(), seg.end_s + expand_s)};
    h.score = scores[i];
    h.text_score = text_scores[i];
    h.video_score = video_scores[i];
    hits.push_back(h);
  }
  return hits;
}

}  // namespace vidmem
