#include "vidmem/eval.hpp"

#include <algorithm>

#include "vidmem/error.hpp"

namespace vidmem {

double recall_at(std::span<const std::vector<TimeWindow>> preds, std::span<const TimeWindow> gts, std::size_t k,
                 double m) {
  if (preds.size() != gts.size()) {
    throw ContractError("recall_at: " + std::to_string(preds.size()) + " prediction lists for " +
                        std::to_string(gts.size()) + " ground truths");
  }
  if (gts.empty()) throw DomainError("recall_at: no examples");
  if (k == 0) throw ContractError("recall_at: k must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (preds[i].empty()) throw ContractError("recall_at: example " + std::to_string(i) + " has no predictions");
    const std::size_t top = std::min(k, preds[i].size());
    for (std::size_t j = 0; j < top; ++j) {
      if (temporal_iou(preds[i][j], gts[i]) >= m) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(gts.size());
}

RecallReport recall_report(std::span<const std::vector<TimeWindow>> preds, std::span<const TimeWindow> gts) {
  RecallReport r;
  r.r1_03 = recall_at(preds, gts, 1, 0.3);
  r.r1_05 = recall_at(preds, gts, 1, 0.5);
  r.r5_03 = recall_at(preds, gts, 5, 0.3);
  r.r5_05 = recall_at(preds, gts, 5, 0.5);
  r.n = gts.size();
  return r;
}

double mcq_accuracy(std::span<const int> predicted, std::span<const int> gold) {
  std::vector<std::optional<int>> p(predicted.begin(), predicted.end());
  for (const int v : predicted) {
    if (v < 0 || v > 4) throw ContractError("mcq_accuracy: predicted label " + std::to_string(v) + " outside 0..4");
  }
  return mcq_accuracy(std::span<const std::optional<int>>(p), gold);
}

double mcq_accuracy(std::span<const std::optional<int>> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw ContractError("mcq_accuracy: length mismatch");
  if (gold.empty()) throw DomainError("mcq_accuracy: no examples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] > 4) throw ContractError("mcq_accuracy: gold label outside 0..4");
    if (predicted[i] && (*predicted[i] < 0 || *predicted[i] > 4)) {
      throw ContractError("mcq_accuracy: predicted label outside 0..4");
    }
    if (predicted[i] == gold[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

namespace {

nlohmann::ordered_json window_json(const TimeWindow& w) { return {w.start_s, w.end_s}; }

}  // namespace

nlohmann::ordered_json NlqEvaluation::to_json() const {
  nlohmann::ordered_json j;
  j["r1_03"] = report.r1_03;
  j["r1_05"] = report.r1_05;
  j["r5_03"] = report.r5_03;
  j["r5_05"] = report.r5_05;
  j["n"] = report.n;
  j["examples"] = nlohmann::ordered_json::array();
  for (const auto& e : examples) {
    nlohmann::ordered_json x;
    x["query"] = e.query;
    x["gt"] = window_json(e.gt);
    x["segments"] = e.segments;
    auto preds = nlohmann::ordered_json::array();
    for (const auto& p : e.predictions) preds.push_back(window_json(p));
    x["predictions"] = std::move(preds);
    x["top1_iou"] = e.top1_iou;
    x["best_iou"] = e.best_iou;
    j["examples"].push_back(std::move(x));
  }
  return j;
}

NlqEvaluation evaluate_nlq(const TemporalMemory& mem, std::span<const NlqExample> examples,
                           const EnsembleWeights& weights, const BackendSuite& suite, double expand_s) {
  NlqEvaluation ev;
  std::vector<std::vector<TimeWindow>> preds;
  std::vector<TimeWindow> gts;
  for (const auto& ex : examples) {
    NlqResult r;
    r.query = ex.query;
    r.gt = ex.gt_window;
    for (const auto& hit : segment_localization(mem, ex.query, weights, suite, kLocalizationTopK, expand_s)) {
      r.predictions.push_back(hit.window);
      r.segments.push_back(hit.segment.index);
      r.best_iou = std::max(r.best_iou, temporal_iou(hit.window, ex.gt_window));
    }
    r.top1_iou = r.predictions.empty() ? 0.0 : temporal_iou(r.predictions.front(), ex.gt_window);
    preds.push_back(r.predictions);
    gts.push_back(ex.gt_window);
    ev.examples.push_back(std::move(r));
  }
  ev.report = recall_report(preds, gts);
  return ev;
}

nlohmann::ordered_json McqEvaluation::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["n"] = examples.size();
  j["examples"] = nlohmann::ordered_json::array();
  for (const auto& e : examples) {
    nlohmann::ordered_json x;
    x["question"] = e.question;
    x["gold"] = e.gold;
    x["predicted"] = e.predicted ? nlohmann::ordered_json(*e.predicted) : nlohmann::ordered_json(nullptr);
    x["transcript"] = transcript_to_json(e.answer);
    j["examples"].push_back(std::move(x));
  }
  return j;
}

McqEvaluation evaluate_mcq(const MemoryBundle& bundle, std::span<const McqExample> examples, BackendSuite suite,
                           const std::function<std::shared_ptr<ChatModel>(std::size_t)>& chat_for,
                           const PromptLibrary& prompts, const AgentOptions& options) {
  McqEvaluation ev;
  std::vector<std::optional<int>> predicted;
  std::vector<int> gold;
  AgentOptions opts = options;
  opts.task = TaskKind::mcq;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    suite.chat = chat_for(i);
    McqResult r;
    r.question = ex.question;
    r.gold = ex.answer;
    r.answer = run_agent(format_mcq(ex.question, ex.options), bundle, suite, prompts, opts);
    r.predicted = r.answer.choice_label;
    predicted.push_back(r.predicted);
    gold.push_back(ex.answer);
    ev.examples.push_back(std::move(r));
  }
  ev.accuracy = mcq_accuracy(std::span<const std::optional<int>>(predicted), gold);
  return ev;
}

}  // namespace vidmem
