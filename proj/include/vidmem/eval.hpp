#pragma once
// Temporal-grounding recall and multiple-choice accuracy, plus the NLQ and
// MCQ evaluation drivers over a memory bundle.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "vidmem/agent.hpp"
#include "vidmem/core.hpp"
#include "vidmem/memory_bundle.hpp"
#include "vidmem/world.hpp"

namespace vidmem {

/// Fraction of examples whose top-k predictions include one with IoU >= m
/// against the ground truth. Throws ContractError on length mismatch or an
/// empty prediction list, DomainError on an empty set.
double recall_at(std::span<const std::vector<TimeWindow>> preds, std::span<const TimeWindow> gts, std::size_t k,
                 double m);

struct RecallReport {
  double r1_03 = 0.0;
  double r1_05 = 0.0;
  double r5_03 = 0.0;
  double r5_05 = 0.0;
  std::size_t n = 0;
};

RecallReport recall_report(std::span<const std::vector<TimeWindow>> preds, std::span<const TimeWindow> gts);

/// Mean of exact matches. Throws ContractError on length mismatch or a label
/// outside 0..4 and DomainError on an empty set.
double mcq_accuracy(std::span<const int> predicted, std::span<const int> gold);
/// Same, with missing predictions counted as wrong.
double mcq_accuracy(std::span<const std::optional<int>> predicted, std::span<const int> gold);

struct NlqResult {
  std::string query;
  TimeWindow gt;
  std::vector<TimeWindow> predictions;
  std::vector<std::int64_t> segments;
  double top1_iou = 0.0;
  double best_iou = 0.0;  // over the top-5
};

struct NlqEvaluation {
  RecallReport report;
  std::vector<NlqResult> examples;

  nlohmann::ordered_json to_json() const;
};

NlqEvaluation evaluate_nlq(const TemporalMemory& mem, std::span<const NlqExample> examples,
                           const EnsembleWeights& weights, const BackendSuite& suite, double expand_s = 0.0);

struct McqResult {
  std::string question;
  int gold = 0;
  std::optional<int> predicted;
  AgentAnswer answer;
};

struct McqEvaluation {
  double accuracy = 0.0;
  std::vector<McqResult> examples;

  nlohmann::ordered_json to_json() const;
};

/// Gives each question a fresh chat session via `chat_for(i)`.
McqEvaluation evaluate_mcq(const MemoryBundle& bundle, std::span<const McqExample> examples, BackendSuite suite,
                           const std::function<std::shared_ptr<ChatModel>(std::size_t)>& chat_for,
                           const PromptLibrary& prompts, const AgentOptions& options = {});

}  // namespace vidmem
