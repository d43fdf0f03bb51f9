#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eviscreen/knowledge_bank.hpp"
#include "eviscreen/reasoning.hpp"

namespace eviscreen {

struct TrainConfig {
  double learning_rate = 1e-3;  // peak rate after warmup
  int warmup_steps = 50;
  int total_steps = 500;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear warmup to the peak rate, then cosine decay to zero:
/// lr(0) = 0, lr(warmup_steps) = peak, lr(total_steps) = 0.
double lr_at_step(const TrainConfig& tc, int step);

struct TrainLogRow {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ReasoningParams params;
  std::vector<TrainLogRow> log;
};

/// Builds per-case training examples by retrieving evidence from both
/// banks (or replicating the query when retrieval is ablated).
std::vector<ReasoningExample> prepare_examples(std::span<const LabeledCase> cases,
                                               const KnowledgeBank& bank_normal,
                                               const KnowledgeBank& bank_pathological, int k,
                                               bool replicate_query = false);

/// Decoupled-weight-decay adaptive-moment optimization over the reasoning
/// head, with seeded initialization and batch order. Deterministic per
/// (examples, rc, tc).
TrainResult train_reasoning(std::span<const ReasoningExample> examples,
                            const ReasoningConfig& rc, const TrainConfig& tc);

void write_train_log_csv(const std::string& path, std::span<const TrainLogRow> log);

}  // namespace eviscreen
