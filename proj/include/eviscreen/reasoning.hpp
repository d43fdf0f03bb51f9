#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eviscreen/autodiff.hpp"
#include "eviscreen/contrastive.hpp"
#include "eviscreen/feature_map.hpp"
#include "eviscreen/knowledge_bank.hpp"

namespace eviscreen {

/// Per-patch k-nearest-neighbor vectors from one bank, slot-ordered by
/// ascending distance. Distances ride along for diagnostics; attention
/// consumes the vectors only.
struct EvidenceSet {
  int h = 0;
  int w = 0;
  int k = 0;
  int d = 0;
  std::vector<float> vectors;     // (h*w*k) * d, patch-major then slot
  std::vector<double> distances;  // h*w*k

  std::span<const float> slot(std::size_t patch, int slot_index) const {
    return {vectors.data() + (patch * static_cast<std::size_t>(k) + slot_index) * d,
            static_cast<std::size_t>(d)};
  }
  std::span<float> slot(std::size_t patch, int slot_index) {
    return {vectors.data() + (patch * static_cast<std::size_t>(k) + slot_index) * d,
            static_cast<std::size_t>(d)};
  }
};

/// Per-patch k-NN lookup into both banks.
std::pair<EvidenceSet, EvidenceSet> retrieve_evidence(const FeatureMap& fm,
                                                      const KnowledgeBank& bank_normal,
                                                      const KnowledgeBank& bank_pathological,
                                                      int k);

/// Ablation evidence: every slot holds the query vector itself, so the
/// reasoning head runs with retrieval disabled.
EvidenceSet replicate_query_evidence(const FeatureMap& fm, int k);

struct ReasoningConfig {
  int depth = 2;
  int d_model = 32;
  int heads = 4;
  int k = 3;
  int mlp_hidden = 64;
  int feature_dim = 0;  // input patch dimension; set when params are built
  std::uint64_t seed = 0;

  /// Enforces the training contract (depth >= 1, heads | d_model,
  /// d_model % 4 == 0 for the positional table, positive sizes).
  void validate() const;
};

struct NamedTensor {
  std::string name;
  ad::Tensor value;
  ad::Tensor grad;
  bool decay = false;  // weight matrices only; gains/biases/tokens exempt
};

/// All learnable state of the reasoning head, as a flat named-tensor
/// registry with a deterministic order (used by the optimizer, the
/// checkpoint format and gradient checks alike).
class ReasoningParams {
public:
  ReasoningParams() = default;

  /// Seeded initialization; matrices get Glorot noise, gains 1, biases 0.
  static ReasoningParams init(const ReasoningConfig& cfg);

  const ReasoningConfig& config() const { return cfg_; }
  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  NamedTensor& at(const std::string& name);
  const NamedTensor& at(const std::string& name) const;
  void zero_grad();

private:
  ReasoningConfig cfg_;
  std::vector<NamedTensor> tensors_;
};

/// Fixed 2D sin-cos positional table [h*w, d_model]: the first half of the
/// channels encodes the row index, the second half the column index, each
/// as interleaved sine/cosine pairs at geometric frequencies (base 10000).
/// d_model must be divisible by 4.
ad::Tensor sincos_positional(int h, int w, int d_model);

/// Full forward pass to the scalar logit. Handles depth 0 by skipping all
/// blocks (the logit then depends on the class tokens and head only).
double reasoning_forward(const FeatureMap& fm, const EvidenceSet& ev_n, const EvidenceSet& ev_p,
                         const ReasoningParams& params);

struct ReasoningExample {
  FeatureMap features;
  EvidenceSet ev_n;
  EvidenceSet ev_p;
  int label = 0;
};

/// Mean binary cross-entropy over the batch; gradients for every learnable
/// tensor accumulate into params' grad buffers (zeroed first).
double loss_and_grad(std::span<const ReasoningExample> batch, ReasoningParams& params);

/// score = logistic(logit); attaches the contrastive abnormality map when
/// requested (it is the localization output of the shared banks).
ScreeningResult reasoning_predict(const FeatureMap& fm, const KnowledgeBank& bank_normal,
                                  const KnowledgeBank& bank_pathological,
                                  const ReasoningParams& params, bool with_map = false);

void save_params(const ReasoningParams& params, const std::string& path);
ReasoningParams load_params(const std::string& path);

}  // namespace eviscreen
