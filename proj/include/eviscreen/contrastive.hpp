#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eviscreen/feature_map.hpp"
#include "eviscreen/knowledge_bank.hpp"

namespace eviscreen {

/// h×w grid of mean k-NN distances against one bank.
struct DistanceMap {
  int h = 0;
  int w = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * w + j]; }
};

/// h×w grid of rectified distance-map differences; all entries >= 0.
struct AbnormalityMap {
  int h = 0;
  int w = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * w + j]; }
};

enum class PoolMethod {
  max,
  mean,
  topk_mean,
};

struct PoolConfig {
  PoolMethod method = PoolMethod::max;
  int topk = 1;  // only read for topk_mean
};

enum class ScreenMethod {
  contrastive,
  reasoning,
};

struct ScreeningResult {
  std::string case_id;
  double score = 0.0;
  std::optional<AbnormalityMap> abnormality;
  ScreenMethod method = ScreenMethod::contrastive;
};

struct ScreenConfig {
  int k = 3;
  PoolConfig pool;
  bool with_map = true;
};

/// Mean k-NN distance of every patch vector against each bank.
std::pair<DistanceMap, DistanceMap> distance_maps(const FeatureMap& fm,
                                                  const KnowledgeBank& bank_normal,
                                                  const KnowledgeBank& bank_pathological, int k);

/// Elementwise max(0, m_n - m_p).
AbnormalityMap abnormality_map(const DistanceMap& m_n, const DistanceMap& m_p);

/// Pools a grid of scores to one scalar. topk_mean selects the t largest
/// entries (ties to the lower index) and averages them in index order, so
/// topk_mean(h*w) equals mean exactly.
double pool_values(std::span<const double> values, const PoolConfig& pool);
double pool_score(const AbnormalityMap& m, const PoolConfig& pool);

/// Full training-free pipeline: distance maps -> abnormality map -> pooled
/// score. The abnormality map is attached when cfg.with_map is set.
ScreeningResult screen_training_free(const FeatureMap& fm, const KnowledgeBank& bank_normal,
                                     const KnowledgeBank& bank_pathological,
                                     const ScreenConfig& cfg);

/// Deviation-only ablation: pooled score of the normal-bank distance map,
/// the pathological bank unused.
ScreeningResult screen_normal_only(const FeatureMap& fm, const KnowledgeBank& bank_normal,
                                   const ScreenConfig& cfg);

}  // namespace eviscreen
