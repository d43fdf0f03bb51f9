#include "eviscreen/contrastive.hpp"

#include <algorithm>
#include <numeric>

#include "eviscreen/error.hpp"

namespace eviscreen {

std::pair<DistanceMap, DistanceMap> distance_maps(const FeatureMap& fm,
                                                  const KnowledgeBank& bank_normal,
                                                  const KnowledgeBank& bank_pathological, int k) {
  DistanceMap m_n{fm.h, fm.w, std::vector<double>(fm.patch_count())};
  DistanceMap m_p{fm.h, fm.w, std::vector<double>(fm.patch_count())};
  for (int i = 0; i < fm.h; ++i) {
    for (int j = 0; j < fm.w; ++j) {
      const auto q = fm.patch(i, j);
      try {
        m_n.values[static_cast<std::size_t>(i) * fm.w + j] = bank_normal.knn_avg_distance(q, k);
        m_p.values[static_cast<std::size_t>(i) * fm.w + j] =
            bank_pathological.knn_avg_distance(q, k);
      } catch (const Error& e) {
        throw QueryError(std::string(e.what()) + " (patch " + std::to_string(i) + "," +
                         std::to_string(j) + " of case " + fm.case_id + ")");
      }
    }
  }
  return {std::move(m_n), std::move(m_p)};
}

AbnormalityMap abnormality_map(const DistanceMap& m_n, const DistanceMap& m_p) {
  if (m_n.h != m_p.h || m_n.w != m_p.w) {
    throw InputError("distance map shapes differ: " + std::to_string(m_n.h) + "x" +
                     std::to_string(m_n.w) + " vs " + std::to_string(m_p.h) + "x" +
                     std::to_string(m_p.w));
  }
  AbnormalityMap m{m_n.h, m_n.w, std::vector<double>(m_n.values.size())};
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = std::max(0.0, m_n.values[i] - m_p.values[i]);
  }
  return m;
}

double pool_values(std::span<const double> values, const PoolConfig& pool) {
  if (values.empty()) throw InputError("cannot pool an empty map");
  switch (pool.method) {
    case PoolMethod::max:
      return *std::max_element(values.begin(), values.end());
    case PoolMethod::mean: {
      double acc = 0.0;
      for (double v : values) acc += v;
      return acc / static_cast<double>(values.size());
    }
    case PoolMethod::topk_mean: {
      const int t = pool.topk;
      if (t <= 0 || static_cast<std::size_t>(t) > values.size()) {
        throw ConfigError("topk_mean needs 1 <= t <= " + std::to_string(values.size()) +
                          ", got " + std::to_string(t));
      }
      std::vector<std::size_t> order(values.size());
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + t, order.end(),
                        [&](std::size_t a, std::size_t b) {
                          if (values[a] != values[b]) return values[a] > values[b];
                          return a < b;
                        });
      // Sum the chosen entries in index order so t = |values| reproduces
      // the plain mean bit for bit.
      std::sort(order.begin(), order.begin() + t);
      double acc = 0.0;
      for (int i = 0; i < t; ++i) acc += values[order[static_cast<std::size_t>(i)]];
      return acc / static_cast<double>(t);
    }
  }
  throw ConfigError("unknown pooling method");
}

double pool_score(const AbnormalityMap& m, const PoolConfig& pool) {
  return pool_values(m.values, pool);
}

ScreeningResult screen_training_free(const FeatureMap& fm, const KnowledgeBank& bank_normal,
                                     const KnowledgeBank& bank_pathological,
                                     const ScreenConfig& cfg) {
  auto [m_n, m_p] = distance_maps(fm, bank_normal, bank_pathological, cfg.k);
  AbnormalityMap abn = abnormality_map(m_n, m_p);
  ScreeningResult result;
  result.case_id = fm.case_id;
  result.score = pool_score(abn, cfg.pool);
  result.method = ScreenMethod::contrastive;
  if (cfg.with_map) result.abnormality = std::move(abn);
  return result;
}

ScreeningResult screen_normal_only(const FeatureMap& fm, const KnowledgeBank& bank_normal,
                                   const ScreenConfig& cfg) {
  DistanceMap m_n{fm.h, fm.w, std::vector<double>(fm.patch_count())};
  for (int i = 0; i < fm.h; ++i) {
    for (int j = 0; j < fm.w; ++j) {
      m_n.values[static_cast<std::size_t>(i) * fm.w + j] =
          bank_normal.knn_avg_distance(fm.patch(i, j), cfg.k);
    }
  }
  ScreeningResult result;
  result.case_id = fm.case_id;
  result.score = pool_values(m_n.values, cfg.pool);
  result.method = ScreenMethod::contrastive;
  if (cfg.with_map) {
    result.abnormality = AbnormalityMap{m_n.h, m_n.w, std::move(m_n.values)};
  }
  return result;
}

}  // namespace eviscreen
