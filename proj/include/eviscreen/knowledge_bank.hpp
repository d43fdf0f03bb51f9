#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eviscreen/feature_map.hpp"

namespace eviscreen {

/// Flat pool of d-dimensional patch vectors collected from one label class.
struct FeatureSet {
  int d = 0;
  CaseLabel source_label = CaseLabel::normal;
  std::vector<float> vectors;  // count * d, contiguous

  std::size_t count() const { return d > 0 ? vectors.size() / static_cast<std::size_t>(d) : 0; }
  std::span<const float> vec(std::size_t i) const {
    return {vectors.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
  void append(std::span<const float> v);
};

struct BankProvenance {
  CaseLabel source_label = CaseLabel::normal;
  double subsample_ratio = 1.0;
  std::uint64_t seed = 0;
  bool normalized = false;
  std::uint64_t source_count = 0;
};

/// k nearest neighbors of one query: vectors plus their Euclidean
/// distances, sorted ascending (ties broken by lower bank index).
struct Evidence {
  int k = 0;
  int d = 0;
  std::vector<float> neighbors;        // k * d
  std::vector<double> distances;       // ascending
  std::vector<std::size_t> indices;    // bank indices of the neighbors

  std::span<const float> neighbor(int i) const {
    return {neighbors.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
  }
};

/// Immutable store of patch vectors answering exact k-NN queries by
/// linear scan with double-precision distances. Safe for concurrent
/// queries from multiple threads.
class KnowledgeBank {
public:
  KnowledgeBank(int d, std::vector<float> vectors, BankProvenance provenance);

  int dim() const { return d_; }
  std::size_t size() const { return d_ > 0 ? vectors_.size() / static_cast<std::size_t>(d_) : 0; }
  const BankProvenance& provenance() const { return provenance_; }
  std::span<const float> vec(std::size_t i) const {
    return {vectors_.data() + i * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_)};
  }
  std::span<const float> raw() const { return vectors_; }

  /// Exact k smallest Euclidean distances. If the bank is normalized the
  /// query is scaled to unit norm before the scan.
  Evidence knn_query(std::span<const float> query, int k) const;

  /// Arithmetic mean of the k nearest distances.
  double knn_avg_distance(std::span<const float> query, int k) const;

  /// First n vectors in stored (selection) order; provenance is kept with
  /// an adjusted source_count-independent size. Used by scaling studies.
  KnowledgeBank truncated(std::size_t n) const;

private:
  int d_ = 0;
  std::vector<float> vectors_;
  BankProvenance provenance_;
};

/// Union (with multiplicity) of every patch vector of aggregate_local(c, window)
/// over all cases. All cases must share the label and feature dimension.
FeatureSet collect_features(std::span<const LabeledCase> cases, int window);

/// Greedy farthest-point (k-center) selection of ceil(ratio*|s|) vectors,
/// starting from a seeded-random vector. With normalize=true vectors are
/// scaled to unit norm before selection and stored normalized. Output
/// order is the selection order, so a smaller ratio's bank is a prefix of
/// a larger one's under the same seed.
KnowledgeBank coreset_subsample(const FeatureSet& s, double ratio, std::uint64_t seed,
                                bool normalize);

/// Outlier filtering before bank construction: scores each vector by its
/// mean distance to its k_inner nearest other vectors and drops the top
/// floor(q*|s|) scorers. Survivors keep their original order.
FeatureSet denoise_features(const FeatureSet& s, double q, int k_inner);

void save_bank(const KnowledgeBank& bank, const std::string& path);
KnowledgeBank load_bank(const std::string& path);

}  // namespace eviscreen
