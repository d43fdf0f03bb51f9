#include "eviscreen/knowledge_bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "binio.hpp"
#include "eviscreen/error.hpp"

namespace eviscreen {

namespace {

constexpr char kEvkbMagic[4] = {'E', 'V', 'K', 'B'};
constexpr std::uint32_t kEvkbVersion = 1;

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}

std::vector<float> normalize_all(const FeatureSet& s) {
  std::vector<float> out(s.vectors.size());
  for (std::size_t i = 0; i < s.count(); ++i) {
    const auto v = s.vec(i);
    double norm2 = 0.0;
    for (float x : v) norm2 += static_cast<double>(x) * x;
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) {
      throw InputError("cannot normalize zero vector at index " + std::to_string(i));
    }
    for (int c = 0; c < s.d; ++c) {
      out[i * static_cast<std::size_t>(s.d) + c] = static_cast<float>(v[c] / norm);
    }
  }
  return out;
}

}  // namespace

void FeatureSet::append(std::span<const float> v) {
  vectors.insert(vectors.end(), v.begin(), v.end());
}

KnowledgeBank::KnowledgeBank(int d, std::vector<float> vectors, BankProvenance provenance)
    : d_(d), vectors_(std::move(vectors)), provenance_(provenance) {
  if (d_ <= 0) throw InputError("bank dimension must be positive");
  if (vectors_.empty() || vectors_.size() % static_cast<std::size_t>(d_) != 0) {
    throw InputError("bank payload size " + std::to_string(vectors_.size()) +
                     " is not a positive multiple of d=" + std::to_string(d_));
  }
  for (float v : vectors_) {
    if (!std::isfinite(v)) throw InputError("non-finite value in bank vectors");
  }
}

Evidence KnowledgeBank::knn_query(std::span<const float> query, int k) const {
  const std::size_t n = size();
  if (k <= 0) throw QueryError("k must be positive, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > n) {
    throw QueryError("k=" + std::to_string(k) + " exceeds bank size " + std::to_string(n));
  }
  if (query.size() != static_cast<std::size_t>(d_)) {
    throw QueryError("query dimension " + std::to_string(query.size()) +
                     " does not match bank dimension " + std::to_string(d_));
  }

  std::vector<float> scaled;
  std::span<const float> q = query;
  if (provenance_.normalized) {
    double norm2 = 0.0;
    for (float x : query) norm2 += static_cast<double>(x) * x;
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) throw QueryError("cannot normalize zero query against normalized bank");
    scaled.resize(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) {
      scaled[i] = static_cast<float>(query[i] / norm);
    }
    q = scaled;
  }

  std::vector<std::pair<double, std::size_t>> heap(n);
  for (std::size_t i = 0; i < n; ++i) heap[i] = {squared_distance(q, vec(i)), i};
  std::partial_sort(heap.begin(), heap.begin() + k, heap.end());

  Evidence ev;
  ev.k = k;
  ev.d = d_;
  ev.neighbors.reserve(static_cast<std::size_t>(k) * d_);
  ev.distances.reserve(k);
  ev.indices.reserve(k);
  for (int i = 0; i < k; ++i) {
    const auto [d2, idx] = heap[static_cast<std::size_t>(i)];
    const auto v = vec(idx);
    ev.neighbors.insert(ev.neighbors.end(), v.begin(), v.end());
    ev.distances.push_back(std::sqrt(d2));
    ev.indices.push_back(idx);
  }
  return ev;
}

double KnowledgeBank::knn_avg_distance(std::span<const float> query, int k) const {
  const Evidence ev = knn_query(query, k);
  double acc = 0.0;
  for (double d : ev.distances) acc += d;
  return acc / static_cast<double>(k);
}

KnowledgeBank KnowledgeBank::truncated(std::size_t n) const {
  if (n == 0 || n > size()) {
    throw ConfigError("truncation size " + std::to_string(n) + " out of range for bank of " +
                      std::to_string(size()));
  }
  std::vector<float> head(vectors_.begin(),
                          vectors_.begin() + static_cast<std::ptrdiff_t>(n * d_));
  return KnowledgeBank(d_, std::move(head), provenance_);
}

FeatureSet collect_features(std::span<const LabeledCase> cases, int window) {
  if (cases.empty()) throw InputError("cannot collect features from an empty case list");

  FeatureSet set;
  set.d = cases.front().features.d;
  set.source_label = cases.front().label;
  std::size_t total = 0;
  for (const auto& c : cases) total += c.features.patch_count();
  set.vectors.reserve(total * static_cast<std::size_t>(set.d));

  for (const auto& c : cases) {
    if (c.label != set.source_label) {
      throw InputError("mixed labels in feature collection (case " + c.features.case_id + ")");
    }
    if (c.features.d != set.d) {
      throw InputError("mixed feature dimensions in collection (case " + c.features.case_id +
                       " has d=" + std::to_string(c.features.d) + ")");
    }
    const FeatureMap agg = aggregate_local(c.features, window);
    set.vectors.insert(set.vectors.end(), agg.data.begin(), agg.data.end());
  }
  return set;
}

KnowledgeBank coreset_subsample(const FeatureSet& s, double ratio, std::uint64_t seed,
                                bool normalize) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ConfigError("subsample ratio must lie in (0,1], got " + std::to_string(ratio));
  }
  const std::size_t n = s.count();
  if (n == 0) throw InputError("cannot subsample an empty feature set");

  std::vector<float> pool = normalize ? normalize_all(s) : s.vectors;
  const auto vec_at = [&](std::size_t i) {
    return std::span<const float>(pool.data() + i * static_cast<std::size_t>(s.d),
                                  static_cast<std::size_t>(s.d));
  };

  const auto target = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));

  std::mt19937_64 rng(seed);
  std::size_t current = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);

  std::vector<std::size_t> selected;
  selected.reserve(target);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);

  for (std::size_t step = 0; step < target; ++step) {
    selected.push_back(current);
    taken[current] = true;
    if (step + 1 == target) break;

    const auto anchor = vec_at(current);
    std::size_t best = n;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d2 = squared_distance(vec_at(i), anchor);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      // Farthest-first; ties fall to the lower index via strict >.
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    current = best;
  }

  std::vector<float> bank_vectors;
  bank_vectors.reserve(selected.size() * static_cast<std::size_t>(s.d));
  for (std::size_t idx : selected) {
    const auto v = vec_at(idx);
    bank_vectors.insert(bank_vectors.end(), v.begin(), v.end());
  }

  BankProvenance prov;
  prov.source_label = s.source_label;
  prov.subsample_ratio = ratio;
  prov.seed = seed;
  prov.normalized = normalize;
  prov.source_count = n;
  return KnowledgeBank(s.d, std::move(bank_vectors), prov);
}

FeatureSet denoise_features(const FeatureSet& s, double q, int k_inner) {
  if (q < 0.0 || q >= 1.0) {
    throw ConfigError("denoise fraction must lie in [0,1), got " + std::to_string(q));
  }
  if (k_inner <= 0) throw ConfigError("denoise k must be positive");
  const std::size_t n = s.count();
  if (n <= static_cast<std::size_t>(k_inner) + 1) {
    throw InputError("denoise needs more than k+1 vectors, got " + std::to_string(n));
  }

  const auto drop = static_cast<std::size_t>(std::floor(q * static_cast<double>(n)));
  if (drop == 0) return s;

  // Outlier score: mean distance to the k_inner nearest *other* vectors.
  std::vector<double> score(n);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d2[j] = squared_distance(s.vec(i), s.vec(j));
    d2[i] = std::numeric_limits<double>::infinity();
    std::nth_element(d2.begin(), d2.begin() + (k_inner - 1), d2.end());
    double acc = 0.0;
    for (int j = 0; j < k_inner; ++j) acc += std::sqrt(d2[static_cast<std::size_t>(j)]);
    score[i] = acc / static_cast<double>(k_inner);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });

  std::vector<bool> dropped(n, false);
  for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;

  FeatureSet out;
  out.d = s.d;
  out.source_label = s.source_label;
  out.vectors.reserve((n - drop) * static_cast<std::size_t>(s.d));
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) out.append(s.vec(i));
  }
  return out;
}

void save_bank(const KnowledgeBank& bank, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");

  const auto& prov = bank.provenance();
  detail::write_magic(os, kEvkbMagic);
  detail::write_u32(os, kEvkbVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(bank.dim()));
  detail::write_u64(os, bank.size());
  detail::write_u8(os, prov.normalized ? 1 : 0);
  detail::write_u8(os, static_cast<std::uint8_t>(prov.source_label));
  detail::write_f64(os, prov.subsample_ratio);
  detail::write_u64(os, prov.seed);
  detail::write_u64(os, prov.source_count);
  detail::write_f32_array(os, bank.raw().data(), bank.raw().size());
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

KnowledgeBank load_bank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open bank file " + path);

  detail::expect_magic(is, kEvkbMagic, path);
  const std::uint32_t version = detail::read_u32(is, path);
  if (version != kEvkbVersion) {
    throw FormatError(path + ": unsupported EVKB version " + std::to_string(version));
  }
  const auto d = static_cast<int>(detail::read_u32(is, path));
  const std::uint64_t n = detail::read_u64(is, path);
  BankProvenance prov;
  prov.normalized = detail::read_u8(is, path) != 0;
  const std::uint8_t label = detail::read_u8(is, path);
  if (label > 1) throw FormatError(path + ": invalid source label " + std::to_string(label));
  prov.source_label = static_cast<CaseLabel>(label);
  prov.subsample_ratio = detail::read_f64(is, path);
  prov.seed = detail::read_u64(is, path);
  prov.source_count = detail::read_u64(is, path);

  if (d <= 0 || n == 0) throw FormatError(path + ": empty or invalid bank header");
  std::vector<float> vectors(static_cast<std::size_t>(n) * d);
  detail::read_f32_array(is, vectors.data(), vectors.size(), path);
  detail::require_eof(is, path);
  return KnowledgeBank(d, std::move(vectors), prov);
}

}  // namespace eviscreen
