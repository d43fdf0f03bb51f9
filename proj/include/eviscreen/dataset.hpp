#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eviscreen/feature_map.hpp"

namespace eviscreen {

/// Disjoint partition of a labeled dataset into a bank-construction subset
/// and a reasoning subset, stratified by label.
struct DatasetSplit {
  std::vector<LabeledCase> bank_subset;
  std::vector<LabeledCase> reasoning_subset;
  std::uint64_t split_seed = 0;
  double split_ratio = 0.5;
};

/// Loads every EVFM file listed in the manifest (one path per line,
/// relative paths resolved against the manifest's directory). All cases
/// must be labeled and share the feature dimension d.
std::vector<LabeledCase> load_dataset(const std::string& manifest_path);

/// Like load_dataset but accepts unlabeled records; used for screening
/// inputs. Returned labels are the raw EVFM bytes (0, 1 or kUnlabeled).
std::vector<EvfmRecord> load_records(const std::string& manifest_path);

/// Stratified split: within each label class a seeded shuffle assigns
/// ceil(ratio * n_class) cases to the bank subset. Subset order follows
/// the input order. Identical seed gives an identical split.
DatasetSplit split_dataset(std::span<const LabeledCase> cases, double ratio, std::uint64_t seed);

/// Writes one path per line. Paths are stored as given.
void write_manifest(const std::string& path, std::span<const std::string> entries);

}  // namespace eviscreen
