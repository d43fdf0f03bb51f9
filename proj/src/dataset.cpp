#include "eviscreen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "eviscreen/error.hpp"

namespace eviscreen {

namespace {

std::vector<std::string> read_manifest_paths(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open manifest " + manifest_path);

  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::filesystem::path p(line);
    if (p.is_relative()) p = base / p;
    paths.push_back(p.string());
  }
  return paths;
}

}  // namespace

std::vector<EvfmRecord> load_records(const std::string& manifest_path) {
  const auto paths = read_manifest_paths(manifest_path);
  std::vector<EvfmRecord> records;
  records.reserve(paths.size());
  int dim = -1;
  for (const auto& p : paths) {
    EvfmRecord rec = load_evfm(p);
    if (dim < 0) {
      dim = rec.features.d;
    } else if (rec.features.d != dim) {
      throw FormatError(p + ": feature dimension " + std::to_string(rec.features.d) +
                        " differs from earlier cases (" + std::to_string(dim) + ")");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<LabeledCase> load_dataset(const std::string& manifest_path) {
  auto records = load_records(manifest_path);
  std::vector<LabeledCase> cases;
  cases.reserve(records.size());
  for (auto& rec : records) {
    if (rec.label != 0 && rec.label != 1) {
      throw FormatError(rec.features.case_id + ": unlabeled case in labeled manifest " +
                        manifest_path);
    }
    cases.push_back({std::move(rec.features), static_cast<CaseLabel>(rec.label)});
  }
  return cases;
}

DatasetSplit split_dataset(std::span<const LabeledCase> cases, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split ratio must lie in (0,1), got " + std::to_string(ratio));
  }

  std::vector<std::size_t> by_label[2];
  for (std::size_t i = 0; i < cases.size(); ++i) {
    by_label[static_cast<int>(cases[i].label)].push_back(i);
  }
  if (by_label[0].size() < 2 || by_label[1].size() < 2) {
    throw InputError("split requires at least 2 cases per label, got " +
                     std::to_string(by_label[0].size()) + " normal / " +
                     std::to_string(by_label[1].size()) + " pathological");
  }

  // Per-class seeded shuffle picks bank members; both subsets then keep
  // the original input order.
  std::vector<bool> to_bank(cases.size(), false);
  std::mt19937_64 rng(seed);
  for (auto& idxs : by_label) {
    std::vector<std::size_t> order = idxs;
    std::shuffle(order.begin(), order.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(order.size())));
    for (std::size_t i = 0; i < take && i < order.size(); ++i) to_bank[order[i]] = true;
  }

  DatasetSplit split;
  split.split_seed = seed;
  split.split_ratio = ratio;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    (to_bank[i] ? split.bank_subset : split.reasoning_subset).push_back(cases[i]);
  }
  return split;
}

void write_manifest(const std::string& path, std::span<const std::string> entries) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (const auto& e : entries) os << e << '\n';
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace eviscreen
