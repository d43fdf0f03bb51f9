#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eviscreen {

enum class CaseLabel : std::uint8_t {
  normal = 0,
  pathological = 1,
};

/// Label byte reserved in the EVFM format for cases without a label
/// (screening inputs); never a valid CaseLabel.
inline constexpr std::uint8_t kUnlabeled = 255;

/// One case's regional features: an h×w grid of d-dimensional vectors,
/// stored row-major with each patch vector contiguous.
struct FeatureMap {
  std::string case_id;
  int h = 0;
  int w = 0;
  int d = 0;
  std::vector<float> data;

  std::size_t patch_count() const { return static_cast<std::size_t>(h) * w; }

  std::span<const float> patch(int i, int j) const {
    return {data.data() + (static_cast<std::size_t>(i) * w + j) * d, static_cast<std::size_t>(d)};
  }
  std::span<float> patch(int i, int j) {
    return {data.data() + (static_cast<std::size_t>(i) * w + j) * d, static_cast<std::size_t>(d)};
  }

  /// Throws FormatError unless dims are positive, data has h*w*d entries
  /// and every scalar is finite. `name` labels the offending source.
  void validate(const std::string& name) const;
};

struct LabeledCase {
  FeatureMap features;
  CaseLabel label = CaseLabel::normal;
};

/// Mean over the p×p neighborhood of each patch, the window clipped at
/// grid borders (mean over the valid subset; no padding values invented).
/// `window` must be odd and at most min(h, w).
FeatureMap aggregate_local(const FeatureMap& fm, int window);

/// One record of the EVFM feature file; label may be kUnlabeled.
struct EvfmRecord {
  FeatureMap features;
  std::uint8_t label = kUnlabeled;
};

EvfmRecord load_evfm(const std::string& path);
void save_evfm(const FeatureMap& fm, std::uint8_t label, const std::string& path);

}  // namespace eviscreen
