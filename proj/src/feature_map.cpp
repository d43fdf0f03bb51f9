#include "eviscreen/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binio.hpp"
#include "eviscreen/error.hpp"

namespace eviscreen {

namespace {
constexpr char kEvfmMagic[4] = {'E', 'V', 'F', 'M'};
constexpr std::uint32_t kEvfmVersion = 1;
}  // namespace

void FeatureMap::validate(const std::string& name) const {
  if (h <= 0 || w <= 0 || d <= 0) {
    throw FormatError(name + ": non-positive dimensions h=" + std::to_string(h) +
                      " w=" + std::to_string(w) + " d=" + std::to_string(d));
  }
  const std::size_t expected = static_cast<std::size_t>(h) * w * d;
  if (data.size() != expected) {
    throw FormatError(name + ": dimension mismatch, header declares " + std::to_string(expected) +
                      " scalars but payload has " + std::to_string(data.size()));
  }
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw FormatError(name + ": non-finite value in feature payload");
    }
  }
}

FeatureMap aggregate_local(const FeatureMap& fm, int window) {
  if (window <= 0 || window % 2 == 0) {
    throw ConfigError("aggregation window must be odd and positive, got " +
                      std::to_string(window));
  }
  if (window > std::min(fm.h, fm.w)) {
    throw ConfigError("aggregation window " + std::to_string(window) + " exceeds grid " +
                      std::to_string(fm.h) + "x" + std::to_string(fm.w));
  }

  FeatureMap out;
  out.case_id = fm.case_id;
  out.h = fm.h;
  out.w = fm.w;
  out.d = fm.d;
  out.data.resize(fm.data.size());

  const int r = window / 2;
  std::vector<double> acc(static_cast<std::size_t>(fm.d));
  for (int i = 0; i < fm.h; ++i) {
    const int i0 = std::max(0, i - r);
    const int i1 = std::min(fm.h - 1, i + r);
    for (int j = 0; j < fm.w; ++j) {
      const int j0 = std::max(0, j - r);
      const int j1 = std::min(fm.w - 1, j + r);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int ii = i0; ii <= i1; ++ii) {
        for (int jj = j0; jj <= j1; ++jj) {
          const auto src = fm.patch(ii, jj);
          for (int c = 0; c < fm.d; ++c) acc[c] += src[c];
        }
      }
      const double count = static_cast<double>(i1 - i0 + 1) * (j1 - j0 + 1);
      auto dst = out.patch(i, j);
      for (int c = 0; c < fm.d; ++c) dst[c] = static_cast<float>(acc[c] / count);
    }
  }
  return out;
}

EvfmRecord load_evfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file " + path);

  detail::expect_magic(is, kEvfmMagic, path);
  const std::uint32_t version = detail::read_u32(is, path);
  if (version != kEvfmVersion) {
    throw FormatError(path + ": unsupported EVFM version " + std::to_string(version));
  }

  EvfmRecord rec;
  rec.features.h = static_cast<int>(detail::read_u32(is, path));
  rec.features.w = static_cast<int>(detail::read_u32(is, path));
  rec.features.d = static_cast<int>(detail::read_u32(is, path));
  rec.label = detail::read_u8(is, path);
  if (rec.label != 0 && rec.label != 1 && rec.label != kUnlabeled) {
    throw FormatError(path + ": invalid label byte " + std::to_string(rec.label));
  }
  const std::uint16_t id_len = detail::read_u16(is, path);
  rec.features.case_id.resize(id_len);
  if (id_len > 0) {
    is.read(rec.features.case_id.data(), id_len);
    if (static_cast<std::uint16_t>(is.gcount()) != id_len) {
      throw FormatError(path + ": truncated case id");
    }
  }

  if (rec.features.h <= 0 || rec.features.w <= 0 || rec.features.d <= 0) {
    throw FormatError(path + ": non-positive dimensions in header");
  }
  const std::size_t n = static_cast<std::size_t>(rec.features.h) * rec.features.w * rec.features.d;
  rec.features.data.resize(n);
  detail::read_f32_array(is, rec.features.data.data(), n, path);
  detail::require_eof(is, path);
  rec.features.validate(path);
  return rec;
}

void save_evfm(const FeatureMap& fm, std::uint8_t label, const std::string& path) {
  fm.validate(fm.case_id.empty() ? path : fm.case_id);
  if (fm.case_id.size() > 0xFFFF) {
    throw InputError("case id longer than 65535 bytes: " + fm.case_id.substr(0, 32) + "...");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");

  detail::write_magic(os, kEvfmMagic);
  detail::write_u32(os, kEvfmVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(fm.h));
  detail::write_u32(os, static_cast<std::uint32_t>(fm.w));
  detail::write_u32(os, static_cast<std::uint32_t>(fm.d));
  detail::write_u8(os, label);
  detail::write_u16(os, static_cast<std::uint16_t>(fm.case_id.size()));
  detail::write_bytes(os, fm.case_id.data(), fm.case_id.size());
  detail::write_f32_array(os, fm.data.data(), fm.data.size());
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace eviscreen
