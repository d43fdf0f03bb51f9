#include "eviscreen/reasoning.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "binio.hpp"
#include "eviscreen/error.hpp"

namespace eviscreen {

namespace {

constexpr char kEvrpMagic[4] = {'E', 'V', 'R', 'P'};
constexpr std::uint32_t kEvrpVersion = 1;

std::string layer_prefix(const char* branch, int layer) {
  return std::string(branch) + ".layer" + std::to_string(layer);
}

}  // namespace

std::pair<EvidenceSet, EvidenceSet> retrieve_evidence(const FeatureMap& fm,
                                                      const KnowledgeBank& bank_normal,
                                                      const KnowledgeBank& bank_pathological,
                                                      int k) {
  const auto make = [&](const KnowledgeBank& bank) {
    EvidenceSet ev;
    ev.h = fm.h;
    ev.w = fm.w;
    ev.k = k;
    ev.d = fm.d;
    ev.vectors.resize(fm.patch_count() * static_cast<std::size_t>(k) * fm.d);
    ev.distances.resize(fm.patch_count() * static_cast<std::size_t>(k));
    std::size_t patch = 0;
    for (int i = 0; i < fm.h; ++i) {
      for (int j = 0; j < fm.w; ++j, ++patch) {
        const Evidence e = bank.knn_query(fm.patch(i, j), k);
        for (int a = 0; a < k; ++a) {
          const auto v = e.neighbor(a);
          std::copy(v.begin(), v.end(), ev.slot(patch, a).begin());
          ev.distances[patch * static_cast<std::size_t>(k) + a] = e.distances[a];
        }
      }
    }
    return ev;
  };
  return {make(bank_normal), make(bank_pathological)};
}

EvidenceSet replicate_query_evidence(const FeatureMap& fm, int k) {
  if (k <= 0) throw QueryError("k must be positive");
  EvidenceSet ev;
  ev.h = fm.h;
  ev.w = fm.w;
  ev.k = k;
  ev.d = fm.d;
  ev.vectors.resize(fm.patch_count() * static_cast<std::size_t>(k) * fm.d);
  ev.distances.assign(fm.patch_count() * static_cast<std::size_t>(k), 0.0);
  for (std::size_t patch = 0; patch < fm.patch_count(); ++patch) {
    const float* src = fm.data.data() + patch * fm.d;
    for (int a = 0; a < k; ++a) {
      std::copy(src, src + fm.d, ev.slot(patch, a).begin());
    }
  }
  return ev;
}

void ReasoningConfig::validate() const {
  if (depth < 1) throw ConfigError("reasoning depth must be at least 1");
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide d_model (" +
                      std::to_string(d_model) + ")");
  }
  if (d_model % 4 != 0) {
    throw ConfigError("d_model must be divisible by 4 for the 2D positional table");
  }
  if (k <= 0) throw ConfigError("retrieval k must be positive");
  if (mlp_hidden <= 0) throw ConfigError("mlp_hidden must be positive");
  if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
}

NamedTensor& ReasoningParams::at(const std::string& name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw InputError("unknown parameter tensor \"" + name + "\"");
}

const NamedTensor& ReasoningParams::at(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw InputError("unknown parameter tensor \"" + name + "\"");
}

void ReasoningParams::zero_grad() {
  for (auto& t : tensors_) {
    std::fill(t.grad.data.begin(), t.grad.data.end(), 0.0);
  }
}

ReasoningParams ReasoningParams::init(const ReasoningConfig& cfg) {
  if (cfg.feature_dim <= 0) throw ConfigError("feature_dim must be set before initialization");
  if (cfg.d_model <= 0 || cfg.heads <= 0 || cfg.d_model % cfg.heads != 0 ||
      cfg.d_model % 4 != 0 || cfg.k <= 0 || cfg.mlp_hidden <= 0 || cfg.depth < 0) {
    throw ConfigError("invalid reasoning configuration");
  }

  ReasoningParams params;
  params.cfg_ = cfg;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  const auto dm = static_cast<std::size_t>(cfg.d_model);
  const auto hidden = static_cast<std::size_t>(cfg.mlp_hidden);

  const auto matrix = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    ad::Tensor t = ad::Tensor::zeros({rows, cols});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(rows + cols));
    for (double& v : t.data) v = unit(rng) * std_dev;
    params.tensors_.push_back({name, std::move(t), ad::Tensor::zeros({rows, cols}), true});
  };
  const auto row = [&](const std::string& name, std::size_t cols, double fill) {
    ad::Tensor t = ad::Tensor::zeros({1, cols});
    std::fill(t.data.begin(), t.data.end(), fill);
    params.tensors_.push_back({name, std::move(t), ad::Tensor::zeros({1, cols}), false});
  };
  const auto token = [&](const std::string& name, std::size_t cols) {
    ad::Tensor t = ad::Tensor::zeros({1, cols});
    for (double& v : t.data) v = unit(rng) * 0.02;
    params.tensors_.push_back({name, std::move(t), ad::Tensor::zeros({1, cols}), false});
  };

  for (const char* branch : {"n", "p"}) {
    const std::string b(branch);
    matrix(b + ".embed.w", d, dm);
    row(b + ".embed.b", dm, 0.0);
    token(b + ".cls");
    for (int l = 0; l < cfg.depth; ++l) {
      const std::string pre = layer_prefix(branch, l);
      row(pre + ".cross.norm.gain", dm, 1.0);
      row(pre + ".cross.norm.bias", dm, 0.0);
      matrix(pre + ".cross.wk", d, dm);
      matrix(pre + ".cross.wv", d, dm);
      matrix(pre + ".cross.wo", dm, dm);
      row(pre + ".self.norm.gain", dm, 1.0);
      row(pre + ".self.norm.bias", dm, 0.0);
      matrix(pre + ".self.wq", dm, dm);
      matrix(pre + ".self.wk", dm, dm);
      matrix(pre + ".self.wv", dm, dm);
      matrix(pre + ".self.wo", dm, dm);
      row(pre + ".ffn.norm.gain", dm, 1.0);
      row(pre + ".ffn.norm.bias", dm, 0.0);
      matrix(pre + ".ffn.w1", dm, hidden);
      row(pre + ".ffn.b1", hidden, 0.0);
      matrix(pre + ".ffn.w2", hidden, dm);
      row(pre + ".ffn.b2", dm, 0.0);
    }
  }
  matrix("head.w1", 2 * dm, hidden);
  row("head.b1", hidden, 0.0);
  matrix("head.w2", hidden, 1);
  row("head.b2", 1, 0.0);
  return params;
}

ad::Tensor sincos_positional(int h, int w, int d_model) {
  if (d_model % 4 != 0) {
    throw ConfigError("positional table needs d_model divisible by 4, got " +
                      std::to_string(d_model));
  }
  const auto dm = static_cast<std::size_t>(d_model);
  const std::size_t half = dm / 2;
  const std::size_t pairs = half / 2;

  std::vector<double> freq(pairs);
  for (std::size_t t = 0; t < pairs; ++t) {
    freq[t] = std::pow(10000.0, -2.0 * static_cast<double>(t) / static_cast<double>(half));
  }

  ad::Tensor table = ad::Tensor::zeros({static_cast<std::size_t>(h) * w, dm});
  std::size_t patch = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j, ++patch) {
      double* out = table.data.data() + patch * dm;
      for (std::size_t t = 0; t < pairs; ++t) {
        out[2 * t] = std::sin(i * freq[t]);
        out[2 * t + 1] = std::cos(i * freq[t]);
        out[half + 2 * t] = std::sin(j * freq[t]);
        out[half + 2 * t + 1] = std::cos(j * freq[t]);
      }
    }
  }
  return table;
}

namespace {

struct BranchVars {
  ad::Tape::Var cls_out;  // [1, d_model]
};

// Shared forward graph builder; `leaves` maps registry order to tape vars
// so the same tape can process a whole batch against one set of leaves.
struct GraphBuilder {
  ad::Tape& tape;
  const ReasoningParams& params;
  std::vector<ad::Tape::Var> leaves;

  GraphBuilder(ad::Tape& t, ReasoningParams& p, bool with_grads) : tape(t), params(p) {
    for (auto& nt : p.tensors()) {
      leaves.push_back(tape.leaf(&nt.value, with_grads ? &nt.grad : nullptr));
    }
  }

  GraphBuilder(ad::Tape& t, const ReasoningParams& p) : tape(t), params(p) {
    for (const auto& nt : p.tensors()) {
      leaves.push_back(tape.leaf(&nt.value, nullptr));
    }
  }

  ad::Tape::Var var(const std::string& name) const {
    const auto& tensors = params.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (tensors[i].name == name) return leaves[i];
    }
    throw InputError("unknown parameter tensor \"" + name + "\"");
  }

  static ad::Tensor to_tensor(std::span<const float> src, std::size_t rows, std::size_t cols) {
    ad::Tensor t = ad::Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < src.size(); ++i) t.data[i] = static_cast<double>(src[i]);
    return t;
  }

  BranchVars branch(const char* name, const FeatureMap& fm, const EvidenceSet& ev,
                    ad::Tape::Var pos) {
    const auto& cfg = params.config();
    const std::string b(name);
    const std::size_t n_patches = fm.patch_count();

    if (ev.h != fm.h || ev.w != fm.w || ev.d != fm.d) {
      throw InputError("evidence shape does not match the feature map");
    }

    const auto z = tape.constant(
        to_tensor(fm.data, n_patches, static_cast<std::size_t>(fm.d)));
    const auto e_flat = tape.constant(to_tensor(
        ev.vectors, n_patches * static_cast<std::size_t>(ev.k), static_cast<std::size_t>(ev.d)));

    auto x = tape.add_rowvec(tape.matmul(z, var(b + ".embed.w")), var(b + ".embed.b"));
    x = tape.add(x, pos);
    auto seq = tape.concat_rows(var(b + ".cls"), x);

    for (int l = 0; l < cfg.depth; ++l) {
      const std::string pre = layer_prefix(name, l);
      // Evidence cross-attention over patch tokens; the class token has no
      // per-patch evidence and skips this stage.
      auto patches = tape.slice_rows(seq, 1, n_patches + 1);
      auto qn = tape.layer_norm(patches, var(pre + ".cross.norm.gain"),
                                var(pre + ".cross.norm.bias"));
      auto keys = tape.matmul(e_flat, var(pre + ".cross.wk"));
      auto vals = tape.matmul(e_flat, var(pre + ".cross.wv"));
      auto att = tape.evidence_attend(qn, keys, vals, cfg.heads, cfg.k);
      att = tape.matmul(att, var(pre + ".cross.wo"));
      patches = tape.add(patches, att);
      seq = tape.concat_rows(tape.slice_rows(seq, 0, 1), patches);

      // Inter-patch self-attention over the full sequence.
      auto xn = tape.layer_norm(seq, var(pre + ".self.norm.gain"), var(pre + ".self.norm.bias"));
      auto sa = tape.self_attend(tape.matmul(xn, var(pre + ".self.wq")),
                                 tape.matmul(xn, var(pre + ".self.wk")),
                                 tape.matmul(xn, var(pre + ".self.wv")), cfg.heads);
      seq = tape.add(seq, tape.matmul(sa, var(pre + ".self.wo")));

      auto fn = tape.layer_norm(seq, var(pre + ".ffn.norm.gain"), var(pre + ".ffn.norm.bias"));
      auto f = tape.gelu(tape.add_rowvec(tape.matmul(fn, var(pre + ".ffn.w1")),
                                         var(pre + ".ffn.b1")));
      f = tape.add_rowvec(tape.matmul(f, var(pre + ".ffn.w2")), var(pre + ".ffn.b2"));
      seq = tape.add(seq, f);
    }

    return {tape.slice_rows(seq, 0, 1)};
  }

  ad::Tape::Var logit(const FeatureMap& fm, const EvidenceSet& ev_n, const EvidenceSet& ev_p) {
    const auto& cfg = params.config();
    if (fm.d != cfg.feature_dim) {
      throw InputError("feature dimension " + std::to_string(fm.d) +
                       " does not match model feature_dim " + std::to_string(cfg.feature_dim));
    }
    if (ev_n.k != cfg.k || ev_p.k != cfg.k) {
      throw InputError("evidence k does not match model k");
    }
    const auto pos = tape.constant(sincos_positional(fm.h, fm.w, cfg.d_model));
    const auto cls_n = branch("n", fm, ev_n, pos);
    const auto cls_p = branch("p", fm, ev_p, pos);
    auto joint = tape.concat_cols(cls_n.cls_out, cls_p.cls_out);
    auto hdn = tape.gelu(tape.add_rowvec(tape.matmul(joint, var("head.w1")), var("head.b1")));
    return tape.add_rowvec(tape.matmul(hdn, var("head.w2")), var("head.b2"));
  }
};

}  // namespace

double reasoning_forward(const FeatureMap& fm, const EvidenceSet& ev_n, const EvidenceSet& ev_p,
                         const ReasoningParams& params) {
  ad::Tape tape;
  GraphBuilder builder(tape, params);
  const auto out = builder.logit(fm, ev_n, ev_p);
  const double logit = tape.value(out).data[0];
  if (!std::isfinite(logit)) {
    throw NumericError("non-finite logit for case " + fm.case_id);
  }
  return logit;
}

double loss_and_grad(std::span<const ReasoningExample> batch, ReasoningParams& params) {
  if (batch.empty()) throw InputError("loss_and_grad: empty batch");
  params.zero_grad();

  ad::Tape tape;
  GraphBuilder builder(tape, params, /*with_grads=*/true);
  std::vector<ad::Tape::Var> losses;
  losses.reserve(batch.size());
  for (const auto& ex : batch) {
    const auto lg = builder.logit(ex.features, ex.ev_n, ex.ev_p);
    losses.push_back(tape.bce_with_logit(lg, static_cast<double>(ex.label)));
  }
  const auto loss = tape.mean_scalars(losses);
  tape.backward(loss);

  const double value = tape.value(loss).data[0];
  if (!std::isfinite(value)) throw NumericError("non-finite training loss");
  return value;
}

ScreeningResult reasoning_predict(const FeatureMap& fm, const KnowledgeBank& bank_normal,
                                  const KnowledgeBank& bank_pathological,
                                  const ReasoningParams& params, bool with_map) {
  const int k = params.config().k;
  auto [ev_n, ev_p] = retrieve_evidence(fm, bank_normal, bank_pathological, k);
  const double logit = reasoning_forward(fm, ev_n, ev_p, params);

  ScreeningResult result;
  result.case_id = fm.case_id;
  result.score = ad::logistic(logit);
  result.method = ScreenMethod::reasoning;
  if (with_map) {
    auto [m_n, m_p] = distance_maps(fm, bank_normal, bank_pathological, k);
    result.abnormality = abnormality_map(m_n, m_p);
  }
  return result;
}

void save_params(const ReasoningParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");

  const auto& cfg = params.config();
  detail::write_magic(os, kEvrpMagic);
  detail::write_u32(os, kEvrpVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.depth));
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.d_model));
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.heads));
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.k));
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.mlp_hidden));
  detail::write_u32(os, static_cast<std::uint32_t>(cfg.feature_dim));
  detail::write_u64(os, cfg.seed);
  detail::write_u32(os, static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& t : params.tensors()) {
    detail::write_u16(os, static_cast<std::uint16_t>(t.name.size()));
    detail::write_bytes(os, t.name.data(), t.name.size());
    detail::write_u32(os, static_cast<std::uint32_t>(t.value.shape.size()));
    for (std::size_t dim : t.value.shape) detail::write_u64(os, dim);
    detail::write_f64_array(os, t.value.data.data(), t.value.data.size());
  }
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

ReasoningParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);

  detail::expect_magic(is, kEvrpMagic, path);
  const std::uint32_t version = detail::read_u32(is, path);
  if (version != kEvrpVersion) {
    throw FormatError(path + ": unsupported EVRP version " + std::to_string(version));
  }
  ReasoningConfig cfg;
  cfg.depth = static_cast<int>(detail::read_u32(is, path));
  cfg.d_model = static_cast<int>(detail::read_u32(is, path));
  cfg.heads = static_cast<int>(detail::read_u32(is, path));
  cfg.k = static_cast<int>(detail::read_u32(is, path));
  cfg.mlp_hidden = static_cast<int>(detail::read_u32(is, path));
  cfg.feature_dim = static_cast<int>(detail::read_u32(is, path));
  cfg.seed = detail::read_u64(is, path);

  ReasoningParams params = ReasoningParams::init(cfg);
  const std::uint32_t n_tensors = detail::read_u32(is, path);
  if (n_tensors != params.tensors().size()) {
    throw FormatError(path + ": checkpoint holds " + std::to_string(n_tensors) +
                      " tensors, config implies " + std::to_string(params.tensors().size()));
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint16_t name_len = detail::read_u16(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (static_cast<std::uint16_t>(is.gcount()) != name_len) {
      throw FormatError(path + ": truncated tensor name");
    }
    NamedTensor& target = params.at(name);
    const std::uint32_t rank = detail::read_u32(is, path);
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = detail::read_u64(is, path);
    if (shape != target.value.shape) {
      throw FormatError(path + ": tensor \"" + name + "\" has unexpected shape");
    }
    detail::read_f64_array(is, target.value.data.data(), target.value.data.size(), path);
  }
  detail::require_eof(is, path);
  return params;
}

}  // namespace eviscreen
