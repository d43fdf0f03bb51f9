#include "eviscreen/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "eviscreen/error.hpp"

namespace eviscreen {

namespace {
constexpr double kAdamEps = 1e-8;
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (warmup_steps < 0 || total_steps <= 0 || warmup_steps > total_steps) {
    throw ConfigError("need 0 <= warmup_steps <= total_steps, got " +
                      std::to_string(warmup_steps) + " / " + std::to_string(total_steps));
  }
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("betas must lie in [0,1)");
  }
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
}

double lr_at_step(const TrainConfig& tc, int step) {
  if (step <= tc.warmup_steps) {
    if (tc.warmup_steps == 0) return tc.learning_rate;
    return tc.learning_rate * static_cast<double>(step) / static_cast<double>(tc.warmup_steps);
  }
  const double progress = static_cast<double>(step - tc.warmup_steps) /
                          static_cast<double>(tc.total_steps - tc.warmup_steps);
  return tc.learning_rate * 0.5 * (1.0 + std::cos(M_PI * std::min(progress, 1.0)));
}

std::vector<ReasoningExample> prepare_examples(std::span<const LabeledCase> cases,
                                               const KnowledgeBank& bank_normal,
                                               const KnowledgeBank& bank_pathological, int k,
                                               bool replicate_query) {
  std::vector<ReasoningExample> examples;
  examples.reserve(cases.size());
  for (const auto& c : cases) {
    ReasoningExample ex;
    ex.features = c.features;
    ex.label = static_cast<int>(c.label);
    if (replicate_query) {
      ex.ev_n = replicate_query_evidence(c.features, k);
      ex.ev_p = replicate_query_evidence(c.features, k);
    } else {
      auto [ev_n, ev_p] = retrieve_evidence(c.features, bank_normal, bank_pathological, k);
      ex.ev_n = std::move(ev_n);
      ex.ev_p = std::move(ev_p);
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

TrainResult train_reasoning(std::span<const ReasoningExample> examples,
                            const ReasoningConfig& rc, const TrainConfig& tc) {
  rc.validate();
  tc.validate();
  if (examples.empty()) throw TrainError("training set is empty");
  bool has_pos = false, has_neg = false;
  for (const auto& ex : examples) {
    (ex.label == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw TrainError("training set must contain both classes");

  TrainResult result;
  result.params = ReasoningParams::init(rc);
  auto& tensors = result.params.tensors();

  std::vector<ad::Tensor> m(tensors.size());
  std::vector<ad::Tensor> v(tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    m[i] = ad::Tensor::zeros(tensors[i].value.shape);
    v[i] = ad::Tensor::zeros(tensors[i].value.shape);
  }

  // Seeded epoch shuffles feed fixed-size batches; the order never depends
  // on timing, so identical seeds reproduce identical parameters.
  std::mt19937_64 rng(tc.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  const auto batch_size = std::min<std::size_t>(static_cast<std::size_t>(tc.batch_size),
                                                examples.size());
  std::vector<ReasoningExample> batch(batch_size);

  result.log.reserve(static_cast<std::size_t>(tc.total_steps));
  for (int step = 0; step < tc.total_steps; ++step) {
    for (std::size_t i = 0; i < batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch[i] = examples[order[cursor++]];
    }

    const double loss = loss_and_grad(batch, result.params);
    const double lr = lr_at_step(tc, step);

    const double bc1 = 1.0 - std::pow(tc.beta1, step + 1);
    const double bc2 = 1.0 - std::pow(tc.beta2, step + 1);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      auto& t = tensors[i];
      for (std::size_t j = 0; j < t.value.data.size(); ++j) {
        const double g = t.grad.data[j];
        m[i].data[j] = tc.beta1 * m[i].data[j] + (1.0 - tc.beta1) * g;
        v[i].data[j] = tc.beta2 * v[i].data[j] + (1.0 - tc.beta2) * g * g;
        const double update = (m[i].data[j] / bc1) / (std::sqrt(v[i].data[j] / bc2) + kAdamEps);
        double p = t.value.data[j];
        p -= lr * update;
        if (t.decay) p -= lr * tc.weight_decay * t.value.data[j];
        t.value.data[j] = p;
      }
    }

    result.log.push_back({step, lr, loss});
  }
  return result;
}

void write_train_log_csv(const std::string& path, std::span<const TrainLogRow> log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "step,lr,loss\n";
  char buf[80];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", row.step, row.lr, row.loss);
    os << buf;
  }
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace eviscreen
