#include "eviscreen/autodiff.hpp"

#include <cmath>
#include <string>

#include "eviscreen/error.hpp"

namespace eviscreen::ad {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kLayerNormEps = 1e-5;

// C[m,n] += A[m,k] * B[k,n]
void mm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = b + t * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

// C[m,k] += A[m,n] * B[k,n]^T
void mm_acc_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double* bt = b + t * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bt[j];
      ci[t] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_acc_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      double* ct = c + t * n;
      for (std::size_t j = 0; j < n; ++j) ct[j] += av * bi[j];
    }
  }
}

void check_2d(const Tensor& t, const char* what) {
  if (t.shape.size() != 2) {
    throw InputError(std::string(what) + ": expected a rank-2 tensor");
  }
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor& Tape::grad_of(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v)];
  return n.ext_grad ? *n.ext_grad : n.grad;
}

const Tensor& Tape::gradient(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v)];
  return n.ext_grad ? *n.ext_grad : n.grad;
}

Tape::Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, Var)> back) {
  Node node;
  node.owned = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) {
    node.grad = Tensor::zeros(node.owned.shape);
    node.back = std::move(back);
  }
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::constant(Tensor value) { return push(std::move(value), false, {}); }

Tape::Var Tape::leaf(const Tensor* value, Tensor* grad) {
  Node node;
  node.external = value;
  node.ext_grad = grad;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_2d(ta, "matmul lhs");
  check_2d(tb, "matmul rhs");
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  if (tb.rows() != k) throw InputError("matmul inner dimensions differ");

  Tensor out = Tensor::zeros({m, n});
  mm_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);

  return push(std::move(out), tracked(a) || tracked(b), [a, b, m, k, n](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    if (t.tracked(a)) {
      mm_acc_bt(g.data.data(), t.value(b).data.data(), t.grad_of(a).data.data(), m, n, k);
    }
    if (t.tracked(b)) {
      mm_acc_at(t.value(a).data.data(), g.data.data(), t.grad_of(b).data.data(), m, k, n);
    }
  });
}

Tape::Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape != tb.shape) throw InputError("add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];

  return push(std::move(out), tracked(a) || tracked(b), [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    for (Var v : {a, b}) {
      if (!t.tracked(v)) continue;
      Tensor& gv = t.grad_of(v);
      for (std::size_t i = 0; i < g.data.size(); ++i) gv.data[i] += g.data[i];
    }
  });
}

Tape::Var Tape::add_rowvec(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_2d(ta, "add_rowvec lhs");
  if (tb.size() != ta.cols()) throw InputError("add_rowvec: width mismatch");
  const std::size_t m = ta.rows(), n = ta.cols();

  Tensor out = ta;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += tb.data[j];
  }

  return push(std::move(out), tracked(a) || tracked(b), [a, b, m, n](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    if (t.tracked(a)) {
      Tensor& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.tracked(b)) {
      Tensor& gb = t.grad_of(b);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gb.data[j] += g.data[i * n + j];
      }
    }
  });
}

Tape::Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  return push(std::move(out), tracked(a), [a, c](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
  });
}

Tape::Var Tape::gelu(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return push(std::move(out), tracked(a), [a](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double xv = x.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(xv * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv * xv);
      ga.data[i] += g.data[i] * (cdf + xv * pdf);
    }
  });
}

Tape::Var Tape::layer_norm(Var x, Var gain, Var bias) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  check_2d(tx, "layer_norm input");
  const std::size_t m = tx.rows(), n = tx.cols();
  if (tg.size() != n || tb.size() != n) throw InputError("layer_norm: gain/bias width mismatch");

  Tensor out = Tensor::zeros({m, n});
  std::vector<double> saved(m * n + m);  // xhat rows then inv_std per row
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = tx.data.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dlt = row[j] - mean;
      var += dlt * dlt;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    saved[m * n + i] = inv_std;
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (row[j] - mean) * inv_std;
      saved[i * n + j] = xhat;
      out.data[i * n + j] = tg.data[j] * xhat + tb.data[j];
    }
  }

  const Var v = push(std::move(out), tracked(x) || tracked(gain) || tracked(bias),
                     [x, gain, bias, m, n](Tape& t, Var self) {
                       const Tensor& g = t.grad_of(self);
                       const auto& saved = t.nodes_[static_cast<std::size_t>(self)].saved;
                       const Tensor& tg = t.value(gain);
                       if (t.tracked(gain)) {
                         Tensor& gg = t.grad_of(gain);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) {
                             gg.data[j] += g.data[i * n + j] * saved[i * n + j];
                           }
                         }
                       }
                       if (t.tracked(bias)) {
                         Tensor& gb = t.grad_of(bias);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) gb.data[j] += g.data[i * n + j];
                         }
                       }
                       if (t.tracked(x)) {
                         Tensor& gx = t.grad_of(x);
                         for (std::size_t i = 0; i < m; ++i) {
                           const double inv_std = saved[m * n + i];
                           double mean_dxhat = 0.0;
                           double mean_dxhat_xhat = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dxhat = g.data[i * n + j] * tg.data[j];
                             mean_dxhat += dxhat;
                             mean_dxhat_xhat += dxhat * saved[i * n + j];
                           }
                           mean_dxhat /= static_cast<double>(n);
                           mean_dxhat_xhat /= static_cast<double>(n);
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dxhat = g.data[i * n + j] * tg.data[j];
                             gx.data[i * n + j] +=
                                 inv_std * (dxhat - mean_dxhat - saved[i * n + j] * mean_dxhat_xhat);
                           }
                         }
                       }
                     });
  nodes_[static_cast<std::size_t>(v)].saved = std::move(saved);
  return v;
}

Tape::Var Tape::concat_rows(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_2d(ta, "concat_rows lhs");
  check_2d(tb, "concat_rows rhs");
  if (ta.cols() != tb.cols()) throw InputError("concat_rows: width mismatch");
  const std::size_t m1 = ta.rows(), m2 = tb.rows(), n = ta.cols();

  Tensor out = Tensor::zeros({m1 + m2, n});
  std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
  std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(m1 * n));

  return push(std::move(out), tracked(a) || tracked(b), [a, b, m1, m2, n](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    if (t.tracked(a)) {
      Tensor& ga = t.grad_of(a);
      for (std::size_t i = 0; i < m1 * n; ++i) ga.data[i] += g.data[i];
    }
    if (t.tracked(b)) {
      Tensor& gb = t.grad_of(b);
      for (std::size_t i = 0; i < m2 * n; ++i) gb.data[i] += g.data[m1 * n + i];
    }
  });
}

Tape::Var Tape::slice_rows(Var a, std::size_t r0, std::size_t r1) {
  const Tensor& ta = value(a);
  check_2d(ta, "slice_rows input");
  if (r0 >= r1 || r1 > ta.rows()) throw InputError("slice_rows: bad range");
  const std::size_t n = ta.cols();

  Tensor out = Tensor::zeros({r1 - r0, n});
  std::copy(ta.data.begin() + static_cast<std::ptrdiff_t>(r0 * n),
            ta.data.begin() + static_cast<std::ptrdiff_t>(r1 * n), out.data.begin());

  return push(std::move(out), tracked(a), [a, r0, r1, n](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < (r1 - r0) * n; ++i) ga.data[r0 * n + i] += g.data[i];
  });
}

Tape::Var Tape::concat_cols(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_2d(ta, "concat_cols lhs");
  check_2d(tb, "concat_cols rhs");
  if (ta.rows() != tb.rows()) throw InputError("concat_cols: height mismatch");
  const std::size_t m = ta.rows(), n1 = ta.cols(), n2 = tb.cols();

  Tensor out = Tensor::zeros({m, n1 + n2});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(ta.data.begin() + static_cast<std::ptrdiff_t>(i * n1),
              ta.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * n1),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * (n1 + n2)));
    std::copy(tb.data.begin() + static_cast<std::ptrdiff_t>(i * n2),
              tb.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * n2),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * (n1 + n2) + n1));
  }

  return push(std::move(out), tracked(a) || tracked(b), [a, b, m, n1, n2](Tape& t, Var self) {
    const Tensor& g = t.grad_of(self);
    if (t.tracked(a)) {
      Tensor& ga = t.grad_of(a);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n1; ++j) ga.data[i * n1 + j] += g.data[i * (n1 + n2) + j];
      }
    }
    if (t.tracked(b)) {
      Tensor& gb = t.grad_of(b);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n2; ++j) gb.data[i * n2 + j] += g.data[i * (n1 + n2) + n1 + j];
      }
    }
  });
}

Tape::Var Tape::self_attend(Var q, Var k, Var v, int heads) {
  const Tensor& tq = value(q);
  const Tensor& tk = value(k);
  const Tensor& tv = value(v);
  check_2d(tq, "self_attend q");
  const std::size_t rows = tq.rows(), dm = tq.cols();
  if (tk.shape != tq.shape || tv.shape != tq.shape) throw InputError("self_attend: shape mismatch");
  if (heads <= 0 || dm % static_cast<std::size_t>(heads) != 0) {
    throw InputError("self_attend: heads must divide the model width");
  }
  const std::size_t dh = dm / static_cast<std::size_t>(heads);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor out = Tensor::zeros({rows, dm});
  std::vector<double> probs(static_cast<std::size_t>(heads) * rows * rows);
  std::vector<double> scores(rows);
  for (int h = 0; h < heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dh;
    double* p_head = probs.data() + static_cast<std::size_t>(h) * rows * rows;
    for (std::size_t t = 0; t < rows; ++t) {
      const double* qrow = tq.data.data() + t * dm + off;
      double max_score = -1e300;
      for (std::size_t u = 0; u < rows; ++u) {
        const double* krow = tk.data.data() + u * dm + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qrow[c] * krow[c];
        s *= inv_sqrt_dh;
        scores[u] = s;
        max_score = std::max(max_score, s);
      }
      double denom = 0.0;
      for (std::size_t u = 0; u < rows; ++u) {
        scores[u] = std::exp(scores[u] - max_score);
        denom += scores[u];
      }
      double* prow = p_head + t * rows;
      double* orow = out.data.data() + t * dm + off;
      for (std::size_t u = 0; u < rows; ++u) {
        const double p = scores[u] / denom;
        prow[u] = p;
        const double* vrow = tv.data.data() + u * dm + off;
        for (std::size_t c = 0; c < dh; ++c) orow[c] += p * vrow[c];
      }
    }
  }

  const Var node =
      push(std::move(out), tracked(q) || tracked(k) || tracked(v),
           [q, k, v, heads, rows, dm, dh, inv_sqrt_dh](Tape& t, Var self) {
             const Tensor& g = t.grad_of(self);
             const auto& probs = t.nodes_[static_cast<std::size_t>(self)].saved;
             const Tensor& tq = t.value(q);
             const Tensor& tk = t.value(k);
             const Tensor& tv = t.value(v);
             Tensor* gq = t.tracked(q) ? &t.grad_of(q) : nullptr;
             Tensor* gk = t.tracked(k) ? &t.grad_of(k) : nullptr;
             Tensor* gv = t.tracked(v) ? &t.grad_of(v) : nullptr;

             std::vector<double> dp(rows);
             std::vector<double> ds(rows);
             for (int h = 0; h < heads; ++h) {
               const std::size_t off = static_cast<std::size_t>(h) * dh;
               const double* p_head = probs.data() + static_cast<std::size_t>(h) * rows * rows;
               for (std::size_t tt = 0; tt < rows; ++tt) {
                 const double* prow = p_head + tt * rows;
                 const double* grow = g.data.data() + tt * dm + off;
                 // dV and dP
                 double dot = 0.0;
                 for (std::size_t u = 0; u < rows; ++u) {
                   const double* vrow = tv.data.data() + u * dm + off;
                   double acc = 0.0;
                   for (std::size_t c = 0; c < dh; ++c) acc += grow[c] * vrow[c];
                   dp[u] = acc;
                   dot += acc * prow[u];
                   if (gv) {
                     double* gvrow = gv->data.data() + u * dm + off;
                     for (std::size_t c = 0; c < dh; ++c) gvrow[c] += prow[u] * grow[c];
                   }
                 }
                 // softmax backward, then Q/K chain
                 for (std::size_t u = 0; u < rows; ++u) {
                   ds[u] = prow[u] * (dp[u] - dot) * inv_sqrt_dh;
                 }
                 if (gq) {
                   double* gqrow = gq->data.data() + tt * dm + off;
                   for (std::size_t u = 0; u < rows; ++u) {
                     const double* krow = tk.data.data() + u * dm + off;
                     for (std::size_t c = 0; c < dh; ++c) gqrow[c] += ds[u] * krow[c];
                   }
                 }
                 if (gk) {
                   const double* qrow = tq.data.data() + tt * dm + off;
                   for (std::size_t u = 0; u < rows; ++u) {
                     double* gkrow = gk->data.data() + u * dm + off;
                     for (std::size_t c = 0; c < dh; ++c) gkrow[c] += ds[u] * qrow[c];
                   }
                 }
               }
             }
           });
  nodes_[static_cast<std::size_t>(node)].saved = std::move(probs);
  return node;
}

Tape::Var Tape::evidence_attend(Var q, Var keys, Var values, int heads, int slots) {
  const Tensor& tq = value(q);
  const Tensor& tk = value(keys);
  const Tensor& tv = value(values);
  check_2d(tq, "evidence_attend q");
  const std::size_t rows = tq.rows(), dm = tq.cols();
  const auto k_slots = static_cast<std::size_t>(slots);
  if (slots <= 0) throw InputError("evidence_attend: slots must be positive");
  if (tk.rows() != rows * k_slots || tk.cols() != dm || tv.shape != tk.shape) {
    throw InputError("evidence_attend: keys/values must be [rows*slots, dm]");
  }
  if (heads <= 0 || dm % static_cast<std::size_t>(heads) != 0) {
    throw InputError("evidence_attend: heads must divide the model width");
  }
  const std::size_t dh = dm / static_cast<std::size_t>(heads);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor out = Tensor::zeros({rows, dm});
  std::vector<double> probs(rows * static_cast<std::size_t>(heads) * k_slots);
  std::vector<double> scores(k_slots);
  for (std::size_t t = 0; t < rows; ++t) {
    for (int h = 0; h < heads; ++h) {
      const std::size_t off = static_cast<std::size_t>(h) * dh;
      const double* qrow = tq.data.data() + t * dm + off;
      double max_score = -1e300;
      for (std::size_t a = 0; a < k_slots; ++a) {
        const double* krow = tk.data.data() + (t * k_slots + a) * dm + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qrow[c] * krow[c];
        s *= inv_sqrt_dh;
        scores[a] = s;
        max_score = std::max(max_score, s);
      }
      double denom = 0.0;
      for (std::size_t a = 0; a < k_slots; ++a) {
        scores[a] = std::exp(scores[a] - max_score);
        denom += scores[a];
      }
      double* prow = probs.data() + (t * static_cast<std::size_t>(heads) + h) * k_slots;
      double* orow = out.data.data() + t * dm + off;
      for (std::size_t a = 0; a < k_slots; ++a) {
        const double p = scores[a] / denom;
        prow[a] = p;
        const double* vrow = tv.data.data() + (t * k_slots + a) * dm + off;
        for (std::size_t c = 0; c < dh; ++c) orow[c] += p * vrow[c];
      }
    }
  }

  const Var node = push(
      std::move(out), tracked(q) || tracked(keys) || tracked(values),
      [q, keys, values, heads, k_slots, rows, dm, dh, inv_sqrt_dh](Tape& t, Var self) {
        const Tensor& g = t.grad_of(self);
        const auto& probs = t.nodes_[static_cast<std::size_t>(self)].saved;
        const Tensor& tq = t.value(q);
        const Tensor& tk = t.value(keys);
        const Tensor& tv = t.value(values);
        Tensor* gq = t.tracked(q) ? &t.grad_of(q) : nullptr;
        Tensor* gk = t.tracked(keys) ? &t.grad_of(keys) : nullptr;
        Tensor* gv = t.tracked(values) ? &t.grad_of(values) : nullptr;

        std::vector<double> dp(k_slots);
        for (std::size_t tt = 0; tt < rows; ++tt) {
          for (int h = 0; h < heads; ++h) {
            const std::size_t off = static_cast<std::size_t>(h) * dh;
            const double* prow = probs.data() + (tt * static_cast<std::size_t>(heads) + h) * k_slots;
            const double* grow = g.data.data() + tt * dm + off;
            double dot = 0.0;
            for (std::size_t a = 0; a < k_slots; ++a) {
              const double* vrow = tv.data.data() + (tt * k_slots + a) * dm + off;
              double acc = 0.0;
              for (std::size_t c = 0; c < dh; ++c) acc += grow[c] * vrow[c];
              dp[a] = acc;
              dot += acc * prow[a];
              if (gv) {
                double* gvrow = gv->data.data() + (tt * k_slots + a) * dm + off;
                for (std::size_t c = 0; c < dh; ++c) gvrow[c] += prow[a] * grow[c];
              }
            }
            for (std::size_t a = 0; a < k_slots; ++a) {
              const double ds = prow[a] * (dp[a] - dot) * inv_sqrt_dh;
              if (gq) {
                double* gqrow = gq->data.data() + tt * dm + off;
                const double* krow = tk.data.data() + (tt * k_slots + a) * dm + off;
                for (std::size_t c = 0; c < dh; ++c) gqrow[c] += ds * krow[c];
              }
              if (gk) {
                double* gkrow = gk->data.data() + (tt * k_slots + a) * dm + off;
                const double* qrow = tq.data.data() + tt * dm + off;
                for (std::size_t c = 0; c < dh; ++c) gkrow[c] += ds * qrow[c];
              }
            }
          }
        }
      });
  nodes_[static_cast<std::size_t>(node)].saved = std::move(probs);
  return node;
}

Tape::Var Tape::bce_with_logit(Var logit, double label) {
  const Tensor& tz = value(logit);
  if (tz.size() != 1) throw InputError("bce_with_logit: logit must be scalar");
  const double z = tz.data[0];
  double loss;
  if (z >= 0.0) {
    loss = z - z * label + std::log1p(std::exp(-z));
  } else {
    loss = -z * label + std::log1p(std::exp(z));
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite loss from logit");

  Tensor out({1, 1}, {loss});
  return push(std::move(out), tracked(logit), [logit, label](Tape& t, Var self) {
    const double g = t.grad_of(self).data[0];
    const double z = t.value(logit).data[0];
    t.grad_of(logit).data[0] += g * (logistic(z) - label);
  });
}

Tape::Var Tape::mean_scalars(std::span<const Var> vars) {
  if (vars.empty()) throw InputError("mean_scalars: empty input");
  double acc = 0.0;
  bool track = false;
  for (Var v : vars) {
    if (value(v).size() != 1) throw InputError("mean_scalars: inputs must be scalars");
    acc += value(v).data[0];
    track = track || tracked(v);
  }
  const double inv_n = 1.0 / static_cast<double>(vars.size());
  Tensor out({1, 1}, {acc * inv_n});

  std::vector<Var> captured(vars.begin(), vars.end());
  return push(std::move(out), track, [captured = std::move(captured), inv_n](Tape& t, Var self) {
    const double g = t.grad_of(self).data[0] * inv_n;
    for (Var v : captured) {
      if (t.tracked(v)) t.grad_of(v).data[0] += g;
    }
  });
}

void Tape::backward(Var output) {
  const Tensor& out = value(output);
  if (out.size() != 1) throw InputError("backward target must be a scalar");
  grad_of(output).data[0] = 1.0;
  for (int i = output; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this, i);
  }
}

}  // namespace eviscreen::ad
