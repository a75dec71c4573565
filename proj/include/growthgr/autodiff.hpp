#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "growthgr/tensor.hpp"

namespace growthgr {

// Reverse-mode autodiff over a flat tape. Forward values are computed
// eagerly at node creation; backward() walks the tape in reverse with a
// fixed accumulation order, so gradients are bit-deterministic.


enum class Op : uint8_t {
  kInput,
  kParam,
  kMatmul,
  kAdd,       // same shape
  kAddBias,   // [N,d] + [d], broadcast over rows
  kScale,     // c * x
  kMul,       // hadamard
  kRelu,
  kGelu,      // tanh approximation
  kLayerNorm, // per last dim, learned gain/bias
  kSoftmax,   // per row
  kEmbed,     // param rows gathered by constant indices
  kIndexSelect,
  kConcatCols,
  kMean,
  kSum,
  kMhaPacked,   // causal multi-head self-attention over packed sequences
  kCrossAttn,   // single-head attention, one query row per packed segment
  kCrossEntropy,
  kPolicyObjective, // per-row clipped-surrogate minus beta*KL over a masked support
  kStraightThrough,
  kStopGrad,
};

struct ExtraBase {
  virtual ~ExtraBase() = default;
};

struct MhaExtra : ExtraBase {
  int heads = 1;
  bool causal = true;
  std::vector<int> offsets;        // sequence boundaries into the packed rows
  std::vector<double> probs;       // attention probabilities saved for backward
};

struct CrossAttnExtra : ExtraBase {
  std::vector<int> offsets;        // key/value segment boundaries, one per query row
  std::vector<double> probs;
};

struct LnExtra : ExtraBase {
  std::vector<double> mean, rstd;
};

struct CeExtra : ExtraBase {
  std::vector<int> targets;
  Tensor probs;
};

struct PolicyRow {
  std::vector<int> support;        // column indices of valid continuations
  int target = 0;                  // index into support
  double logp_old = 0.0;           // behavior per-token log-prob
  double adv = 0.0;                // group-relative advantage
  std::vector<double> ref_logp;    // reference log-probs aligned with support
};

struct PolicyExtra : ExtraBase {
  double eps = 0.2;
  double beta = 0.0;
  std::vector<PolicyRow> rows;
  std::vector<std::vector<double>> p, lp;   // masked probs / log-probs per row
  std::vector<double> surrogate, kl;        // per-row components, for reporting
};

struct Node {
  Op op;
  int in0 = -1, in1 = -1, in2 = -1;
  double c = 0.0;
  bool ta = false, tb = false;
  bool needs_grad = false;
  Tensor val;
  Tensor grad;
  std::vector<int> idx;
  std::shared_ptr<ExtraBase> extra;
};

class Tape {
 public:
  int input(Tensor t) {
    Node n;
    n.op = Op::kInput;
    n.val = std::move(t);
    return push(std::move(n));
  }

  int param(const std::string& name, const Tensor& t) {
    GGR_CHECK(!params_.count(name), contract_error("duplicate parameter: " + name));
    Node n;
    n.op = Op::kParam;
    n.val = t;
    n.needs_grad = true;
    int id = push(std::move(n));
    params_[name] = id;
    return id;
  }

  // Registers every tensor of a ParamSet; returns name -> node id.
  std::map<std::string, int> params(const ParamSet& ps) {
    std::map<std::string, int> ids;
    for (const auto& [name, t] : ps) ids[name] = param(name, t);
    return ids;
  }

  const Tensor& value(int id) const { return nodes_[id].val; }
  double scalar(int id) const { return nodes_[id].val.item(); }

  int matmul(int a, int b, bool ta = false, bool tb = false) {
    Node n;
    n.op = Op::kMatmul;
    n.in0 = a;
    n.in1 = b;
    n.ta = ta;
    n.tb = tb;
    n.val = matmul_raw(nodes_[a].val, nodes_[b].val, ta, tb);
    return push(std::move(n));
  }

  int add(int a, int b) {
    GGR_CHECK(nodes_[a].val.same_shape(nodes_[b].val), dimension_error("add: shape mismatch"));
    Node n;
    n.op = Op::kAdd;
    n.in0 = a;
    n.in1 = b;
    n.val = nodes_[a].val;
    for (int64_t i = 0; i < n.val.numel(); ++i) n.val.v[i] += nodes_[b].val.v[i];
    return push(std::move(n));
  }

  int add_bias(int a, int b) {
    const Tensor& x = nodes_[a].val;
    const Tensor& bias = nodes_[b].val;
    GGR_CHECK(bias.rank() == 1 && bias.cols() == x.cols(),
              dimension_error("add_bias: bias must match last dim"));
    Node n;
    n.op = Op::kAddBias;
    n.in0 = a;
    n.in1 = b;
    n.val = x;
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j) n.val.at(i, j) += bias.at(j);
    return push(std::move(n));
  }

  int scale(int a, double c) {
    Node n;
    n.op = Op::kScale;
    n.in0 = a;
    n.c = c;
    n.val = nodes_[a].val;
    for (double& x : n.val.v) x *= c;
    return push(std::move(n));
  }

  int mul(int a, int b) {
    GGR_CHECK(nodes_[a].val.same_shape(nodes_[b].val), dimension_error("mul: shape mismatch"));
    Node n;
    n.op = Op::kMul;
    n.in0 = a;
    n.in1 = b;
    n.val = nodes_[a].val;
    for (int64_t i = 0; i < n.val.numel(); ++i) n.val.v[i] *= nodes_[b].val.v[i];
    return push(std::move(n));
  }

  int sub(int a, int b) { return add(a, scale(b, -1.0)); }

  int relu(int a) {
    Node n;
    n.op = Op::kRelu;
    n.in0 = a;
    n.val = nodes_[a].val;
    for (double& x : n.val.v) x = x > 0.0 ? x : 0.0;
    return push(std::move(n));
  }

  int gelu(int a) {
    Node n;
    n.op = Op::kGelu;
    n.in0 = a;
    n.val = nodes_[a].val;
    for (double& x : n.val.v) {
      double u = kGeluC * (x + 0.044715 * x * x * x);
      x = 0.5 * x * (1.0 + std::tanh(u));
    }
    return push(std::move(n));
  }

  int layer_norm(int a, int gain, int bias, double eps = 1e-5) {
    const Tensor& x = nodes_[a].val;
    int d = x.cols();
    GGR_CHECK(nodes_[gain].val.numel() == d && nodes_[bias].val.numel() == d,
              dimension_error("layer_norm: gain/bias must match last dim"));
    Node n;
    n.op = Op::kLayerNorm;
    n.in0 = a;
    n.in1 = gain;
    n.in2 = bias;
    n.c = eps;
    n.val = x;
    auto ex = std::make_shared<LnExtra>();
    ex->mean.resize(x.rows());
    ex->rstd.resize(x.rows());
    const Tensor& g = nodes_[gain].val;
    const Tensor& b = nodes_[bias].val;
    for (int i = 0; i < x.rows(); ++i) {
      double m = 0.0;
      for (int j = 0; j < d; ++j) m += x.at(i, j);
      m /= d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) {
        double c = x.at(i, j) - m;
        var += c * c;
      }
      var /= d;
      double rstd = 1.0 / std::sqrt(var + eps);
      ex->mean[i] = m;
      ex->rstd[i] = rstd;
      for (int j = 0; j < d; ++j) n.val.at(i, j) = (x.at(i, j) - m) * rstd * g.at(j) + b.at(j);
    }
    n.extra = ex;
    return push(std::move(n));
  }

  int softmax(int a) {
    Node n;
    n.op = Op::kSoftmax;
    n.in0 = a;
    n.val = nodes_[a].val;
    for (int i = 0; i < n.val.rows(); ++i) softmax_row(&n.val.at(i, 0), n.val.cols());
    return push(std::move(n));
  }

  int embed(int table, const std::vector<int>& ids) {
    const Tensor& w = nodes_[table].val;
    GGR_CHECK(w.rank() == 2, dimension_error("embed: table must be rank 2"));
    for (int id : ids)
      GGR_CHECK(id >= 0 && id < w.rows(), index_error("embed: index out of range"));
    Node n;
    n.op = Op::kEmbed;
    n.in0 = table;
    n.idx = ids;
    n.val = Tensor::zeros({static_cast<int>(ids.size()), w.cols()});
    for (size_t r = 0; r < ids.size(); ++r)
      for (int j = 0; j < w.cols(); ++j) n.val.at(static_cast<int>(r), j) = w.at(ids[r], j);
    return push(std::move(n));
  }

  int index_select(int a, const std::vector<int>& rows) {
    const Tensor& x = nodes_[a].val;
    for (int r : rows)
      GGR_CHECK(r >= 0 && r < x.rows(), index_error("index_select: row out of range"));
    Node n;
    n.op = Op::kIndexSelect;
    n.in0 = a;
    n.idx = rows;
    n.val = Tensor::zeros({static_cast<int>(rows.size()), x.cols()});
    for (size_t r = 0; r < rows.size(); ++r)
      for (int j = 0; j < x.cols(); ++j) n.val.at(static_cast<int>(r), j) = x.at(rows[r], j);
    return push(std::move(n));
  }

  int concat_cols(int a, int b) {
    const Tensor& x = nodes_[a].val;
    const Tensor& y = nodes_[b].val;
    GGR_CHECK(x.rows() == y.rows(), dimension_error("concat_cols: row mismatch"));
    Node n;
    n.op = Op::kConcatCols;
    n.in0 = a;
    n.in1 = b;
    n.val = Tensor::zeros({x.rows(), x.cols() + y.cols()});
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) n.val.at(i, j) = x.at(i, j);
      for (int j = 0; j < y.cols(); ++j) n.val.at(i, x.cols() + j) = y.at(i, j);
    }
    return push(std::move(n));
  }

  int mean(int a) {
    Node n;
    n.op = Op::kMean;
    n.in0 = a;
    double s = 0.0;
    for (double x : nodes_[a].val.v) s += x;
    n.val = Tensor::scalar(s / static_cast<double>(nodes_[a].val.numel()));
    return push(std::move(n));
  }

  int sum(int a) {
    Node n;
    n.op = Op::kSum;
    n.in0 = a;
    double s = 0.0;
    for (double x : nodes_[a].val.v) s += x;
    n.val = Tensor::scalar(s);
    return push(std::move(n));
  }

  // Multi-head self-attention over packed sequences. qkv is [N, 3*d_model]
  // with rows grouped by `offsets` (offsets[b]..offsets[b+1] is sequence b).
  int mha_packed(int qkv, int heads, const std::vector<int>& offsets, bool causal = true) {
    const Tensor& x = nodes_[qkv].val;
    GGR_CHECK(x.cols() % 3 == 0, dimension_error("mha: qkv cols must be 3*d_model"));
    int dm = x.cols() / 3;
    GGR_CHECK(dm % heads == 0, dimension_error("mha: d_model not divisible by heads"));
    GGR_CHECK(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == x.rows(),
              contract_error("mha: bad offsets"));
    int hd = dm / heads;
    double sc = 1.0 / std::sqrt(static_cast<double>(hd));
    Node n;
    n.op = Op::kMhaPacked;
    n.in0 = qkv;
    n.val = Tensor::zeros({x.rows(), dm});
    auto ex = std::make_shared<MhaExtra>();
    ex->heads = heads;
    ex->causal = causal;
    ex->offsets = offsets;
    size_t ptot = 0;
    for (size_t b = 0; b + 1 < offsets.size(); ++b) {
      size_t t = static_cast<size_t>(offsets[b + 1] - offsets[b]);
      ptot += t * t * heads;
    }
    ex->probs.assign(ptot, 0.0);
    size_t pbase = 0;
    std::vector<double> row;
    for (size_t b = 0; b + 1 < offsets.size(); ++b) {
      int lo = offsets[b], hi = offsets[b + 1];
      int t = hi - lo;
      for (int h = 0; h < heads; ++h) {
        double* probs = ex->probs.data() + pbase + static_cast<size_t>(h) * t * t;
        for (int i = 0; i < t; ++i) {
          const double* qi = x.ptr(lo + i, h * hd);
          int jmax = causal ? i + 1 : t;
          row.assign(static_cast<size_t>(t), 0.0);
          double mx = -1e300;
          for (int j = 0; j < jmax; ++j) {
            const double* kj = x.ptr(lo + j, dm + h * hd);
            row[j] = dot(qi, kj, hd) * sc;
            mx = std::max(mx, row[j]);
          }
          double z = 0.0;
          for (int j = 0; j < jmax; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
          }
          double* out = n.val.ptr(lo + i, h * hd);
          for (int j = 0; j < jmax; ++j) {
            double p = row[j] / z;
            probs[static_cast<size_t>(i) * t + j] = p;
            const double* vj = x.ptr(lo + j, 2 * dm + h * hd);
            for (int k = 0; k < hd; ++k) out[k] += p * vj[k];
          }
        }
      }
      pbase += static_cast<size_t>(t) * t * heads;
    }
    n.extra = ex;
    return push(std::move(n));
  }

  // One query row per segment of packed keys/values; softmax over the
  // segment. Empty segments produce a zero output row.
  int cross_attn(int q, int keys, int vals, const std::vector<int>& offsets) {
    const Tensor& Q = nodes_[q].val;
    const Tensor& K = nodes_[keys].val;
    const Tensor& V = nodes_[vals].val;
    GGR_CHECK(Q.cols() == K.cols(), dimension_error("cross_attn: key dim mismatch"));
    GGR_CHECK(K.rows() == V.rows(), dimension_error("cross_attn: key/value row mismatch"));
    GGR_CHECK(static_cast<int>(offsets.size()) == Q.rows() + 1 && offsets.back() == K.rows(),
              contract_error("cross_attn: bad offsets"));
    Node n;
    n.op = Op::kCrossAttn;
    n.in0 = q;
    n.in1 = keys;
    n.in2 = vals;
    n.val = Tensor::zeros({Q.rows(), V.cols()});
    auto ex = std::make_shared<CrossAttnExtra>();
    ex->offsets = offsets;
    ex->probs.assign(static_cast<size_t>(K.rows()), 0.0);
    double sc = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
    for (int b = 0; b < Q.rows(); ++b) {
      int lo = offsets[b], hi = offsets[b + 1];
      if (lo == hi) continue;
      double mx = -1e300;
      for (int j = lo; j < hi; ++j) {
        ex->probs[j] = dot(Q.ptr(b, 0), K.ptr(j, 0), Q.cols()) * sc;
        mx = std::max(mx, ex->probs[j]);
      }
      double z = 0.0;
      for (int j = lo; j < hi; ++j) {
        ex->probs[j] = std::exp(ex->probs[j] - mx);
        z += ex->probs[j];
      }
      for (int j = lo; j < hi; ++j) {
        ex->probs[j] /= z;
        for (int k = 0; k < V.cols(); ++k) n.val.at(b, k) += ex->probs[j] * V.at(j, k);
      }
    }
    n.extra = ex;
    return push(std::move(n));
  }

  // -log softmax(row)[target] per row, max-subtraction stabilized.
  int cross_entropy(int logits, const std::vector<int>& targets) {
    const Tensor& x = nodes_[logits].val;
    GGR_CHECK(static_cast<int>(targets.size()) == x.rows(),
              dimension_error("cross_entropy: one target per row"));
    for (int t : targets)
      GGR_CHECK(t >= 0 && t < x.cols(), index_error("cross_entropy: target out of range"));
    Node n;
    n.op = Op::kCrossEntropy;
    n.in0 = logits;
    n.val = Tensor::zeros({x.rows()});
    auto ex = std::make_shared<CeExtra>();
    ex->targets = targets;
    ex->probs = x;
    for (int i = 0; i < x.rows(); ++i) {
      double* row = &ex->probs.at(i, 0);
      double lse = softmax_row(row, x.cols());
      n.val.at(i) = lse - x.at(i, targets[i]);
    }
    n.extra = ex;
    return push(std::move(n));
  }

  // Per-row GRPO-style objective over a trie-masked support:
  //   out_r = min(rho*A, clip(rho,1-eps,1+eps)*A) - beta * KL(p || p_ref)
  // where rho = exp(lp[target] - logp_old) and p is the masked softmax of the
  // row's support logits.
  int policy_objective(int logits, std::shared_ptr<PolicyExtra> ex) {
    const Tensor& x = nodes_[logits].val;
    GGR_CHECK(static_cast<int>(ex->rows.size()) == x.rows(),
              dimension_error("policy_objective: one spec per row"));
    Node n;
    n.op = Op::kPolicyObjective;
    n.in0 = logits;
    n.val = Tensor::zeros({x.rows()});
    ex->p.assign(ex->rows.size(), {});
    ex->lp.assign(ex->rows.size(), {});
    ex->surrogate.assign(ex->rows.size(), 0.0);
    ex->kl.assign(ex->rows.size(), 0.0);
    for (size_t r = 0; r < ex->rows.size(); ++r) {
      const PolicyRow& pr = ex->rows[r];
      GGR_CHECK(!pr.support.empty(), contract_error("policy_objective: empty support"));
      GGR_CHECK(pr.target >= 0 && pr.target < static_cast<int>(pr.support.size()),
                index_error("policy_objective: target outside support"));
      size_t m = pr.support.size();
      auto& lp = ex->lp[r];
      auto& p = ex->p[r];
      lp.resize(m);
      p.resize(m);
      double mx = -1e300;
      for (size_t j = 0; j < m; ++j) {
        lp[j] = x.at(static_cast<int>(r), pr.support[j]);
        mx = std::max(mx, lp[j]);
      }
      double z = 0.0;
      for (size_t j = 0; j < m; ++j) z += std::exp(lp[j] - mx);
      double lse = mx + std::log(z);
      double kl = 0.0;
      for (size_t j = 0; j < m; ++j) {
        lp[j] -= lse;
        p[j] = std::exp(lp[j]);
        kl += p[j] * (lp[j] - pr.ref_logp[j]);
      }
      double rho = std::exp(lp[pr.target] - pr.logp_old);
      double clipped = std::min(std::max(rho, 1.0 - ex->eps), 1.0 + ex->eps);
      double surr = std::min(rho * pr.adv, clipped * pr.adv);
      ex->surrogate[r] = surr;
      ex->kl[r] = kl;
      n.val.at(static_cast<int>(r)) = surr - ex->beta * kl;
    }
    n.extra = ex;
    return push(std::move(n));
  }

  // Forward takes the constant `quantized` values; gradient passes to x.
  int straight_through(int x, const Tensor& quantized) {
    GGR_CHECK(nodes_[x].val.same_shape(quantized),
              dimension_error("straight_through: shape mismatch"));
    Node n;
    n.op = Op::kStraightThrough;
    n.in0 = x;
    n.val = quantized;
    return push(std::move(n));
  }

  int stop_grad(int x) {
    Node n;
    n.op = Op::kStopGrad;
    n.val = nodes_[x].val;
    return push(std::move(n));
  }

  // Sum of squared differences (b is typically a constant input).
  int mse_sum(int a, int b) {
    int d = sub(a, b);
    return sum(mul(d, d));
  }

  // Exact reverse-mode gradients for every registered parameter;
  // non-contributing parameters get zeros.
  GradMap backward(int loss) {
    GGR_CHECK(nodes_[loss].val.numel() == 1, contract_error("backward: loss must be scalar"));
    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[loss].grad = Tensor::full(nodes_[loss].val.shape, 1.0);
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.v.empty()) continue;
      backprop(n);
    }
    GradMap out;
    for (const auto& [name, id] : params_) {
      if (nodes_[id].grad.v.empty())
        out[name] = Tensor::zeros(nodes_[id].val.shape);
      else
        out[name] = nodes_[id].grad;
    }
    return out;
  }

  const Node& node(int id) const { return nodes_[id]; }
  size_t size() const { return nodes_.size(); }

 private:
  static constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

  // In-place softmax; returns logsumexp of the original row.
  static double softmax_row(double* row, int n) {
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= z;
    return mx + std::log(z);
  }

  int push(Node n) {
    if (!n.needs_grad && n.op != Op::kStopGrad) {
      for (int in : {n.in0, n.in1, n.in2})
        if (in >= 0 && nodes_[in].needs_grad) {
          n.needs_grad = true;
          break;
        }
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Tensor& grad_of(int id) {
    Node& n = nodes_[id];
    if (n.grad.v.empty()) n.grad = Tensor::zeros(n.val.shape);
    return n.grad;
  }

  bool wants(int id) const { return id >= 0 && nodes_[id].needs_grad; }

  void backprop(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
      case Op::kStopGrad:
        break;
      case Op::kMatmul: {
        const Tensor& a = nodes_[n.in0].val;
        const Tensor& b = nodes_[n.in1].val;
        if (wants(n.in0)) {
          Tensor da;
          if (!n.ta && !n.tb) da = matmul_raw(g, b, false, true);
          else if (!n.ta && n.tb) da = matmul_raw(g, b, false, false);
          else if (n.ta && !n.tb) da = matmul_raw(b, g, false, true);
          else da = matmul_raw(b, g, true, true);
          accum(n.in0, da);
        }
        if (wants(n.in1)) {
          Tensor db;
          if (!n.ta && !n.tb) db = matmul_raw(a, g, true, false);
          else if (!n.ta && n.tb) db = matmul_raw(g, a, true, false);
          else if (n.ta && !n.tb) db = matmul_raw(a, g, false, false);
          else db = matmul_raw(g, a, true, true);
          accum(n.in1, db);
        }
        break;
      }
      case Op::kAdd:
        if (wants(n.in0)) accum_raw(n.in0, g.v);
        if (wants(n.in1)) accum_raw(n.in1, g.v);
        break;
      case Op::kAddBias: {
        if (wants(n.in0)) accum_raw(n.in0, g.v);
        if (wants(n.in1)) {
          Tensor& db = grad_of(n.in1);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) db.at(j) += g.at(i, j);
        }
        break;
      }
      case Op::kScale: {
        if (wants(n.in0)) {
          Tensor& da = grad_of(n.in0);
          for (int64_t i = 0; i < g.numel(); ++i) da.v[i] += n.c * g.v[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[n.in0].val;
        const Tensor& b = nodes_[n.in1].val;
        if (wants(n.in0)) {
          Tensor& da = grad_of(n.in0);
          for (int64_t i = 0; i < g.numel(); ++i) da.v[i] += b.v[i] * g.v[i];
        }
        if (wants(n.in1)) {
          Tensor& db = grad_of(n.in1);
          for (int64_t i = 0; i < g.numel(); ++i) db.v[i] += a.v[i] * g.v[i];
        }
        break;
      }
      case Op::kRelu: {
        if (wants(n.in0)) {
          const Tensor& a = nodes_[n.in0].val;
          Tensor& da = grad_of(n.in0);
          for (int64_t i = 0; i < g.numel(); ++i)
            if (a.v[i] > 0.0) da.v[i] += g.v[i];
        }
        break;
      }
      case Op::kGelu: {
        if (wants(n.in0)) {
          const Tensor& a = nodes_[n.in0].val;
          Tensor& da = grad_of(n.in0);
          for (int64_t i = 0; i < g.numel(); ++i) {
            double x = a.v[i];
            double u = kGeluC * (x + 0.044715 * x * x * x);
            double th = std::tanh(u);
            double sech2 = 1.0 - th * th;
            double dudx = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
            da.v[i] += g.v[i] * (0.5 * (1.0 + th) + 0.5 * x * sech2 * dudx);
          }
        }
        break;
      }
      case Op::kLayerNorm: {
        const auto& ex = static_cast<const LnExtra&>(*n.extra);
        const Tensor& x = nodes_[n.in0].val;
        const Tensor& gain = nodes_[n.in1].val;
        int d = x.cols();
        for (int i = 0; i < x.rows(); ++i) {
          double m = ex.mean[i], rstd = ex.rstd[i];
          double sum_dy = 0.0, sum_dyxh = 0.0;
          for (int j = 0; j < d; ++j) {
            double xh = (x.at(i, j) - m) * rstd;
            double dy = g.at(i, j) * gain.at(j);
            sum_dy += dy;
            sum_dyxh += dy * xh;
          }
          if (wants(n.in0)) {
            Tensor& dx = grad_of(n.in0);
            for (int j = 0; j < d; ++j) {
              double xh = (x.at(i, j) - m) * rstd;
              double dy = g.at(i, j) * gain.at(j);
              dx.at(i, j) += rstd * (dy - sum_dy / d - xh * sum_dyxh / d);
            }
          }
          if (wants(n.in1)) {
            Tensor& dg = grad_of(n.in1);
            for (int j = 0; j < d; ++j)
              dg.at(j) += g.at(i, j) * (x.at(i, j) - m) * rstd;
          }
          if (wants(n.in2)) {
            Tensor& db = grad_of(n.in2);
            for (int j = 0; j < d; ++j) db.at(j) += g.at(i, j);
          }
        }
        break;
      }
      case Op::kSoftmax: {
        if (wants(n.in0)) {
          Tensor& da = grad_of(n.in0);
          for (int i = 0; i < n.val.rows(); ++i) {
            double dotsg = 0.0;
            for (int j = 0; j < n.val.cols(); ++j) dotsg += g.at(i, j) * n.val.at(i, j);
            for (int j = 0; j < n.val.cols(); ++j)
              da.at(i, j) += n.val.at(i, j) * (g.at(i, j) - dotsg);
          }
        }
        break;
      }
      case Op::kEmbed: {
        if (wants(n.in0)) {
          Tensor& dw = grad_of(n.in0);
          for (size_t r = 0; r < n.idx.size(); ++r)
            for (int j = 0; j < g.cols(); ++j)
              dw.at(n.idx[r], j) += g.at(static_cast<int>(r), j);
        }
        break;
      }
      case Op::kIndexSelect: {
        if (wants(n.in0)) {
          Tensor& dx = grad_of(n.in0);
          for (size_t r = 0; r < n.idx.size(); ++r)
            for (int j = 0; j < g.cols(); ++j)
              dx.at(n.idx[r], j) += g.at(static_cast<int>(r), j);
        }
        break;
      }
      case Op::kConcatCols: {
        const Tensor& a = nodes_[n.in0].val;
        if (wants(n.in0)) {
          Tensor& da = grad_of(n.in0);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) da.at(i, j) += g.at(i, j);
        }
        if (wants(n.in1)) {
          Tensor& db = grad_of(n.in1);
          int off = a.cols();
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < db.cols(); ++j) db.at(i, j) += g.at(i, off + j);
        }
        break;
      }
      case Op::kMean: {
        if (wants(n.in0)) {
          Tensor& da = grad_of(n.in0);
          double s = g.v[0] / static_cast<double>(da.numel());
          for (double& x : da.v) x += s;
        }
        break;
      }
      case Op::kSum: {
        if (wants(n.in0)) {
          Tensor& da = grad_of(n.in0);
          for (double& x : da.v) x += g.v[0];
        }
        break;
      }
      case Op::kMhaPacked: {
        if (!wants(n.in0)) break;
        const auto& ex = static_cast<const MhaExtra&>(*n.extra);
        const Tensor& x = nodes_[n.in0].val;
        Tensor& dx = grad_of(n.in0);
        int dm = x.cols() / 3;
        int hd = dm / ex.heads;
        double sc = 1.0 / std::sqrt(static_cast<double>(hd));
        size_t pbase = 0;
        std::vector<double> datt, dpre;
        for (size_t b = 0; b + 1 < ex.offsets.size(); ++b) {
          int lo = ex.offsets[b], hi = ex.offsets[b + 1];
          int t = hi - lo;
          for (int h = 0; h < ex.heads; ++h) {
            const double* probs = ex.probs.data() + pbase + static_cast<size_t>(h) * t * t;
            datt.assign(static_cast<size_t>(t) * t, 0.0);
            dpre.assign(static_cast<size_t>(t) * t, 0.0);
            for (int i = 0; i < t; ++i) {
              const double* go = g.ptr(lo + i, h * hd);
              int jmax = ex.causal ? i + 1 : t;
              // dV and datt
              for (int j = 0; j < jmax; ++j) {
                double p = probs[static_cast<size_t>(i) * t + j];
                if (p == 0.0) continue;
                double* dv = dx.ptr(lo + j, 2 * dm + h * hd);
                const double* vj = x.ptr(lo + j, 2 * dm + h * hd);
                double acc = 0.0;
                for (int k = 0; k < hd; ++k) {
                  dv[k] += p * go[k];
                  acc += go[k] * vj[k];
                }
                datt[static_cast<size_t>(i) * t + j] = acc;
              }
              // softmax backward within the row
              double dots = 0.0;
              for (int j = 0; j < jmax; ++j)
                dots += datt[static_cast<size_t>(i) * t + j] * probs[static_cast<size_t>(i) * t + j];
              for (int j = 0; j < jmax; ++j) {
                double p = probs[static_cast<size_t>(i) * t + j];
                dpre[static_cast<size_t>(i) * t + j] =
                    p * (datt[static_cast<size_t>(i) * t + j] - dots);
              }
              // dQ and dK
              double* dq = dx.ptr(lo + i, h * hd);
              const double* qi = x.ptr(lo + i, h * hd);
              for (int j = 0; j < jmax; ++j) {
                double dp = dpre[static_cast<size_t>(i) * t + j] * sc;
                if (dp == 0.0) continue;
                const double* kj = x.ptr(lo + j, dm + h * hd);
                double* dk = dx.ptr(lo + j, dm + h * hd);
                for (int k = 0; k < hd; ++k) {
                  dq[k] += dp * kj[k];
                  dk[k] += dp * qi[k];
                }
              }
            }
          }
          pbase += static_cast<size_t>(t) * t * ex.heads;
        }
        break;
      }
      case Op::kCrossAttn: {
        const auto& ex = static_cast<const CrossAttnExtra&>(*n.extra);
        const Tensor& Q = nodes_[n.in0].val;
        const Tensor& K = nodes_[n.in1].val;
        const Tensor& V = nodes_[n.in2].val;
        double sc = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
        for (int b = 0; b < Q.rows(); ++b) {
          int lo = ex.offsets[b], hi = ex.offsets[b + 1];
          if (lo == hi) continue;
          double dots = 0.0;
          std::vector<double> datt(static_cast<size_t>(hi - lo), 0.0);
          for (int j = lo; j < hi; ++j) {
            double acc = 0.0;
            for (int k = 0; k < V.cols(); ++k) acc += g.at(b, k) * V.at(j, k);
            datt[j - lo] = acc;
            dots += acc * ex.probs[j];
          }
          for (int j = lo; j < hi; ++j) {
            double p = ex.probs[j];
            double dpre = p * (datt[j - lo] - dots) * sc;
            if (wants(n.in2)) {
              Tensor& dv = grad_of(n.in2);
              for (int k = 0; k < V.cols(); ++k) dv.at(j, k) += p * g.at(b, k);
            }
            if (wants(n.in0)) {
              Tensor& dq = grad_of(n.in0);
              for (int k = 0; k < Q.cols(); ++k) dq.at(b, k) += dpre * K.at(j, k);
            }
            if (wants(n.in1)) {
              Tensor& dk = grad_of(n.in1);
              for (int k = 0; k < Q.cols(); ++k) dk.at(j, k) += dpre * Q.at(b, k);
            }
          }
        }
        break;
      }
      case Op::kCrossEntropy: {
        if (!wants(n.in0)) break;
        const auto& ex = static_cast<const CeExtra&>(*n.extra);
        Tensor& dl = grad_of(n.in0);
        for (int i = 0; i < dl.rows(); ++i) {
          double go = g.at(i);
          for (int j = 0; j < dl.cols(); ++j) dl.at(i, j) += go * ex.probs.at(i, j);
          dl.at(i, ex.targets[i]) -= go;
        }
        break;
      }
      case Op::kPolicyObjective: {
        if (!wants(n.in0)) break;
        const auto& ex = static_cast<const PolicyExtra&>(*n.extra);
        Tensor& dl = grad_of(n.in0);
        for (size_t r = 0; r < ex.rows.size(); ++r) {
          const PolicyRow& pr = ex.rows[r];
          const auto& p = ex.p[r];
          const auto& lp = ex.lp[r];
          double go = g.at(static_cast<int>(r));
          double rho = std::exp(lp[pr.target] - pr.logp_old);
          // min() picks the unclipped branch iff rho*A <= clip(rho)*A;
          // only that branch carries gradient.
          double clipped = std::min(std::max(rho, 1.0 - ex.eps), 1.0 + ex.eps);
          bool unclipped = rho * pr.adv <= clipped * pr.adv;
          double dsurr_dlpt = unclipped ? rho * pr.adv : 0.0;
          double kl = ex.kl[r];
          size_t m = pr.support.size();
          for (size_t j = 0; j < m; ++j) {
            // d lp[target] / d logit_j = delta - p_j; d KL / d logit_j = p_j*((lp-lref) - KL)
            double dsurr = dsurr_dlpt * ((static_cast<int>(j) == pr.target ? 1.0 : 0.0) - p[j]);
            double dkl = p[j] * ((lp[j] - pr.ref_logp[j]) - kl);
            dl.at(static_cast<int>(r), pr.support[j]) += go * (dsurr - ex.beta * dkl);
          }
        }
        break;
      }
      case Op::kStraightThrough:
        if (wants(n.in0)) accum_raw(n.in0, g.v);
        break;
    }
  }

  void accum(int id, const Tensor& d) { accum_raw(id, d.v); }

  void accum_raw(int id, const std::vector<double>& d) {
    Tensor& t = grad_of(id);
    for (size_t i = 0; i < d.size(); ++i) t.v[i] += d[i];
  }

  std::vector<Node> nodes_;
  std::map<std::string, int> params_;
};

// Adam with bias correction; state keyed by parameter name.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::map<std::string, Tensor> m, v;

  explicit Adam(double lr_ = 1e-3) : lr(lr_) {}

  void step(ParamSet& params, const GradMap& grads) {
    ++t;
    double bc1 = 1.0 - std::pow(beta1, t);
    double bc2 = 1.0 - std::pow(beta2, t);
    for (auto& [name, p] : params) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      const Tensor& gr = it->second;
      Tensor& mm = m.try_emplace(name, Tensor::zeros(p.shape)).first->second;
      Tensor& vv = v.try_emplace(name, Tensor::zeros(p.shape)).first->second;
      for (int64_t i = 0; i < p.numel(); ++i) {
        double gi = gr.v[i];
        mm.v[i] = beta1 * mm.v[i] + (1.0 - beta1) * gi;
        vv.v[i] = beta2 * vv.v[i] + (1.0 - beta2) * gi * gi;
        p.v[i] -= lr * (mm.v[i] / bc1) / (std::sqrt(vv.v[i] / bc2) + eps);
      }
    }
  }
};

// A loss with analytic gradients: value plus per-parameter grads.
using LossGradFn = std::function<std::pair<double, GradMap>(const ParamSet&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  int coords_checked = 0;
};

// Central-difference check of analytic gradients. Coordinates are sampled
// for large tensors. Throws a determinism error if two baseline evaluations
// of f disagree bit-for-bit.
inline GradCheckReport grad_check(const LossGradFn& f, const ParamSet& params, double eps,
                                  int max_coords_per_tensor = 24, uint64_t seed = 1234) {
  GGR_CHECK(eps > 0.0, contract_error("grad_check: eps must be positive"));
  auto [v0, grads] = f(params);
  auto [v1, grads1] = f(params);
  (void)grads1;
  GGR_CHECK(v0 == v1, determinism_error("grad_check: two baseline evaluations differ"));
  GradCheckReport rep;
  Rng rng(seed);
  ParamSet work = params;
  for (const auto& [name, p] : params) {
    std::vector<int> coords;
    int n = static_cast<int>(p.numel());
    if (n <= max_coords_per_tensor) {
      coords.resize(n);
      for (int i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (int i = 0; i < max_coords_per_tensor; ++i) coords.push_back(rng.uniform_int(n));
    }
    Tensor& wp = work[name];
    for (int c : coords) {
      double orig = wp.v[c];
      wp.v[c] = orig + eps;
      double fp = f(work).first;
      wp.v[c] = orig - eps;
      double fm = f(work).first;
      wp.v[c] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double analytic = grads.at(name).v[c];
      double rel = std::abs(analytic - numeric) /
                   std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = c;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace growthgr
