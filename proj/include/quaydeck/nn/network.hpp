#ifndef QUAYDECK_NN_NETWORK_HPP_
#define QUAYDECK_NN_NETWORK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quaydeck/env.hpp"
#include "quaydeck/nn/tensor.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck::nn {

enum class FusionMode { Hadamard, ConcatAblation };

inline std::string to_string(FusionMode m) { return m == FusionMode::Hadamard ? "hadamard" : "concat"; }

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "hadamard") return FusionMode::Hadamard;
  if (s == "concat") return FusionMode::ConcatAblation;
  throw ConfigError("unknown fusion mode '" + s + "' (expected hadamard or concat)");
}

struct NetDims {
  int feature_width = kFeatureWidth;
  int model = 128;
  int heads = 8;
  int pref_hidden = 128;
  double ln_eps = 1e-5;

  int head_dim() const { return model / heads; }
  void validate() const {
    if (feature_width <= 0 || model <= 0 || heads <= 0 || pref_hidden <= 0)
      throw ConfigError("network dimensions must be positive");
    if (model % heads != 0) throw ConfigError("model width must be divisible by the head count");
    if (!(ln_eps > 0.0)) throw ConfigError("layer-norm epsilon must be positive");
  }
  bool operator==(const NetDims&) const = default;
};

/// Tensor slots. The fusion pair exists only in ConcatAblation mode.
enum ParamId : int {
  kEncW,
  kEncB,
  kQkvW,
  kQkvB,
  kOutW,
  kOutB,
  kLnGamma,
  kLnBeta,
  kPrefW1,
  kPrefB1,
  kPrefW2,
  kPrefB2,
  kHeadW,
  kHeadB,
  kFuseW,
  kFuseB,
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
};

inline std::vector<ParamSpec> param_layout(const NetDims& d, FusionMode mode) {
  d.validate();
  std::vector<ParamSpec> out = {
      {"enc.w", {d.feature_width, d.model}},
      {"enc.b", {d.model}},
      {"attn.w_qkv", {d.model, 3 * d.model}},
      {"attn.b_qkv", {3 * d.model}},
      {"attn.w_out", {d.model, d.model}},
      {"attn.b_out", {d.model}},
      {"ln.gamma", {d.model}},
      {"ln.beta", {d.model}},
      {"pref.w1", {2, d.pref_hidden}},
      {"pref.b1", {d.pref_hidden}},
      {"pref.w2", {d.pref_hidden, d.model}},
      {"pref.b2", {d.model}},
      {"head.w", {d.model, 1}},
      {"head.b", {1}},
  };
  if (mode == FusionMode::ConcatAblation) {
    out.push_back({"fuse.w", {2 * d.model, d.model}});
    out.push_back({"fuse.b", {d.model}});
  }
  return out;
}

struct PolicyParams {
  NetDims dims;
  FusionMode fusion = FusionMode::Hadamard;
  std::vector<Tensor> tensors;

  Tensor& operator[](ParamId id) { return tensors[static_cast<std::size_t>(id)]; }
  const Tensor& operator[](ParamId id) const { return tensors[static_cast<std::size_t>(id)]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  bool operator==(const PolicyParams&) const = default;
};

/// All-zero parameters with the given layout (used for gradients and moments).
inline PolicyParams zero_params(const NetDims& dims, FusionMode mode) {
  PolicyParams p;
  p.dims = dims;
  p.fusion = mode;
  for (const auto& s : param_layout(dims, mode)) p.tensors.emplace_back(s.shape, 0.0);
  return p;
}

inline PolicyParams zeros_like(const PolicyParams& p) { return zero_params(p.dims, p.fusion); }

/// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights
/// and their biases; layer norm starts at identity.
inline PolicyParams init_params(std::uint64_t seed, const NetDims& dims = {}, FusionMode mode = FusionMode::Hadamard) {
  PolicyParams p = zero_params(dims, mode);
  Rng rng = make_rng(seed, "init");
  int fan_in = 1;
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    Tensor& t = p.tensors[i];
    if (i == kLnGamma) {
      t.fill(1.0);
      continue;
    }
    if (i == kLnBeta) continue;
    if (t.shape.size() == 2) fan_in = t.shape[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values) v = uniform(rng, -bound, bound);
  }
  return p;
}

/// Activations of one forward pass over a batch of decision records. Rows of
/// all records are stacked; `offsets` delimits each record's rows.
struct ForwardTrace {
  FusionMode fusion = FusionMode::Hadamard;
  NetDims dims;
  std::vector<int> offsets;     // records + 1
  std::vector<int> row_record;  // record of each stacked row
  Mat x, z0, h0, qkv, attn_cat, resid, xhat, h1;
  Eigen::VectorXd rstd;
  AlignedVector attn;  // per record: heads x n x n
  std::vector<std::size_t> attn_off;
  Mat pref, e1_pre, e1, e;
  Mat cat, g_pre, g;
  Eigen::VectorXd logits, probs, log_probs;

  int records() const { return static_cast<int>(offsets.size()) - 1; }
  int total_rows() const { return offsets.back(); }
  int rows_of(int b) const { return offsets[static_cast<std::size_t>(b) + 1] - offsets[static_cast<std::size_t>(b)]; }

  std::vector<double> record_probs(int b) const {
    const int o = offsets[static_cast<std::size_t>(b)];
    return {probs.data() + o, probs.data() + o + rows_of(b)};
  }
  double log_prob(int b, int action) const {
    if (action < 0 || action >= rows_of(b)) throw ShapeError("action out of range for record");
    return log_probs[offsets[static_cast<std::size_t>(b)] + action];
  }
};

namespace detail {

inline Mat relu(const Mat& m) { return m.cwiseMax(0.0); }

inline void add_bias(Mat& m, const Tensor& b) { m.rowwise() += b.row(); }

}  // namespace detail

/// Batched forward. `states[b]` and `prefs[b]` form decision record b.
inline ForwardTrace forward_batch(const PolicyParams& P, std::span<const StateFeatures* const> states,
                                  std::span<const Preference> prefs) {
  if (states.size() != prefs.size()) throw ShapeError("states and preferences differ in count");
  if (states.empty()) throw ShapeError("empty batch");
  const NetDims& d = P.dims;
  const int dm = d.model;
  const int dh = d.head_dim();
  ForwardTrace T;
  T.fusion = P.fusion;
  T.dims = d;
  T.offsets.assign(1, 0);
  for (const StateFeatures* s : states) {
    if (s->rows <= 0) throw ShapeError("forward needs at least one active QC row");
    if (s->values.size() != static_cast<std::size_t>(s->rows) * static_cast<std::size_t>(d.feature_width))
      throw ShapeError("feature row width mismatch");
    T.offsets.push_back(T.offsets.back() + s->rows);
  }
  const int B = static_cast<int>(states.size());
  const int N = T.offsets.back();
  T.row_record.resize(static_cast<std::size_t>(N));
  T.x.resize(N, d.feature_width);
  for (int b = 0; b < B; ++b) {
    const int o = T.offsets[static_cast<std::size_t>(b)];
    const StateFeatures& s = *states[static_cast<std::size_t>(b)];
    T.x.middleRows(o, s.rows) = ConstMatMap(s.values.data(), s.rows, d.feature_width);
    std::fill(T.row_record.begin() + o, T.row_record.begin() + o + s.rows, b);
  }
  require_finite(T.x, "features");

  // QC encoder.
  T.z0.noalias() = T.x * P[kEncW].mat();
  detail::add_bias(T.z0, P[kEncB]);
  T.h0 = detail::relu(T.z0);

  // Multi-head self-attention within each record's QC set.
  T.qkv.noalias() = T.h0 * P[kQkvW].mat();
  detail::add_bias(T.qkv, P[kQkvB]);
  T.attn_cat.setZero(N, dm);
  T.attn_off.assign(static_cast<std::size_t>(B) + 1, 0);
  for (int b = 0; b < B; ++b) {
    const auto n = static_cast<std::size_t>(T.rows_of(b));
    T.attn_off[static_cast<std::size_t>(b) + 1] = T.attn_off[static_cast<std::size_t>(b)] + n * n * static_cast<std::size_t>(d.heads);
  }
  T.attn.assign(T.attn_off.back(), 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int b = 0; b < B; ++b) {
    const int o = T.offsets[static_cast<std::size_t>(b)];
    const int n = T.rows_of(b);
    for (int h = 0; h < d.heads; ++h) {
      double* A = T.attn.data() + T.attn_off[static_cast<std::size_t>(b)] + static_cast<std::size_t>(h * n * n);
      const auto Q = T.qkv.block(o, h * dh, n, dh);
      const auto K = T.qkv.block(o, dm + h * dh, n, dh);
      const auto V = T.qkv.block(o, 2 * dm + h * dh, n, dh);
      Eigen::Map<Mat> Am(A, n, n);
      Am.noalias() = (Q * K.transpose()) * scale;
      for (int i = 0; i < n; ++i) {
        const double mx = Am.row(i).maxCoeff();
        Am.row(i) = (Am.row(i).array() - mx).exp();
        Am.row(i) /= Am.row(i).sum();
      }
      T.attn_cat.block(o, h * dh, n, dh).noalias() = Am * V;
    }
  }
  T.resid.noalias() = T.attn_cat * P[kOutW].mat();
  detail::add_bias(T.resid, P[kOutB]);
  T.resid += T.h0;
  require_finite(T.resid, "attention block");

  // Layer normalization.
  T.xhat.resize(N, dm);
  T.rstd.resize(N);
  for (int i = 0; i < N; ++i) {
    const double mu = T.resid.row(i).mean();
    const auto c = T.resid.row(i).array() - mu;
    const double var = c.square().mean();
    T.rstd[i] = 1.0 / std::sqrt(var + d.ln_eps);
    T.xhat.row(i) = c * T.rstd[i];
  }
  T.h1 = T.xhat.array().rowwise() * P[kLnGamma].row().array();
  T.h1.rowwise() += P[kLnBeta].row();

  // Preference embedding.
  T.pref.resize(B, 2);
  for (int b = 0; b < B; ++b) {
    T.pref(b, 0) = prefs[static_cast<std::size_t>(b)][0];
    T.pref(b, 1) = prefs[static_cast<std::size_t>(b)][1];
  }
  require_finite(T.pref, "preference");
  T.e1_pre.noalias() = T.pref * P[kPrefW1].mat();
  detail::add_bias(T.e1_pre, P[kPrefB1]);
  T.e1 = detail::relu(T.e1_pre);
  T.e.noalias() = T.e1 * P[kPrefW2].mat();
  detail::add_bias(T.e, P[kPrefB2]);

  // Fusion.
  if (P.fusion == FusionMode::Hadamard) {
    T.g.resize(N, dm);
    for (int i = 0; i < N; ++i) T.g.row(i) = T.h1.row(i).cwiseProduct(T.e.row(T.row_record[static_cast<std::size_t>(i)]));
  } else {
    T.cat.resize(N, 2 * dm);
    T.cat.leftCols(dm) = T.h1;
    for (int i = 0; i < N; ++i) T.cat.row(i).tail(dm) = T.e.row(T.row_record[static_cast<std::size_t>(i)]);
    T.g_pre.noalias() = T.cat * P[kFuseW].mat();
    detail::add_bias(T.g_pre, P[kFuseB]);
    T.g = detail::relu(T.g_pre);
  }

  // Scalar head and per-record softmax.
  T.logits = T.g * P[kHeadW].mat().col(0);
  T.logits.array() += P[kHeadB].values[0];
  require_finite(T.logits, "logits");
  T.probs.resize(N);
  T.log_probs.resize(N);
  for (int b = 0; b < B; ++b) {
    const int o = T.offsets[static_cast<std::size_t>(b)];
    const int n = T.rows_of(b);
    auto l = T.logits.segment(o, n);
    const double mx = l.maxCoeff();
    const double lse = mx + std::log((l.array() - mx).exp().sum());
    T.log_probs.segment(o, n) = l.array() - lse;
    T.probs.segment(o, n) = T.log_probs.segment(o, n).array().exp();
  }
  require_finite(T.probs, "probabilities");
  return T;
}

inline ForwardTrace forward(const PolicyParams& P, const StateFeatures& s, const Preference& pref) {
  const StateFeatures* ptr = &s;
  return forward_batch(P, {&ptr, 1}, {&pref, 1});
}

/// Accumulates into `G` the gradient of sum_i dlogits[i] * logits[i] (stacked
/// rows) with respect to every parameter.
inline void backward_logits(const PolicyParams& P, const ForwardTrace& T, const Eigen::VectorXd& dlogits,
                            PolicyParams& G) {
  if (dlogits.size() != T.total_rows()) throw ShapeError("dlogits length does not match trace rows");
  if (!(P.dims == T.dims) || P.fusion != T.fusion || G.tensors.size() != P.tensors.size())
    throw ShapeError("trace, parameters and gradient layouts differ");
  const NetDims& d = P.dims;
  const int dm = d.model;
  const int dh = d.head_dim();
  const int N = T.total_rows();
  const int B = T.records();

  // Head.
  G[kHeadW].mat().col(0).noalias() += T.g.transpose() * dlogits;
  G[kHeadB].values[0] += dlogits.sum();
  Mat dg = dlogits * P[kHeadW].mat().col(0).transpose();

  Mat dh1;
  Mat de = Mat::Zero(B, dm);
  if (P.fusion == FusionMode::Hadamard) {
    dh1.resize(N, dm);
    for (int i = 0; i < N; ++i) {
      const int b = T.row_record[static_cast<std::size_t>(i)];
      dh1.row(i) = dg.row(i).cwiseProduct(T.e.row(b));
      de.row(b) += dg.row(i).cwiseProduct(T.h1.row(i));
    }
  } else {
    Mat dgp = dg.array() * (T.g_pre.array() > 0.0).cast<double>();
    G[kFuseW].mat().noalias() += T.cat.transpose() * dgp;
    G[kFuseB].row() += dgp.colwise().sum();
    Mat dcat = dgp * P[kFuseW].mat().transpose();
    dh1 = dcat.leftCols(dm);
    for (int i = 0; i < N; ++i) de.row(T.row_record[static_cast<std::size_t>(i)]) += dcat.row(i).tail(dm);
  }

  // Preference embedding.
  G[kPrefW2].mat().noalias() += T.e1.transpose() * de;
  G[kPrefB2].row() += de.colwise().sum();
  Mat de1 = de * P[kPrefW2].mat().transpose();
  de1.array() *= (T.e1_pre.array() > 0.0).cast<double>();
  G[kPrefW1].mat().noalias() += T.pref.transpose() * de1;
  G[kPrefB1].row() += de1.colwise().sum();

  // Layer norm.
  G[kLnGamma].row() += dh1.cwiseProduct(T.xhat).colwise().sum();
  G[kLnBeta].row() += dh1.colwise().sum();
  Mat dxhat = dh1.array().rowwise() * P[kLnGamma].row().array();
  Mat dres(N, dm);
  for (int i = 0; i < N; ++i) {
    const double m1 = dxhat.row(i).mean();
    const double m2 = dxhat.row(i).dot(T.xhat.row(i)) / dm;
    dres.row(i) = (dxhat.row(i).array() - m1 - T.xhat.row(i).array() * m2) * T.rstd[i];
  }

  // Attention output projection; the residual path feeds h0 directly.
  G[kOutW].mat().noalias() += T.attn_cat.transpose() * dres;
  G[kOutB].row() += dres.colwise().sum();
  Mat dcat_attn = dres * P[kOutW].mat().transpose();
  Mat dh0 = dres;

  Mat dqkv = Mat::Zero(N, 3 * dm);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int b = 0; b < B; ++b) {
    const int o = T.offsets[static_cast<std::size_t>(b)];
    const int n = T.rows_of(b);
    for (int h = 0; h < d.heads; ++h) {
      const double* A = T.attn.data() + T.attn_off[static_cast<std::size_t>(b)] + static_cast<std::size_t>(h * n * n);
      Eigen::Map<const Mat> Am(A, n, n);
      const auto Q = T.qkv.block(o, h * dh, n, dh);
      const auto K = T.qkv.block(o, dm + h * dh, n, dh);
      const auto V = T.qkv.block(o, 2 * dm + h * dh, n, dh);
      const auto dO = dcat_attn.block(o, h * dh, n, dh);
      Mat dA = dO * V.transpose();
      dqkv.block(o, 2 * dm + h * dh, n, dh).noalias() += Am.transpose() * dO;
      Mat dS(n, n);
      for (int i = 0; i < n; ++i) {
        const double dot = dA.row(i).dot(Am.row(i));
        dS.row(i) = Am.row(i).array() * (dA.row(i).array() - dot);
      }
      dS *= scale;
      dqkv.block(o, h * dh, n, dh).noalias() += dS * K;
      dqkv.block(o, dm + h * dh, n, dh).noalias() += dS.transpose() * Q;
    }
  }
  G[kQkvW].mat().noalias() += T.h0.transpose() * dqkv;
  G[kQkvB].row() += dqkv.colwise().sum();
  dh0.noalias() += dqkv * P[kQkvW].mat().transpose();

  // Encoder.
  Mat dz0 = dh0.array() * (T.z0.array() > 0.0).cast<double>();
  G[kEncW].mat().noalias() += T.x.transpose() * dz0;
  G[kEncB].row() += dz0.colwise().sum();
}

/// Gradient of log pi(action | record b) for a single-record trace.
inline PolicyParams backward(const PolicyParams& P, const ForwardTrace& T, int action) {
  if (T.records() != 1) throw ShapeError("backward expects a single-record trace");
  if (action < 0 || action >= T.total_rows()) throw ShapeError("action out of range");
  Eigen::VectorXd dl = -T.probs;
  dl[action] += 1.0;
  PolicyParams G = zeros_like(P);
  backward_logits(P, T, dl, G);
  return G;
}

}  // namespace quaydeck::nn

#endif  // QUAYDECK_NN_NETWORK_HPP_
