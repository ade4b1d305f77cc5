#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osre/common.hpp"
#include "osre/corpus.hpp"

namespace osre {

enum class Readout { kMarkers, kMean, kSum };

inline std::string to_string(Readout r) {
  switch (r) {
    case Readout::kMarkers: return "markers";
    case Readout::kMean: return "mean";
    case Readout::kSum: return "sum";
  }
  return "markers";
}

inline Readout readout_from_string(const std::string& s) {
  if (s == "markers") return Readout::kMarkers;
  if (s == "mean") return Readout::kMean;
  if (s == "sum") return Readout::kSum;
  throw ConfigError("unknown readout: " + s);
}

struct EncoderConfig {
  int vocab_size = 0;
  int num_relations = 0;
  int dim = 32;
  int max_len = 64;
  int depth = 1;  // number of mixer blocks, 0..2
  Readout readout = Readout::kMarkers;
  bool use_positions = true;

  void check() const {
    if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
    if (num_relations <= 0) throw ConfigError("num_relations must be positive");
    if (dim <= 0) throw ConfigError("dim must be positive");
    if (max_len <= 0) throw ConfigError("max_len must be positive");
    if (depth < 0 || depth > 2) throw ConfigError("depth must be 0, 1 or 2");
  }
  bool operator==(const EncoderConfig&) const = default;
};

/// Single-head self-attention followed by a tanh feed-forward layer, both residual.
struct MixerBlock {
  Matrix wq, wk, wv, wo;  // dim x dim, applied as X * W
  Matrix w1, w2;
  Vector b1, b2;
};

struct EncoderParams {
  EncoderConfig config;
  Matrix tok_emb;  // vocab x dim
  Matrix pos_emb;  // max_len x dim
  std::vector<MixerBlock> blocks;
  Matrix w_cls;  // relations x 2*dim
  Vector b_cls;  // relations

  static EncoderParams zeros(const EncoderConfig& c) {
    c.check();
    EncoderParams p;
    p.config = c;
    const int d = c.dim;
    p.tok_emb = Matrix::Zero(c.vocab_size, d);
    p.pos_emb = Matrix::Zero(c.max_len, d);
    p.blocks.resize(static_cast<size_t>(c.depth));
    for (auto& b : p.blocks) {
      for (Matrix* m : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) *m = Matrix::Zero(d, d);
      b.b1 = Vector::Zero(d);
      b.b2 = Vector::Zero(d);
    }
    p.w_cls = Matrix::Zero(c.num_relations, 2 * d);
    p.b_cls = Vector::Zero(c.num_relations);
    return p;
  }

  /// Weights uniform in [-scale, scale]; biases zero.
  static EncoderParams init(const EncoderConfig& c, std::uint64_t seed, double scale = 0.08) {
    EncoderParams p = zeros(c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    p.for_each_tensor([&](const std::string& name, auto& t) {
      if (name.find(".b") != std::string::npos || name == "b_cls") return;
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    });
    return p;
  }

  /// Visits every trainable tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  void set_zero() {
    for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
  }

  size_t num_parameters() const {
    size_t n = 0;
    for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<size_t>(t.size()); });
    return n;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f(std::string("tok_emb"), self.tok_emb);
    f(std::string("pos_emb"), self.pos_emb);
    for (size_t i = 0; i < self.blocks.size(); ++i) {
      auto& b = self.blocks[i];
      const std::string pre = "block" + std::to_string(i) + ".";
      f(pre + "wq", b.wq);
      f(pre + "wk", b.wk);
      f(pre + "wv", b.wv);
      f(pre + "wo", b.wo);
      f(pre + "w1", b.w1);
      f(pre + "b1", b.b1);
      f(pre + "w2", b.w2);
      f(pre + "b2", b.b2);
    }
    f(std::string("w_cls"), self.w_cls);
    f(std::string("b_cls"), self.b_cls);
  }
};

/// Order-sensitive digest of every parameter bit pattern.
inline std::uint64_t checksum(const EncoderParams& p) {
  std::uint64_t h = 1469598103934665603ull;
  p.for_each_tensor([&](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      std::uint64_t bits;
      const double v = t.data()[i];
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ull;
    }
  });
  return h;
}

// ---------------------------------------------------------------------------
// Marker insertion

/// Instance with [E1] [/E1] [E2] [/E2] wrapped around the entity spans.
struct MarkedSequence {
  std::vector<TokenId> ids;
  int head_marker = 0;  // position of [E1]
  int tail_marker = 0;  // position of [E2]
  std::vector<int> marked_pos;  // original index -> marked index

  int size() const { return static_cast<int>(ids.size()); }
};

inline MarkedSequence mark(const EncodedInstance& inst) {
  MarkedSequence m;
  const int n = inst.size();
  m.ids.reserve(static_cast<size_t>(n + 4));
  m.marked_pos.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i == inst.head.start) {
      m.head_marker = m.size();
      m.ids.push_back(Vocabulary::kHeadBegin);
      if (inst.head.size() == 0) m.ids.push_back(Vocabulary::kHeadEnd);
    }
    if (i == inst.tail.start) {
      m.tail_marker = m.size();
      m.ids.push_back(Vocabulary::kTailBegin);
      if (inst.tail.size() == 0) m.ids.push_back(Vocabulary::kTailEnd);
    }
    m.marked_pos[static_cast<size_t>(i)] = m.size();
    m.ids.push_back(inst.ids[static_cast<size_t>(i)]);
    if (inst.head.size() > 0 && i + 1 == inst.head.end) m.ids.push_back(Vocabulary::kHeadEnd);
    if (inst.tail.size() > 0 && i + 1 == inst.tail.end) m.ids.push_back(Vocabulary::kTailEnd);
  }
  // Empty spans at the end of the sequence.
  if (inst.head.start >= n) {
    m.head_marker = m.size();
    m.ids.push_back(Vocabulary::kHeadBegin);
    m.ids.push_back(Vocabulary::kHeadEnd);
  }
  if (inst.tail.start >= n) {
    m.tail_marker = m.size();
    m.ids.push_back(Vocabulary::kTailBegin);
    m.ids.push_back(Vocabulary::kTailEnd);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct BlockCache {
  Matrix x, q, k, v, attn, ctx, u, hid;
};

struct ForwardPass {
  Matrix inputs;  // token embeddings before position encoding
  std::vector<BlockCache> blocks;
  Matrix out;     // final hidden states
  int head_marker = 0;
  int tail_marker = 0;
  Vector h;       // representation, 2*dim
  Vector logits;
};

namespace detail {

inline Matrix row_softmax(const Matrix& s) {
  Matrix a(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    a.row(r) = (s.row(r).array() - mx).exp();
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

inline void add_bias(Matrix& m, const Vector& b) { m.rowwise() += b.transpose(); }

}  // namespace detail

inline Matrix gather_embeddings(const EncoderParams& p, const std::vector<TokenId>& ids) {
  Matrix x(static_cast<Eigen::Index>(ids.size()), p.config.dim);
  for (size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (id < 0 || id >= p.config.vocab_size) throw ValidationError("token id out of range");
    x.row(static_cast<Eigen::Index>(i)) = p.tok_emb.row(id);
  }
  return x;
}

/// Runs the encoder from explicit per-position token embeddings.
inline ForwardPass forward(const EncoderParams& p, Matrix inputs, int head_marker, int tail_marker) {
  const auto& c = p.config;
  const Eigen::Index len = inputs.rows();
  if (len == 0) throw ValidationError("empty sequence");
  if (len > c.max_len) {
    throw LengthError("sequence of length " + std::to_string(len) + " exceeds max_len " +
                      std::to_string(c.max_len));
  }
  ForwardPass f;
  f.head_marker = head_marker;
  f.tail_marker = tail_marker;
  f.inputs = std::move(inputs);
  Matrix x = f.inputs;
  if (c.use_positions) x += p.pos_emb.topRows(len);

  const double scale = 1.0 / std::sqrt(static_cast<double>(c.dim));
  f.blocks.reserve(p.blocks.size());
  for (const auto& b : p.blocks) {
    BlockCache bc;
    bc.x = x;
    bc.q = x * b.wq;
    bc.k = x * b.wk;
    bc.v = x * b.wv;
    bc.attn = detail::row_softmax(scale * bc.q * bc.k.transpose());
    bc.ctx = bc.attn * bc.v;
    bc.u = x + bc.ctx * b.wo;
    Matrix z = bc.u * b.w1;
    detail::add_bias(z, b.b1);
    bc.hid = z.array().tanh();
    Matrix ff = bc.hid * b.w2;
    detail::add_bias(ff, b.b2);
    x = bc.u + ff;
    f.blocks.push_back(std::move(bc));
  }
  f.out = std::move(x);

  const int d = c.dim;
  f.h.resize(2 * d);
  switch (c.readout) {
    case Readout::kMarkers:
      f.h.head(d) = f.out.row(head_marker).transpose();
      f.h.tail(d) = f.out.row(tail_marker).transpose();
      break;
    case Readout::kMean:
    case Readout::kSum: {
      Vector pooled = f.out.colwise().sum().transpose();
      if (c.readout == Readout::kMean) pooled /= static_cast<double>(len);
      f.h.head(d) = pooled;
      f.h.tail(d) = pooled;
      break;
    }
  }
  f.logits = p.w_cls * f.h + p.b_cls;
  return f;
}

inline ForwardPass forward(const EncoderParams& p, const MarkedSequence& m) {
  return forward(p, gather_embeddings(p, m.ids), m.head_marker, m.tail_marker);
}

/// Back-propagates dL/dlogits. Parameter gradients are accumulated into
/// `grads` (token embeddings excluded, see accumulate_token_grads); the
/// gradient w.r.t. the per-position input embeddings is returned.
inline Matrix backward(const EncoderParams& p, const ForwardPass& f, const Vector& dlogits,
                       EncoderParams& grads) {
  const auto& c = p.config;
  const int d = c.dim;
  const Eigen::Index len = f.out.rows();

  grads.w_cls.noalias() += dlogits * f.h.transpose();
  grads.b_cls += dlogits;
  const Vector dh = p.w_cls.transpose() * dlogits;

  Matrix dx = Matrix::Zero(len, d);
  switch (c.readout) {
    case Readout::kMarkers:
      dx.row(f.head_marker) += dh.head(d).transpose();
      dx.row(f.tail_marker) += dh.tail(d).transpose();
      break;
    case Readout::kMean:
    case Readout::kSum: {
      Vector pooled = dh.head(d) + dh.tail(d);
      if (c.readout == Readout::kMean) pooled /= static_cast<double>(len);
      dx.rowwise() += pooled.transpose();
      break;
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (size_t bi = p.blocks.size(); bi-- > 0;) {
    const auto& b = p.blocks[bi];
    const auto& bc = f.blocks[bi];
    auto& g = grads.blocks[bi];
    // y = u + tanh(u W1 + b1) W2 + b2
    Matrix du = dx;
    g.w2.noalias() += bc.hid.transpose() * dx;
    g.b2 += dx.colwise().sum().transpose();
    Matrix dz = ((dx * b.w2.transpose()).array() * (1.0 - bc.hid.array().square())).matrix();
    g.w1.noalias() += bc.u.transpose() * dz;
    g.b1 += dz.colwise().sum().transpose();
    du.noalias() += dz * b.w1.transpose();
    // u = x + (softmax(q k^T * scale) v) Wo
    Matrix dxin = du;
    g.wo.noalias() += bc.ctx.transpose() * du;
    const Matrix dctx = du * b.wo.transpose();
    const Matrix dattn = dctx * bc.v.transpose();
    const Matrix dv = bc.attn.transpose() * dctx;
    Matrix ds = bc.attn.array() * dattn.array();
    const Vector row_dot = ds.rowwise().sum();
    ds -= (bc.attn.array().colwise() * row_dot.array()).matrix();
    ds *= scale;
    const Matrix dq = ds * bc.k;
    const Matrix dk = ds.transpose() * bc.q;
    g.wq.noalias() += bc.x.transpose() * dq;
    g.wk.noalias() += bc.x.transpose() * dk;
    g.wv.noalias() += bc.x.transpose() * dv;
    dxin.noalias() += dq * b.wq.transpose();
    dxin.noalias() += dk * b.wk.transpose();
    dxin.noalias() += dv * b.wv.transpose();
    dx = std::move(dxin);
  }
  if (c.use_positions) grads.pos_emb.topRows(len) += dx;
  return dx;
}

inline void accumulate_token_grads(const std::vector<TokenId>& ids, const Matrix& d_inputs,
                                   EncoderParams& grads) {
  for (size_t i = 0; i < ids.size(); ++i) {
    grads.tok_emb.row(ids[i]) += d_inputs.row(static_cast<Eigen::Index>(i));
  }
}

// ---------------------------------------------------------------------------
// Readout, head, score

/// Representation h: hidden states at [E1] and [E2] concatenated (markers
/// readout), or the pooled hidden state duplicated (mean/sum readout).
inline Vector encode(const EncoderParams& p, const MarkedSequence& m) { return forward(p, m).h; }
inline Vector encode(const EncoderParams& p, const EncodedInstance& inst) {
  return encode(p, mark(inst));
}

inline Vector class_logits(const EncoderParams& p, const Vector& h) {
  if (h.size() != 2 * p.config.dim) throw ValidationError("representation has wrong dimension");
  return p.w_cls * h + p.b_cls;
}

inline Vector softmax_probs(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp();
  return e / e.sum();
}

/// Negative free energy log(sum_j exp(logit_j)).
inline double nota_score(const Vector& logits) {
  const double mx = logits.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((logits.array() - mx).exp().sum());
}

inline int argmax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

/// Predicted relation index, or -1 (NOTA) when the score is at or below alpha.
inline int decide(const Vector& logits, double alpha) {
  if (nota_score(logits) <= alpha) return -1;
  return argmax(logits);
}

struct EmbeddingGradient {
  Matrix grads;  // marked length x dim, d score / d input embedding
  Matrix inputs; // the input embeddings themselves
  double score = 0.0;
  Vector logits;
};

/// Gradient of the detection score w.r.t. every input embedding, from a
/// single forward-backward pass.
inline EmbeddingGradient grad_embeddings(const EncoderParams& p, const MarkedSequence& m) {
  ForwardPass f = forward(p, m);
  EncoderParams scratch = EncoderParams::zeros(p.config);
  const Vector dlogits = softmax_probs(f.logits);
  EmbeddingGradient out;
  out.grads = backward(p, f, dlogits, scratch);
  out.score = nota_score(f.logits);
  out.logits = f.logits;
  out.inputs = std::move(f.inputs);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline json to_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"num_relations", c.num_relations},
          {"dim", c.dim},               {"max_len", c.max_len},
          {"depth", c.depth},           {"readout", to_string(c.readout)},
          {"use_positions", c.use_positions}};
}

inline EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.num_relations = j.at("num_relations").get<int>();
  c.dim = j.at("dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.depth = j.at("depth").get<int>();
  c.readout = readout_from_string(j.at("readout").get<std::string>());
  c.use_positions = j.at("use_positions").get<bool>();
  c.check();
  return c;
}

/// {"version":1, "config":{...}, "tensors":{name:{"shape":[...],"data":[...]}}},
/// row-major. `extra` entries (vocabulary, relation names) are merged into config.
inline json checkpoint_to_json(const EncoderParams& p, const json& extra = json::object()) {
  json cfg = to_json(p.config);
  for (const auto& [k, v] : extra.items()) cfg[k] = v;
  json tensors = json::object();
  p.for_each_tensor([&](const std::string& name, const auto& t) {
    json shape = t.cols() == 1 && t.ColsAtCompileTime == 1 ? json::array({t.rows()})
                                                          : json::array({t.rows(), t.cols()});
    tensors[name] = {{"shape", shape},
                     {"data", std::vector<double>(t.data(), t.data() + t.size())}};
  });
  return {{"version", 1}, {"config", cfg}, {"tensors", tensors}};
}

inline EncoderParams checkpoint_from_json(const json& j) {
  if (j.value("version", 0) != 1) throw ParseError("unsupported checkpoint version");
  EncoderParams p = EncoderParams::zeros(encoder_config_from_json(j.at("config")));
  const json& tensors = j.at("tensors");
  p.for_each_tensor([&](const std::string& name, auto& t) {
    if (!tensors.contains(name)) throw ParseError("checkpoint missing tensor " + name);
    const auto data = tensors[name].at("data").template get<std::vector<double>>();
    if (data.size() != static_cast<size_t>(t.size())) {
      throw ParseError("checkpoint tensor " + name + " has wrong size");
    }
    std::copy(data.begin(), data.end(), t.data());
  });
  return p;
}

}  // namespace osre
