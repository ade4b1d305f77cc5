#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osre/corpus.hpp"
#include "osre/encoder.hpp"
#include "osre/synthesis.hpp"

namespace osre {

struct TrainConfig {
  // learning
  int batch_size = 16;
  double beta = 0.05;
  int epochs = 20;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  bool use_negatives = true;
  SynthesisConfig synthesis;
  // encoder
  int dim = 32;
  int max_len = 64;
  int depth = 1;
  Readout readout = Readout::kMarkers;
  bool use_positions = true;
  double init_scale = 0.08;
  // corpus statistics
  int min_count = 1;
  int banlist_k = -1;  // negative selects default_banlist_k

  void check() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (beta < 0) throw ConfigError("beta must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(lr > 0)) throw ConfigError("lr must be positive");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    synthesis.check();
  }
};

inline json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"beta", c.beta},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"use_negatives", c.use_negatives},
          {"epsilon", c.synthesis.epsilon},
          {"mode", to_string(c.synthesis.mode)},
          {"use_attribution", c.synthesis.use_attribution},
          {"use_tfidf", c.synthesis.use_tfidf},
          {"use_dp", c.synthesis.use_dp},
          {"iterative", c.synthesis.iterative},
          {"sigma", c.synthesis.sigma},
          {"dim", c.dim},
          {"max_len", c.max_len},
          {"depth", c.depth},
          {"readout", to_string(c.readout)},
          {"use_positions", c.use_positions},
          {"init_scale", c.init_scale},
          {"min_count", c.min_count},
          {"banlist_k", c.banlist_k}};
}

/// Applies the fields present in a flat JSON object on top of `base`.
/// Unknown keys are rejected unless listed in `passthrough`.
inline TrainConfig apply_overrides(TrainConfig c, const json& j,
                                   const std::vector<std::string>& passthrough = {}) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "beta") c.beta = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "adam_eps") c.adam_eps = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "use_negatives") c.use_negatives = v.get<bool>();
      else if (key == "epsilon") c.synthesis.epsilon = v.get<double>();
      else if (key == "mode") c.synthesis.mode = synthesis_mode_from_string(v.get<std::string>());
      else if (key == "use_attribution") c.synthesis.use_attribution = v.get<bool>();
      else if (key == "use_tfidf") c.synthesis.use_tfidf = v.get<bool>();
      else if (key == "use_dp") c.synthesis.use_dp = v.get<bool>();
      else if (key == "iterative") c.synthesis.iterative = v.get<bool>();
      else if (key == "sigma") c.synthesis.sigma = v.get<double>();
      else if (key == "dim") c.dim = v.get<int>();
      else if (key == "max_len") c.max_len = v.get<int>();
      else if (key == "depth") c.depth = v.get<int>();
      else if (key == "readout") c.readout = readout_from_string(v.get<std::string>());
      else if (key == "use_positions") c.use_positions = v.get<bool>();
      else if (key == "init_scale") c.init_scale = v.get<double>();
      else if (key == "min_count") c.min_count = v.get<int>();
      else if (key == "banlist_k") c.banlist_k = v.get<int>();
      else if (std::find(passthrough.begin(), passthrough.end(), key) == passthrough.end()) {
        throw ConfigError("unknown config field " + key);
      }
    } catch (const json::exception&) {
      throw ConfigError("config field " + key + " has the wrong type");
    }
  }
  c.check();
  return c;
}

// ---------------------------------------------------------------------------
// Losses

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Mean of -log p(y_i | x_i).
inline double cls_loss(std::span<const Vector> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw ValidationError("probs and labels differ in length");
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) total -= std::log(probs[i](labels[i]));
  return total / static_cast<double>(probs.size());
}

/// -(1/B) sum log sigma(s_known) - (1/B) sum log(1 - sigma(s_neg)).
inline double nota_loss(std::span<const double> s_known, std::span<const double> s_neg) {
  double known = 0.0;
  for (double s : s_known) known -= log_sigmoid(s);
  double neg = 0.0;
  for (double s : s_neg) neg -= log_sigmoid(-s);
  const double b = static_cast<double>(std::max<size_t>(s_known.size(), 1));
  return known / b + neg / b;
}

inline double total_loss(double l_cls, double l_nota, double beta) { return l_cls + beta * l_nota; }

/// Mean score over knowns minus mean score over negatives.
inline double delta_s(std::span<const double> s_known, std::span<const double> s_neg) {
  if (s_known.empty() || s_neg.empty()) throw ValidationError("delta_s needs non-empty batches");
  const double a = std::accumulate(s_known.begin(), s_known.end(), 0.0) / static_cast<double>(s_known.size());
  const double b = std::accumulate(s_neg.begin(), s_neg.end(), 0.0) / static_cast<double>(s_neg.size());
  return a - b;
}

inline double delta_s(const EncoderParams& p, std::span<const EncodedInstance> known,
                      std::span<const NegativeInstance> negatives) {
  std::vector<double> sk, sn;
  for (const auto& k : known) sk.push_back(nota_score(forward(p, mark(k)).logits));
  for (const auto& n : negatives) sn.push_back(negative_score(p, n));
  return delta_s(sk, sn);
}

struct BatchLoss {
  double l_cls = 0.0;
  double l_nota = 0.0;
  double loss = 0.0;
  std::optional<double> delta_s;
};

/// L = L_cls + beta * L_NOTA over a known batch and its negatives, with the
/// gradient w.r.t. every parameter accumulated into `grads`. With no
/// negatives only the known half of L_NOTA is used.
inline BatchLoss batch_loss(const EncoderParams& p, std::span<const EncodedInstance> known,
                            std::span<const NegativeInstance> negatives, double beta,
                            EncoderParams* grads) {
  if (known.empty()) throw ValidationError("empty batch");
  const double inv_b = 1.0 / static_cast<double>(known.size());
  BatchLoss out;
  std::vector<double> sk, sn;
  for (const auto& inst : known) {
    if (inst.label < 0) throw ValidationError("known batch contains a NOTA label");
    const MarkedSequence m = mark(inst);
    const ForwardPass f = forward(p, m);
    const Vector probs = softmax_probs(f.logits);
    const double s = nota_score(f.logits);
    out.l_cls -= std::log(probs(inst.label)) * inv_b;
    out.l_nota -= log_sigmoid(s) * inv_b;
    sk.push_back(s);
    if (grads) {
      // d(-log p_y)/dz = p - onehot(y); d(-log sigma(s))/dz = -(1 - sigma(s)) p
      Vector dz = probs;
      dz(inst.label) -= 1.0;
      dz += -beta * sigmoid(-s) * probs;
      dz *= inv_b;
      const Matrix dx = backward(p, f, dz, *grads);
      accumulate_token_grads(m.ids, dx, *grads);
    }
  }
  for (const auto& neg : negatives) {
    // d(-log(1 - sigma(s)))/dz = sigma(s) p
    if (neg.is_representation()) {
      const Vector z = class_logits(p, *neg.representation);
      const double s = nota_score(z);
      out.l_nota -= log_sigmoid(-s) * inv_b;
      sn.push_back(s);
      if (grads) {
        const Vector dz = beta * sigmoid(s) * softmax_probs(z) * inv_b;
        grads->w_cls.noalias() += dz * neg.representation->transpose();
        grads->b_cls += dz;
      }
      continue;
    }
    const MarkedSequence m = mark(neg.instance);
    const ForwardPass f = forward(p, m);
    const double s = nota_score(f.logits);
    out.l_nota -= log_sigmoid(-s) * inv_b;
    sn.push_back(s);
    if (grads) {
      const Vector dz = beta * sigmoid(s) * softmax_probs(f.logits) * inv_b;
      const Matrix dx = backward(p, f, dz, *grads);
      accumulate_token_grads(m.ids, dx, *grads);
    }
  }
  out.loss = total_loss(out.l_cls, out.l_nota, beta);
  if (!sn.empty()) out.delta_s = delta_s(sk, sn);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

struct AdamState {
  EncoderParams m;
  EncoderParams v;
  long step = 0;

  explicit AdamState(const EncoderConfig& c) : m(EncoderParams::zeros(c)), v(EncoderParams::zeros(c)) {}
};

namespace detail {

template <typename F>
void zip_tensors(EncoderParams& a, const EncoderParams& b, EncoderParams& c, EncoderParams& d, F&& f) {
  std::vector<std::pair<double*, Eigen::Index>> ta, tc, td;
  std::vector<std::pair<const double*, Eigen::Index>> tb;
  a.for_each_tensor([&](const std::string&, auto& t) { ta.emplace_back(t.data(), t.size()); });
  b.for_each_tensor([&](const std::string&, const auto& t) { tb.emplace_back(t.data(), t.size()); });
  c.for_each_tensor([&](const std::string&, auto& t) { tc.emplace_back(t.data(), t.size()); });
  d.for_each_tensor([&](const std::string&, auto& t) { td.emplace_back(t.data(), t.size()); });
  if (ta.size() != tb.size() || ta.size() != tc.size() || ta.size() != td.size()) {
    throw ValidationError("parameter and gradient shapes differ");
  }
  for (size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].second != tb[i].second || ta[i].second != tc[i].second || ta[i].second != td[i].second) {
      throw ValidationError("parameter and gradient shapes differ");
    }
    for (Eigen::Index k = 0; k < ta[i].second; ++k) {
      f(ta[i].first[k], tb[i].first[k], tc[i].first[k], td[i].first[k]);
    }
  }
}

}  // namespace detail

/// One bias-corrected adaptive-moment update.
inline void optimizer_step(EncoderParams& params, const EncoderParams& grads, AdamState& state,
                           const AdamConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  detail::zip_tensors(params, grads, state.m, state.v, [&](double& w, double g, double& m, double& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    w -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w);
  });
}

// ---------------------------------------------------------------------------
// Training loop

struct HistoryRecord {
  long step = 0;
  int epoch = 0;
  double l_cls = 0.0;
  double l_nota = 0.0;
  double loss = 0.0;
  std::optional<double> delta_s;
};

inline json to_json(const HistoryRecord& r) {
  return {{"step", r.step},
          {"epoch", r.epoch},
          {"l_cls", r.l_cls},
          {"l_nota", r.l_nota},
          {"loss", r.loss},
          {"delta_s", r.delta_s ? json(*r.delta_s) : json(nullptr)}};
}

using TrainHistory = std::vector<HistoryRecord>;

/// Everything a trained model needs at inference time.
struct TrainedModel {
  EncoderParams params;
  Vocabulary vocab;
  std::vector<std::string> relations;

  json checkpoint() const {
    return checkpoint_to_json(params, {{"vocab", vocab.tokens()}, {"relations", relations}});
  }

  static TrainedModel from_checkpoint(const json& j) {
    TrainedModel m{checkpoint_from_json(j), Vocabulary::from_full_list(
                                                j.at("config").at("vocab").get<std::vector<std::string>>()),
                   j.at("config").at("relations").get<std::vector<std::string>>()};
    if (m.vocab.size() != m.params.config.vocab_size ||
        static_cast<int>(m.relations.size()) != m.params.config.num_relations) {
      throw ParseError("checkpoint vocabulary or relation list does not match tensor shapes");
    }
    return m;
  }

  EncodedInstance encode(const RelationInstance& inst) const {
    return encode_instance(inst, vocab, relations);
  }
};

/// Corpus statistics computed once from the whole training set.
struct TrainingStatistics {
  Vocabulary vocab;
  std::vector<std::string> relations;
  TfIdfTable tfidf;
  BanList banlist;
};

inline TrainingStatistics training_statistics(const std::vector<RelationInstance>& train,
                                              const TrainConfig& cfg) {
  Vocabulary vocab = build_vocab(train, cfg.min_count);
  auto relations = known_relations(train);
  TfIdfTable table = compute_tfidf(train, vocab);
  const int k = cfg.banlist_k >= 0 ? cfg.banlist_k : default_banlist_k(vocab.size());
  BanList ban = build_banlist(table, k);
  return {std::move(vocab), std::move(relations), std::move(table), std::move(ban)};
}

struct TrainResult {
  TrainedModel model;
  TrainHistory history;
};

/// Called once per step with the dataset indices of the batch and the
/// negatives used for it.
using NegativeObserver =
    std::function<void(long step, const std::vector<size_t>& indices, const std::vector<NegativeInstance>&)>;

/// Alternates a synthesis step (negatives from the current parameters) and a
/// learning step (one joint update on the batch and its negatives).
inline TrainResult train(const TrainConfig& cfg, const std::vector<RelationInstance>& train_set,
                         const NegativeObserver& observe = nullptr) {
  cfg.check();
  if (train_set.empty()) throw ValidationError("training set is empty");
  const TrainingStatistics stats = training_statistics(train_set, cfg);
  const auto data = encode_all(train_set, stats.vocab, stats.relations);

  EncoderConfig ec;
  ec.vocab_size = stats.vocab.size();
  ec.num_relations = static_cast<int>(stats.relations.size());
  ec.dim = cfg.dim;
  ec.max_len = cfg.max_len;
  ec.depth = cfg.depth;
  ec.readout = cfg.readout;
  ec.use_positions = cfg.use_positions;
  EncoderParams params = EncoderParams::init(ec, cfg.seed, cfg.init_scale);

  AdamState adam(ec);
  const AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 noise_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::map<size_t, NegativeInstance> frozen;  // non-iterative synthesis cache

  TrainHistory history;
  EncoderParams grads = EncoderParams::zeros(ec);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      std::vector<EncodedInstance> batch;
      for (size_t i = begin; i < end; ++i) batch.push_back(data[order[i]]);

      std::vector<NegativeInstance> negatives;
      if (cfg.use_negatives) {
        if (cfg.synthesis.iterative) {
          negatives = synthesize_batch(params, batch, stats.tfidf, stats.banlist, cfg.synthesis, noise_rng);
        } else {
          for (size_t i = begin; i < end; ++i) {
            auto it = frozen.find(order[i]);
            if (it == frozen.end()) {
              const EncodedInstance& src = data[order[i]];
              auto one = synthesize_batch(params, std::span<const EncodedInstance>(&src, 1), stats.tfidf,
                                          stats.banlist, cfg.synthesis, noise_rng);
              it = frozen.emplace(order[i], std::move(one.front())).first;
            }
            negatives.push_back(it->second);
          }
        }
      }

      if (observe) observe(step, std::vector<size_t>(order.begin() + static_cast<long>(begin),
                                                     order.begin() + static_cast<long>(end)),
                           negatives);
      grads.set_zero();
      const BatchLoss bl = batch_loss(params, batch, negatives, cfg.beta, &grads);
      optimizer_step(params, grads, adam, adam_cfg);
      history.push_back({step++, epoch, bl.l_cls, bl.l_nota, bl.loss, bl.delta_s});
    }
  }
  return {TrainedModel{std::move(params), stats.vocab, stats.relations}, std::move(history)};
}

}  // namespace osre
