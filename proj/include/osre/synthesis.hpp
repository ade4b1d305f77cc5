#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osre/attribution.hpp"
#include "osre/corpus.hpp"
#include "osre/encoder.hpp"

namespace osre {

enum class SynthesisMode { kAdversarial, kMask, kGaussian, kGaussianShift };

inline std::string to_string(SynthesisMode m) {
  switch (m) {
    case SynthesisMode::kAdversarial: return "adversarial";
    case SynthesisMode::kMask: return "mask";
    case SynthesisMode::kGaussian: return "gaussian";
    case SynthesisMode::kGaussianShift: return "gaussian_shift";
  }
  return "adversarial";
}

inline SynthesisMode synthesis_mode_from_string(const std::string& s) {
  if (s == "adversarial") return SynthesisMode::kAdversarial;
  if (s == "mask") return SynthesisMode::kMask;
  if (s == "gaussian") return SynthesisMode::kGaussian;
  if (s == "gaussian_shift") return SynthesisMode::kGaussianShift;
  throw ConfigError("unknown synthesis mode: " + s);
}

inline bool is_token_level(SynthesisMode m) {
  return m == SynthesisMode::kAdversarial || m == SynthesisMode::kMask;
}

struct SynthesisConfig {
  double epsilon = 0.2;
  SynthesisMode mode = SynthesisMode::kAdversarial;
  bool use_attribution = true;
  bool use_tfidf = true;
  bool use_dp = true;
  bool iterative = true;
  double sigma = 1.0;  // Gaussian scale in representation units

  ImportanceSwitches switches() const { return {use_attribution, use_tfidf, use_dp}; }

  void check() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  }
};

/// A synthesized NOTA instance: token-level for adversarial/mask modes,
/// representation-level for the Gaussian modes.
struct NegativeInstance {
  EncodedInstance instance;           // label is always -1
  std::vector<int> substituted;       // original-index positions, rank order
  std::optional<Vector> representation;

  bool is_representation() const { return representation.has_value(); }
};

/// argmax_j grad . E_j over tokens that are neither banned nor the original
/// token; ties go to the lowest token index.
inline TokenId misleading_token(const Eigen::Ref<const Vector>& grad, const Matrix& embeddings,
                                const BanList& banlist, TokenId original) {
  const Vector scores = embeddings * grad;
  TokenId best = -1;
  for (TokenId j = 0; j < static_cast<TokenId>(scores.size()); ++j) {
    if (j == original || banlist.contains(j)) continue;
    if (best < 0 || scores(j) > scores(best)) best = j;
  }
  if (best < 0) throw ConfigError("every vocabulary token is banned from substitution");
  return best;
}

/// Token-level negative: the key tokens of `inst` are replaced by misleading
/// tokens (adversarial) or [MASK] (mask). Length and entity spans are kept.
inline NegativeInstance synthesize_negative(const EncoderParams& p, const EncodedInstance& inst,
                                            const TfIdfTable& table, const BanList& banlist,
                                            const SynthesisConfig& cfg) {
  if (!is_token_level(cfg.mode)) throw ConfigError("Gaussian modes produce representation negatives");
  const ImportanceAnalysis an = analyze_importance(p, inst, table, cfg.epsilon, cfg.switches());
  NegativeInstance neg;
  neg.instance = inst;
  neg.instance.label = -1;
  neg.substituted = an.key_positions;
  for (int pos : an.key_positions) {
    const auto i = static_cast<size_t>(pos);
    TokenId replacement = Vocabulary::kMask;
    if (cfg.mode == SynthesisMode::kAdversarial) {
      const Vector grad = an.gradient.grads.row(an.marked.marked_pos[i]).transpose();
      replacement = misleading_token(grad, p.tok_emb, banlist, inst.ids[i]);
    }
    neg.instance.ids[i] = replacement;
  }
  return neg;
}

/// Gaussian: sigma * z. Gaussian-shift: anchor + sigma * z.
inline Vector gaussian_negative(int dim, std::mt19937_64& rng, double sigma,
                                const std::optional<Vector>& anchor = std::nullopt,
                                bool shift = false) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (shift && !anchor) throw ConfigError("gaussian_shift requires an anchor representation");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(dim);
  for (int i = 0; i < dim; ++i) z(i) = normal(rng);
  if (shift) {
    if (anchor->size() != dim) throw ValidationError("anchor has wrong dimension");
    return *anchor + sigma * z;
  }
  return sigma * z;
}

/// One negative per source instance, computed from the current parameters
/// without modifying them. The rng is only consumed by the Gaussian modes.
inline std::vector<NegativeInstance> synthesize_batch(const EncoderParams& p,
                                                      std::span<const EncodedInstance> batch,
                                                      const TfIdfTable& table, const BanList& banlist,
                                                      const SynthesisConfig& cfg, std::mt19937_64& rng) {
  if (batch.empty()) throw ValidationError("empty batch");
  std::vector<NegativeInstance> out;
  out.reserve(batch.size());
  for (const auto& inst : batch) {
    if (is_token_level(cfg.mode)) {
      out.push_back(synthesize_negative(p, inst, table, banlist, cfg));
      continue;
    }
    NegativeInstance neg;
    neg.instance = inst;
    neg.instance.label = -1;
    const bool shift = cfg.mode == SynthesisMode::kGaussianShift;
    std::optional<Vector> anchor;
    if (shift) anchor = encode(p, inst);
    neg.representation = gaussian_negative(2 * p.config.dim, rng, cfg.sigma, anchor, shift);
    out.push_back(std::move(neg));
  }
  return out;
}

/// Detection score of a negative under the current parameters.
inline double negative_score(const EncoderParams& p, const NegativeInstance& neg) {
  if (neg.is_representation()) return nota_score(class_logits(p, *neg.representation));
  return nota_score(forward(p, mark(neg.instance)).logits);
}

}  // namespace osre
