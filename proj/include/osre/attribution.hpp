#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "osre/corpus.hpp"
#include "osre/encoder.hpp"

namespace osre {

/// Which factors of I = a * t * dp are active; a disabled factor is all ones.
struct ImportanceSwitches {
  bool use_attribution = true;
  bool use_tfidf = true;
  bool use_dp = true;
};

/// Instance with token i removed; spans and dependency path are reindexed.
inline EncodedInstance remove_token(const EncodedInstance& inst, int i) {
  if (i < 0 || i >= inst.size()) throw ValidationError("position out of range");
  if (inst.size() <= 1) throw ValidationError("removing the only token would empty the sequence");
  EncodedInstance out = inst;
  out.ids.erase(out.ids.begin() + i);
  auto shift = [i](Span& s) {
    if (i < s.start) {
      --s.start;
      --s.end;
    } else if (i < s.end) {
      --s.end;
    }
  };
  shift(out.head);
  shift(out.tail);
  out.dep_path.clear();
  for (int p : inst.dep_path) {
    if (p == i) continue;
    out.dep_path.push_back(p > i ? p - 1 : p);
  }
  return out;
}

/// c(w_i, x) = s(x) - s(x without w_i), re-encoding the shorter sequence.
/// `i` indexes the unmarked instance, so markers can never be removed.
inline double counterfactual_contribution(const EncoderParams& p, const EncodedInstance& inst, int i) {
  const EncodedInstance reduced = remove_token(inst, i);
  const double full = nota_score(forward(p, mark(inst)).logits);
  const double without = nota_score(forward(p, mark(reduced)).logits);
  return full - without;
}

/// |raw_i| / sum_j |raw_j|; uniform when every raw score is zero.
inline std::vector<double> normalize_attribution(const std::vector<double>& raw) {
  std::vector<double> a(raw.size());
  double total = 0.0;
  for (double r : raw) total += std::abs(r);
  if (raw.empty()) return a;
  if (total == 0.0 || !std::isfinite(total)) {
    std::fill(a.begin(), a.end(), 1.0 / static_cast<double>(raw.size()));
    return a;
  }
  for (size_t i = 0; i < raw.size(); ++i) a[i] = std::abs(raw[i]) / total;
  return a;
}

/// First-order contributions grad_{w_i} s . w_i for every original
/// (unmarked) position, taken from one forward-backward pass.
inline std::vector<double> first_order_terms(const EmbeddingGradient& eg, const MarkedSequence& m) {
  std::vector<double> raw(m.marked_pos.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const int r = m.marked_pos[i];
    raw[i] = eg.grads.row(r).dot(eg.inputs.row(r));
  }
  return raw;
}

inline std::vector<double> attribution_scores(const EncoderParams& p, const EncodedInstance& inst) {
  const MarkedSequence m = mark(inst);
  return normalize_attribution(first_order_terms(grad_embeddings(p, m), m));
}

/// |x|/|T| on the dependency path T, 1 elsewhere (or everywhere when T is absent).
inline std::vector<double> dp_scores(const EncodedInstance& inst) {
  std::vector<double> dp(static_cast<size_t>(inst.size()), 1.0);
  if (inst.dep_path.empty()) return dp;
  const double boost = static_cast<double>(inst.size()) / static_cast<double>(inst.dep_path.size());
  for (int i : inst.dep_path) dp.at(static_cast<size_t>(i)) = boost;
  return dp;
}

inline std::vector<double> tfidf_scores(const TfIdfTable& table, const EncodedInstance& inst, int relation) {
  if (relation < 0 || relation >= table.num_relations()) {
    throw ValidationError("tf-idf lookup needs a known relation");
  }
  std::vector<double> t(static_cast<size_t>(inst.size()));
  for (int i = 0; i < inst.size(); ++i) t[static_cast<size_t>(i)] = table.at(inst.ids[static_cast<size_t>(i)], relation);
  return t;
}

inline std::vector<double> importance(const std::vector<double>& a, const std::vector<double>& t,
                                      const std::vector<double>& dp,
                                      const ImportanceSwitches& sw = {}) {
  if (a.size() != t.size() || a.size() != dp.size()) {
    throw ValidationError("importance factors have different lengths");
  }
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    out[i] = (sw.use_attribution ? a[i] : 1.0) * (sw.use_tfidf ? t[i] : 1.0) *
             (sw.use_dp ? dp[i] : 1.0);
  }
  return out;
}

/// Positions outside both entity spans.
inline std::vector<int> candidate_positions(const EncodedInstance& inst) {
  std::vector<int> c;
  for (int i = 0; i < inst.size(); ++i) {
    if (!inst.in_entity(i)) c.push_back(i);
  }
  return c;
}

inline int key_token_count(double epsilon, size_t candidates) {
  return std::max(1, static_cast<int>(std::lround(epsilon * static_cast<double>(candidates))));
}

/// Top max(1, round(eps * |candidates|)) candidates by importance, descending,
/// ties to the lower position.
inline std::vector<int> select_key_tokens(const std::vector<double>& imp, double epsilon,
                                          std::vector<int> candidates) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (candidates.empty()) throw ValidationError("no candidate tokens to substitute");
  std::sort(candidates.begin(), candidates.end());
  std::stable_sort(candidates.begin(), candidates.end(), [&](int x, int y) {
    return imp.at(static_cast<size_t>(x)) > imp.at(static_cast<size_t>(y));
  });
  candidates.resize(std::min(candidates.size(), static_cast<size_t>(key_token_count(epsilon, candidates.size()))));
  return candidates;
}

struct TokenImportance {
  double attribution = 0.0;
  double tfidf = 0.0;
  double dp = 1.0;
  double importance = 0.0;
  bool candidate = false;
  bool selected = false;
};

/// Full importance breakdown for one instance, plus the gradient pass it was
/// computed from so that substitution can reuse it.
struct ImportanceAnalysis {
  MarkedSequence marked;
  EmbeddingGradient gradient;
  std::vector<TokenImportance> tokens;
  std::vector<int> key_positions;  // in rank order
};

inline ImportanceAnalysis analyze_importance(const EncoderParams& p, const EncodedInstance& inst,
                                             const TfIdfTable& table, double epsilon,
                                             const ImportanceSwitches& sw = {}) {
  ImportanceAnalysis out;
  out.marked = mark(inst);
  out.gradient = grad_embeddings(p, out.marked);
  const auto a = normalize_attribution(first_order_terms(out.gradient, out.marked));
  const auto t = sw.use_tfidf ? tfidf_scores(table, inst, inst.label)
                              : std::vector<double>(static_cast<size_t>(inst.size()), 1.0);
  const auto dp = dp_scores(inst);
  const auto imp = importance(a, t, dp, sw);
  const auto cand = candidate_positions(inst);
  out.key_positions = select_key_tokens(imp, epsilon, cand);

  out.tokens.resize(static_cast<size_t>(inst.size()));
  for (size_t i = 0; i < out.tokens.size(); ++i) {
    out.tokens[i] = {a[i], t[i], dp[i], imp[i], false, false};
  }
  for (int c : cand) out.tokens[static_cast<size_t>(c)].candidate = true;
  for (int k : out.key_positions) out.tokens[static_cast<size_t>(k)].selected = true;
  return out;
}

}  // namespace osre
