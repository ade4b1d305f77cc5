#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "osre/corpus.hpp"
#include "osre/encoder.hpp"

namespace osre {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Largest alpha in {-inf} U scores such that the fraction of scores strictly
/// above alpha is at least `tpr`.
inline double calibrate_alpha(std::span<const double> scores, double tpr = 0.95) {
  if (scores.empty()) throw ValidationError("cannot calibrate on an empty score set");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  // Minimum count that must lie strictly above alpha; the small slack absorbs
  // representation error in tpr * n (0.95 * 20 must read as 19).
  const double need = std::ceil(tpr * static_cast<double>(n) - 1e-9);
  double alpha = kNegInf;
  for (size_t i = 0; i < n; ++i) {
    const double cand = sorted[i];
    const size_t above = static_cast<size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), cand));
    if (static_cast<double>(above) >= need) alpha = cand;
    else break;
  }
  return alpha;
}

/// Probability that a known score beats a NOTA score, ties counted 1/2.
inline double auroc(std::span<const double> known, std::span<const double> nota) {
  if (known.empty() || nota.empty()) throw ValidationError("AUROC needs scores on both sides");
  struct Item {
    double score;
    bool is_known;
  };
  std::vector<Item> all;
  all.reserve(known.size() + nota.size());
  for (double s : known) all.push_back({s, true});
  for (double s : nota) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (size_t k = i; k < j; ++k) {
      if (all[k].is_known) rank_sum += avg_rank;
    }
    i = j;
  }
  const double nk = static_cast<double>(known.size());
  const double nn = static_cast<double>(nota.size());
  return (rank_sum - nk * (nk + 1.0) / 2.0) / (nk * nn);
}

/// Fraction of NOTA scores strictly above the 95%-TPR threshold of the known scores.
inline double fpr_at_95_tpr(std::span<const double> known, std::span<const double> nota) {
  if (known.empty() || nota.empty()) throw ValidationError("FPR95 needs scores on both sides");
  const double alpha = calibrate_alpha(known, 0.95);
  const auto above = std::count_if(nota.begin(), nota.end(), [&](double s) { return s > alpha; });
  return static_cast<double>(above) / static_cast<double>(nota.size());
}

struct MetricsReport {
  double acc_open = 0.0;
  double acc_known = 0.0;
  std::optional<double> auroc;
  std::optional<double> fpr95;
  double alpha = kNegInf;
  std::optional<double> delta_s;
};

/// Thresholds are written as numbers, except -inf which becomes the string "-inf".
inline json threshold_to_json(double alpha) {
  if (std::isinf(alpha)) return alpha < 0 ? json("-inf") : json("inf");
  return alpha;
}

inline double threshold_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return kNegInf;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ParseError("bad threshold value " + s);
  }
  return j.get<double>();
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const MetricsReport& r) {
  return {{"acc_open", r.acc_open},     {"acc_known", r.acc_known},
          {"auroc", opt_json(r.auroc)}, {"fpr95", opt_json(r.fpr95)},
          {"alpha", threshold_to_json(r.alpha)}, {"delta_s", opt_json(r.delta_s)}};
}

struct ScoredInstance {
  int label = -1;  // -1 = NOTA
  Vector logits;
  double score = 0.0;
};

inline std::vector<ScoredInstance> score_dataset(const EncoderParams& p,
                                                 std::span<const EncodedInstance> data) {
  std::vector<ScoredInstance> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    ScoredInstance s;
    s.label = inst.label;
    s.logits = forward(p, mark(inst)).logits;
    s.score = nota_score(s.logits);
    out.push_back(std::move(s));
  }
  return out;
}

/// Detection scores of the instances whose gold label is a known relation.
inline std::vector<double> known_scores(std::span<const ScoredInstance> scored) {
  std::vector<double> out;
  for (const auto& s : scored) {
    if (s.label >= 0) out.push_back(s.score);
  }
  return out;
}

inline MetricsReport evaluate_scored(std::span<const ScoredInstance> scored, double alpha) {
  MetricsReport r;
  r.alpha = alpha;
  std::vector<double> known, nota;
  size_t correct_open = 0, correct_known = 0;
  for (const auto& s : scored) {
    const int pred = decide(s.logits, alpha);
    if (pred == s.label) ++correct_open;
    if (s.label >= 0) {
      known.push_back(s.score);
      if (argmax(s.logits) == s.label) ++correct_known;
    } else {
      nota.push_back(s.score);
    }
  }
  if (!scored.empty()) r.acc_open = static_cast<double>(correct_open) / static_cast<double>(scored.size());
  if (!known.empty()) r.acc_known = static_cast<double>(correct_known) / static_cast<double>(known.size());
  if (!known.empty() && !nota.empty()) {
    r.auroc = auroc(known, nota);
    r.fpr95 = fpr_at_95_tpr(known, nota);
  }
  return r;
}

/// Open-set accuracy over n+1 classes at `alpha`, known-only accuracy (alpha
/// ignored), and the threshold-free AUROC / FPR95 of the detection score.
inline MetricsReport evaluate(const EncoderParams& p, std::span<const EncodedInstance> data, double alpha) {
  const auto scored = score_dataset(p, data);
  return evaluate_scored(scored, alpha);
}

}  // namespace osre
