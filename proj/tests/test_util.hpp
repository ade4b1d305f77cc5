#pragma once

// Independent oracles used by the unit and acceptance suites. Nothing here
// calls the analytic backward pass or the library's metric code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "osre/osre.hpp"

namespace osre::testing {

/// Random encoder config within the tiny gradient-check envelope.
inline EncoderConfig random_tiny_config(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  EncoderConfig c;
  c.vocab_size = Vocabulary::kReservedCount + pick(2, 6);
  c.num_relations = pick(1, 3);
  c.dim = pick(2, 8);
  c.max_len = 12;  // 8 tokens plus four markers
  c.depth = pick(0, 2);
  c.readout = static_cast<Readout>(pick(0, 2));
  c.use_positions = pick(0, 1) == 1;
  return c;
}

/// Parameters large enough that attention and tanh are well away from linear.
inline EncoderParams random_params(const EncoderConfig& c, std::mt19937_64& rng, double scale = 0.6) {
  EncoderParams p = EncoderParams::zeros(c);
  std::uniform_real_distribution<double> u(-scale, scale);
  p.for_each_tensor([&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  });
  return p;
}

/// Random instance of length 2..max_len with two disjoint single- or
/// two-token entity spans and regular (non-reserved) token ids.
inline EncodedInstance random_instance(int vocab_size, int num_relations, std::mt19937_64& rng,
                                       int max_len = 8) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  EncodedInstance e;
  const int n = pick(2, max_len);
  for (int i = 0; i < n; ++i) e.ids.push_back(pick(Vocabulary::kReservedCount, vocab_size - 1));
  const int a = pick(0, n - 2);
  const int b = pick(a + 1, n - 1);
  e.head = {a, std::min(a + pick(1, 2), b)};
  e.tail = {b, std::min(b + pick(1, 2), n)};
  if (pick(0, 1)) std::swap(e.head, e.tail);
  e.label = pick(0, num_relations - 1);
  return e;
}

/// Central difference of f at x along one coordinate.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double orig = x;
  x = orig + h;
  const double up = f();
  x = orig - h;
  const double down = f();
  x = orig;
  return (up - down) / (2.0 * h);
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps rounding noise on
/// gradients that are analytically ~0 from dominating the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  size_t checked = 0;

  void add(double analytic, double numeric, const std::string& where) {
    const double r = relative_error(analytic, numeric);
    ++checked;
    if (r > max_rel_error || !std::isfinite(r)) {
      max_rel_error = std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
      worst = where;
    }
  }
};

/// Compares every entry of `analytic` (params-shaped) with central
/// differences of `objective` evaluated on `params`.
inline void check_param_gradients(EncoderParams& params, const EncoderParams& analytic,
                                  const std::function<double()>& objective, GradCheck& out) {
  std::vector<std::pair<std::string, std::pair<double*, Eigen::Index>>> live;
  params.for_each_tensor([&](const std::string& name, auto& t) { live.push_back({name, {t.data(), t.size()}}); });
  std::vector<const double*> ref;
  analytic.for_each_tensor([&](const std::string&, const auto& t) { ref.push_back(t.data()); });
  for (size_t k = 0; k < live.size(); ++k) {
    auto [ptr, size] = live[k].second;
    for (Eigen::Index i = 0; i < size; ++i) {
      const double num = central_difference(objective, ptr[i]);
      out.add(ref[k][i], num, live[k].first + "[" + std::to_string(i) + "]");
    }
  }
}

/// Exhaustive argmax of grad . E_j over allowed tokens, lowest index on ties.
inline TokenId brute_force_misleading(const Vector& grad, const Matrix& emb, const std::vector<bool>& banned,
                                      TokenId original) {
  TokenId best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (TokenId j = 0; j < emb.rows(); ++j) {
    if (banned[static_cast<size_t>(j)] || j == original) continue;
    double s = 0.0;
    for (Eigen::Index k = 0; k < emb.cols(); ++k) s += grad(k) * emb(j, k);
    if (best < 0 || s > best_score) {
      best = j;
      best_score = s;
    }
  }
  return best;
}

/// Pairwise AUROC: wins plus half ties over all known/NOTA pairs.
inline double pairwise_auroc(const std::vector<double>& known, const std::vector<double>& nota) {
  double wins = 0.0;
  for (double k : known) {
    for (double n : nota) wins += k > n ? 1.0 : (k == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(known.size()) * static_cast<double>(nota.size()));
}

/// Threshold enumeration: try every candidate and keep the largest that
/// leaves at least 95% of known scores strictly above it.
inline double enumerated_fpr95(const std::vector<double>& known, const std::vector<double>& nota) {
  std::vector<double> candidates = known;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    size_t above = 0;
    for (double k : known) above += k > c ? 1 : 0;
    if (static_cast<double>(above) * 100.0 >= 95.0 * static_cast<double>(known.size()) && c > best) best = c;
  }
  size_t fp = 0;
  for (double n : nota) fp += n > best ? 1 : 0;
  return static_cast<double>(fp) / static_cast<double>(nota.size());
}

}  // namespace osre::testing
