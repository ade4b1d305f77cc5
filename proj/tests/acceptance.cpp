// Acceptance checks. Prints one PASS/FAIL line per check and exits non-zero
// if any check fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "osre/osre.hpp"
#include "test_util.hpp"

using namespace osre;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << id << " " << detail << std::endl;
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double x) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::scientific << x;
  return ss.str();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << std::fixed << x;
  return ss.str();
}

void merge(testing::GradCheck& into, const testing::GradCheck& part, const std::string& prefix) {
  if (part.max_rel_error > into.max_rel_error) {
    into.max_rel_error = part.max_rel_error;
    into.worst = prefix + part.worst;
  }
  into.checked += part.checked;
}

// 1. Analytic gradients of the score and of the total loss against central
// differences, for parameters and input embeddings.
void check_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  testing::GradCheck gc;
  const int configs = 120;
  for (int trial = 0; trial < configs; ++trial) {
    const auto c = testing::random_tiny_config(rng);
    auto p = testing::random_params(c, rng);
    const auto inst = testing::random_instance(c.vocab_size, c.num_relations, rng);
    const auto m = mark(inst);
    const std::string tag = "config " + std::to_string(trial) + " ";

    // score w.r.t. parameters
    {
      const auto f = forward(p, m);
      auto grads = EncoderParams::zeros(c);
      const Matrix dx = backward(p, f, softmax_probs(f.logits), grads);
      accumulate_token_grads(m.ids, dx, grads);
      testing::GradCheck local;
      testing::check_param_gradients(p, grads, [&] { return nota_score(forward(p, m).logits); }, local);
      merge(gc, local, tag + "score ");

      // score w.r.t. input embeddings
      Matrix inputs = gather_embeddings(p, m.ids);
      for (Eigen::Index i = 0; i < inputs.size(); ++i) {
        const double num = testing::central_difference(
            [&] { return nota_score(forward(p, inputs, m.head_marker, m.tail_marker).logits); }, inputs.data()[i]);
        gc.add(dx.data()[i], num, tag + "score input[" + std::to_string(i) + "]");
      }
    }

    // total loss with token-level or representation negatives
    const bool gaussian = trial % 2 == 1;
    std::vector<EncodedInstance> known = {inst, testing::random_instance(c.vocab_size, c.num_relations, rng)};
    std::vector<NegativeInstance> negs;
    for (int k = 0; k < 2; ++k) {
      NegativeInstance n;
      n.instance = testing::random_instance(c.vocab_size, c.num_relations, rng);
      n.instance.label = -1;
      if (gaussian) n.representation = gaussian_negative(2 * c.dim, rng, 1.0);
      negs.push_back(std::move(n));
    }
    const double beta = 0.5;
    auto grads = EncoderParams::zeros(c);
    batch_loss(p, known, negs, beta, &grads);
    testing::GradCheck local;
    testing::check_param_gradients(p, grads, [&] { return batch_loss(p, known, negs, beta, nullptr).loss; }, local);
    merge(gc, local, tag + (gaussian ? "loss/gaussian " : "loss/token "));

    // total loss w.r.t. the input embeddings of one known instance
    {
      const auto mk = mark(known[0]);
      Matrix inputs = gather_embeddings(p, mk.ids);
      auto loss_of = [&](const Matrix& x) {
        const auto f = forward(p, x, mk.head_marker, mk.tail_marker);
        const Vector probs = softmax_probs(f.logits);
        const double s = nota_score(f.logits);
        return -std::log(probs(known[0].label)) - beta * log_sigmoid(s);
      };
      const auto f = forward(p, inputs, mk.head_marker, mk.tail_marker);
      const Vector probs = softmax_probs(f.logits);
      Vector dz = probs;
      dz(known[0].label) -= 1.0;
      dz += -beta * sigmoid(-nota_score(f.logits)) * probs;
      auto scratch = EncoderParams::zeros(c);
      const Matrix dx = backward(p, f, dz, scratch);
      for (Eigen::Index i = 0; i < inputs.size(); ++i) {
        const double num = testing::central_difference([&] { return loss_of(inputs); }, inputs.data()[i]);
        gc.add(dx.data()[i], num, tag + "loss input[" + std::to_string(i) + "]");
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, gc.max_rel_error <= 1e-4 && secs < 60.0,
         "gradient check: " + std::to_string(configs) + " configs, " + std::to_string(gc.checked) +
             " entries, max rel err " + sci(gc.max_rel_error) + " (" + gc.worst + "), " + fmt(secs, 1) +
             "s");
}

// 2. For a linear score the first-order term equals the removal effect.
void check_linear_attribution() {
  std::mt19937_64 rng(77);
  EncoderConfig c;
  c.vocab_size = 40;
  c.num_relations = 1;
  c.dim = 6;
  c.max_len = 16;
  c.depth = 0;
  c.readout = Readout::kSum;
  c.use_positions = false;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto p = testing::random_params(c, rng, 1.0);
    const auto inst = testing::random_instance(c.vocab_size, 1, rng);
    const auto m = mark(inst);
    const auto raw = first_order_terms(grad_embeddings(p, m), m);
    for (int i = 0; i < inst.size(); ++i) {
      worst = std::max(worst, std::abs(raw[static_cast<size_t>(i)] - counterfactual_contribution(p, inst, i)));
    }
  }
  report(2, worst <= 1e-10, "linear attribution: 100 instances, max abs diff " + sci(worst));
}

// 3. Misleading-token search against exhaustive enumeration.
void check_misleading_token() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  int agree = 0;
  for (int t = 0; t < 100; ++t) {
    const int v = std::uniform_int_distribution<int>(Vocabulary::kReservedCount + 2, 500)(rng);
    const int d = std::uniform_int_distribution<int>(1, 16)(rng);
    Matrix emb(v, d);
    for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = g(rng);
    if (t % 4 == 0) {
      for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = std::round(emb.data()[i]);  // force ties
    }
    Vector grad(d);
    for (int i = 0; i < d; ++i) grad(i) = t % 4 == 0 ? std::round(g(rng)) : g(rng);
    BanList ban(v);
    std::vector<bool> banned(static_cast<size_t>(v), false);
    // The last token stays admissible so that a replacement always exists.
    for (int j = 0; j + 1 < v; ++j) {
      if (j < Vocabulary::kReservedCount || std::uniform_real_distribution<double>(0, 1)(rng) < 0.2) {
        ban.add(j);
        banned[static_cast<size_t>(j)] = true;
      }
    }
    const TokenId original = std::uniform_int_distribution<int>(0, v - 2)(rng);
    if (misleading_token(grad, emb, ban, original) == testing::brute_force_misleading(grad, emb, banned, original)) {
      ++agree;
    }
  }
  report(3, agree == 100, "misleading token: " + std::to_string(agree) + "/100 agree with exhaustive search");
}

// 4. Metric hand examples and invariants.
void check_metrics() {
  bool ok = true;
  std::vector<double> k20;
  for (int i = 1; i <= 20; ++i) k20.push_back(i);
  ok &= calibrate_alpha(k20) == 1.0;
  ok &= std::abs(fpr_at_95_tpr(k20, std::vector<double>{0.5, 2.0, 3.0}) - 2.0 / 3.0) < 1e-15;
  ok &= auroc(std::vector<double>{2.0, 3.0}, std::vector<double>{1.0, 4.0}) == 0.5;
  Vector z(2);
  z << 5.0, 1.0;
  ok &= decide(z, 0.0) == 0 && decide(z, nota_score(z)) == -1;
  Vector z2(2);
  z2 << 1.0, 2.0;
  ok &= std::abs(nota_score(z2) - 2.313261687518223) < 1e-14;

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> k(1 + t % 37), n(1 + t % 19), kt, nt;
    const bool discrete = t % 3 == 0;
    for (auto& x : k) x = discrete ? std::round(g(rng) * 2) : g(rng);
    for (auto& x : n) x = discrete ? std::round(g(rng) * 2) : g(rng);
    for (double x : k) kt.push_back(std::exp(0.5 * x) + 2.0);
    for (double x : n) nt.push_back(std::exp(0.5 * x) + 2.0);
    const double a = auroc(k, n);
    worst = std::max({worst, std::abs(a + auroc(n, k) - 1.0), std::abs(a - auroc(kt, nt)),
                      std::abs(a - testing::pairwise_auroc(k, n))});
  }
  ok &= worst < 1e-12;
  report(4, ok, "metrics: hand examples, 1000 random sets, max invariant deviation " + sci(worst));
}

double mean_of(const std::vector<MetricsReport>& rs, std::optional<double> MetricsReport::*field) {
  std::vector<double> v;
  for (const auto& r : rs) v.push_back(*(r.*field));
  return mean_std(v).mean;
}

double mean_acc_known(const std::vector<MetricsReport>& rs) {
  std::vector<double> v;
  for (const auto& r : rs) v.push_back(r.acc_known);
  return mean_std(v).mean;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

// 5-9. Benchmark trends, ratio sweep and reproducibility.
void check_benchmark() {
  const fs::path base = fs::temp_directory_path() / ("osre_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  const auto preset = benchmark_preset();

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_experiment(preset, (base / "a").string());
  const double secs = seconds_since(t0);

  const auto adv = result.reports("adversarial");
  const auto bl = result.reports("baseline");
  const auto mask = result.reports("mask");
  const auto gauss = result.reports("gaussian");
  const double au_adv = mean_of(adv, &MetricsReport::auroc), au_bl = mean_of(bl, &MetricsReport::auroc);
  const double fpr_adv = mean_of(adv, &MetricsReport::fpr95), fpr_bl = mean_of(bl, &MetricsReport::fpr95);
  const double acc_adv = mean_acc_known(adv), acc_bl = mean_acc_known(bl);
  report(5, au_adv >= au_bl + 0.03 && fpr_adv <= fpr_bl - 0.03 && acc_adv >= acc_bl - 0.01 && secs < 300.0,
         "benchmark: AUROC " + fmt(au_adv) + " vs " + fmt(au_bl) + ", FPR95 " + fmt(fpr_adv) + " vs " + fmt(fpr_bl) +
             ", acc_known " + fmt(acc_adv) + " vs " + fmt(acc_bl) + ", " + fmt(secs, 1) + "s");

  const double au_mask = mean_of(mask, &MetricsReport::auroc);
  report(6, au_mask <= au_adv, "mask vs adversarial AUROC: " + fmt(au_mask) + " <= " + fmt(au_adv));

  const double ds_adv = mean_of(adv, &MetricsReport::delta_s), ds_g = mean_of(gauss, &MetricsReport::delta_s);
  report(7, ds_adv < ds_g, "final-epoch delta_s: adversarial " + fmt(ds_adv) + " < gaussian " + fmt(ds_g));

  ExperimentPreset sweep = preset;
  sweep.arms = {preset.arms.front()};
  const auto rows = sweep_epsilon(sweep, {0.05, 0.2, 0.6});
  const double lo = rows[0].fpr95.mean, mid = rows[1].fpr95.mean, hi = rows[2].fpr95.mean;
  report(8, mid <= std::min(lo, hi) + 0.01,
         "epsilon sweep FPR95: 0.05 -> " + fmt(lo) + ", 0.2 -> " + fmt(mid) + ", 0.6 -> " + fmt(hi));

  run_experiment(preset, (base / "b").string());
  const auto a = read_tree(base / "a");
  const auto b = read_tree(base / "b");
  report(9, !a.empty() && a == b, "reproducibility: " + std::to_string(a.size()) + " files byte-identical across runs");
  fs::remove_all(base);
}

}  // namespace

int main() {
  try {
    check_gradients();
    check_linear_attribution();
    check_misleading_token();
    check_metrics();
    check_benchmark();
  } catch (const std::exception& e) {
    std::cout << "FAIL error: " << e.what() << std::endl;
    return 1;
  }
  std::cout << "SKIP 10 secondary component not built here" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
