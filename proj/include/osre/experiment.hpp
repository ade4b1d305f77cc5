#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osre/corpus.hpp"
#include "osre/evaluation.hpp"
#include "osre/training.hpp"

namespace osre {

struct ExperimentArm {
  std::string name;
  json overrides = json::object();
};

/// A set of training arms run over a list of seeds on one synthetic split spec.
/// The seed drives both the generated corpus and the training run.
struct ExperimentPreset {
  std::string name = "experiment";
  SplitSpec data;
  json base = json::object();  // TrainConfig fields shared by all arms
  std::vector<ExperimentArm> arms;
  std::vector<std::uint64_t> seeds;

  void check() const {
    if (arms.empty()) throw ConfigError("preset has no arms");
    if (seeds.empty()) throw ConfigError("preset has no seeds");
  }

  TrainConfig arm_config(const ExperimentArm& arm, std::uint64_t seed) const {
    TrainConfig cfg = apply_overrides(apply_overrides(TrainConfig{}, base), arm.overrides);
    cfg.seed = seed;
    return cfg;
  }
};

inline ExperimentPreset preset_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("preset must be a JSON object");
  ExperimentPreset p;
  p.name = j.value("name", p.name);
  if (j.contains("data")) p.data = split_spec_from_json(j["data"]);
  if (j.contains("train")) {
    p.base = j["train"];
    apply_overrides(TrainConfig{}, p.base);  // validate early
  }
  if (!j.contains("arms") || !j["arms"].is_array()) throw ConfigError("preset field arms must be an array");
  for (const auto& a : j["arms"]) {
    ExperimentArm arm;
    if (!a.contains("name") || !a["name"].is_string()) throw ConfigError("every arm needs a name");
    arm.name = a["name"].get<std::string>();
    if (a.contains("overrides")) arm.overrides = a["overrides"];
    apply_overrides(apply_overrides(TrainConfig{}, p.base), arm.overrides);
    p.arms.push_back(std::move(arm));
  }
  if (!j.contains("seeds") || !j["seeds"].is_array()) throw ConfigError("preset field seeds must be an array");
  for (const auto& s : j["seeds"]) {
    if (!s.is_number_unsigned()) throw ConfigError("seeds must be non-negative integers");
    p.seeds.push_back(s.get<std::uint64_t>());
  }
  p.check();
  return p;
}

inline json to_json(const ExperimentPreset& p) {
  json arms = json::array();
  for (const auto& a : p.arms) arms.push_back({{"name", a.name}, {"overrides", a.overrides}});
  return {{"name", p.name}, {"data", to_json(p.data)}, {"train", p.base}, {"arms", arms}, {"seeds", p.seeds}};
}

/// The benchmark used by the trend checks: 6 known / 3 + 3 unknown relations,
/// 50 instances each, 20 epochs.
inline ExperimentPreset benchmark_preset() {
  ExperimentPreset p;
  p.name = "benchmark";
  p.data = SplitSpec{};
  p.base = {{"epochs", 20}};
  p.arms = {{"adversarial", {{"mode", "adversarial"}}},
            {"baseline", {{"use_negatives", false}}},
            {"mask", {{"mode", "mask"}}},
            {"gaussian", {{"mode", "gaussian"}}}};
  p.seeds = {1, 2, 3};
  return p;
}

struct RunResult {
  std::string arm;
  std::uint64_t seed = 0;
  TrainResult trained;
  MetricsReport report;
};

/// Mean delta_s over the steps of the final epoch, if negatives were used.
inline std::optional<double> final_epoch_delta_s(const TrainHistory& h) {
  if (h.empty()) return std::nullopt;
  const int last = h.back().epoch;
  double sum = 0.0;
  int n = 0;
  for (const auto& r : h) {
    if (r.epoch == last && r.delta_s) {
      sum += *r.delta_s;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

/// Trains on `splits.train`, calibrates alpha on the known validation
/// instances and reports metrics on the test split.
inline RunResult run_once(const TrainConfig& cfg, const Splits& splits) {
  RunResult out;
  out.trained = train(cfg, splits.train);
  const auto& model = out.trained.model;
  const auto val = encode_all(splits.validation, model.vocab, model.relations);
  const auto test = encode_all(splits.test, model.vocab, model.relations);
  const auto val_scored = score_dataset(model.params, val);
  const double alpha = calibrate_alpha(known_scores(val_scored));
  out.report = evaluate(model.params, test, alpha);
  out.report.delta_s = final_epoch_delta_s(out.trained.history);
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Sample standard deviation (n - 1); zero for a single value.
inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

inline json summarize(const std::vector<MetricsReport>& reports) {
  json out = json::object();
  auto add = [&](const char* name, auto getter) {
    std::vector<double> vals;
    for (const auto& r : reports) {
      if (auto v = getter(r)) vals.push_back(*v);
    }
    if (vals.empty()) {
      out[name] = nullptr;
      return;
    }
    const auto ms = mean_std(vals);
    out[name] = {{"mean", ms.mean}, {"std", ms.std}};
  };
  add("acc_open", [](const MetricsReport& r) { return std::optional<double>(r.acc_open); });
  add("acc_known", [](const MetricsReport& r) { return std::optional<double>(r.acc_known); });
  add("auroc", [](const MetricsReport& r) { return r.auroc; });
  add("fpr95", [](const MetricsReport& r) { return r.fpr95; });
  add("delta_s", [](const MetricsReport& r) { return r.delta_s; });
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string history_jsonl(const TrainHistory& h) {
  std::string s;
  for (const auto& r : h) s += to_json(r).dump() + "\n";
  return s;
}

struct ExperimentResult {
  std::vector<RunResult> runs;
  json summary;  // keyed by arm name

  std::vector<MetricsReport> reports(const std::string& arm) const {
    std::vector<MetricsReport> out;
    for (const auto& r : runs) {
      if (r.arm == arm) out.push_back(r.report);
    }
    return out;
  }
};

using Logger = std::function<void(const std::string&)>;

/// Runs every arm for every seed sequentially. When `out_dir` is non-empty,
/// writes <arm>/seed_<s>/{checkpoint.json,history.jsonl,report.json} and summary.json.
inline ExperimentResult run_experiment(const ExperimentPreset& preset, const std::string& out_dir = "",
                                       const Logger& log = nullptr) {
  preset.check();
  namespace fs = std::filesystem;
  ExperimentResult result;
  std::map<std::uint64_t, Splits> corpora;
  for (std::uint64_t seed : preset.seeds) {
    SplitSpec spec = preset.data;
    spec.seed = seed;
    corpora.emplace(seed, gen_synthetic(spec));
  }
  for (const auto& arm : preset.arms) {
    for (std::uint64_t seed : preset.seeds) {
      RunResult run;
      try {
        run = run_once(preset.arm_config(arm, seed), corpora.at(seed));
      } catch (const std::exception& e) {
        throw Error("arm " + arm.name + " seed " + std::to_string(seed) + ": " + e.what());
      }
      run.arm = arm.name;
      run.seed = seed;
      if (log) log("arm " + arm.name + " seed " + std::to_string(seed) + ": " + to_json(run.report).dump());
      if (!out_dir.empty()) {
        const fs::path dir = fs::path(out_dir) / arm.name / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        write_text(dir / "checkpoint.json", run.trained.model.checkpoint().dump());
        write_text(dir / "history.jsonl", history_jsonl(run.trained.history));
        write_text(dir / "report.json", to_json(run.report).dump(2) + "\n");
      }
      result.runs.push_back(std::move(run));
    }
  }
  result.summary = json::object();
  for (const auto& arm : preset.arms) result.summary[arm.name] = summarize(result.reports(arm.name));
  if (!out_dir.empty()) {
    write_text(std::filesystem::path(out_dir) / "summary.json", result.summary.dump(2) + "\n");
  }
  return result;
}

struct SweepRow {
  double epsilon = 0.0;
  MeanStd fpr95;
  MeanStd auroc;
};

inline json to_json(const SweepRow& r) {
  return {{"epsilon", r.epsilon},
          {"fpr95_mean", r.fpr95.mean},
          {"fpr95_std", r.fpr95.std},
          {"auroc_mean", r.auroc.mean},
          {"auroc_std", r.auroc.std}};
}

/// Trains the preset's first arm once per epsilon (over all seeds) and
/// reports FPR95 per epsilon, one row per list entry.
inline std::vector<SweepRow> sweep_epsilon(const ExperimentPreset& preset, const std::vector<double>& epsilons,
                                           const Logger& log = nullptr) {
  preset.check();
  std::vector<SweepRow> rows;
  std::map<std::uint64_t, Splits> corpora;
  for (std::uint64_t seed : preset.seeds) {
    SplitSpec spec = preset.data;
    spec.seed = seed;
    corpora.emplace(seed, gen_synthetic(spec));
  }
  for (double eps : epsilons) {
    ExperimentArm arm = preset.arms.front();
    arm.overrides["epsilon"] = eps;
    std::vector<double> fpr, au;
    for (std::uint64_t seed : preset.seeds) {
      const RunResult run = run_once(preset.arm_config(arm, seed), corpora.at(seed));
      fpr.push_back(run.report.fpr95.value_or(1.0));
      au.push_back(run.report.auroc.value_or(0.5));
      if (log) log("epsilon " + std::to_string(eps) + " seed " + std::to_string(seed) + ": " + to_json(run.report).dump());
    }
    rows.push_back({eps, mean_std(fpr), mean_std(au)});
  }
  return rows;
}

}  // namespace osre
