// Command-line front end: corpus generation, training, negative synthesis,
// threshold calibration, evaluation and experiment presets.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "osre/osre.hpp"

namespace {

using osre::json;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

bool g_verbose = false;

void log(const std::string& msg) {
  if (g_verbose) std::cerr << msg << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw osre::Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw osre::ParseError(path + ": " + e.what());
  }
}

osre::TrainedModel load_model(const std::string& path) {
  return osre::TrainedModel::from_checkpoint(read_json(path));
}

/// Writes to `path`, or stdout when the path is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  osre::write_text(path, text);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw osre::ConfigError("bad number in list: " + item);
    }
  }
  return out;
}

struct Options {
  std::optional<std::uint64_t> seed;

  // gen-data
  std::string spec_path, out_dir;
  // train
  std::string config_path, checkpoint_out, history_out, train_data;
  // synth / calibrate / eval
  std::string checkpoint, data, input, out, val_data, mode = "adversarial";
  double epsilon = 0.2;
  int banlist_k = -1;
  bool explain = false;
  double tpr = 0.95;
  std::optional<double> alpha;
  // experiment / sweep
  std::string preset_path, eps_list = "0.05,0.2,0.6";
};

int cmd_gen_data(const Options& o) {
  osre::SplitSpec spec = osre::split_spec_from_json(read_json(o.spec_path));
  if (o.seed) spec.seed = *o.seed;
  const auto splits = osre::gen_synthetic(spec);
  std::filesystem::create_directories(o.out_dir);
  const std::filesystem::path dir(o.out_dir);
  osre::save_jsonl((dir / "train.jsonl").string(), splits.train);
  osre::save_jsonl((dir / "val.jsonl").string(), splits.validation);
  osre::save_jsonl((dir / "test.jsonl").string(), splits.test);
  log("wrote " + std::to_string(splits.train.size()) + "/" + std::to_string(splits.validation.size()) + "/" +
      std::to_string(splits.test.size()) + " instances to " + o.out_dir);
  return 0;
}

int cmd_train(const Options& o) {
  const json cfg_json = read_json(o.config_path);
  osre::TrainConfig cfg = osre::apply_overrides(osre::TrainConfig{}, cfg_json, {"train_data"});
  if (o.seed) cfg.seed = *o.seed;
  std::string train_path = o.train_data;
  if (train_path.empty() && cfg_json.contains("train_data")) train_path = cfg_json["train_data"].get<std::string>();
  if (train_path.empty()) throw osre::ConfigError("no training data: pass --train or set train_data");
  const auto data = osre::load_jsonl(train_path);
  log("training on " + std::to_string(data.size()) + " instances");
  const auto result = osre::train(cfg, data);
  osre::write_text(o.checkpoint_out, result.model.checkpoint().dump());
  if (!o.history_out.empty()) osre::write_text(o.history_out, osre::history_jsonl(result.history));
  if (!result.history.empty()) log("final loss " + std::to_string(result.history.back().loss));
  return 0;
}

int cmd_synth(const Options& o) {
  const auto model = load_model(o.checkpoint);
  const auto train = osre::load_jsonl(o.data);
  osre::SynthesisConfig sc;
  sc.mode = osre::synthesis_mode_from_string(o.mode);
  sc.epsilon = o.epsilon;
  sc.check();
  if (!osre::is_token_level(sc.mode)) throw osre::ConfigError("synth supports the adversarial and mask modes");

  const osre::TfIdfTable table = osre::compute_tfidf(train, model.vocab);
  if (table.relations() != model.relations) {
    throw osre::ConfigError("training data relations do not match the checkpoint");
  }
  const int k = o.banlist_k >= 0 ? o.banlist_k : osre::default_banlist_k(model.vocab.size());
  const osre::BanList ban = osre::build_banlist(table, k);
  const auto sources = o.input.empty() ? train : osre::load_jsonl(o.input);

  std::string pairs;
  std::ostringstream explain;
  explain << std::setprecision(6);
  if (o.explain) explain << "instance\tposition\ttoken\ta\tt\tdp\tI\tselected\n";
  for (size_t n = 0; n < sources.size(); ++n) {
    const auto& src = sources[n];
    const auto enc = model.encode(src);
    if (enc.label < 0) throw osre::ValidationError("instance " + std::to_string(n) + " has no known relation");
    const auto neg = osre::synthesize_negative(model.params, enc, table, ban, sc);

    osre::RelationInstance out = src;
    out.relation = osre::kNotaLabel;
    for (int pos : neg.substituted) {
      out.tokens[static_cast<size_t>(pos)] = model.vocab.token(neg.instance.ids[static_cast<size_t>(pos)]);
    }
    const double s_src = osre::nota_score(osre::forward(model.params, osre::mark(enc)).logits);
    const double s_neg = osre::negative_score(model.params, neg);
    json rec = {{"source", osre::to_json(src)},
                {"negative", osre::to_json(out)},
                {"substituted", neg.substituted},
                {"s_source", s_src},
                {"s_negative", s_neg}};
    pairs += rec.dump() + "\n";

    if (o.explain) {
      const auto an = osre::analyze_importance(model.params, enc, table, sc.epsilon, sc.switches());
      for (size_t i = 0; i < an.tokens.size(); ++i) {
        const auto& t = an.tokens[i];
        explain << n << '\t' << i << '\t' << src.tokens[i] << '\t' << t.attribution << '\t' << t.tfidf << '\t'
                << t.dp << '\t' << t.importance << '\t' << (t.selected ? 1 : 0) << '\n';
      }
    }
  }
  if (o.explain) {
    std::cout << explain.str();
    if (!o.out.empty()) osre::write_text(o.out, pairs);
  } else {
    emit(o.out, pairs);
  }
  return 0;
}

std::vector<double> known_val_scores(const osre::TrainedModel& model, const std::string& path) {
  const auto val = osre::encode_all(osre::load_jsonl(path), model.vocab, model.relations);
  const auto scored = osre::score_dataset(model.params, val);
  return osre::known_scores(scored);
}

int cmd_calibrate(const Options& o) {
  const auto model = load_model(o.checkpoint);
  const auto scores = known_val_scores(model, o.data);
  const double alpha = osre::calibrate_alpha(scores, o.tpr);
  emit(o.out, json{{"alpha", osre::threshold_to_json(alpha)}, {"tpr", o.tpr}}.dump(2) + "\n");
  return 0;
}

int cmd_eval(const Options& o) {
  const auto model = load_model(o.checkpoint);
  double alpha = 0.0;
  if (o.alpha) {
    alpha = *o.alpha;
  } else if (!o.val_data.empty()) {
    alpha = osre::calibrate_alpha(known_val_scores(model, o.val_data));
  } else {
    throw osre::ConfigError("eval needs --alpha or --val");
  }
  const auto test = osre::encode_all(osre::load_jsonl(o.data), model.vocab, model.relations);
  const auto report = osre::evaluate(model.params, test, alpha);
  emit(o.out, osre::to_json(report).dump(2) + "\n");
  return 0;
}

int cmd_experiment(const Options& o) {
  osre::ExperimentPreset preset = osre::preset_from_json(read_json(o.preset_path));
  if (o.seed) preset.seeds = {*o.seed};
  const auto result = osre::run_experiment(preset, o.out_dir, g_verbose ? osre::Logger(log) : nullptr);
  std::cout << result.summary.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  osre::ExperimentPreset preset = osre::preset_from_json(read_json(o.preset_path));
  if (o.seed) preset.seeds = {*o.seed};
  const auto eps = parse_list(o.eps_list);
  if (eps.empty()) throw osre::ConfigError("empty epsilon list");
  const auto rows = osre::sweep_epsilon(preset, eps, g_verbose ? osre::Logger(log) : nullptr);
  std::string jsonl;
  std::cout << "epsilon\tfpr95_mean\tfpr95_std\n";
  for (const auto& r : rows) {
    std::cout << r.epsilon << '\t' << r.fpr95.mean << '\t' << r.fpr95.std << '\n';
    jsonl += osre::to_json(r).dump() + "\n";
  }
  if (!o.out.empty()) osre::write_text(o.out, jsonl);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unknown-aware training for open-set relation classification"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--seed", o.seed, "Override the run seed");
  app.add_flag("--verbose,-v", g_verbose, "Progress messages on stderr");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic open-set corpus");
  gen->add_option("--spec", o.spec_path, "Split spec JSON")->required();
  gen->add_option("--out", o.out_dir, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", o.config_path, "Flat JSON train config")->required();
  tr->add_option("--out", o.checkpoint_out, "Checkpoint path")->required();
  tr->add_option("--history", o.history_out, "History JSONL path");
  tr->add_option("--train", o.train_data, "Training JSONL (overrides train_data)");

  auto* syn = app.add_subcommand("synth", "Synthesize negatives for instances");
  syn->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  syn->add_option("--train", o.data, "Training JSONL used for tf-idf statistics")->required();
  syn->add_option("--input", o.input, "Instances to perturb (default: training set)");
  syn->add_option("--out", o.out, "Output JSONL (default: stdout)");
  syn->add_option("--epsilon", o.epsilon, "Substitution ratio");
  syn->add_option("--mode", o.mode, "adversarial or mask");
  syn->add_option("--banlist-k", o.banlist_k, "Top-k tf-idf tokens banned per relation");
  syn->add_flag("--explain", o.explain, "Print per-token importance as TSV");

  auto* cal = app.add_subcommand("calibrate", "Calibrate the detection threshold");
  cal->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  cal->add_option("--data", o.data, "Validation JSONL")->required();
  cal->add_option("--tpr", o.tpr, "Target true positive rate of known instances");
  cal->add_option("--out", o.out, "Output JSON (default: stdout)");

  auto* ev = app.add_subcommand("eval", "Evaluate on a labeled split");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  ev->add_option("--data", o.data, "Test JSONL")->required();
  ev->add_option("--val", o.val_data, "Validation JSONL for calibrating alpha");
  ev->add_option("--alpha", o.alpha, "Detection threshold");
  ev->add_option("--out", o.out, "Report JSON (default: stdout)");

  auto* ex = app.add_subcommand("experiment", "Run every arm of a preset over its seeds");
  ex->add_option("--preset", o.preset_path, "Preset JSON")->required();
  ex->add_option("--out", o.out_dir, "Output directory");

  auto* sw = app.add_subcommand("sweep-epsilon", "FPR95 as a function of the substitution ratio");
  sw->add_option("--config", o.preset_path, "Preset JSON (first arm is swept)")->required();
  sw->add_option("--eps", o.eps_list, "Comma-separated epsilon values");
  sw->add_option("--out", o.out, "Rows as JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*tr) return cmd_train(o);
    if (*syn) return cmd_synth(o);
    if (*cal) return cmd_calibrate(o);
    if (*ev) return cmd_eval(o);
    if (*ex) return cmd_experiment(o);
    if (*sw) return cmd_sweep(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
