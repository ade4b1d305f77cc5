#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "osre/common.hpp"

namespace osre {

using json = nlohmann::json;

/// Half-open token interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int size() const { return end - start; }
  bool contains(int i) const { return i >= start && i < end; }
  bool operator==(const Span&) const = default;
};

struct RelationInstance {
  std::vector<std::string> tokens;
  Span head;
  Span tail;
  std::string relation;
  // Token indices on the dependency path between the entity pair.
  std::optional<std::vector<int>> dep_path;

  int size() const { return static_cast<int>(tokens.size()); }
  bool in_entity(int i) const { return head.contains(i) || tail.contains(i); }
  bool operator==(const RelationInstance&) const = default;
};

inline void validate(const RelationInstance& inst) {
  const int n = inst.size();
  auto check_span = [n](const Span& s, const char* which) {
    if (s.start < 0 || s.end > n || s.start >= s.end) {
      throw ValidationError(std::string(which) + " span [" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + ") out of bounds for " + std::to_string(n) +
                            " tokens");
    }
  };
  check_span(inst.head, "head");
  check_span(inst.tail, "tail");
  if (inst.head.start < inst.tail.end && inst.tail.start < inst.head.end) {
    throw ValidationError("head and tail spans overlap");
  }
  if (inst.dep_path) {
    for (int i : *inst.dep_path) {
      if (i < 0 || i >= n) {
        throw ValidationError("dep_path index " + std::to_string(i) + " out of bounds");
      }
    }
  }
}

inline json to_json(const RelationInstance& inst) {
  json j;
  j["tokens"] = inst.tokens;
  j["head"] = {inst.head.start, inst.head.end};
  j["tail"] = {inst.tail.start, inst.tail.end};
  j["relation"] = inst.relation;
  if (inst.dep_path) j["dep_path"] = *inst.dep_path;
  return j;
}

namespace detail {

inline Span span_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ParseError(std::string("field \"") + field + "\" must be [int,int]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace detail

/// Parses and validates one record. Schema errors raise ParseError,
/// invariant violations raise ValidationError.
inline RelationInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  for (const char* field : {"tokens", "head", "tail", "relation"}) {
    if (!j.contains(field)) throw ParseError(std::string("missing field \"") + field + "\"");
  }
  RelationInstance inst;
  if (!j["tokens"].is_array()) throw ParseError("field \"tokens\" must be an array");
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw ParseError("field \"tokens\" must contain strings");
    inst.tokens.push_back(t.get<std::string>());
  }
  inst.head = detail::span_from_json(j["head"], "head");
  inst.tail = detail::span_from_json(j["tail"], "tail");
  if (!j["relation"].is_string()) throw ParseError("field \"relation\" must be a string");
  inst.relation = j["relation"].get<std::string>();
  if (j.contains("dep_path") && !j["dep_path"].is_null()) {
    std::vector<int> path;
    for (const auto& v : j["dep_path"]) {
      if (!v.is_number_integer()) throw ParseError("field \"dep_path\" must contain integers");
      path.push_back(v.get<int>());
    }
    inst.dep_path = std::move(path);
  }
  validate(inst);
  return inst;
}

inline std::vector<RelationInstance> parse_jsonl(std::istream& in) {
  std::vector<RelationInstance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<RelationInstance> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_jsonl(in);
}

inline void write_jsonl(std::ostream& out, const std::vector<RelationInstance>& instances) {
  for (const auto& inst : instances) out << to_json(inst).dump() << '\n';
}

inline void save_jsonl(const std::string& path, const std::vector<RelationInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, instances);
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kHeadBegin = 3;
  static constexpr TokenId kHeadEnd = 4;
  static constexpr TokenId kTailBegin = 5;
  static constexpr TokenId kTailEnd = 6;
  static constexpr int kReservedCount = 7;

  static const std::vector<std::string>& reserved() {
    static const std::vector<std::string> r = {"[PAD]", "[UNK]", "[MASK]", "[E1]",
                                               "[/E1]", "[E2]",  "[/E2]"};
    return r;
  }

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// Builds from regular (non-reserved) tokens; reserved entries are prepended.
  explicit Vocabulary(const std::vector<std::string>& regular) {
    for (const auto& r : reserved()) add(r);
    for (const auto& t : regular) {
      if (index_.count(t)) throw ConfigError("duplicate vocabulary token: " + t);
      add(t);
    }
  }

  /// Restores a full token list (reserved prefix included), e.g. from a checkpoint.
  static Vocabulary from_full_list(const std::vector<std::string>& all) {
    const auto& r = reserved();
    if (all.size() < r.size() || !std::equal(r.begin(), r.end(), all.begin())) {
      throw ConfigError("vocabulary does not start with the reserved tokens");
    }
    return Vocabulary(std::vector<std::string>(all.begin() + kReservedCount, all.end()));
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<size_t>(id)); }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  static bool is_reserved(TokenId id) { return id >= 0 && id < kReservedCount; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void add(const std::string& t) {
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Tokens with frequency >= min_count, ordered by frequency desc then lexicographically.
inline Vocabulary build_vocab(const std::vector<RelationInstance>& train, int min_count = 1) {
  std::map<std::string, long> counts;
  for (const auto& inst : train) {
    for (const auto& t : inst.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> kept;
  const auto& reserved = Vocabulary::reserved();
  for (const auto& [tok, c] : counts) {
    if (c < min_count) continue;
    if (std::find(reserved.begin(), reserved.end(), tok) != reserved.end()) continue;
    kept.emplace_back(tok, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> regular;
  regular.reserve(kept.size());
  for (auto& [tok, c] : kept) regular.push_back(tok);
  return Vocabulary(regular);
}

/// Sorted known relation names of a training set.
inline std::vector<std::string> known_relations(const std::vector<RelationInstance>& train) {
  std::set<std::string> names;
  for (const auto& inst : train) {
    if (inst.relation == kNotaLabel) throw ValidationError("training instance labeled NOTA");
    names.insert(inst.relation);
  }
  return {names.begin(), names.end()};
}

/// Instance mapped to vocabulary ids; label is -1 for NOTA or any relation
/// outside the known set.
struct EncodedInstance {
  std::vector<TokenId> ids;
  Span head;
  Span tail;
  int label = -1;
  std::vector<int> dep_path;  // empty when not annotated

  int size() const { return static_cast<int>(ids.size()); }
  bool in_entity(int i) const { return head.contains(i) || tail.contains(i); }
  bool operator==(const EncodedInstance&) const = default;
};

inline int relation_index(const std::vector<std::string>& relations, const std::string& name) {
  auto it = std::lower_bound(relations.begin(), relations.end(), name);
  if (it == relations.end() || *it != name) return -1;
  return static_cast<int>(it - relations.begin());
}

inline EncodedInstance encode_instance(const RelationInstance& inst, const Vocabulary& vocab,
                                       const std::vector<std::string>& relations) {
  EncodedInstance e;
  e.ids.reserve(inst.tokens.size());
  for (const auto& t : inst.tokens) e.ids.push_back(vocab.id(t));
  e.head = inst.head;
  e.tail = inst.tail;
  e.label = relation_index(relations, inst.relation);
  if (inst.dep_path) {
    std::set<int> uniq(inst.dep_path->begin(), inst.dep_path->end());
    e.dep_path.assign(uniq.begin(), uniq.end());
  }
  return e;
}

inline std::vector<EncodedInstance> encode_all(const std::vector<RelationInstance>& data,
                                               const Vocabulary& vocab,
                                               const std::vector<std::string>& relations) {
  std::vector<EncodedInstance> out;
  out.reserve(data.size());
  for (const auto& inst : data) out.push_back(encode_instance(inst, vocab, relations));
  return out;
}

// ---------------------------------------------------------------------------
// tf-idf statistic and ban list

/// Relation-conditional tf-idf, one row per vocabulary token and one column
/// per known relation. Immutable once built.
class TfIdfTable {
 public:
  TfIdfTable(Matrix tf, Vector idf, std::vector<std::string> relations)
      : tf_(std::move(tf)), idf_(std::move(idf)), relations_(std::move(relations)) {
    values_ = idf_.asDiagonal() * tf_;
  }

  double tf(TokenId w, int y) const { return tf_(w, y); }
  double idf(TokenId w) const { return idf_(w); }
  double at(TokenId w, int y) const { return values_(w, y); }
  const Matrix& values() const { return values_; }
  int vocab_size() const { return static_cast<int>(values_.rows()); }
  int num_relations() const { return static_cast<int>(values_.cols()); }
  const std::vector<std::string>& relations() const { return relations_; }

 private:
  Matrix tf_;
  Vector idf_;
  Matrix values_;
  std::vector<std::string> relations_;
};

/// tf(w,y) = n(w,y) / sum_j n(w_j,y); idf(w) = log(|K| / |{y : n(w,y) != 0}|).
/// Raw occurrences are counted, out-of-vocabulary tokens as [UNK].
inline TfIdfTable compute_tfidf(const std::vector<RelationInstance>& train, const Vocabulary& vocab) {
  const auto relations = known_relations(train);
  const int k = static_cast<int>(relations.size());
  const int v = vocab.size();
  Matrix counts = Matrix::Zero(v, k);
  for (const auto& inst : train) {
    const int y = relation_index(relations, inst.relation);
    for (const auto& t : inst.tokens) counts(vocab.id(t), y) += 1.0;
  }
  Matrix tf = Matrix::Zero(v, k);
  for (int y = 0; y < k; ++y) {
    const double total = counts.col(y).sum();
    if (total <= 0) throw ValidationError("relation " + relations[y] + " has no tokens");
    tf.col(y) = counts.col(y) / total;
  }
  Vector idf = Vector::Zero(v);
  for (int w = 0; w < v; ++w) {
    int df = 0;
    for (int y = 0; y < k; ++y) df += counts(w, y) != 0.0 ? 1 : 0;
    if (df > 0) idf(w) = std::log(static_cast<double>(k) / df);
  }
  return TfIdfTable(std::move(tf), std::move(idf), relations);
}

class BanList {
 public:
  explicit BanList(int vocab_size) : banned_(static_cast<size_t>(vocab_size), false) {}

  void add(TokenId id) { banned_.at(static_cast<size_t>(id)) = true; }
  bool contains(TokenId id) const { return banned_.at(static_cast<size_t>(id)); }
  int vocab_size() const { return static_cast<int>(banned_.size()); }
  int size() const { return static_cast<int>(std::count(banned_.begin(), banned_.end(), true)); }

  std::vector<TokenId> ids() const {
    std::vector<TokenId> out;
    for (size_t i = 0; i < banned_.size(); ++i) {
      if (banned_[i]) out.push_back(static_cast<TokenId>(i));
    }
    return out;
  }

 private:
  std::vector<bool> banned_;
};

/// Ban-list size that scales with small vocabularies: min(100, ceil(0.1 |V|)).
inline int default_banlist_k(int vocab_size) {
  return std::min(100, static_cast<int>(std::ceil(0.1 * vocab_size)));
}

/// Reserved tokens plus, for every relation, its top-k tokens by t(w,y).
/// Ties go to the lower vocabulary index.
inline BanList build_banlist(const TfIdfTable& table, int k) {
  if (k < 0) throw ConfigError("ban-list k must be non-negative");
  const int v = table.vocab_size();
  BanList ban(v);
  for (TokenId r = 0; r < Vocabulary::kReservedCount && r < v; ++r) ban.add(r);
  std::vector<TokenId> order(static_cast<size_t>(v));
  for (int y = 0; y < table.num_relations(); ++y) {
    for (int i = 0; i < v; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](TokenId a, TokenId b) { return table.at(a, y) > table.at(b, y); });
    for (int i = 0; i < std::min(k, v); ++i) ban.add(order[static_cast<size_t>(i)]);
  }
  return ban;
}

// ---------------------------------------------------------------------------
// Synthetic open-set corpus

struct SplitSpec {
  int known = 6;
  int val_unknown = 3;
  int test_unknown = 3;
  int per_relation = 50;
  double noise = 0.1;
  std::uint64_t seed = 1;
  // Emit template-derived dependency paths (entity tokens plus triggers).
  bool dep_paths = false;
};

inline json to_json(const SplitSpec& s) {
  return {{"known", s.known},       {"val_unknown", s.val_unknown},
          {"test_unknown", s.test_unknown}, {"per_relation", s.per_relation},
          {"noise", s.noise},       {"seed", s.seed},
          {"dep_paths", s.dep_paths}};
}

inline SplitSpec split_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("split spec must be a JSON object");
  SplitSpec s;
  auto get_int = [&](const char* field, int& dst) {
    if (!j.contains(field)) return;
    if (!j[field].is_number_integer()) throw ConfigError(std::string("field ") + field + " must be an integer");
    dst = j[field].get<int>();
    if (dst <= 0) throw ConfigError(std::string("field ") + field + " must be positive");
  };
  get_int("known", s.known);
  get_int("val_unknown", s.val_unknown);
  get_int("test_unknown", s.test_unknown);
  get_int("per_relation", s.per_relation);
  if (j.contains("noise")) {
    if (!j["noise"].is_number()) throw ConfigError("field noise must be a number");
    s.noise = j["noise"].get<double>();
    if (s.noise < 0 || s.noise > 1) throw ConfigError("field noise must lie in [0,1]");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("field seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("dep_paths")) {
    if (!j["dep_paths"].is_boolean()) throw ConfigError("field dep_paths must be a boolean");
    s.dep_paths = j["dep_paths"].get<bool>();
  }
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known_fields = {
        "known", "val_unknown", "test_unknown", "per_relation", "noise", "seed", "dep_paths"};
    if (!known_fields.count(key)) throw ConfigError("unknown field " + key);
  }
  return s;
}

struct Splits {
  std::vector<RelationInstance> train;
  std::vector<RelationInstance> validation;
  std::vector<RelationInstance> test;
};

namespace synthetic {

struct RelationTemplate {
  const char* name;
  std::vector<std::string> triggers;
};

// Pool order fixes roles: known relations first, then validation unknowns,
// then test unknowns. Several unknown relations borrow one trigger from a
// known relation so that unknown instances partially resemble known ones.
inline const std::vector<RelationTemplate>& relation_pool() {
  static const std::vector<RelationTemplate> pool = {
      {"founded_by", {"founded", "founder", "established", "launched", "started"}},
      {"place_of_birth", {"born", "birthplace", "native", "hometown", "raised"}},
      {"spouse", {"married", "wife", "husband", "wedding", "spouse"}},
      {"employee_of", {"works", "employed", "hired", "staff", "employee"}},
      {"member_of", {"member", "joined", "belongs", "membership", "enlisted"}},
      {"instrument", {"plays", "guitar", "saxophone", "drums", "player"}},
      {"place_of_death", {"died", "buried", "funeral", "hometown", "passed"}},
      {"parents", {"father", "mother", "son", "wife", "daughter"}},
      {"subsidiary_of", {"subsidiary", "owned", "acquired", "founded", "division"}},
      {"composer", {"composed", "composer", "score", "plays", "wrote"}},
      {"sibling", {"brother", "sister", "siblings", "married", "twin"}},
      {"headquarters", {"headquartered", "based", "offices", "established", "staff"}},
      {"religion", {"religion", "church", "faith", "believer", "worship"}},
      {"schools_attended", {"studied", "graduated", "school", "alumnus", "university"}},
      {"nationality", {"citizen", "nationality", "passport", "national", "country"}},
      {"title", {"title", "position", "appointed", "chief", "director"}},
  };
  return pool;
}

inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> w = {"the", "a",   "of",   "in",    "was",  "is",  "at",
                                             "by",  "with", "and", "to",    "for",  "on",  "from",
                                             "as",  "his", "her",  "their", "that", "which"};
  return w;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> w = {
      "year",      "city",      "company",   "report",    "season",    "later",     "early",
      "new",       "old",       "group",     "state",     "local",     "during",    "after",
      "before",    "time",      "team",      "public",    "official",  "recent",    "first",
      "second",    "major",     "small",     "large",     "history",   "project",   "event",
      "area",      "region",    "period",    "statement", "news",      "press",     "source",
      "record",    "article",   "interview", "meeting",   "week",      "month",     "morning",
      "evening",   "center",    "office",    "building",  "district",  "service",   "market",
      "people",    "world",     "life",      "work",      "game",      "story",     "book",
      "film",      "album",     "song",      "radio",     "program",   "council",   "board",
      "committee", "campaign",  "election",  "summer",    "winter",    "spring",    "autumn",
      "decade",    "century",   "career",    "role",      "series",    "edition",   "version",
      "model",     "system",    "network",   "plan",      "policy",    "budget",    "deal",
      "contract",  "agreement", "trial",     "court",     "case",      "issue",     "question",
      "answer",    "result",    "reason",    "idea",      "view",      "point",     "side",
      "part",      "level",     "rate",      "price",     "cost",      "value",     "figure",
      "number",    "list",      "table",     "page",      "letter",    "message",   "call",
      "visit",     "trip",      "tour",      "road",      "street",    "river",     "island",
      "valley",    "mountain",  "coast",     "border",    "bridge",    "harbor",    "park",
      "garden",    "museum",    "library",   "hospital",  "station",   "airport",   "hotel"};
  return w;
}

inline const std::vector<std::string>& entity_names() {
  static const std::vector<std::string> w = {
      "Alvarez", "Brennan", "Castillo", "Delgado", "Eriksen",  "Fontaine", "Gallagher", "Haddad",
      "Ibarra",  "Jansen",  "Kowalski", "Lindqvist", "Moreau", "Nakamura", "Okafor",    "Petrov",
      "Quinlan", "Rossi",   "Sorensen", "Tanaka",  "Ueda",     "Valdez",   "Whitfield", "Yilmaz",
      "Zeller",  "Acme",    "Borealis", "Cobalt",  "Dynamo",   "Everest",  "Falcon",    "Granite",
      "Horizon", "Ironwood", "Juniper", "Keystone", "Lakeside", "Meridian", "Northgate", "Orion"};
  return w;
}

inline const std::vector<std::string>& given_names() {
  static const std::vector<std::string> w = {"Anna",  "Ben",   "Clara", "David", "Elena",
                                             "Frank", "Grace", "Hugo",  "Iris",  "Jonas",
                                             "Karin", "Leo",   "Maya",  "Nina",  "Oscar"};
  return w;
}

class Generator {
 public:
  Generator(const SplitSpec& spec) : spec_(spec), rng_(spec.seed) {
    for (const auto& w : filler_words()) lexicon_.push_back(w);
    for (const auto& w : function_words()) lexicon_.push_back(w);
    for (const auto& r : relation_pool()) {
      for (const auto& t : r.triggers) lexicon_.push_back(t);
    }
  }

  RelationInstance make(const RelationTemplate& rel) {
    enum Slot { kFiller, kFunc, kHead, kTail, kTrig1, kTrig2 };
    static const std::vector<std::vector<Slot>> shapes = {
        {kFiller, kFiller, kHead, kFunc, kTrig1, kFunc, kTrig2, kTail, kFunc, kFiller},
        {kHead, kFunc, kTrig1, kFunc, kTail, kFunc, kTrig2, kFiller, kFiller},
        {kFunc, kFiller, kTail, kFunc, kTrig1, kTrig2, kFunc, kHead, kFiller},
        {kFiller, kFunc, kTrig1, kHead, kFunc, kTrig2, kFunc, kTail, kFiller, kFiller},
    };
    const auto& shape = shapes[pick(shapes.size())];
    const size_t t1 = pick(rel.triggers.size());
    size_t t2 = pick(rel.triggers.size() - 1);
    if (t2 >= t1) ++t2;

    RelationInstance inst;
    inst.relation = rel.name;
    std::vector<int> path;
    auto emit_entity = [&](Span& span) {
      span.start = inst.size();
      if (coin(0.5)) inst.tokens.push_back(given_names()[pick(given_names().size())]);
      inst.tokens.push_back(entity_names()[pick(entity_names().size())]);
      span.end = inst.size();
      for (int i = span.start; i < span.end; ++i) path.push_back(i);
    };
    for (Slot slot : shape) {
      switch (slot) {
        case kHead: emit_entity(inst.head); break;
        case kTail: emit_entity(inst.tail); break;
        case kTrig1:
        case kTrig2:
          path.push_back(inst.size());
          inst.tokens.push_back(rel.triggers[slot == kTrig1 ? t1 : t2]);
          break;
        case kFiller:
        case kFunc: {
          const auto& pool = slot == kFiller ? filler_words() : function_words();
          inst.tokens.push_back(coin(spec_.noise) ? lexicon_[pick(lexicon_.size())]
                                                  : pool[pick(pool.size())]);
          break;
        }
      }
    }
    if (spec_.dep_paths) {
      std::sort(path.begin(), path.end());
      inst.dep_path = path;
    }
    return inst;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), rng_);
  }

 private:
  size_t pick(size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(rng_); }
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  SplitSpec spec_;
  std::mt19937_64 rng_;
  std::vector<std::string> lexicon_;
};

}  // namespace synthetic

/// Deterministic template corpus. Train holds only known relations; validation
/// and test are half known, half unknown, with disjoint unknown relation sets.
/// Unknown instances keep their relation name; any name outside the known set
/// is scored as NOTA.
inline Splits gen_synthetic(const SplitSpec& spec) {
  if (spec.known <= 0 || spec.val_unknown <= 0 || spec.test_unknown <= 0 || spec.per_relation <= 0) {
    throw ConfigError("split counts must be positive");
  }
  const auto& pool = synthetic::relation_pool();
  const size_t needed = static_cast<size_t>(spec.known + spec.val_unknown + spec.test_unknown);
  if (needed > pool.size()) {
    throw ConfigError("requested " + std::to_string(needed) + " relations but the template pool has " +
                      std::to_string(pool.size()));
  }
  synthetic::Generator gen(spec);
  Splits out;
  const auto known_begin = pool.begin();
  const auto val_begin = known_begin + spec.known;
  const auto test_begin = val_begin + spec.val_unknown;
  const auto test_end = test_begin + spec.test_unknown;

  for (auto it = known_begin; it != val_begin; ++it) {
    for (int i = 0; i < spec.per_relation; ++i) out.train.push_back(gen.make(*it));
  }
  gen.shuffle(out.train);

  auto open_split = [&](auto unk_begin, auto unk_end) {
    std::vector<RelationInstance> split;
    for (auto it = unk_begin; it != unk_end; ++it) {
      for (int i = 0; i < spec.per_relation; ++i) split.push_back(gen.make(*it));
    }
    const size_t unknown_count = split.size();
    for (size_t i = 0; i < unknown_count; ++i) {
      split.push_back(gen.make(*(known_begin + static_cast<long>(i % static_cast<size_t>(spec.known)))));
    }
    gen.shuffle(split);
    return split;
  };
  out.validation = open_split(val_begin, test_begin);
  out.test = open_split(test_begin, test_end);
  return out;
}

}  // namespace osre
