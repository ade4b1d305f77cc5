#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "osre/attribution.hpp"
#include "test_util.hpp"

namespace osre {
namespace {

TEST(NormalizeAttribution, AbsoluteShare) {
  const auto a = normalize_attribution({3.0, -1.0});
  EXPECT_DOUBLE_EQ(a[0], 0.75);
  EXPECT_DOUBLE_EQ(a[1], 0.25);
}

TEST(NormalizeAttribution, AllZeroIsUniform) {
  const auto a = normalize_attribution({0.0, 0.0, 0.0, 0.0});
  for (double x : a) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(NormalizeAttribution, SumsToOneAndNonNegative) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> raw(1 + t % 9);
    for (auto& r : raw) r = g(rng);
    double sum = 0.0;
    for (double x : normalize_attribution(raw)) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(DpScores, PathTokensBoosted) {
  EncodedInstance e;
  e.ids = std::vector<TokenId>(10, 8);
  e.dep_path = {0, 2, 4, 6, 8};
  const auto dp = dp_scores(e);
  EXPECT_DOUBLE_EQ(dp[4], 2.0);
  EXPECT_DOUBLE_EQ(dp[5], 1.0);
}

TEST(DpScores, AbsentPathIsAllOnes) {
  EncodedInstance e;
  e.ids = std::vector<TokenId>(5, 8);
  for (double x : dp_scores(e)) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(DpScores, NeverBelowOne) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    EncodedInstance e;
    const int n = 1 + t % 12;
    e.ids = std::vector<TokenId>(static_cast<size_t>(n), 8);
    for (int i = 0; i < n; ++i) {
      if (std::uniform_int_distribution<int>(0, 1)(rng)) e.dep_path.push_back(i);
    }
    for (double x : dp_scores(e)) EXPECT_GE(x, 1.0);
  }
}

TEST(SelectKeyTokens, CountRoundsWithFloorOfOne) {
  EXPECT_EQ(key_token_count(0.2, 10), 2);
  EXPECT_EQ(key_token_count(0.01, 3), 1);
  EXPECT_EQ(key_token_count(1.0, 7), 7);
}

TEST(SelectKeyTokens, PicksLargestImportanceAmongCandidates) {
  const std::vector<double> imp = {9.0, 0.1, 0.5, 0.3, 0.5, 0.2};
  // Position 0 is not a candidate; ties go to the lower position.
  EXPECT_EQ(select_key_tokens(imp, 0.4, {1, 2, 3, 4, 5}), (std::vector<int>{2, 4}));
  EXPECT_EQ(select_key_tokens(imp, 0.01, {5, 3, 1}), (std::vector<int>{3}));
}

TEST(SelectKeyTokens, RejectsBadEpsilon) {
  EXPECT_THROW(select_key_tokens({1.0}, 0.0, {0}), ConfigError);
  EXPECT_THROW(select_key_tokens({1.0}, 1.5, {0}), ConfigError);
}

TEST(Importance, SwitchesReplaceFactorsWithOnes) {
  const std::vector<double> a = {0.5, 0.25}, t = {2.0, 4.0}, dp = {3.0, 1.0};
  EXPECT_EQ(importance(a, t, dp), (std::vector<double>{3.0, 1.0}));
  EXPECT_EQ(importance(a, t, dp, {false, true, true}), (std::vector<double>{6.0, 4.0}));
  EXPECT_EQ(importance(a, t, dp, {true, false, true}), (std::vector<double>{1.5, 0.25}));
  EXPECT_EQ(importance(a, t, dp, {true, true, false}), (std::vector<double>{1.0, 1.0}));
  EXPECT_THROW(importance(a, {1.0}, dp), ValidationError);
}

TEST(RemoveToken, ReindexesSpansAndPath) {
  EncodedInstance e;
  e.ids = {10, 11, 12, 13, 14};
  e.head = {1, 2};
  e.tail = {3, 5};
  e.dep_path = {1, 2, 3};
  const auto r = remove_token(e, 2);
  EXPECT_EQ(r.ids, (std::vector<TokenId>{10, 11, 13, 14}));
  EXPECT_EQ(r.head, (Span{1, 2}));
  EXPECT_EQ(r.tail, (Span{2, 4}));
  EXPECT_EQ(r.dep_path, (std::vector<int>{1, 2}));
  const auto r0 = remove_token(e, 0);
  EXPECT_EQ(r0.head, (Span{0, 1}));
  EncodedInstance one;
  one.ids = {9};
  EXPECT_THROW(remove_token(one, 0), ValidationError);
}

TEST(Attribution, LinearModelFirstOrderEqualsCounterfactual) {
  std::mt19937_64 rng(12);
  EncoderConfig c;
  c.vocab_size = 15;
  c.num_relations = 1;
  c.dim = 5;
  c.max_len = 16;
  c.depth = 0;
  c.readout = Readout::kSum;
  c.use_positions = false;
  const auto p = testing::random_params(c, rng);
  for (int t = 0; t < 20; ++t) {
    const auto e = testing::random_instance(c.vocab_size, 1, rng);
    const auto m = mark(e);
    const auto raw = first_order_terms(grad_embeddings(p, m), m);
    for (int i = 0; i < e.size(); ++i) {
      EXPECT_NEAR(raw[static_cast<size_t>(i)], counterfactual_contribution(p, e, i), 1e-10);
    }
  }
}

TEST(Attribution, CoversOriginalPositionsOnly) {
  std::mt19937_64 rng(13);
  const auto c = testing::random_tiny_config(rng);
  const auto p = testing::random_params(c, rng);
  const auto e = testing::random_instance(c.vocab_size, c.num_relations, rng);
  EXPECT_EQ(attribution_scores(p, e).size(), e.ids.size());
}

TEST(AnalyzeImportance, SelectsNonEntityTokensAndLeavesParamsAlone) {
  const std::vector<RelationInstance> train = {
      {{"A", "met", "her", "at", "B", "today"}, {0, 1}, {4, 5}, "r0", std::nullopt},
      {{"C", "left", "the", "town", "D", "yesterday"}, {0, 1}, {4, 5}, "r1", std::nullopt}};
  const auto vocab = build_vocab(train);
  const auto table = compute_tfidf(train, vocab);
  const auto rels = known_relations(train);
  EncoderConfig c;
  c.vocab_size = vocab.size();
  c.num_relations = 2;
  c.dim = 6;
  c.max_len = 12;
  const auto p = EncoderParams::init(c, 3, 0.5);
  const auto before = checksum(p);
  const auto e = encode_instance(train[0], vocab, rels);
  const auto an = analyze_importance(p, e, table, 0.5);
  EXPECT_EQ(checksum(p), before);
  EXPECT_EQ(an.key_positions.size(), 2u);  // round(0.5 * 4)
  for (int k : an.key_positions) {
    EXPECT_FALSE(e.in_entity(k));
    EXPECT_TRUE(an.tokens[static_cast<size_t>(k)].selected);
  }
  EXPECT_FALSE(an.tokens[0].candidate);
  double asum = 0.0;
  for (const auto& t : an.tokens) asum += t.attribution;
  EXPECT_NEAR(asum, 1.0, 1e-12);
}

TEST(TfidfScores, UnknownLabelRejected) {
  const std::vector<RelationInstance> train = {{{"a", "b"}, {0, 1}, {1, 2}, "r", std::nullopt}};
  const auto vocab = build_vocab(train);
  const auto table = compute_tfidf(train, vocab);
  EncodedInstance e;
  e.ids = {7, 8};
  EXPECT_THROW(tfidf_scores(table, e, -1), ValidationError);
}

}  // namespace
}  // namespace osre
