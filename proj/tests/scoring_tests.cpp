#include "nfqa/scoring.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "nfqa/judge.hpp"
#include "nfqa/util.hpp"

using namespace nfqa;

namespace {

const GradeScale kScale = GradeScale::parse("3,2,1,0");

Question toy_question() { return {"q1", "Why do stars twinkle?"}; }

GradedAnswer marked_answer(const std::string& id, int grade) {
  GradedAnswer a;
  a.answer_id = id;
  a.question_id = "q1";
  a.text = "answer " + id + " <grade:" + std::to_string(grade) + ">";
  a.grade = grade;
  return a;
}

ReferenceList marked_references(const std::vector<int>& grades) {
  ReferenceList refs("q1");
  for (std::size_t i = 0; i < grades.size(); ++i) {
    refs.add(marked_answer("r" + std::to_string(i), grades[i]));
  }
  return refs;
}

JudgeClient oracle_judge(bool permute = true, std::uint64_t seed = 1) {
  OracleBackend::Options options;
  JudgeOptions judge_options;
  judge_options.permute_positions = permute;
  judge_options.seed = seed;
  judge_options.retry.base_delay_ms = 0;
  return JudgeClient(std::make_shared<OracleBackend>(options),
                     TemplateSet::builtin(), nullptr, judge_options);
}

JudgeClient scripted_judge(const std::string& completion,
                           bool permute = true) {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->set_default(completion);
  JudgeOptions judge_options;
  judge_options.permute_positions = permute;
  judge_options.retry.base_delay_ms = 0;
  return JudgeClient(std::move(backend), TemplateSet::builtin(), nullptr,
                     judge_options);
}

PairwiseWeights explicit_weights(std::map<int, double> by_grade) {
  PairwiseWeights w;
  w.weight_by_grade = std::move(by_grade);
  return w;
}

}  // namespace

TEST_CASE("pairwise weights default to grade plus one") {
  const PairwiseWeights w = PairwiseWeights::linear_default(kScale);
  CHECK(w.at(3) == 4.0);
  CHECK(w.at(2) == 3.0);
  CHECK(w.at(1) == 2.0);
  CHECK(w.at(0) == 1.0);
  CHECK_THROWS_WITH_AS(w.at(7), doctest::Contains("7"), ConfigError);
  CHECK_THROWS_AS(explicit_weights({{2, -1.0}}).validate(), ConfigError);
  CHECK_THROWS_AS(explicit_weights({}).validate(), ConfigError);
}

TEST_CASE("normalize_to_range maps linearly and clamps") {
  CHECK(normalize_to_range(0.0, -4.0, 4.0) == 5.0);
  CHECK(normalize_to_range(4.0, -4.0, 4.0) == 10.0);
  CHECK(normalize_to_range(-4.0, -4.0, 4.0) == 0.0);
  CHECK(normalize_to_range(-9.0, -4.0, 4.0) == 0.0);   // clamped
  CHECK(normalize_to_range(99.0, -4.0, 4.0) == 10.0);  // clamped
  CHECK(normalize_to_range(3.0, 2.0, 2.0) == 5.0);     // collapsed range
}

TEST_CASE("pointwise scoring maps the judge's 1..10 onto 0..10") {
  JudgeClient judge = oracle_judge();
  StrategyConfig config;
  config.method = Method::pointwise_noref;
  const Question q = toy_question();

  const Score top = score_pointwise(q, marked_answer("a", 3), nullptr, config,
                                    judge);
  CHECK(top.raw == 10.0);
  CHECK(top.normalized == 10.0);
  const Score bottom = score_pointwise(q, marked_answer("b", 0), nullptr,
                                       config, judge);
  CHECK(bottom.raw == 1.0);
  CHECK(bottom.normalized == 0.0);
  const Score mid = score_pointwise(q, marked_answer("c", 2), nullptr, config,
                                    judge);
  CHECK(mid.raw == 7.0);
  CHECK(mid.normalized == (7.0 - 1.0) * 10.0 / 9.0);
  CHECK(mid.method == Method::pointwise_noref);

  StrategyConfig identity = config;
  identity.normalization = Normalization::identity;
  CHECK(score_pointwise(q, marked_answer("d", 2), nullptr, identity, judge)
            .normalized == 7.0);
}

TEST_CASE("pointwise reference handling is strict in both directions") {
  JudgeClient judge = oracle_judge();
  const Question q = toy_question();
  const ReferenceList refs = marked_references({3, 0});

  StrategyConfig with_refs;
  with_refs.method = Method::pointwise_ref;
  CHECK_THROWS_AS(score_pointwise(q, marked_answer("a", 2), nullptr,
                                  with_refs, judge),
                  ConfigError);
  const ReferenceList empty("q1");
  CHECK_THROWS_AS(score_pointwise(q, marked_answer("a", 2), &empty, with_refs,
                                  judge),
                  ConfigError);
  const Score ok = score_pointwise(q, marked_answer("a", 2), &refs, with_refs,
                                   judge);
  CHECK(ok.raw == 7.0);

  StrategyConfig no_refs;
  no_refs.method = Method::pointwise_noref;
  CHECK_THROWS_AS(score_pointwise(q, marked_answer("a", 2), &refs, no_refs,
                                  judge),
                  ConfigError);
}

TEST_CASE("candidate tournament sums to zero with signed outcomes") {
  JudgeClient judge = oracle_judge();
  StrategyConfig config;
  config.method = Method::pairwise_candidates;
  config.normalization = Normalization::minmax;
  const std::vector<GradedAnswer> candidates{
      marked_answer("best", 3), marked_answer("mid", 1),
      marked_answer("worst", 0)};
  std::size_t errors = 0;
  const auto scores = score_pairwise_candidates(toy_question(), candidates,
                                                config, judge, &errors);
  CHECK(errors == 0);
  REQUIRE(scores.size() == 3);
  CHECK(scores.at("best").raw == 2.0);
  CHECK(scores.at("mid").raw == 0.0);
  CHECK(scores.at("worst").raw == -2.0);
  CHECK(scores.at("best").raw + scores.at("mid").raw +
            scores.at("worst").raw == 0.0);
  CHECK(scores.at("best").normalized == 10.0);
  CHECK(scores.at("mid").normalized == 5.0);
  CHECK(scores.at("worst").normalized == 0.0);
}

TEST_CASE("candidate tournament rejects singleton fields") {
  JudgeClient judge = oracle_judge();
  StrategyConfig config;
  config.method = Method::pairwise_candidates;
  CHECK_THROWS_AS(score_pairwise_candidates(
                      toy_question(), {marked_answer("only", 2)}, config,
                      judge),
                  ConfigError);
}

TEST_CASE("failed comparisons count as ties and are tallied") {
  JudgeClient judge = scripted_judge("no verdict here");
  StrategyConfig config;
  config.method = Method::pairwise_candidates;
  config.normalization = Normalization::minmax;
  std::size_t errors = 0;
  const auto scores = score_pairwise_candidates(
      toy_question(), {marked_answer("a", 3), marked_answer("b", 0)}, config,
      judge, &errors);
  CHECK(errors == 1);
  CHECK(scores.at("a").raw == 0.0);
  CHECK(scores.at("b").raw == 0.0);
  // A fully tied field collapses the empirical range: neutral midpoint.
  CHECK(scores.at("a").normalized == 5.0);
}

TEST_CASE("weighted reference comparison worked example") {
  // References graded (3,2,1,0) with weights (4,3,2,1); candidate grade 2.
  // In the fixed presentation order the equal-grade reference wins the tie,
  // so the verdicts are (-1,-1,+1,+1): raw = -4 -3 +2 +1 = -4.
  const ReferenceList refs = marked_references({3, 2, 1, 0});
  StrategyConfig config;
  config.method = Method::pairwise_refs;
  config.weights = explicit_weights({{3, 4.0}, {2, 3.0}, {1, 2.0}, {0, 1.0}});

  JudgeClient fixed_order = oracle_judge(false);
  std::size_t errors = 0;
  const Score s = score_pairwise_references(
      toy_question(), marked_answer("cand", 2), refs, config, fixed_order,
      &errors);
  CHECK(errors == 0);
  CHECK(s.raw == -4.0);
  CHECK(s.normalized == 3.0);  // (-4 + 10) * 10 / 20

  // Position permutation turns the equal-grade pair into a net tie:
  // raw = -4 + 0 + 2 + 1 = -1.
  JudgeClient both_orders = oracle_judge(true);
  const Score balanced = score_pairwise_references(
      toy_question(), marked_answer("cand", 2), refs, config, both_orders,
      &errors);
  CHECK(balanced.raw == -1.0);
  CHECK(balanced.normalized == 4.5);
}

TEST_CASE("reference comparison extremes hit the range ends") {
  StrategyConfig config;
  config.method = Method::pairwise_refs;
  config.weights =
      explicit_weights({{3, 1.0}, {2, 1.0}, {1, 1.0}, {0, 1.0}});
  JudgeClient judge = oracle_judge();

  const ReferenceList low = marked_references({2, 2, 1, 0});
  const Score best = score_pairwise_references(
      toy_question(), marked_answer("hi", 3), low, config, judge);
  CHECK(best.raw == 4.0);
  CHECK(best.normalized == 10.0);

  const ReferenceList high = marked_references({3, 3, 2, 1});
  const Score worst = score_pairwise_references(
      toy_question(), marked_answer("lo", 0), high, config, judge);
  CHECK(worst.raw == -4.0);
  CHECK(worst.normalized == 0.0);
}

TEST_CASE("reference comparison weights default to grade plus one") {
  const ReferenceList refs = marked_references({3, 2, 1, 0});
  JudgeClient a = oracle_judge(false);
  JudgeClient b = oracle_judge(false);

  StrategyConfig defaulted;
  defaulted.method = Method::pairwise_refs;
  StrategyConfig explicit_config = defaulted;
  explicit_config.weights =
      explicit_weights({{3, 4.0}, {2, 3.0}, {1, 2.0}, {0, 1.0}});

  const Score from_default = score_pairwise_references(
      toy_question(), marked_answer("cand", 2), refs, defaulted, a);
  const Score from_explicit = score_pairwise_references(
      toy_question(), marked_answer("cand", 2), refs, explicit_config, b);
  CHECK(from_default.raw == from_explicit.raw);
  CHECK(from_default.normalized == from_explicit.normalized);
}

TEST_CASE("single-reference comparison is weight invariant") {
  const ReferenceList refs = marked_references({2});
  JudgeClient judge = oracle_judge();
  StrategyConfig small;
  small.method = Method::pairwise_refs;
  small.weights = explicit_weights({{2, 1.0}});
  StrategyConfig large = small;
  large.weights = explicit_weights({{2, 7.5}});

  for (int grade : {3, 0}) {
    const Score s = score_pairwise_references(
        toy_question(), marked_answer("c" + std::to_string(grade), grade),
        refs, small, judge);
    const Score l = score_pairwise_references(
        toy_question(), marked_answer("c" + std::to_string(grade), grade),
        refs, large, judge);
    CHECK(s.normalized == l.normalized);
    CHECK(s.normalized == (grade > 2 ? 10.0 : 0.0));
  }
}

TEST_CASE("reference comparison rejects an empty list") {
  JudgeClient judge = oracle_judge();
  StrategyConfig config;
  config.method = Method::pairwise_refs;
  const ReferenceList empty("q1");
  CHECK_THROWS_AS(score_pairwise_references(toy_question(),
                                            marked_answer("a", 2), empty,
                                            config, judge),
                  ConfigError);
}

TEST_CASE("reference comparison tallies failed pairs as zeros") {
  JudgeClient judge = scripted_judge("shrug");
  StrategyConfig config;
  config.method = Method::pairwise_refs;
  std::size_t errors = 0;
  const Score s = score_pairwise_references(
      toy_question(), marked_answer("a", 2), marked_references({3, 0}),
      config, judge, &errors);
  CHECK(errors == 2);
  CHECK(s.raw == 0.0);
  CHECK(s.normalized == 5.0);
}

TEST_CASE("rank scoring maps insertion position onto 0..10") {
  JudgeClient judge = oracle_judge();
  StrategyConfig config;
  config.method = Method::listwise;
  const Question q = toy_question();

  // Better than every reference: rank 1 of m=3, top score.
  const Score top = score_listwise(q, marked_answer("a", 3),
                                   marked_references({2, 1, 0}), config,
                                   judge);
  CHECK(top.raw == 1.0);
  CHECK(top.normalized == 10.0);

  // Worse than every reference: rank m+1 = 5 of m=4, bottom score.
  const Score bottom = score_listwise(q, marked_answer("b", 0),
                                      marked_references({3, 2, 1, 1}), config,
                                      judge);
  CHECK(bottom.raw == 5.0);
  CHECK(bottom.normalized == 0.0);

  // Rank 3 of m=8: 10 * (9 - 3) / 8 = 7.5.
  const Score mid = score_listwise(q, marked_answer("c", 3),
                                   marked_references({3, 3, 2, 2, 1, 1, 0, 0}),
                                   config, judge);
  CHECK(mid.raw == 3.0);
  CHECK(mid.normalized == 7.5);

  StrategyConfig identity = config;
  identity.normalization = Normalization::identity;
  CHECK(score_listwise(q, marked_answer("d", 3),
                       marked_references({3, 3, 2, 2, 1, 1, 0, 0}), identity,
                       judge)
            .normalized == 3.0);

  const ReferenceList empty("q1");
  CHECK_THROWS_AS(score_listwise(q, marked_answer("e", 2), empty, config,
                                 judge),
                  ConfigError);
}

TEST_CASE("rank scoring is monotone in the candidate's grade") {
  JudgeClient judge = oracle_judge();
  StrategyConfig config;
  config.method = Method::listwise;
  Rng rng(67);
  const Question q = toy_question();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.uniform(8);
    std::vector<int> grades;
    for (std::size_t i = 0; i < m; ++i) {
      grades.push_back(static_cast<int>(rng.uniform(4)));
    }
    const ReferenceList refs = marked_references(grades);
    auto count_at_least = [&](int g) {
      int n = 0;
      for (int r : refs.grades()) n += r >= g ? 1 : 0;
      return n;
    };
    for (int high = 1; high < 4; ++high) {
      for (int low = 0; low < high; ++low) {
        const Score better = score_listwise(
            q, marked_answer("h" + std::to_string(trial), high), refs, config,
            judge);
        const Score worse = score_listwise(
            q, marked_answer("l" + std::to_string(trial), low), refs, config,
            judge);
        if (count_at_least(high) < count_at_least(low)) {
          CHECK(better.normalized > worse.normalized);
        } else {
          // Same insertion gap: the rank cannot tell them apart.
          CHECK(better.normalized == worse.normalized);
        }
      }
    }
  }
}

TEST_CASE("similarity scoring takes the best top-grade reference") {
  GradedPool pool;
  pool.question = toy_question();
  GradedAnswer long_ref;
  long_ref.answer_id = "r1";
  long_ref.question_id = "q1";
  long_ref.text = "a p q r s t u";
  long_ref.grade = 3;
  GradedAnswer short_ref = long_ref;
  short_ref.answer_id = "r2";
  short_ref.text = "a";
  pool.answers_by_grade[3] = {long_ref, short_ref};

  GradedAnswer cand;
  cand.answer_id = "c";
  cand.question_id = "q1";
  cand.text = "a b c";
  // Unigram F1 is 0.2 against the long reference and 0.5 against the short
  // one; the best reference wins and x10 lands on 5.0.
  const Score s = score_against_pool(cand, pool, Method::rouge1);
  CHECK(s.raw == 0.5);
  CHECK(s.normalized == 5.0);

  GradedPool empty;
  empty.question = toy_question();
  CHECK_THROWS_AS(score_against_pool(cand, empty, Method::rouge1),
                  ConfigError);
}

TEST_CASE("similarity scoring falls back past an empty top grade") {
  GradedPool pool;
  pool.question = toy_question();
  pool.answers_by_grade[3] = {};
  GradedAnswer ref;
  ref.answer_id = "r";
  ref.question_id = "q1";
  ref.text = "a b c";
  ref.grade = 1;
  pool.answers_by_grade[1] = {ref};

  GradedAnswer cand = ref;
  cand.answer_id = "c";
  std::vector<std::string> warnings;
  const Score s =
      score_against_pool(cand, pool, Method::rouge1, nullptr, false,
                         &warnings);
  CHECK(s.raw == 1.0);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("no top-grade ground truth") != std::string::npos);
  CHECK(warnings[0].find("grade 1") != std::string::npos);
}

TEST_CASE("similarity metrics dispatch by method") {
  GradedPool pool;
  pool.question = toy_question();
  GradedAnswer ref;
  ref.answer_id = "r";
  ref.question_id = "q1";
  ref.text = "the cat sat on the mat";
  ref.grade = 3;
  pool.answers_by_grade[3] = {ref};
  GradedAnswer cand = ref;
  cand.answer_id = "c";

  for (Method metric : {Method::rouge1, Method::rouge2, Method::rougeL,
                        Method::bleu, Method::bertscore}) {
    const Score s = score_against_pool(cand, pool, metric);
    CHECK(s.raw == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.method == metric);
  }
  CHECK_THROWS_AS(score_against_pool(cand, pool, Method::listwise),
                  ConfigError);

  // Recall mode scores the uncut reference coverage.
  GradedAnswer partial = cand;
  partial.text = "the cat";
  const Score f1 = score_against_pool(partial, pool, Method::rouge1);
  const Score recall =
      score_against_pool(partial, pool, Method::rouge1, nullptr, true);
  CHECK(recall.raw == doctest::Approx(2.0 / 6.0));
  CHECK(f1.raw == doctest::Approx(2.0 * (2.0 / 2.0) * (2.0 / 6.0) /
                                  ((2.0 / 2.0) + (2.0 / 6.0))));
  CHECK(recall.raw < f1.raw);
}

TEST_CASE("reference lists convert to graded pools") {
  const ReferenceList refs = marked_references({3, 2, 2, 0});
  const GradedPool pool = pool_from_references(toy_question(), refs);
  CHECK(pool.total() == 4);
  CHECK(pool.count(2) == 2);
  CHECK(pool.count(3) == 1);
  CHECK(pool.question.question_id == "q1");
}
