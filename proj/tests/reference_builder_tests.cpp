#include "nfqa/reference_builder.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "nfqa/corpus.hpp"
#include "nfqa/judge.hpp"

using namespace nfqa;

namespace {

GradedPool toy_pool(const std::map<int, int>& per_grade) {
  GradedPool pool;
  pool.question = {"p1", "What causes tides?"};
  for (const auto& [grade, count] : per_grade) {
    for (int i = 0; i < count; ++i) {
      GradedAnswer a;
      a.answer_id = "g" + std::to_string(grade) + "n" + std::to_string(i);
      a.question_id = "p1";
      a.text = "tides answer " + a.answer_id;
      a.grade = grade;
      pool.answers_by_grade[grade].push_back(a);
    }
  }
  return pool;
}

const GradeScale kScale = GradeScale::parse("3,2,1,0");

GenerationContext quiet_context() {
  GenerationContext ctx;
  ctx.retry.base_delay_ms = 0;
  return ctx;
}

}  // namespace

TEST_CASE("composition parsing normalizes order and validates digits") {
  CHECK(parse_composition("3210", kScale).grades ==
        std::vector<int>{3, 2, 1, 0});
  CHECK(parse_composition("0123", kScale).grades ==
        std::vector<int>{3, 2, 1, 0});
  CHECK(parse_composition("33321000", kScale).grades ==
        std::vector<int>{3, 3, 3, 2, 1, 0, 0, 0});
  CHECK(parse_composition("3210", kScale).str() == "3210");
  CHECK_THROWS_WITH_AS(parse_composition("9", kScale),
                       doctest::Contains("9"), ConfigError);
  CHECK_THROWS_AS(parse_composition("", kScale), ConfigError);
  CHECK_THROWS_AS(parse_composition("3x1", kScale), ConfigError);

  const auto mult = parse_composition("33221100", kScale).multiplicities();
  CHECK(mult.at(3) == 2);
  CHECK(mult.at(0) == 2);
  CHECK(mult.begin()->first == 3);
}

TEST_CASE("composition presets resolve to their digit strings") {
  CHECK(resolve_composition("four_level", kScale).str() == "3210");
  CHECK(resolve_composition("eight_level", kScale).str() == "33221100");
  CHECK(resolve_composition("eight_level_top_heavy", kScale).str() ==
        "33321000");
  CHECK(resolve_composition("eight_level_mid_heavy", kScale).str() ==
        "32221110");
  CHECK(resolve_composition("3322", kScale).str() == "3322");
  CHECK_THROWS_AS(resolve_composition("no_such_preset", kScale), ConfigError);
}

TEST_CASE("sampling realizes the composition deterministically") {
  const GradedPool pool = toy_pool({{3, 3}, {2, 3}, {1, 2}, {0, 2}});
  const Composition comp = parse_composition("3210", kScale);
  const ReferenceList a = sample_reference_list(pool, comp, 7);
  CHECK(a.composition() == "3210");
  CHECK(a.size() == 4);
  const ReferenceList b = sample_reference_list(pool, comp, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.at(i).answer_id == b.at(i).answer_id);
  }
  // Some other seed eventually picks a different grade-3 answer.
  bool differs = false;
  for (std::uint64_t seed = 8; seed < 20 && !differs; ++seed) {
    differs = sample_reference_list(pool, comp, seed).at(0).answer_id !=
              a.at(0).answer_id;
  }
  CHECK(differs);
}

TEST_CASE("sampling never repeats an answer within a list") {
  const GradedPool pool = toy_pool({{3, 2}, {2, 4}});
  const ReferenceList list =
      sample_reference_list(pool, parse_composition("332222", kScale), 3);
  std::set<std::string> ids;
  for (const auto& a : list.answers()) ids.insert(a.answer_id);
  CHECK(ids.size() == list.size());
  CHECK(list.composition() == "332222");
}

TEST_CASE("strict sampling raises a shortfall naming the grade") {
  const GradedPool pool = toy_pool({{3, 1}});
  const Composition comp = parse_composition("33", kScale);
  CHECK_THROWS_AS(sample_reference_list(pool, comp, 1), ShortfallError);
  try {
    sample_reference_list(pool, comp, 1);
  } catch (const ShortfallError& e) {
    CHECK(e.grade() == 3);
  }
}

TEST_CASE("shortfall mode shrinks the list and reports what it got") {
  const GradedPool pool = toy_pool({{3, 1}, {1, 1}});
  Composition actual;
  const ReferenceList list = sample_reference_list(
      pool, parse_composition("3310", kScale), 1, true, &actual);
  CHECK(list.composition() == "31");
  CHECK(actual.str() == "31");
}

TEST_CASE("sampled reference sets cover the dataset") {
  SyntheticSpec spec;
  spec.questions = 6;
  const Dataset ds = synthesize_dataset(spec);
  std::vector<std::string> warnings;
  const ReferenceSet refs = build_sampled_reference_set(
      ds, parse_composition("3210", kScale), 5, false, &warnings);
  CHECK(refs.lists.size() == 6);
  CHECK(refs.composition == "3210");
  CHECK(refs.regime == "multi_grade");
  CHECK(refs.seed == 5);
  CHECK(refs.backend_ids.empty());
  CHECK(warnings.empty());
  for (const auto& list : refs.lists) {
    CHECK(list.composition() == "3210");
  }
}

// One question loses its grade-0 bucket: the set errors in strict mode and
// shrinks that list with a warning under allow_shortfall.
TEST_CASE("sampled reference sets honor the shortfall switch") {
  SyntheticSpec spec;
  spec.questions = 3;
  Dataset ds = synthesize_dataset(spec);
  const std::string victim = ds.questions[0].question_id;
  std::erase_if(ds.answers, [&](const GradedAnswer& a) {
    return a.question_id == victim && a.grade == 0;
  });
  const Composition comp = parse_composition("3210", kScale);
  CHECK_THROWS_AS(build_sampled_reference_set(ds, comp, 5), ShortfallError);
  std::vector<std::string> warnings;
  const ReferenceSet refs =
      build_sampled_reference_set(ds, comp, 5, true, &warnings);
  CHECK(refs.lists.size() == 3);
  CHECK(refs.find(victim)->composition() == "321");
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find(victim) != std::string::npos);
  CHECK(warnings[0].find("321") != std::string::npos);
}

TEST_CASE("generation plans validate their invariants") {
  GenerationPlan plan;
  plan.golden_backend = "golden";
  plan.generator_backends = {"gen-a"};
  plan.target_grades = {2, 1, 0};
  plan.validate();

  GenerationPlan no_golden = plan;
  no_golden.golden_backend.clear();
  CHECK_THROWS_AS(no_golden.validate(), ConfigError);

  GenerationPlan no_generators = plan;
  no_generators.generator_backends.clear();
  CHECK_THROWS_AS(no_generators.validate(), ConfigError);

  GenerationPlan unsorted = plan;
  unsorted.target_grades = {1, 2, 0};
  CHECK_THROWS_AS(unsorted.validate(), ConfigError);

  GenerationPlan negative_shots = plan;
  negative_shots.shots = -1;
  CHECK_THROWS_AS(negative_shots.validate(), ConfigError);
}

TEST_CASE("golden generation grounds on the original answer when given") {
  ScriptedBackend backend("golden");
  backend.set_default("A thorough tidal explanation.");
  const Question q{"p1", "What causes tides?"};
  GradedAnswer original;
  original.answer_id = "orig";
  original.question_id = "p1";
  original.text = "GROUNDING-TEXT-MARKER";
  original.grade = 3;

  // The prompt must embed the original golden text; a substring rule proves
  // it arrived.
  ScriptedBackend probing("golden2");
  probing.map_substring("GROUNDING-TEXT-MARKER", "Expanded golden answer.");
  const GradedAnswer grounded = generate_golden(
      q, original, probing, quiet_context(), kScale, 0, 11);
  CHECK(grounded.text == "Expanded golden answer.");
  CHECK(grounded.grade == 3);
  CHECK(grounded.origin == Origin::llm_generated);
  CHECK(grounded.question_id == "p1");

  const GradedAnswer fresh = generate_golden(
      q, std::nullopt, backend, quiet_context(), kScale, 0, 11);
  CHECK(fresh.text == "A thorough tidal explanation.");
  CHECK(fresh.grade == 3);

  ScriptedBackend silent("mute");
  silent.set_default("   ");
  CHECK_THROWS_AS(
      generate_golden(q, std::nullopt, silent, quiet_context(), kScale, 0, 11),
      GenerationError);
}

TEST_CASE("descending generation parses tier lines per backend") {
  BackendRegistry registry;
  auto good = std::make_shared<ScriptedBackend>("gen-a");
  good->set_default(
      "Grade 2: solid answer <grade:2>\n"
      "Grade 1: partial answer <grade:1>\n"
      "Grade 0: wrong answer <grade:0>");
  auto broken = std::make_shared<ScriptedBackend>("gen-b");
  broken->set_default("I refuse to follow the format.");
  registry.add(good);
  registry.add(broken);

  GenerationPlan plan;
  plan.golden_backend = "gen-a";
  plan.generator_backends = {"gen-a", "gen-b"};
  plan.target_grades = {2, 1, 0};
  plan.shots = 0;

  const Question q{"p1", "What causes tides?"};
  GradedAnswer golden;
  golden.answer_id = "gold";
  golden.question_id = "p1";
  golden.text = "the moon's gravity";
  golden.grade = 3;

  const GenerationOutcome outcome = generate_descending_references(
      q, golden, plan, registry, quiet_context());
  REQUIRE(outcome.lists.count("gen-a") == 1);
  CHECK(outcome.lists.count("gen-b") == 0);
  CHECK(outcome.errors.count("gen-b") == 1);
  const auto& list = outcome.lists.at("gen-a");
  REQUIRE(list.size() == 3);
  CHECK(list[0].grade == 2);
  CHECK(list[0].text == "solid answer <grade:2>");
  CHECK(list[2].grade == 0);
  CHECK(list[0].origin == Origin::llm_generated);
}

TEST_CASE("descending generation flags a backend missing a tier") {
  BackendRegistry registry;
  auto partial = std::make_shared<ScriptedBackend>("gen-a");
  partial->set_default("Grade 2: only the one tier");
  registry.add(partial);
  GenerationPlan plan;
  plan.golden_backend = "gen-a";
  plan.generator_backends = {"gen-a"};
  plan.target_grades = {2, 1};
  const Question q{"p1", "What causes tides?"};
  GradedAnswer golden;
  golden.answer_id = "gold";
  golden.question_id = "p1";
  golden.text = "gravity";
  golden.grade = 3;
  const GenerationOutcome outcome = generate_descending_references(
      q, golden, plan, registry, quiet_context());
  CHECK(outcome.lists.empty());
  REQUIRE(outcome.errors.count("gen-a") == 1);
  CHECK(outcome.errors.at("gen-a").find("1") != std::string::npos);
}

TEST_CASE("merging picks one answer per grade, golden first") {
  GradedAnswer golden;
  golden.answer_id = "gold";
  golden.question_id = "p1";
  golden.text = "golden";
  golden.grade = 3;

  auto tier_answer = [](const std::string& backend, int grade) {
    GradedAnswer a;
    a.answer_id = backend + "-g" + std::to_string(grade);
    a.question_id = "p1";
    a.text = backend + " text " + std::to_string(grade);
    a.grade = grade;
    a.origin = Origin::llm_generated;
    return a;
  };
  std::map<std::string, std::vector<GradedAnswer>> lists;
  for (const std::string backend : {"b1", "b2", "b3"}) {
    lists[backend] = {tier_answer(backend, 2), tier_answer(backend, 1),
                      tier_answer(backend, 0)};
  }

  const ReferenceList merged =
      merge_generated_lists(lists, golden, {2, 1, 0}, 5);
  REQUIRE(merged.size() == 4);
  CHECK(merged.at(0).answer_id == "gold");
  CHECK(merged.composition() == "3210");

  // Deterministic per seed; different seeds reach different backends.
  const ReferenceList again =
      merge_generated_lists(lists, golden, {2, 1, 0}, 5);
  for (std::size_t i = 0; i < merged.size(); ++i) {
    CHECK(merged.at(i).answer_id == again.at(i).answer_id);
  }
  std::set<std::string> grade2_sources;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    grade2_sources.insert(
        merge_generated_lists(lists, golden, {2, 1, 0}, seed).at(1).answer_id);
  }
  CHECK(grade2_sources.size() == 3);

  // A grade nobody covered is an error naming it.
  std::map<std::string, std::vector<GradedAnswer>> thin;
  thin["b1"] = {tier_answer("b1", 2)};
  CHECK_THROWS_WITH_AS(merge_generated_lists(thin, golden, {2, 1}, 1),
                       doctest::Contains("1"), GenerationError);

  // Single backend: its answers are the only choice.
  std::map<std::string, std::vector<GradedAnswer>> solo;
  solo["b1"] = {tier_answer("b1", 2), tier_answer("b1", 1),
                tier_answer("b1", 0)};
  const ReferenceList sole = merge_generated_lists(solo, golden, {2, 1, 0}, 9);
  CHECK(sole.at(1).answer_id == "b1-g2");
}

TEST_CASE("full generation pipeline assembles a graded list") {
  BackendRegistry registry;
  registry.add(std::make_shared<SyntheticGeneratorBackend>("golden-model", 1));
  registry.add(std::make_shared<SyntheticGeneratorBackend>("gen-a", 2));
  registry.add(std::make_shared<SyntheticGeneratorBackend>("gen-b", 3));

  GenerationPlan plan;
  plan.golden_backend = "golden-model";
  plan.generator_backends = {"gen-a", "gen-b"};
  plan.target_grades = {2, 1, 0};
  plan.shots = 2;
  plan.seed = 4;

  const Question q{"p1", "What causes ocean tides to rise and fall?"};
  std::vector<std::string> warnings;
  const ReferenceList list = build_generated_reference_list(
      q, std::nullopt, plan, registry, quiet_context(), kScale, &warnings);
  CHECK(warnings.empty());
  REQUIRE(list.size() == 4);
  CHECK(list.composition() == "3210");
  CHECK(list.at(0).grade == 3);
  CHECK(list.at(0).origin == Origin::llm_generated);
  for (const auto& a : list.answers()) {
    CHECK(a.question_id == "p1");
    CHECK_FALSE(a.text.empty());
  }

  // One failing generator leaves a warning but not an error.
  auto failing = std::make_shared<ScriptedBackend>("gen-c");
  failing->set_default("not the format");
  registry.add(failing);
  GenerationPlan mixed = plan;
  mixed.generator_backends = {"gen-a", "gen-c"};
  std::vector<std::string> mixed_warnings;
  const ReferenceList partial = build_generated_reference_list(
      q, std::nullopt, mixed, registry, quiet_context(), kScale,
      &mixed_warnings);
  CHECK(partial.size() == 4);
  REQUIRE(mixed_warnings.size() == 1);
  CHECK(mixed_warnings[0].find("gen-c") != std::string::npos);

  // Every generator failing is a generation error.
  GenerationPlan doomed = plan;
  doomed.generator_backends = {"gen-c"};
  CHECK_THROWS_AS(
      build_generated_reference_list(q, std::nullopt, doomed, registry,
                                     quiet_context(), kScale),
      GenerationError);
}
