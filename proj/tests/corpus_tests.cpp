#include "nfqa/corpus.hpp"

#include <unistd.h>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "nfqa/core.hpp"

using namespace nfqa;
namespace fs = std::filesystem;

namespace {

// Fresh per-test scratch directory, removed on destruction.
struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("nfqa-corpus-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string file(const std::string& name, std::string_view content) {
    const std::string path = (dir / name).string();
    write_file(path, content);
    return path;
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

Dataset toy_dataset() {
  Dataset ds;
  ds.name = "toy";
  ds.scale = GradeScale::parse("3,2,1,0");
  ds.questions = {{"q1", "Why is the sky blue?"},
                  {"q2", "How do magnets work?"}};
  GradedAnswer a;
  a.question_id = "q1";
  a.origin = Origin::human_pool;
  a.answer_id = "a1"; a.text = "Rayleigh scattering."; a.grade = 3;
  ds.answers.push_back(a);
  a.answer_id = "a2"; a.text = "The air is blue."; a.grade = 1;
  ds.answers.push_back(a);
  a.question_id = "q2";
  a.answer_id = "b1"; a.text = "Aligned electron spins."; a.grade = 2;
  ds.answers.push_back(a);
  a.answer_id = "b2"; a.text = "Unknown."; a.grade = 0;
  ds.answers.push_back(a);
  a.answer_id = "b3"; a.text = "Model guess."; a.grade = std::nullopt;
  a.origin = Origin::candidate;
  ds.answers.push_back(a);
  return ds;
}

}  // namespace

TEST_CASE("parse_qrels maps fields and tolerates extras") {
  const auto map = parse_qrels("Q1 0 D7 3\nQ2 0 D1 0 extra fields\n\nQ2 0 D2 2\n");
  CHECK(map.at("Q1").at("D7") == 3);
  CHECK(map.at("Q2").at("D1") == 0);
  CHECK(map.at("Q2").at("D2") == 2);
}

TEST_CASE("parse_qrels keeps the last grade of a duplicate pair") {
  std::size_t duplicates = 0;
  const auto map = parse_qrels("Q1 0 D7 3\nQ1 0 D7 1\n", &duplicates);
  CHECK(map.at("Q1").at("D7") == 1);
  CHECK(duplicates == 1);
}

TEST_CASE("parse_qrels names the offending line") {
  CHECK_THROWS_WITH_AS(parse_qrels("Q1 0 D7 three\n"),
                       doctest::Contains("line 1"), ParseError);
  CHECK_THROWS_WITH_AS(parse_qrels("Q1 0 D7 3\nQ2 0 D1\n"),
                       doctest::Contains("line 2"), ParseError);
}

TEST_CASE("answer text loader rejects duplicates and empty texts") {
  Scratch scratch;
  const auto good = scratch.file(
      "answers.jsonl",
      "{\"answer_id\":\"D7\",\"text\":\"Because...\"}\n"
      "{\"answer_id\":\"D8\",\"text\":\"Since...\"}\n");
  const auto texts = load_answer_texts(good);
  CHECK(texts.at("D7") == "Because...");
  CHECK(texts.size() == 2);

  const auto dup = scratch.file(
      "dup.jsonl",
      "{\"answer_id\":\"D7\",\"text\":\"one\"}\n"
      "{\"answer_id\":\"D7\",\"text\":\"two\"}\n");
  CHECK_THROWS_WITH_AS(load_answer_texts(dup), doctest::Contains("D7"),
                       ParseError);

  const auto empty = scratch.file(
      "empty.jsonl", "{\"answer_id\":\"D9\",\"text\":\"\"}\n");
  CHECK_THROWS_WITH_AS(load_answer_texts(empty), doctest::Contains("D9"),
                       ParseError);
}

TEST_CASE("graded candidate loader enforces grades and non-empty sets") {
  Scratch scratch;
  const GradeScale scale = GradeScale::parse("3,2,1");
  const auto good = scratch.file(
      "cands.jsonl",
      "{\"question_id\":\"w1\",\"question_text\":\"Why?\",\"candidates\":["
      "{\"answer_id\":\"c1\",\"text\":\"full\",\"grade\":3},"
      "{\"answer_id\":\"c2\",\"text\":\"partial\",\"grade\":2},"
      "{\"answer_id\":\"c3\",\"text\":\"weak\",\"grade\":1}]}\n");
  const auto sets = load_graded_candidates(good, scale);
  REQUIRE(sets.size() == 1);
  CHECK(sets[0].question.question_id == "w1");
  REQUIRE(sets[0].candidates.size() == 3);
  CHECK(sets[0].candidates[0].grade == 3);
  CHECK(sets[0].candidates[0].origin == Origin::candidate);

  const auto none = scratch.file(
      "none.jsonl",
      "{\"question_id\":\"w1\",\"question_text\":\"Why?\",\"candidates\":[]}\n");
  CHECK_THROWS_AS(load_graded_candidates(none, scale), ParseError);

  const auto bad_grade = scratch.file(
      "grade.jsonl",
      "{\"question_id\":\"w1\",\"question_text\":\"Why?\",\"candidates\":["
      "{\"answer_id\":\"c1\",\"text\":\"x\",\"grade\":4}]}\n");
  CHECK_THROWS_AS(load_graded_candidates(bad_grade, scale), ParseError);

  const auto missing_grade = scratch.file(
      "mg.jsonl",
      "{\"question_id\":\"w1\",\"question_text\":\"Why?\",\"candidates\":["
      "{\"answer_id\":\"c1\",\"text\":\"x\"}]}\n");
  CHECK_THROWS_AS(load_graded_candidates(missing_grade, scale), ParseError);
}

TEST_CASE("build_dataset drops answers with no text and counts them") {
  const auto qrels = parse_qrels("Q1 0 D7 3\nQ1 0 D8 1\nQ2 0 D9 2\n");
  std::unordered_map<std::string, std::string> texts{
      {"D7", "an answer"}, {"D9", "another"}};
  std::size_t dropped = 0;
  const Dataset ds = build_dataset(qrels, GradeScale::parse("3,2,1,0"), "t",
                                   texts, {}, &dropped);
  CHECK(dropped == 1);
  CHECK(ds.answers.size() == 2);
  CHECK(ds.questions.size() == 2);
  CHECK(ds.find_answer("D8") == nullptr);
  // No question-text sidecar: the id doubles as display text.
  CHECK(ds.find_question("Q1")->text == "Q1");
  CHECK(ds.find_answer("D7")->grade == 3);
}

TEST_CASE("restrict_questions keeps listed ids and reports missing ones") {
  const Dataset ds = toy_dataset();
  std::vector<std::string> not_found;
  const Dataset cut = restrict_questions(ds, {"q2", "q9"}, &not_found);
  CHECK(cut.questions.size() == 1);
  CHECK(cut.questions[0].question_id == "q2");
  CHECK(cut.answers.size() == 3);
  CHECK(not_found == std::vector<std::string>{"q9"});

  const Dataset same = restrict_questions(ds, {"q1", "q2"});
  CHECK(same.questions.size() == ds.questions.size());
  CHECK(same.answers.size() == ds.answers.size());
}

TEST_CASE("dataset persistence round-trips") {
  Scratch scratch;
  const Dataset ds = toy_dataset();
  const std::string path = (scratch.dir / "ds.jsonl").string();
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  CHECK(back.name == ds.name);
  CHECK(back.scale.str() == ds.scale.str());
  REQUIRE(back.questions.size() == ds.questions.size());
  REQUIRE(back.answers.size() == ds.answers.size());
  for (std::size_t i = 0; i < ds.answers.size(); ++i) {
    CHECK(back.answers[i].answer_id == ds.answers[i].answer_id);
    CHECK(back.answers[i].question_id == ds.answers[i].question_id);
    CHECK(back.answers[i].text == ds.answers[i].text);
    CHECK(back.answers[i].grade == ds.answers[i].grade);
    CHECK(back.answers[i].origin == ds.answers[i].origin);
  }
}

TEST_CASE("dataset loader rejects files without a header") {
  Scratch scratch;
  const auto path = scratch.file(
      "broken.jsonl", "{\"record\":\"question\",\"question_id\":\"q\"}\n");
  CHECK_THROWS_AS(load_dataset(path), ParseError);
  CHECK_THROWS_AS(load_dataset((scratch.dir / "absent.jsonl").string()),
                  IoError);
}

TEST_CASE("reference set persistence round-trips") {
  Scratch scratch;
  ReferenceSet refs;
  refs.composition = "3210";
  refs.regime = "multi_grade";
  refs.seed = 11;
  refs.backend_ids = {"gen-a", "gen-b"};
  ReferenceList list("q1");
  GradedAnswer a;
  a.answer_id = "r1"; a.question_id = "q1"; a.text = "top"; a.grade = 3;
  a.origin = Origin::llm_generated;
  list.add(a);
  a.answer_id = "r2"; a.text = "low"; a.grade = 0; a.origin = Origin::human_pool;
  list.add(a);
  refs.lists.push_back(list);

  const std::string path = (scratch.dir / "refs.jsonl").string();
  save_reference_set(refs, path);
  const ReferenceSet back = load_reference_set(path);
  CHECK(back.composition == "3210");
  CHECK(back.regime == "multi_grade");
  CHECK(back.seed == 11);
  CHECK(back.backend_ids == refs.backend_ids);
  REQUIRE(back.lists.size() == 1);
  CHECK(back.lists[0].composition() == "30");
  CHECK(back.lists[0].at(0).origin == Origin::llm_generated);
  CHECK(back.find("q1") != nullptr);
  CHECK(back.find("zz") == nullptr);
}

TEST_CASE("record files append and load in order") {
  Scratch scratch;
  std::vector<EvaluationRecord> first(2), second(1);
  first[0].question_id = "q1"; first[0].answer_id = "a1";
  first[0].method = Method::listwise; first[0].seed = 1;
  first[0].backend_id = "oracle"; first[0].raw = 3; first[0].normalized = 5.0;
  first[1] = first[0]; first[1].answer_id = "a2";
  second[0] = first[0]; second[0].seed = 2;

  const std::string path = (scratch.dir / "records.jsonl").string();
  append_records(first, path);
  append_records(second, path);
  const auto back = load_records(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].answer_id == "a1");
  CHECK(back[1].answer_id == "a2");
  CHECK(back[2].seed == 2);
  CHECK(back[0].dedup_key() == first[0].dedup_key());
  CHECK(back[0].normalized == 5.0);
}

TEST_CASE("pools bucket answers by grade, best first") {
  const Dataset ds = toy_dataset();
  const GradedPool pool = pool_for(ds, "q2");
  CHECK(pool.question.question_id == "q2");
  CHECK(pool.count(2) == 1);
  CHECK(pool.count(0) == 1);
  CHECK(pool.count(3) == 0);
  // The ungraded candidate never enters the pool.
  CHECK(pool.total() == 2);
  CHECK(pool.answers_by_grade.begin()->first == 2);

  const auto all = pools(ds);
  CHECK(all.size() == 2);
}

TEST_CASE("manifest aggregates per-grade averages") {
  const Dataset ds = toy_dataset();
  const DatasetManifest m = manifest(ds);
  CHECK(m.name == "toy");
  CHECK(m.scale == "3,2,1,0");
  CHECK(m.question_count == 2);
  CHECK(m.avg_per_grade.at(3) == 0.5);
  CHECK(m.avg_per_grade.at(2) == 0.5);
  CHECK(m.avg_per_grade.at(1) == 0.5);
  CHECK(m.avg_per_grade.at(0) == 0.5);
}

TEST_CASE("synthetic dataset is deterministic and marker-complete") {
  SyntheticSpec spec;
  spec.questions = 5;
  const Dataset a = synthesize_dataset(spec);
  const Dataset b = synthesize_dataset(spec);
  CHECK(a.questions.size() == 5);
  // 3 + 3 + 2 + 2 answers per question under the default mix.
  CHECK(a.answers.size() == 5 * 10);
  REQUIRE(a.answers.size() == b.answers.size());
  for (std::size_t i = 0; i < a.answers.size(); ++i) {
    CHECK(a.answers[i].text == b.answers[i].text);
    REQUIRE(a.answers[i].grade.has_value());
    const std::string marker =
        "<grade:" + std::to_string(*a.answers[i].grade) + ">";
    CHECK(a.answers[i].text.find(marker) != std::string::npos);
  }
  CHECK(validate_dataset(a.questions, a.answers, a.scale).empty());

  SyntheticSpec other = spec;
  other.seed = 2;
  const Dataset c = synthesize_dataset(other);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.answers.size(); ++i) {
    any_difference |= a.answers[i].text != c.answers[i].text;
  }
  CHECK(any_difference);

  SyntheticSpec unmarked = spec;
  unmarked.grade_markers = false;
  const Dataset d = synthesize_dataset(unmarked);
  for (const auto& ans : d.answers) {
    CHECK(ans.text.find("<grade:") == std::string::npos);
  }
}
