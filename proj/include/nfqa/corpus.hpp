#pragma once
// Dataset ingestion and persistence: TREC-style qrels plus answer-text
// sidecars, human-labeled candidate files, a canonical line-delimited
// dataset format with a header record, per-question grade pools, dataset
// statistics, and a synthetic dataset generator for offline experiments.

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nfqa/core.hpp"

namespace nfqa {

struct Dataset {
  std::string name = "dataset";
  GradeScale scale{std::vector<int>{1, 0}};
  std::vector<Question> questions;
  std::vector<GradedAnswer> answers;

  const Question* find_question(const std::string& question_id) const;
  const GradedAnswer* find_answer(const std::string& answer_id) const;
  // Answers of one question in dataset order.
  std::vector<const GradedAnswer*> answers_for(
      const std::string& question_id) const;
  std::vector<std::string> question_ids() const;
};

// Ground-truth pool of one question, answers bucketed by grade (best grade
// first). Ungraded answers never enter a pool.
struct GradedPool {
  Question question;
  std::map<int, std::vector<GradedAnswer>, std::greater<int>> answers_by_grade;

  std::size_t count(int grade) const;
  std::size_t total() const;
};

GradedPool pool_for(const Dataset& dataset, const std::string& question_id);
std::vector<GradedPool> pools(const Dataset& dataset);

struct DatasetManifest {
  std::string name;
  std::string scale;
  std::size_t question_count = 0;
  // Mean number of answers per question at each grade, best grade first.
  std::map<int, double, std::greater<int>> avg_per_grade;
};

DatasetManifest manifest(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Loaders

// Parses "qid <ignored> docid grade" lines (extra trailing fields are
// tolerated). Blank lines are skipped; a line with fewer than four fields or
// a non-integer grade raises ParseError naming the line number. A repeated
// (qid, docid) pair keeps the last grade and bumps *duplicates.
using QrelsMap =
    std::map<std::string, std::map<std::string, int>>;
QrelsMap parse_qrels(std::string_view text, std::size_t* duplicates = nullptr);
QrelsMap load_qrels(const std::string& path, std::size_t* duplicates = nullptr);

// JSONL of {"answer_id": ..., "text": ...}. Duplicate ids and empty texts
// are errors: this file is the authority on answer content.
std::unordered_map<std::string, std::string> load_answer_texts(
    const std::string& path);

// JSONL of {"question_id": ..., "text": ...}; lenient (used for optional
// question-text sidecars).
std::unordered_map<std::string, std::string> load_question_texts(
    const std::string& path);

// JSONL of {"question_id", "question_text", "candidates": [{"answer_id",
// "text", "grade"}]} for human-labeled candidate sets. Every candidate must
// carry an in-scale grade and each record at least one candidate.
struct GradedCandidateSet {
  Question question;
  std::vector<GradedAnswer> candidates;
};
std::vector<GradedCandidateSet> load_graded_candidates(const std::string& path,
                                                       const GradeScale& scale);

// Assembles a dataset from qrels plus the answer-text map. Answers missing
// from the text map are dropped (counted in *dropped), not an error. An
// empty question_texts map falls back to the id as display text.
Dataset build_dataset(
    const QrelsMap& qrels, const GradeScale& scale, const std::string& name,
    const std::unordered_map<std::string, std::string>& answer_texts,
    const std::unordered_map<std::string, std::string>& question_texts = {},
    std::size_t* dropped = nullptr);

// Keeps exactly the listed question ids (and their answers); ids not present
// in the dataset are returned through *not_found.
Dataset restrict_questions(const Dataset& dataset,
                           const std::vector<std::string>& id_list,
                           std::vector<std::string>* not_found = nullptr);

// ---------------------------------------------------------------------------
// Canonical persistence: line-delimited JSON records, first record is a
// header {"record":"header","name":...,"scale":...}, then one record per
// question and per answer. load(save(d)) == d.

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Reference list files carry full answer objects (generated references do
// not exist in the dataset) plus the construction parameters for audit.
struct ReferenceSet {
  std::string composition;
  std::string regime = "multi_grade";
  std::uint64_t seed = 0;
  // Backends that produced generated entries; empty for pure sampling.
  std::vector<std::string> backend_ids;
  std::vector<ReferenceList> lists;

  const ReferenceList* find(const std::string& question_id) const;
};

void save_reference_set(const ReferenceSet& refs, const std::string& path);
ReferenceSet load_reference_set(const std::string& path);

nlohmann::json record_to_json(const EvaluationRecord& record);
void append_records(const std::vector<EvaluationRecord>& records,
                    const std::string& path);
std::vector<EvaluationRecord> load_records(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  int questions = 20;
  // Answers per grade level for every question, keyed by grade.
  std::map<int, int> per_grade{{3, 3}, {2, 3}, {1, 2}, {0, 2}};
  GradeScale scale{std::vector<int>{3, 2, 1, 0}};
  std::uint64_t seed = 1;
  // Embed a machine-readable grade marker in each answer text so a
  // text-reading oracle can recover the hidden grade.
  bool grade_markers = true;
};

// Deterministic synthetic corpus. Better-graded answers share more key
// phrases with the question's golden phrasing, so lexical baselines get a
// real (if noisy) signal and judge protocols something to read.
Dataset synthesize_dataset(const SyntheticSpec& spec);

}  // namespace nfqa
