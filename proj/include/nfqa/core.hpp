#pragma once
// Core data model: questions, graded answers, grade scales, reference lists,
// score records, and dataset validation. Everything downstream (similarity
// baselines, judge protocols, the experiment harness) works in these terms.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nfqa {

// ---------------------------------------------------------------------------
// Errors

// Malformed input text: qrels lines, model completions, composition strings.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration (unknown backend kind, missing credential env var, ...).
// Never retried.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem trouble that is not a config mistake.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A completion backend failed. `transient` selects whether a retry policy
// may re-attempt the call (timeouts, 5xx) or must give up (auth, contract).
struct BackendError : std::runtime_error {
  BackendError(const std::string& what, bool transient_)
      : std::runtime_error(what), transient(transient_) {}
  bool transient = false;
};

// Reference generation could not produce a usable list for a question.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Enums

// Where an answer came from: a human-graded ground-truth pool, a model
// generation (golden or tiered references), or the candidate set under
// evaluation.
enum class Origin { human_pool, llm_generated, candidate };

// Scoring methods. The first five call a judge model; the rest are lexical
// or embedding overlap baselines computed locally.
enum class Method {
  pointwise_noref,
  pointwise_ref,
  pairwise_candidates,
  pairwise_refs,
  listwise,
  rouge1,
  rouge2,
  rougeL,
  bleu,
  bertscore,
};

const char* to_string(Origin origin);
const char* to_string(Method method);
Origin origin_from_string(std::string_view s);
Method method_from_string(std::string_view s);

// True for the methods that consult a judge backend.
bool is_llm_method(Method method);

// True for methods that need a reference list (everything except
// pointwise_noref and pairwise_candidates).
bool needs_references(Method method);

std::vector<Method> all_methods();

// ---------------------------------------------------------------------------
// Data model

struct Question {
  std::string question_id;
  std::string text;
};

// An ordered set of relevance levels, strictly decreasing, at least two
// entries, e.g. {3,2,1,0}. The order defines "better": levels[0] is best.
class GradeScale {
 public:
  explicit GradeScale(std::vector<int> levels);

  // Parses "3,2,1,0".
  static GradeScale parse(std::string_view csv);

  const std::vector<int>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  bool contains(int level) const;
  // Position within levels(); 0 is the best grade. Throws if absent.
  std::size_t index_of(int level) const;
  int max_level() const { return levels_.front(); }
  int min_level() const { return levels_.back(); }
  std::string str() const;

 private:
  std::vector<int> levels_;
};

struct GradedAnswer {
  std::string answer_id;
  std::string question_id;
  std::string text;
  // Absent for ungraded candidates (e.g. model outputs being evaluated).
  std::optional<int> grade;
  Origin origin = Origin::human_pool;
};

// Per-question reference list. Always kept sorted by grade descending;
// answers with equal grades keep their insertion order, so construction is
// reproducible from the same sampling sequence. Every entry must carry a
// grade (generated references carry their intended grade).
class ReferenceList {
 public:
  ReferenceList() = default;
  explicit ReferenceList(std::string question_id)
      : question_id_(std::move(question_id)) {}

  // Throws std::invalid_argument when the answer has no grade.
  void add(GradedAnswer answer);

  const std::string& question_id() const { return question_id_; }
  std::size_t size() const { return answers_.size(); }
  bool empty() const { return answers_.empty(); }
  const GradedAnswer& at(std::size_t i) const { return answers_.at(i); }
  const std::vector<GradedAnswer>& answers() const { return answers_; }
  std::vector<int> grades() const;
  // Grades concatenated as decimal digits, best first, e.g. "3210".
  std::string composition() const;
  bool contains_answer(const std::string& answer_id) const;

 private:
  std::string question_id_;
  std::vector<GradedAnswer> answers_;
};

struct Score {
  std::string question_id;
  std::string answer_id;
  Method method = Method::pointwise_noref;
  double raw = 0.0;
  double normalized = 0.0;
};

// One evaluation outcome row. (question_id, answer_id, method, seed, shots,
// backend_id) identifies a row uniquely within a result set. prompt_digest
// ties judge-backed rows to the prompts that produced them (empty for the
// local similarity baselines).
struct EvaluationRecord {
  std::string question_id;
  std::string answer_id;
  Method method = Method::pointwise_noref;
  std::uint64_t seed = 0;
  int shots = 0;
  std::string backend_id;
  std::string prompt_digest;
  double raw = 0.0;
  double normalized = 0.0;

  std::string dedup_key() const;
};

// ---------------------------------------------------------------------------
// Dataset validation

enum class ViolationKind {
  missing_question,       // answer references a question_id not in the set
  grade_out_of_scale,     // answer grade not in the scale
  duplicate_answer_id,    // answer_id seen twice
  duplicate_question_id,  // question_id seen twice
  empty_answer_text,
  empty_question_text,
};

const char* to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string subject_id;  // the offending answer_id or question_id
  std::string detail;
};

// Structural checks over an ingested dataset. Returns every violation found;
// an empty result means the dataset is usable as-is.
std::vector<Violation> validate_dataset(const std::vector<Question>& questions,
                                        const std::vector<GradedAnswer>& answers,
                                        const GradeScale& scale);

}  // namespace nfqa
