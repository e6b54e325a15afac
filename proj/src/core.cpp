#include "nfqa/core.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "nfqa/util.hpp"

namespace nfqa {

const char* to_string(Origin origin) {
  switch (origin) {
    case Origin::human_pool: return "human_pool";
    case Origin::llm_generated: return "llm_generated";
    case Origin::candidate: return "candidate";
  }
  return "unknown";
}

const char* to_string(Method method) {
  switch (method) {
    case Method::pointwise_noref: return "pointwise_noref";
    case Method::pointwise_ref: return "pointwise_ref";
    case Method::pairwise_candidates: return "pairwise_candidates";
    case Method::pairwise_refs: return "pairwise_refs";
    case Method::listwise: return "listwise";
    case Method::rouge1: return "rouge1";
    case Method::rouge2: return "rouge2";
    case Method::rougeL: return "rougeL";
    case Method::bleu: return "bleu";
    case Method::bertscore: return "bertscore";
  }
  return "unknown";
}

Origin origin_from_string(std::string_view s) {
  if (s == "human_pool") return Origin::human_pool;
  if (s == "llm_generated") return Origin::llm_generated;
  if (s == "candidate") return Origin::candidate;
  throw ParseError("unknown origin: " + std::string(s));
}

Method method_from_string(std::string_view s) {
  for (Method m : all_methods()) {
    if (s == to_string(m)) return m;
  }
  throw ParseError("unknown method: " + std::string(s));
}

bool is_llm_method(Method method) {
  switch (method) {
    case Method::pointwise_noref:
    case Method::pointwise_ref:
    case Method::pairwise_candidates:
    case Method::pairwise_refs:
    case Method::listwise:
      return true;
    default:
      return false;
  }
}

bool needs_references(Method method) {
  switch (method) {
    case Method::pointwise_noref:
    case Method::pairwise_candidates:
      return false;
    default:
      return true;
  }
}

std::vector<Method> all_methods() {
  return {Method::pointwise_noref,     Method::pointwise_ref,
          Method::pairwise_candidates, Method::pairwise_refs,
          Method::listwise,            Method::rouge1,
          Method::rouge2,              Method::rougeL,
          Method::bleu,                Method::bertscore};
}

GradeScale::GradeScale(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.size() < 2) {
    throw ConfigError("grade scale needs at least two levels");
  }
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (levels_[i] >= levels_[i - 1]) {
      throw ConfigError("grade scale levels must be strictly decreasing");
    }
  }
}

GradeScale GradeScale::parse(std::string_view csv) {
  std::vector<int> levels;
  std::string token;
  std::stringstream ss{std::string(csv)};
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token.empty()) throw ParseError("empty level in grade scale");
    try {
      levels.push_back(std::stoi(token));
    } catch (const std::exception&) {
      throw ParseError("bad grade level: " + token);
    }
  }
  return GradeScale(levels);
}

bool GradeScale::contains(int level) const {
  return std::find(levels_.begin(), levels_.end(), level) != levels_.end();
}

std::size_t GradeScale::index_of(int level) const {
  auto it = std::find(levels_.begin(), levels_.end(), level);
  if (it == levels_.end()) {
    throw std::out_of_range("grade " + std::to_string(level) +
                            " not in scale " + str());
  }
  return static_cast<std::size_t>(it - levels_.begin());
}

std::string GradeScale::str() const {
  std::string out;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(levels_[i]);
  }
  return out;
}

void ReferenceList::add(GradedAnswer answer) {
  if (!answer.grade.has_value()) {
    throw std::invalid_argument("reference answer " + answer.answer_id +
                                " has no grade");
  }
  // Insert before the first strictly lower grade: keeps the list sorted by
  // grade descending with insertion order preserved among equals.
  auto it = std::find_if(answers_.begin(), answers_.end(),
                         [&](const GradedAnswer& a) {
                           return *a.grade < *answer.grade;
                         });
  answers_.insert(it, std::move(answer));
}

std::vector<int> ReferenceList::grades() const {
  std::vector<int> out;
  out.reserve(answers_.size());
  for (const auto& a : answers_) out.push_back(*a.grade);
  return out;
}

std::string ReferenceList::composition() const {
  std::string out;
  for (const auto& a : answers_) out += std::to_string(*a.grade);
  return out;
}

bool ReferenceList::contains_answer(const std::string& answer_id) const {
  return std::any_of(answers_.begin(), answers_.end(),
                     [&](const GradedAnswer& a) {
                       return a.answer_id == answer_id;
                     });
}

std::string EvaluationRecord::dedup_key() const {
  std::string key = question_id;
  key += '\x1f';
  key += answer_id;
  key += '\x1f';
  key += to_string(method);
  key += '\x1f';
  key += std::to_string(seed);
  key += '\x1f';
  key += std::to_string(shots);
  key += '\x1f';
  key += backend_id;
  return key;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::missing_question: return "missing_question";
    case ViolationKind::grade_out_of_scale: return "grade_out_of_scale";
    case ViolationKind::duplicate_answer_id: return "duplicate_answer_id";
    case ViolationKind::duplicate_question_id: return "duplicate_question_id";
    case ViolationKind::empty_answer_text: return "empty_answer_text";
    case ViolationKind::empty_question_text: return "empty_question_text";
  }
  return "unknown";
}

std::vector<Violation> validate_dataset(const std::vector<Question>& questions,
                                        const std::vector<GradedAnswer>& answers,
                                        const GradeScale& scale) {
  std::vector<Violation> out;
  std::unordered_set<std::string> qids;
  for (const auto& q : questions) {
    if (!qids.insert(q.question_id).second) {
      out.push_back({ViolationKind::duplicate_question_id, q.question_id,
                     "question id appears more than once"});
    }
    if (trim(q.text).empty()) {
      out.push_back({ViolationKind::empty_question_text, q.question_id,
                     "question text is empty"});
    }
  }
  std::unordered_set<std::string> aids;
  for (const auto& a : answers) {
    if (!aids.insert(a.answer_id).second) {
      out.push_back({ViolationKind::duplicate_answer_id, a.answer_id,
                     "answer id appears more than once"});
    }
    if (!qids.count(a.question_id)) {
      out.push_back({ViolationKind::missing_question, a.answer_id,
                     "references unknown question " + a.question_id});
    }
    if (a.grade.has_value() && !scale.contains(*a.grade)) {
      out.push_back({ViolationKind::grade_out_of_scale, a.answer_id,
                     "grade " + std::to_string(*a.grade) + " not in scale " +
                         scale.str()});
    }
    if (trim(a.text).empty()) {
      out.push_back({ViolationKind::empty_answer_text, a.answer_id,
                     "answer text is empty"});
    }
  }
  return out;
}

}  // namespace nfqa
