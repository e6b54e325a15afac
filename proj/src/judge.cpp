#include "nfqa/judge.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "nfqa/util.hpp"

namespace nfqa {

using nlohmann::json;

namespace {

const char* const kSlotNames[] = {"question", "candidate", "references",
                                  "shots",    "pair_a",    "pair_b"};

// Markers shared between the built-in templates and the prompt-reading
// mock backends. The mocks anchor on the LAST occurrence of each marker, so
// marker-like text inside {shots} or answer bodies cannot confuse them as
// long as the real block comes last.
constexpr const char* kPointCandidateBegin = "Answer to grade:\n";
constexpr const char* kPointCandidateEnd = "\n\nRate how well";
constexpr const char* kPairABegin = "Answer A:\n";
constexpr const char* kPairAEnd = "\n\nAnswer B:\n";
constexpr const char* kPairBBegin = "Answer B:\n";
constexpr const char* kPairBEnd = "\n\nWhich answer";
constexpr const char* kReferencesBegin = "Reference answers, best first:\n";
constexpr const char* kListCandidateBegin = "Answer to place:\n";
constexpr const char* kListCandidateEnd = "\n\nDecide where";
constexpr const char* kListReferencesEnd = "\n\nAnswer to place:\n";
constexpr const char* kDescendingMarker = "Write one answer for each";
constexpr const char* kGoldenMarker = "Write the best possible answer";
constexpr const char* kTierListBegin = "in this order: ";

const char kPointwiseNorefBody[] =
    R"(You are grading an answer to an open-ended question.

{shots}Question: {question}

Answer to grade:
{candidate}

Rate how well the answer addresses the question on a scale from 1 to 10, where 1 means unusable and 10 means excellent. Reply with the number only.

Score:)";

const char kPointwiseRefBody[] =
    R"(You are grading an answer to an open-ended question with reference answers for calibration.

{shots}Question: {question}

Reference answers, best first:
{references}

Answer to grade:
{candidate}

Rate how well the answer addresses the question on a scale from 1 to 10, where 1 means unusable and 10 means excellent, using the references as quality guidance. Reply with the number only.

Score:)";

const char kPairwiseBody[] =
    R"(You are comparing two answers to an open-ended question.

{shots}Question: {question}

Answer A:
{pair_a}

Answer B:
{pair_b}

Which answer addresses the question better? Reply with exactly one token: A, B, or TIE.

Verdict:)";

const char kListwiseBody[] =
    R"(You are placing a candidate answer within a ranked list of reference answers.

{shots}Question: {question}

Reference answers, best first:
{references}

Answer to place:
{candidate}

Decide where the answer belongs in this ranking. Reply with the position number at which it should be inserted, counting from 1 for better than every reference; if it is worse than every reference, reply with one more than the number of references. Reply with the number only.

Rank:)";

const char kGoldenGenerationBody[] =
    R"(You are an expert answering an open-ended question as well as it can be answered.

{shots}Question: {question}

{references}Write the best possible answer to the question. Reply with the answer text only.

Answer:)";

const char kDescendingGenerationBody[] =
    R"(You are writing answers of controlled, decreasing quality for calibration purposes.

{shots}Question: {question}

Best answer, for guidance:
{references}

Write one answer for each of these quality tiers, in this order: {candidate}

Higher tiers must be clearly better: more complete, more accurate, more convincing. Reply with one line per tier, each formatted exactly as "Grade <tier>: <answer>".)";

PromptTemplate make_template(std::string id, std::string body,
                             std::vector<std::string> required) {
  return PromptTemplate{std::move(id), std::move(body), std::move(required)};
}

// Text between the LAST occurrence of `begin` and the next `end` after it.
std::optional<std::string> slice_after_last(const std::string& text,
                                            std::string_view begin,
                                            std::string_view end) {
  const std::size_t b = text.rfind(begin);
  if (b == std::string::npos) return std::nullopt;
  const std::size_t start = b + begin.size();
  const std::size_t e = text.find(end, start);
  if (e == std::string::npos) return std::nullopt;
  return text.substr(start, e - start);
}

std::string strip_edge_punct(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(token[e - 1]))) --e;
  return std::string(token.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// First maximal digit run at or after `from` whose value passes `accept`.
std::optional<long long> first_integer(std::string_view text, std::size_t from,
                                       bool (*accept)(long long)) {
  for (std::size_t i = from; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    std::size_t j = i;
    while (j < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    long long value;
    if (j - i > 9) {
      value = 1000000000LL;  // longer runs only need to read as "too big"
    } else {
      value = std::stoll(std::string(text.substr(i, j - i)));
    }
    if (accept(value)) return value;
    i = j;
  }
  return std::nullopt;
}

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

}  // namespace

// ---------------------------------------------------------------------------
// Templates

std::string render_prompt(const PromptTemplate& tpl,
                          const std::map<std::string, std::string>& slots) {
  std::string out = tpl.body;
  for (const char* name : kSlotNames) {
    const std::string marker = std::string("{") + name + "}";
    auto it = slots.find(name);
    if (it != slots.end()) {
      out = replace_all(std::move(out), marker, it->second);
      continue;
    }
    const bool required =
        std::find(tpl.required_slots.begin(), tpl.required_slots.end(),
                  name) != tpl.required_slots.end();
    if (required) {
      throw ConfigError("template " + tpl.template_id + ": missing slot " +
                        name);
    }
    out = replace_all(std::move(out), marker, "");
  }
  return out;
}

std::string prompt_digest(const PromptTemplate& tpl,
                          const std::string& rendered) {
  std::uint64_t h = fnv1a64(tpl.template_id);
  h = fnv1a64(rendered, h);
  return to_hex(h);
}

TemplateSet TemplateSet::builtin() {
  TemplateSet t;
  t.pointwise_noref = make_template("pointwise_noref", kPointwiseNorefBody,
                                    {"question", "candidate"});
  t.pointwise_ref = make_template("pointwise_ref", kPointwiseRefBody,
                                  {"question", "candidate", "references"});
  t.pairwise =
      make_template("pairwise", kPairwiseBody, {"question", "pair_a", "pair_b"});
  t.listwise = make_template("listwise", kListwiseBody,
                             {"question", "candidate", "references"});
  t.golden_generation =
      make_template("golden_generation", kGoldenGenerationBody, {"question"});
  t.descending_generation =
      make_template("descending_generation", kDescendingGenerationBody,
                    {"question", "references", "candidate"});
  return t;
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
  TemplateSet t = builtin();
  auto load_into = [&](PromptTemplate& tpl) {
    const std::string path = dir + "/" + tpl.template_id + ".txt";
    std::ifstream in(path, std::ios::binary);
    if (!in) return;  // keep the built-in copy
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string body = ss.str();
    // Shipped files end with a newline; the working body does not.
    while (!body.empty() && body.back() == '\n') body.pop_back();
    tpl.body = std::move(body);
  };
  load_into(t.pointwise_noref);
  load_into(t.pointwise_ref);
  load_into(t.pairwise);
  load_into(t.listwise);
  load_into(t.golden_generation);
  load_into(t.descending_generation);
  return t;
}

std::string render_reference_block(const ReferenceList& references) {
  std::string out;
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + references.at(i).text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exemplars

ExemplarSet ExemplarSet::builtin() {
  ExemplarSet set;
  {
    Exemplar e;
    e.question = {"ex0", "why do cities near rivers flood more often"};
    e.answers_by_grade[3] =
        "Rivers concentrate runoff from the whole basin, so heavy rain "
        "upstream raises water levels downstream; paved city ground cannot "
        "absorb the surge, and older drainage was sized for smaller storms.";
    e.answers_by_grade[2] =
        "Rivers collect rain from a wide area and cities have a lot of "
        "pavement, so the water has nowhere to go.";
    e.answers_by_grade[1] = "Because the river overflows when it rains.";
    e.answers_by_grade[0] = "Floods are caused by the moon.";
    set.items.push_back(std::move(e));
  }
  {
    Exemplar e;
    e.question = {"ex1", "what makes sourdough bread different from other bread"};
    e.answers_by_grade[3] =
        "Sourdough rises with a wild culture of yeast and lactic bacteria "
        "instead of commercial yeast; the long fermentation adds acidity, "
        "keeps the crumb moist, and makes the starch easier to digest.";
    e.answers_by_grade[2] =
        "It uses a fermented starter instead of packet yeast, which gives "
        "it the sour taste.";
    e.answers_by_grade[1] = "It tastes more sour than normal bread.";
    e.answers_by_grade[0] = "It is just regular bread with food coloring.";
    set.items.push_back(std::move(e));
  }
  {
    Exemplar e;
    e.question = {"ex2", "how should i start learning to play chess"};
    e.answers_by_grade[3] =
        "Learn how each piece moves, then practice short games focusing on "
        "one opening for white and one for black; solve a few tactics "
        "puzzles daily and review your lost games to spot repeated "
        "mistakes.";
    e.answers_by_grade[2] =
        "Learn the rules, play a lot, and do tactics puzzles to improve.";
    e.answers_by_grade[1] = "Just play games until you get better.";
    e.answers_by_grade[0] = "Buy an expensive board first.";
    set.items.push_back(std::move(e));
  }
  return set;
}

ExemplarSet ExemplarSet::load(const std::string& path) {
  ExemplarSet set;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("question") ||
        !j.at("question").is_string() || !j.contains("answers_by_grade") ||
        !j.at("answers_by_grade").is_object()) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected {\"question\", \"answers_by_grade\"}");
    }
    Exemplar e;
    e.question.question_id = "ex" + std::to_string(set.items.size());
    e.question.text = j.at("question").get<std::string>();
    for (const auto& [key, value] : j.at("answers_by_grade").items()) {
      int grade = 0;
      try {
        grade = std::stoi(key);
      } catch (const std::exception&) {
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": bad grade key '" + key + "'");
      }
      if (!value.is_string()) {
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": answer for grade " + key + " must be a string");
      }
      e.answers_by_grade[grade] = value.get<std::string>();
    }
    if (e.answers_by_grade.size() < 2) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": exemplar needs at least two grades");
    }
    set.items.push_back(std::move(e));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Parsers

std::optional<int> try_parse_point_score(std::string_view text) {
  auto in_range = [](long long v) { return v >= 1 && v <= 10; };
  const std::string lower = to_lower(text);
  const std::size_t marker = lower.find("score:");
  if (marker != std::string::npos) {
    auto v = first_integer(text, marker + 6, in_range);
    if (v) return static_cast<int>(*v);
  }
  auto v = first_integer(text, 0, in_range);
  if (v) return static_cast<int>(*v);
  return std::nullopt;
}

int parse_point_score(std::string_view text) {
  auto v = try_parse_point_score(text);
  if (!v) {
    throw ParseError("no 1..10 score in completion: \"" + std::string(text) +
                     "\"");
  }
  return *v;
}

std::optional<PreferenceVerdict> try_parse_preference(std::string_view text) {
  for (const std::string& raw : split_ws(text)) {
    const std::string token = strip_edge_punct(raw);
    if (token == "A") return PreferenceVerdict::first_better;
    if (token == "B") return PreferenceVerdict::second_better;
    if (to_lower(token) == "tie") return PreferenceVerdict::tie;
  }
  return std::nullopt;
}

PreferenceVerdict parse_preference(std::string_view text) {
  auto v = try_parse_preference(text);
  if (!v) {
    throw ParseError("no A/B/TIE verdict in completion: \"" +
                     std::string(text) + "\"");
  }
  return *v;
}

std::optional<RankParse> try_parse_rank(std::string_view text, int m) {
  if (m < 1) throw std::invalid_argument("parse_rank: m must be >= 1");
  auto any = [](long long) { return true; };
  auto v = first_integer(text, 0, any);
  if (!v) return std::nullopt;
  RankParse out;
  long long clamped = *v;
  if (clamped < 1) clamped = 1;
  if (clamped > m + 1) clamped = m + 1;
  out.rank = static_cast<int>(clamped);
  out.clamped = clamped != *v;
  return out;
}

RankParse parse_rank(std::string_view text, int m) {
  auto v = try_parse_rank(text, m);
  if (!v) {
    throw ParseError("no rank integer in completion: \"" + std::string(text) +
                     "\"");
  }
  return *v;
}

// ---------------------------------------------------------------------------
// Backends

void BackendRegistry::add(std::shared_ptr<Backend> backend) {
  const std::string id = backend->id();
  if (!backends_.emplace(id, std::move(backend)).second) {
    throw ConfigError("backend id registered twice: " + id);
  }
}

bool BackendRegistry::has(const std::string& id) const {
  return backends_.count(id) != 0;
}

std::shared_ptr<Backend> BackendRegistry::get(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) {
    throw ConfigError("no backend registered under id '" + id + "'");
  }
  return it->second;
}

std::vector<std::string> BackendRegistry::ids() const {
  std::vector<std::string> out;
  out.reserve(backends_.size());
  for (const auto& [id, b] : backends_) out.push_back(id);
  return out;
}

ScriptedBackend::ScriptedBackend(std::string id) : Backend(std::move(id)) {}

void ScriptedBackend::map_substring(std::string needle, std::string completion) {
  std::lock_guard<std::mutex> lock(mutex_);
  rules_.emplace_back(std::move(needle), std::move(completion));
}

void ScriptedBackend::push(std::string completion) {
  std::lock_guard<std::mutex> lock(mutex_);
  queue_.push_back(std::move(completion));
}

void ScriptedBackend::set_default(std::string completion) {
  std::lock_guard<std::mutex> lock(mutex_);
  default_ = std::move(completion);
}

std::string ScriptedBackend::complete_impl(const CompletionRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (const auto& [needle, completion] : rules_) {
    if (request.prompt.find(needle) != std::string::npos) return completion;
  }
  if (!queue_.empty()) {
    std::string out = std::move(queue_.front());
    queue_.erase(queue_.begin());
    return out;
  }
  if (default_) return *default_;
  throw BackendError("scripted backend '" + id() + "' has no completion left",
                     false);
}

FlakyBackend::FlakyBackend(std::shared_ptr<Backend> inner, int failures,
                           std::string id)
    : Backend(std::move(id)), inner_(std::move(inner)),
      remaining_failures_(failures) {}

std::string FlakyBackend::complete_impl(const CompletionRequest& request) {
  if (remaining_failures_.fetch_sub(1) > 0) {
    throw BackendError("flaky backend '" + id() + "': simulated outage", true);
  }
  return inner_->complete(request);
}

BiasedBackend::BiasedBackend(std::string id) : Backend(std::move(id)) {}

std::string BiasedBackend::complete_impl(const CompletionRequest&) {
  return "A";
}

OracleBackend::OracleBackend(Options options, std::string id)
    : Backend(std::move(id)), options_(std::move(options)) {}

void OracleBackend::learn(const std::string& answer_text, int grade) {
  if (!options_.scale.contains(grade)) {
    throw ConfigError("oracle taught grade " + std::to_string(grade) +
                      " outside scale " + options_.scale.str());
  }
  std::lock_guard<std::mutex> lock(mutex_);
  grade_table_[fnv1a64(answer_text)] = grade;
}

int OracleBackend::ideal_point_score(const GradeScale& scale, int grade) {
  const double lo = scale.min_level();
  const double hi = scale.max_level();
  const double mapped = 1.0 + 9.0 * (grade - lo) / (hi - lo);
  return static_cast<int>(mapped + 0.5);
}

int OracleBackend::grade_of(const std::string& answer_text) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = grade_table_.find(fnv1a64(answer_text));
    if (it != grade_table_.end()) return it->second;
  }
  // Fallback: an embedded "<grade:N>" marker inside the text.
  const std::size_t pos = answer_text.rfind("<grade:");
  if (pos != std::string::npos) {
    const std::size_t end = answer_text.find('>', pos);
    if (end != std::string::npos) {
      try {
        const int g = std::stoi(answer_text.substr(pos + 7, end - pos - 7));
        if (options_.scale.contains(g)) return g;
      } catch (const std::exception&) {
      }
    }
  }
  throw BackendError("oracle '" + id() +
                         "' has no grade for answer text: \"" +
                         answer_text.substr(0, 60) + "\"",
                     false);
}

int OracleBackend::read_candidate_grade(int true_grade,
                                        const CompletionRequest& request,
                                        std::uint64_t read_index) const {
  if (options_.noise <= 0.0) return true_grade;
  // Pure function of (prompt, read index, seeds): replays through the cache
  // and across processes stay coherent.
  const std::uint64_t base =
      mix64(fnv1a64(request.prompt) ^ mix64(options_.noise_seed) ^
            mix64(request.seed * kNoiseStream));
  const std::uint64_t h = mix64(base + read_index * 0x2545F4914F6CDD1DULL);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u >= options_.noise) return true_grade;
  const auto& levels = options_.scale.levels();
  const std::size_t n = levels.size();
  const std::size_t true_idx = options_.scale.index_of(true_grade);
  const std::uint64_t h2 = mix64(h ^ 0xd1b54a32d192ed03ULL);
  const std::size_t shifted = (true_idx + 1 + h2 % (n - 1)) % n;
  return levels[shifted];
}

std::string OracleBackend::complete_impl(const CompletionRequest& request) {
  const std::string& p = request.prompt;
  if (p.find(kListCandidateBegin) != std::string::npos) {
    auto refs_block =
        slice_after_last(p, kReferencesBegin, kListReferencesEnd);
    auto cand = slice_after_last(p, kListCandidateBegin, kListCandidateEnd);
    if (!refs_block || !cand) {
      throw BackendError("oracle cannot parse listwise prompt", false);
    }
    const int g = grade_of(*cand);
    int after = 0;
    std::uint64_t read_index = 0;
    std::istringstream lines{*refs_block};
    std::string line;
    while (std::getline(lines, line)) {
      if (trim(line).empty()) continue;
      const std::size_t dot = line.find(". ");
      if (dot == std::string::npos) {
        throw BackendError("oracle cannot parse reference line: " + line,
                           false);
      }
      const int ref_grade = grade_of(line.substr(dot + 2));
      const int read = read_candidate_grade(g, request, read_index++);
      if (ref_grade >= read) ++after;
    }
    return std::to_string(1 + after);
  }
  if (p.find(kPairABegin) != std::string::npos) {
    auto a = slice_after_last(p, kPairABegin, kPairAEnd);
    auto b = slice_after_last(p, kPairBBegin, kPairBEnd);
    if (!a || !b) {
      throw BackendError("oracle cannot parse pairwise prompt", false);
    }
    const int ga = read_candidate_grade(grade_of(*a), request, 0);
    const int gb = read_candidate_grade(grade_of(*b), request, 1);
    // Equal grades favor the second position, same tie rule as ranking.
    return ga > gb ? "A" : "B";
  }
  if (p.find(kPointCandidateBegin) != std::string::npos) {
    auto cand = slice_after_last(p, kPointCandidateBegin, kPointCandidateEnd);
    if (!cand) {
      throw BackendError("oracle cannot parse pointwise prompt", false);
    }
    const int g = read_candidate_grade(grade_of(*cand), request, 0);
    return std::to_string(ideal_point_score(options_.scale, g));
  }
  throw BackendError("oracle cannot classify prompt", false);
}

SyntheticGeneratorBackend::SyntheticGeneratorBackend(std::string id,
                                                     std::uint64_t seed)
    : Backend(std::move(id)), seed_(seed) {}

std::string SyntheticGeneratorBackend::complete_impl(
    const CompletionRequest& request) {
  const std::string& p = request.prompt;
  const std::size_t q_begin = p.rfind("\nQuestion: ");
  if (q_begin == std::string::npos) {
    throw BackendError("generator cannot find question line", false);
  }
  const std::size_t q_start = q_begin + 11;
  std::size_t q_end = p.find('\n', q_start);
  if (q_end == std::string::npos) q_end = p.size();
  const std::string question = p.substr(q_start, q_end - q_start);
  const auto words = split_ws(question);
  Rng rng(derive_seed(seed_ ^ mix64(request.seed), id() + "|" + question));

  auto take_words = [&](std::size_t k) {
    std::string out;
    for (std::size_t i = 0; i < k && i < words.size(); ++i) {
      if (i) out += ' ';
      out += words[i];
    }
    return out;
  };

  if (p.find(kDescendingMarker) != std::string::npos) {
    const std::size_t t_begin = p.rfind(kTierListBegin);
    if (t_begin == std::string::npos) {
      throw BackendError("generator cannot find tier list", false);
    }
    const std::size_t t_start = t_begin + std::string(kTierListBegin).size();
    std::size_t t_end = p.find('\n', t_start);
    if (t_end == std::string::npos) t_end = p.size();
    std::vector<int> tiers;
    std::stringstream ss{p.substr(t_start, t_end - t_start)};
    std::string piece;
    while (std::getline(ss, piece, ',')) {
      piece = trim(piece);
      if (piece.empty()) continue;
      try {
        tiers.push_back(std::stoi(piece));
      } catch (const std::exception&) {
        throw BackendError("generator cannot parse tier '" + piece + "'",
                           false);
      }
    }
    if (tiers.empty()) {
      throw BackendError("generator got an empty tier list", false);
    }
    std::string out;
    const std::size_t n = tiers.size();
    for (std::size_t i = 0; i < n; ++i) {
      // Earlier (better) tiers cover more of the question's words.
      const std::size_t k =
          std::max<std::size_t>(1, words.size() * (n - i) / (n + 1));
      if (i) out += '\n';
      out += "Grade " + std::to_string(tiers[i]) + ": about " + take_words(k) +
             " said by " + id() + " variant " +
             std::to_string(rng.uniform(1000)) + " <grade:" +
             std::to_string(tiers[i]) + ">";
    }
    return out;
  }
  if (p.find(kGoldenMarker) != std::string::npos) {
    return "the full answer covers " + take_words(words.size()) +
           " thoroughly and convincingly, according to " + id() + " draft " +
           std::to_string(rng.uniform(1000));
  }
  throw BackendError("generator cannot classify prompt", false);
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : Backend(config.id), config_(std::move(config)) {
  const std::size_t scheme = config_.url.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("http backend url needs a scheme: " + config_.url);
  }
  const std::size_t slash = config_.url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    host_ = config_.url;
    path_ = "/";
  } else {
    host_ = config_.url.substr(0, slash);
    path_ = config_.url.substr(slash);
  }
}

std::string HttpChatBackend::complete_impl(const CompletionRequest& request) {
  httplib::Client client(host_);
  client.set_connection_timeout(config_.timeout_ms / 1000,
                                (config_.timeout_ms % 1000) * 1000);
  client.set_read_timeout(config_.timeout_ms / 1000,
                          (config_.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!config_.auth_env.empty()) {
    const char* key = std::getenv(config_.auth_env.c_str());
    if (!key || !*key) {
      throw ConfigError("environment variable " + config_.auth_env +
                        " is not set (backend '" + id() + "')");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  json body{{"model", config_.model},
            {"messages",
             json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens},
            {"seed", request.seed}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("backend '" + id() + "': connection failure (" +
                           httplib::to_string(res.error()) + ")",
                       true);
  }
  if (res->status == 401 || res->status == 403) {
    throw ConfigError("backend '" + id() + "': authentication rejected (" +
                      std::to_string(res->status) + ")");
  }
  if (res->status == 408 || res->status == 429 || res->status >= 500) {
    throw BackendError("backend '" + id() + "': status " +
                           std::to_string(res->status),
                       true);
  }
  if (res->status != 200) {
    throw BackendError("backend '" + id() + "': status " +
                           std::to_string(res->status) + ": " + res->body,
                       false);
  }
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") ||
      reply["choices"].empty() ||
      !reply["choices"][0].contains("message")) {
    throw BackendError("backend '" + id() + "': malformed response body",
                       false);
  }
  return reply["choices"][0]["message"].value("content", std::string{});
}

std::shared_ptr<Backend> make_backend(const json& config) {
  std::string kind;
  try {
    kind = config.at("kind").get<std::string>();
  } catch (const json::exception&) {
    throw ConfigError("backend config needs a \"kind\"");
  }
  const std::string id = config.value("id", kind);
  if (kind == "oracle") {
    OracleBackend::Options options;
    options.scale = GradeScale::parse(config.value("scale", "3,2,1,0"));
    options.noise = config.value("noise", 0.0);
    options.noise_seed = config.value("noise_seed", std::uint64_t{0});
    return std::make_shared<OracleBackend>(options, id);
  }
  if (kind == "scripted") {
    auto backend = std::make_shared<ScriptedBackend>(id);
    if (config.contains("completions")) {
      for (const auto& c : config.at("completions")) {
        backend->push(c.get<std::string>());
      }
    }
    if (config.contains("default")) {
      backend->set_default(config.at("default").get<std::string>());
    }
    return backend;
  }
  if (kind == "biased") {
    return std::make_shared<BiasedBackend>(id);
  }
  if (kind == "generator") {
    return std::make_shared<SyntheticGeneratorBackend>(
        id, config.value("seed", std::uint64_t{0}));
  }
  if (kind == "http") {
    HttpBackendConfig http;
    http.id = id;
    try {
      http.url = config.at("url").get<std::string>();
    } catch (const json::exception&) {
      throw ConfigError("http backend '" + id + "' needs a \"url\"");
    }
    http.model = config.value("model", std::string{});
    http.auth_env = config.value("auth_env", std::string{});
    http.timeout_ms = config.value("timeout_ms", 30000);
    return std::make_shared<HttpChatBackend>(std::move(http));
  }
  throw ConfigError("unknown backend kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Retry and cache

std::string complete_with_retry(Backend& backend,
                                const CompletionRequest& request,
                                const RetryPolicy& policy,
                                int* attempts_used) {
  const int attempts = policy.attempts < 1 ? 1 : policy.attempts;
  double delay = policy.base_delay_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      std::string out = backend.complete(request);
      if (attempts_used) *attempts_used = attempt;
      return out;
    } catch (const BackendError& e) {
      if (!e.transient || attempt >= attempts) {
        if (attempts_used) *attempts_used = attempt;
        throw;
      }
      if (delay > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(static_cast<int>(delay)));
      }
      delay *= policy.multiplier;
    }
  }
}

CompletionCache::CompletionCache(std::string path) : path_(std::move(path)) {
  if (!path_.empty()) {
    const auto parent = std::filesystem::path(path_).parent_path();
    if (!parent.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(parent, ec);
      // A failure here surfaces later as a degraded (in-memory) cache.
    }
  }
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;  // fresh cache
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("key") || !j.contains("text")) {
      ++corrupt_;
      continue;
    }
    entries_[j.at("key").get<std::string>()] = j.at("text").get<std::string>();
  }
}

std::string CompletionCache::make_key(const std::string& backend_id,
                                      const std::string& prompt_digest,
                                      double temperature, std::uint64_t seed) {
  std::uint64_t h = fnv1a64(backend_id);
  h = fnv1a64(prompt_digest, h);
  h = fnv1a64(format_fixed(temperature, 4), h);
  h = fnv1a64(std::to_string(seed), h);
  return to_hex(h);
}

std::optional<std::string> CompletionCache::lookup(
    const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CompletionCache::store(const std::string& key,
                            const std::string& backend_id,
                            const std::string& prompt_digest,
                            double temperature, std::uint64_t seed,
                            const std::string& text) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[key] = text;
  if (path_.empty() || write_degraded_) return;
  std::ofstream out(path_, std::ios::app);
  bool ok = static_cast<bool>(out);
  if (ok) {
    json j{{"key", key},
           {"backend_id", backend_id},
           {"prompt_digest", prompt_digest},
           {"temperature", temperature},
           {"seed", seed},
           {"text", text},
           {"timestamp", static_cast<std::int64_t>(std::time(nullptr))}};
    out << j.dump() << "\n";
    ok = static_cast<bool>(out);
  }
  if (!ok) {
    write_degraded_ = true;
    std::fprintf(stderr,
                 "warning: cache write to %s failed; continuing in-memory\n",
                 path_.c_str());
  }
}

std::size_t CompletionCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

std::string cached_complete(Backend& backend, const CompletionRequest& request,
                            const std::string& digest, CompletionCache* cache,
                            const RetryPolicy& policy, JudgeCallLog* log) {
  const std::string key = CompletionCache::make_key(
      backend.id(), digest, request.temperature, request.seed);
  if (cache) {
    auto hit = cache->lookup(key);
    if (hit) {
      if (log) {
        log->digest = digest;
        log->attempts = 0;
        log->latency_ms = 0.0;
        log->cache_hit = true;
      }
      return *hit;
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  int attempts = 0;
  std::string text = complete_with_retry(backend, request, policy, &attempts);
  const auto t1 = std::chrono::steady_clock::now();
  if (cache) {
    cache->store(key, backend.id(), digest, request.temperature, request.seed,
                 text);
  }
  if (log) {
    log->digest = digest;
    log->attempts = attempts;
    log->latency_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    log->cache_hit = false;
  }
  return text;
}

// ---------------------------------------------------------------------------
// Judge client

namespace {

constexpr const char* kNumberSuffix = "\n\nOutput only the number.";
constexpr const char* kVerdictSuffix = "\n\nOutput only A, B, or TIE.";

int exemplar_point_score(const Exemplar& e, int grade) {
  GradeScale scale([&] {
    std::vector<int> levels;
    for (const auto& [g, text] : e.answers_by_grade) levels.push_back(g);
    return levels;
  }());
  return OracleBackend::ideal_point_score(scale, grade);
}

}  // namespace

JudgeClient::JudgeClient(std::shared_ptr<Backend> backend,
                         TemplateSet templates, CompletionCache* cache,
                         JudgeOptions options, ExemplarSet exemplars)
    : backend_(std::move(backend)), templates_(std::move(templates)),
      cache_(cache), options_(options), exemplars_(std::move(exemplars)) {}

std::string JudgeClient::complete_prompt(const PromptTemplate& tpl,
                                         const std::string& prompt,
                                         std::uint64_t request_seed,
                                         std::uint64_t* digest_acc) {
  const std::string digest = prompt_digest(tpl, prompt);
  if (digest_acc) *digest_acc = mix64(*digest_acc ^ fnv1a64(digest));
  CompletionRequest request;
  request.prompt = prompt;
  request.temperature = options_.temperature;
  request.seed = request_seed;
  request.max_output_tokens = options_.max_output_tokens;
  JudgeCallLog entry;
  std::string text = cached_complete(*backend_, request, digest, cache_,
                                     options_.retry, &entry);
  {
    std::lock_guard<std::mutex> lock(log_mutex_);
    log_.push_back(std::move(entry));
  }
  return text;
}

std::string JudgeClient::shot_block(Method kind) const {
  if (options_.shots <= 0 || exemplars_.items.empty()) return "";
  std::string out;
  const int shots =
      std::min<int>(options_.shots, static_cast<int>(exemplars_.items.size()));
  for (int i = 0; i < shots; ++i) {
    const Exemplar& e = exemplars_.items[static_cast<std::size_t>(i)];
    std::vector<std::pair<int, std::string>> tiers(e.answers_by_grade.begin(),
                                                   e.answers_by_grade.end());
    // Cycle which tier each example demonstrates so shots are not all 10s.
    const auto& pick = tiers[static_cast<std::size_t>(i) % tiers.size()];
    switch (kind) {
      case Method::pointwise_noref:
      case Method::pointwise_ref:
        out += "Example question: " + e.question.text +
               "\nExample answer:\n" + pick.second +
               "\nScore: " + std::to_string(exemplar_point_score(e, pick.first)) +
               "\n\n";
        break;
      case Method::pairwise_candidates:
      case Method::pairwise_refs: {
        const auto& best = tiers.front();
        const auto& worst = tiers.back();
        // Alternate which side holds the better answer.
        const bool best_first = i % 2 == 0;
        const auto& first = best_first ? best : worst;
        const auto& second = best_first ? worst : best;
        out += "Example question: " + e.question.text +
               "\nExample answer A:\n" + first.second +
               "\nExample answer B:\n" + second.second +
               "\nVerdict: " + (best_first ? "A" : "B") + "\n\n";
        break;
      }
      case Method::listwise: {
        // Hold out the second-best tier and place it against the rest.
        const std::size_t held = tiers.size() > 1 ? 1 : 0;
        std::string refs;
        int rank = 1;
        int line = 0;
        for (std::size_t t = 0; t < tiers.size(); ++t) {
          if (t == held) continue;
          if (line) refs += '\n';
          refs += std::to_string(++line) + ". " + tiers[t].second;
          if (tiers[t].first >= tiers[held].first) ++rank;
        }
        out += "Example question: " + e.question.text +
               "\nExample references, best first:\n" + refs +
               "\nExample answer to place:\n" + tiers[held].second +
               "\nRank: " + std::to_string(rank) + "\n\n";
        break;
      }
      default:
        break;
    }
  }
  return out;
}

std::string generation_shot_block(const ExemplarSet& exemplars, int shots) {
  if (shots <= 0 || exemplars.items.empty()) return "";
  std::string out;
  const int n =
      std::min<int>(shots, static_cast<int>(exemplars.items.size()));
  for (int i = 0; i < n; ++i) {
    const Exemplar& e = exemplars.items[static_cast<std::size_t>(i)];
    out += "Example question: " + e.question.text +
           "\nExample answers by grade:\n";
    for (const auto& [grade, text] : e.answers_by_grade) {
      out += "Grade " + std::to_string(grade) + ": " + text + "\n";
    }
    out += "\n";
  }
  return out;
}

int JudgeClient::point_score(const Question& question,
                             const GradedAnswer& candidate,
                             const ReferenceList* references,
                             std::uint64_t* digest_acc) {
  const PromptTemplate& tpl =
      references ? templates_.pointwise_ref : templates_.pointwise_noref;
  std::map<std::string, std::string> slots{
      {"question", question.text},
      {"candidate", candidate.text},
      {"shots", shot_block(references ? Method::pointwise_ref
                                      : Method::pointwise_noref)}};
  if (references) slots["references"] = render_reference_block(*references);
  const std::string prompt = render_prompt(tpl, slots);
  const std::uint64_t seed = derive_seed(options_.seed, question.question_id);
  std::string text = complete_prompt(tpl, prompt, seed, digest_acc);
  auto score = try_parse_point_score(text);
  if (!score) {
    parse_retries_.fetch_add(1);
    text = complete_prompt(tpl, prompt + kNumberSuffix, seed, digest_acc);
    score = try_parse_point_score(text);
  }
  if (!score) {
    throw ParseError("question " + question.question_id + ", answer " +
                     candidate.answer_id + ": no point score in \"" + text +
                     "\"");
  }
  return *score;
}

double JudgeClient::one_order(const Question& question, const GradedAnswer& a,
                              const GradedAnswer& b,
                              std::uint64_t* digest_acc) {
  const PromptTemplate& tpl = templates_.pairwise;
  std::map<std::string, std::string> slots{
      {"question", question.text},
      {"pair_a", a.text},
      {"pair_b", b.text},
      {"shots", shot_block(Method::pairwise_refs)}};
  const std::string prompt = render_prompt(tpl, slots);
  const std::uint64_t seed = derive_seed(options_.seed, question.question_id);
  std::string text = complete_prompt(tpl, prompt, seed, digest_acc);
  auto verdict = try_parse_preference(text);
  if (!verdict) {
    parse_retries_.fetch_add(1);
    text = complete_prompt(tpl, prompt + kVerdictSuffix, seed, digest_acc);
    verdict = try_parse_preference(text);
  }
  if (!verdict) {
    throw ParseError("question " + question.question_id +
                     ": no verdict in \"" + text + "\"");
  }
  switch (*verdict) {
    case PreferenceVerdict::first_better: return 1.0;
    case PreferenceVerdict::second_better: return -1.0;
    case PreferenceVerdict::tie: return 0.0;
  }
  return 0.0;
}

double JudgeClient::preference(const Question& question,
                               const GradedAnswer& first,
                               const GradedAnswer& second,
                               std::uint64_t* digest_acc) {
  const double forward = one_order(question, first, second, digest_acc);
  if (!options_.permute_positions) return forward;
  const double backward = one_order(question, second, first, digest_acc);
  return (forward - backward) / 2.0;
}

RankParse JudgeClient::rank(const Question& question,
                            const GradedAnswer& candidate,
                            const ReferenceList& references,
                            std::uint64_t* digest_acc) {
  if (references.empty()) {
    throw ConfigError("rank needs a non-empty reference list");
  }
  const int m = static_cast<int>(references.size());
  const PromptTemplate& tpl = templates_.listwise;
  const std::map<std::string, std::string> slots{
      {"question", question.text},
      {"candidate", candidate.text},
      {"references", render_reference_block(references)},
      {"shots", shot_block(Method::listwise)}};
  const std::string prompt = render_prompt(tpl, slots);
  const std::uint64_t seed = derive_seed(options_.seed, question.question_id);
  std::string text = complete_prompt(tpl, prompt, seed, digest_acc);
  auto parsed = try_parse_rank(text, m);
  if (!parsed) {
    parse_retries_.fetch_add(1);
    text = complete_prompt(tpl, prompt + kNumberSuffix, seed, digest_acc);
    parsed = try_parse_rank(text, m);
  }
  if (!parsed) {
    throw ParseError("question " + question.question_id + ", answer " +
                     candidate.answer_id + ": no rank in \"" + text + "\"");
  }
  if (parsed->clamped && options_.reask_invalid_rank) {
    parse_retries_.fetch_add(1);
    text = complete_prompt(
        tpl,
        prompt + "\n\nThe rank must be between 1 and " +
            std::to_string(m + 1) + ". Output only the number.",
        seed, digest_acc);
    auto second = try_parse_rank(text, m);
    if (second) parsed = second;
  }
  if (parsed->clamped) clamped_ranks_.fetch_add(1);
  return *parsed;
}

std::vector<JudgeCallLog> JudgeClient::call_log() const {
  std::lock_guard<std::mutex> lock(log_mutex_);
  return log_;
}

}  // namespace nfqa
