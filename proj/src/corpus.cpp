#include "nfqa/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nfqa/util.hpp"

namespace nfqa {

using nlohmann::json;

namespace {

json answer_to_json(const GradedAnswer& a) {
  json j{{"answer_id", a.answer_id},
         {"question_id", a.question_id},
         {"text", a.text},
         {"origin", to_string(a.origin)}};
  if (a.grade.has_value()) j["grade"] = *a.grade;
  return j;
}

GradedAnswer answer_from_json(const json& j) {
  GradedAnswer a;
  a.answer_id = j.at("answer_id").get<std::string>();
  a.question_id = j.at("question_id").get<std::string>();
  a.text = j.at("text").get<std::string>();
  if (j.contains("grade") && !j.at("grade").is_null()) {
    a.grade = j.at("grade").get<int>();
  }
  a.origin = origin_from_string(j.at("origin").get<std::string>());
  return a;
}

json parse_jsonl_line(const std::string& path, std::size_t line_no,
                      const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw ParseError(path + " line " + std::to_string(line_no) +
                     ": not valid JSON");
  }
  return j;
}

}  // namespace

const Question* Dataset::find_question(const std::string& question_id) const {
  for (const auto& q : questions) {
    if (q.question_id == question_id) return &q;
  }
  return nullptr;
}

const GradedAnswer* Dataset::find_answer(const std::string& answer_id) const {
  for (const auto& a : answers) {
    if (a.answer_id == answer_id) return &a;
  }
  return nullptr;
}

std::vector<const GradedAnswer*> Dataset::answers_for(
    const std::string& question_id) const {
  std::vector<const GradedAnswer*> out;
  for (const auto& a : answers) {
    if (a.question_id == question_id) out.push_back(&a);
  }
  return out;
}

std::vector<std::string> Dataset::question_ids() const {
  std::vector<std::string> out;
  out.reserve(questions.size());
  for (const auto& q : questions) out.push_back(q.question_id);
  return out;
}

std::size_t GradedPool::count(int grade) const {
  auto it = answers_by_grade.find(grade);
  return it != answers_by_grade.end() ? it->second.size() : 0;
}

std::size_t GradedPool::total() const {
  std::size_t n = 0;
  for (const auto& [g, list] : answers_by_grade) n += list.size();
  return n;
}

GradedPool pool_for(const Dataset& dataset, const std::string& question_id) {
  const Question* q = dataset.find_question(question_id);
  if (!q) throw ConfigError("unknown question: " + question_id);
  GradedPool pool;
  pool.question = *q;
  for (const auto& a : dataset.answers) {
    if (a.question_id == question_id && a.grade.has_value()) {
      pool.answers_by_grade[*a.grade].push_back(a);
    }
  }
  return pool;
}

std::vector<GradedPool> pools(const Dataset& dataset) {
  std::vector<GradedPool> out;
  out.reserve(dataset.questions.size());
  for (const auto& q : dataset.questions) {
    out.push_back(pool_for(dataset, q.question_id));
  }
  return out;
}

DatasetManifest manifest(const Dataset& dataset) {
  DatasetManifest m;
  m.name = dataset.name;
  m.scale = dataset.scale.str();
  m.question_count = dataset.questions.size();
  if (m.question_count == 0) return m;
  for (int level : dataset.scale.levels()) m.avg_per_grade[level] = 0.0;
  for (const auto& a : dataset.answers) {
    if (a.grade.has_value()) m.avg_per_grade[*a.grade] += 1.0;
  }
  for (auto& [g, v] : m.avg_per_grade) {
    v /= static_cast<double>(m.question_count);
  }
  return m;
}

QrelsMap parse_qrels(std::string_view text, std::size_t* duplicates) {
  QrelsMap out;
  std::size_t dup = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_ws(line);
    if (fields.size() < 4) {
      throw ParseError("qrels line " + std::to_string(line_no) +
                       ": expected at least 4 fields, got " +
                       std::to_string(fields.size()));
    }
    int grade = 0;
    try {
      std::size_t used = 0;
      grade = std::stoi(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument(fields[3]);
    } catch (const std::exception&) {
      throw ParseError("qrels line " + std::to_string(line_no) +
                       ": bad grade '" + fields[3] + "'");
    }
    auto& per_question = out[fields[0]];
    auto [it, inserted] = per_question.emplace(fields[2], grade);
    if (!inserted) {
      it->second = grade;  // last wins
      ++dup;
    }
  }
  if (duplicates) *duplicates = dup;
  return out;
}

QrelsMap load_qrels(const std::string& path, std::size_t* duplicates) {
  return parse_qrels(read_file(path), duplicates);
}

std::unordered_map<std::string, std::string> load_answer_texts(
    const std::string& path) {
  std::unordered_map<std::string, std::string> out;
  std::istringstream in{read_file(path)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = parse_jsonl_line(path, line_no, line);
    if (!j.contains("answer_id") || !j.contains("text")) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected {\"answer_id\", \"text\"}");
    }
    const auto id = j.at("answer_id").get<std::string>();
    const auto text = j.at("text").get<std::string>();
    if (trim(text).empty()) {
      throw ParseError(path + ": empty text for answer " + id);
    }
    if (!out.emplace(id, text).second) {
      throw ParseError(path + ": duplicate answer id " + id);
    }
  }
  return out;
}

std::unordered_map<std::string, std::string> load_question_texts(
    const std::string& path) {
  std::unordered_map<std::string, std::string> out;
  std::istringstream in{read_file(path)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = parse_jsonl_line(path, line_no, line);
    if (!j.contains("question_id") || !j.contains("text")) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected {\"question_id\", \"text\"}");
    }
    out[j.at("question_id").get<std::string>()] =
        j.at("text").get<std::string>();
  }
  return out;
}

std::vector<GradedCandidateSet> load_graded_candidates(
    const std::string& path, const GradeScale& scale) {
  std::vector<GradedCandidateSet> out;
  std::istringstream in{read_file(path)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = parse_jsonl_line(path, line_no, line);
    GradedCandidateSet set;
    try {
      set.question.question_id = j.at("question_id").get<std::string>();
      set.question.text = j.at("question_text").get<std::string>();
      for (const auto& c : j.at("candidates")) {
        GradedAnswer a;
        a.answer_id = c.at("answer_id").get<std::string>();
        a.question_id = set.question.question_id;
        a.text = c.at("text").get<std::string>();
        if (!c.contains("grade") || c.at("grade").is_null()) {
          throw ParseError(path + " line " + std::to_string(line_no) +
                           ": candidate " + a.answer_id + " has no grade");
        }
        a.grade = c.at("grade").get<int>();
        if (!scale.contains(*a.grade)) {
          throw ParseError(path + " line " + std::to_string(line_no) +
                           ": grade " + std::to_string(*a.grade) +
                           " not in scale " + scale.str());
        }
        a.origin = Origin::candidate;
        set.candidates.push_back(std::move(a));
      }
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (set.candidates.empty()) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": record has no candidates");
    }
    out.push_back(std::move(set));
  }
  return out;
}

Dataset build_dataset(
    const QrelsMap& qrels, const GradeScale& scale, const std::string& name,
    const std::unordered_map<std::string, std::string>& answer_texts,
    const std::unordered_map<std::string, std::string>& question_texts,
    std::size_t* dropped) {
  Dataset d;
  d.name = name;
  d.scale = scale;
  std::size_t drop_count = 0;
  for (const auto& [qid, per_answer] : qrels) {
    Question q;
    q.question_id = qid;
    auto qt = question_texts.find(qid);
    q.text = qt != question_texts.end() ? qt->second : qid;
    d.questions.push_back(std::move(q));
    for (const auto& [aid, grade] : per_answer) {
      GradedAnswer a;
      a.answer_id = aid;
      a.question_id = qid;
      a.grade = grade;
      a.origin = Origin::human_pool;
      if (answer_texts.empty()) {
        // Toy mode: no text authority supplied, fabricate a stand-in.
        a.text = "answer " + aid;
      } else {
        auto it = answer_texts.find(aid);
        if (it == answer_texts.end()) {
          ++drop_count;
          continue;
        }
        a.text = it->second;
      }
      d.answers.push_back(std::move(a));
    }
  }
  if (dropped) *dropped = drop_count;
  return d;
}

Dataset restrict_questions(const Dataset& dataset,
                           const std::vector<std::string>& id_list,
                           std::vector<std::string>* not_found) {
  Dataset out;
  out.name = dataset.name;
  out.scale = dataset.scale;
  for (const auto& id : id_list) {
    const Question* q = dataset.find_question(id);
    if (!q) {
      if (not_found) not_found->push_back(id);
      continue;
    }
    out.questions.push_back(*q);
    for (const auto* a : dataset.answers_for(id)) {
      out.answers.push_back(*a);
    }
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ostringstream out;
  out << json{{"record", "header"},
              {"name", dataset.name},
              {"scale", dataset.scale.str()}}
             .dump()
      << "\n";
  for (const auto& q : dataset.questions) {
    out << json{{"record", "question"},
                {"question_id", q.question_id},
                {"text", q.text}}
               .dump()
        << "\n";
  }
  for (const auto& a : dataset.answers) {
    json j = answer_to_json(a);
    j["record"] = "answer";
    out << j.dump() << "\n";
  }
  write_file(path, out.str());
}

Dataset load_dataset(const std::string& path) {
  Dataset d;
  bool header_seen = false;
  std::istringstream in{read_file(path)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = parse_jsonl_line(path, line_no, line);
    try {
      const auto kind = j.at("record").get<std::string>();
      if (kind == "header") {
        d.name = j.at("name").get<std::string>();
        d.scale = GradeScale::parse(j.at("scale").get<std::string>());
        header_seen = true;
      } else if (kind == "question") {
        if (!header_seen) {
          throw ParseError(path + ": header record must come first");
        }
        d.questions.push_back({j.at("question_id").get<std::string>(),
                               j.at("text").get<std::string>()});
      } else if (kind == "answer") {
        if (!header_seen) {
          throw ParseError(path + ": header record must come first");
        }
        d.answers.push_back(answer_from_json(j));
      } else {
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  if (!header_seen) throw ParseError(path + ": missing header record");
  return d;
}

const ReferenceList* ReferenceSet::find(const std::string& question_id) const {
  for (const auto& list : lists) {
    if (list.question_id() == question_id) return &list;
  }
  return nullptr;
}

void save_reference_set(const ReferenceSet& refs, const std::string& path) {
  std::ostringstream out;
  out << json{{"record", "header"},
              {"composition", refs.composition},
              {"regime", refs.regime},
              {"seed", refs.seed},
              {"backends", refs.backend_ids}}
             .dump()
      << "\n";
  for (const auto& list : refs.lists) {
    // Per-question composition can differ from the header target when a
    // shortfall shrank the list; the actual digits are recorded here.
    json entry{{"record", "references"},
               {"question_id", list.question_id()},
               {"composition", list.composition()},
               {"answers", json::array()}};
    for (const auto& a : list.answers()) {
      entry["answers"].push_back(answer_to_json(a));
    }
    out << entry.dump() << "\n";
  }
  write_file(path, out.str());
}

ReferenceSet load_reference_set(const std::string& path) {
  ReferenceSet refs;
  bool header_seen = false;
  std::istringstream in{read_file(path)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = parse_jsonl_line(path, line_no, line);
    try {
      const auto kind = j.at("record").get<std::string>();
      if (kind == "header") {
        refs.composition = j.at("composition").get<std::string>();
        refs.regime = j.at("regime").get<std::string>();
        refs.seed = j.at("seed").get<std::uint64_t>();
        refs.backend_ids =
            j.value("backends", std::vector<std::string>{});
        header_seen = true;
      } else if (kind == "references") {
        ReferenceList list(j.at("question_id").get<std::string>());
        // Stored order is already grade-descending, so re-adding keeps it.
        for (const auto& a : j.at("answers")) {
          list.add(answer_from_json(a));
        }
        refs.lists.push_back(std::move(list));
      } else {
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  if (!header_seen) throw ParseError(path + ": missing header record");
  return refs;
}

json record_to_json(const EvaluationRecord& record) {
  return json{{"question_id", record.question_id},
              {"answer_id", record.answer_id},
              {"method", to_string(record.method)},
              {"seed", record.seed},
              {"shots", record.shots},
              {"backend_id", record.backend_id},
              {"prompt_digest", record.prompt_digest},
              {"raw", record.raw},
              {"normalized", record.normalized}};
}

void append_records(const std::vector<EvaluationRecord>& records,
                    const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path + " for append");
  for (const auto& r : records) {
    out << record_to_json(r).dump() << "\n";
  }
  if (!out) throw IoError("short write to " + path);
}

std::vector<EvaluationRecord> load_records(const std::string& path) {
  std::vector<EvaluationRecord> out;
  std::istringstream in{read_file(path)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = parse_jsonl_line(path, line_no, line);
    try {
      EvaluationRecord r;
      r.question_id = j.at("question_id").get<std::string>();
      r.answer_id = j.at("answer_id").get<std::string>();
      r.method = method_from_string(j.at("method").get<std::string>());
      r.seed = j.at("seed").get<std::uint64_t>();
      r.shots = j.at("shots").get<int>();
      r.backend_id = j.at("backend_id").get<std::string>();
      r.prompt_digest = j.value("prompt_digest", std::string{});
      r.raw = j.at("raw").get<double>();
      r.normalized = j.at("normalized").get<double>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for write");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write to " + path);
}

namespace {

// Word pool for synthetic questions and answers.
const char* const kVocab[] = {
    "river",    "bridge",  "signal",  "kernel",  "carbon",  "meadow",
    "lantern",  "harbor",  "violin",  "summit",  "tunnel",  "garden",
    "copper",   "saddle",  "prism",   "anchor",  "beacon",  "canyon",
    "dynamo",   "ember",   "fjord",   "glacier", "hollow",  "isthmus",
    "jigsaw",   "keel",    "lagoon",  "mantle",  "nectar",  "orchard",
    "pylon",    "quarry",  "ribbon",  "sextant", "tendril", "updraft",
    "vellum",   "willow",  "xylem",   "yonder",  "zephyr",  "basalt",
    "cinder",   "delta",   "estuary", "fulcrum", "granite", "hearth",
    "ingot",    "juniper", "krill",   "lichen",  "marrow",  "nimbus",
    "obsidian", "pumice",  "quartz",  "resin",   "shale",   "topaz",
    "umber",    "vortex",  "wharf",   "zenith",
};
constexpr std::size_t kVocabSize = sizeof(kVocab) / sizeof(kVocab[0]);

std::string pick_words(Rng& rng, int count) {
  std::string out;
  for (int i = 0; i < count; ++i) {
    if (i) out += ' ';
    out += kVocab[rng.uniform(kVocabSize)];
  }
  return out;
}

}  // namespace

Dataset synthesize_dataset(const SyntheticSpec& spec) {
  Dataset d;
  d.name = "synthetic";
  d.scale = spec.scale;
  const auto& levels = spec.scale.levels();
  const std::size_t tiers = levels.size();
  for (int qi = 0; qi < spec.questions; ++qi) {
    const std::string qid = "q" + std::to_string(qi);
    Rng rng(derive_seed(spec.seed, qid));
    // Six key facts; better answers cover more of them.
    std::vector<std::string> facts;
    for (int f = 0; f < 6; ++f) facts.push_back(pick_words(rng, 1));
    Question q;
    q.question_id = qid;
    q.text = "what should i know about " + facts[0] + " and " + facts[1];
    d.questions.push_back(std::move(q));

    int answer_no = 0;
    for (std::size_t tier = 0; tier < tiers; ++tier) {
      const int grade = levels[tier];
      auto it = spec.per_grade.find(grade);
      const int count = it != spec.per_grade.end() ? it->second : 0;
      // Covered facts scale linearly from all (best tier) to none (worst).
      const int covered = static_cast<int>(
          (facts.size() * (tiers - 1 - tier) + (tiers - 1) / 2) /
          (tiers - 1));
      for (int k = 0; k < count; ++k) {
        GradedAnswer a;
        a.answer_id = qid + "_a" + std::to_string(answer_no++);
        a.question_id = qid;
        a.grade = grade;
        a.origin = Origin::human_pool;
        std::string text = "it concerns";
        for (int f = 0; f < covered; ++f) text += " " + facts[f];
        text += " plus " + pick_words(rng, 3);
        text += " v" + std::to_string(answer_no);
        if (spec.grade_markers) {
          text += " <grade:" + std::to_string(grade) + ">";
        }
        a.text = std::move(text);
        d.answers.push_back(std::move(a));
      }
    }
  }
  return d;
}

}  // namespace nfqa
