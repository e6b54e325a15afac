#include "nfqa/reference_builder.hpp"

#include <algorithm>
#include <sstream>

#include "nfqa/util.hpp"

namespace nfqa {

namespace {

std::string join_grades(const std::vector<int>& grades) {
  std::string out;
  for (std::size_t i = 0; i < grades.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(grades[i]);
  }
  return out;
}

// "Grade <tier>: <text>" lines -> tier -> text. Any other non-empty line is
// a parse failure; a repeated tier keeps its first text.
std::map<int, std::string> parse_tier_lines(const std::string& completion,
                                            const std::string& backend_id) {
  std::map<int, std::string> out;
  std::istringstream lines{completion};
  std::string line;
  while (std::getline(lines, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("Grade ", 0) != 0) {
      throw ParseError("backend " + backend_id + ": unparsable line \"" + t +
                       "\"");
    }
    const std::size_t colon = t.find(':');
    if (colon == std::string::npos) {
      throw ParseError("backend " + backend_id + ": unparsable line \"" + t +
                       "\"");
    }
    int tier = 0;
    try {
      tier = std::stoi(t.substr(6, colon - 6));
    } catch (const std::exception&) {
      throw ParseError("backend " + backend_id + ": bad tier in line \"" + t +
                       "\"");
    }
    out.emplace(tier, trim(t.substr(colon + 1)));
  }
  return out;
}

}  // namespace

std::map<int, int, std::greater<int>> Composition::multiplicities() const {
  std::map<int, int, std::greater<int>> out;
  for (int g : grades) ++out[g];
  return out;
}

std::string Composition::str() const {
  std::string out;
  for (int g : grades) out += std::to_string(g);
  return out;
}

Composition parse_composition(const std::string& spec,
                              const GradeScale& scale) {
  if (spec.empty()) throw ConfigError("composition string is empty");
  Composition out;
  for (char c : spec) {
    if (c < '0' || c > '9') {
      throw ConfigError("composition '" + spec +
                        "' contains a non-digit character");
    }
    const int grade = c - '0';
    if (!scale.contains(grade)) {
      throw ConfigError("composition grade " + std::to_string(grade) +
                        " is outside scale " + scale.str());
    }
    out.grades.push_back(grade);
  }
  std::sort(out.grades.begin(), out.grades.end(), std::greater<int>());
  return out;
}

const std::map<std::string, std::string>& composition_presets() {
  static const std::map<std::string, std::string> presets{
      {"four_level", "3210"},
      {"eight_level", "33221100"},
      {"eight_level_top_heavy", "33321000"},
      {"eight_level_mid_heavy", "32221110"},
  };
  return presets;
}

Composition resolve_composition(const std::string& name_or_digits,
                                const GradeScale& scale) {
  const auto& presets = composition_presets();
  auto it = presets.find(name_or_digits);
  return parse_composition(it == presets.end() ? name_or_digits : it->second,
                           scale);
}

ShortfallError::ShortfallError(int grade, int wanted, int available)
    : std::runtime_error("grade " + std::to_string(grade) + " needs " +
                         std::to_string(wanted) + " answers but the pool has " +
                         std::to_string(available)),
      grade_(grade) {}

ReferenceList sample_reference_list(const GradedPool& pool,
                                    const Composition& composition,
                                    std::uint64_t seed, bool allow_shortfall,
                                    Composition* actual) {
  ReferenceList list(pool.question.question_id);
  Composition realized;
  Rng rng(derive_seed(seed, "refs|" + pool.question.question_id));
  for (const auto& [grade, wanted] : composition.multiplicities()) {
    const auto it = pool.answers_by_grade.find(grade);
    const std::size_t available = it == pool.answers_by_grade.end()
                                      ? 0
                                      : it->second.size();
    std::size_t take = static_cast<std::size_t>(wanted);
    if (available < take) {
      if (!allow_shortfall) {
        throw ShortfallError(grade, wanted, static_cast<int>(available));
      }
      take = available;
    }
    if (take == 0) continue;
    for (std::size_t i : rng.sample_without_replacement(available, take)) {
      list.add(it->second[i]);
      realized.grades.push_back(grade);
    }
  }
  if (actual) *actual = realized;
  return list;
}

ReferenceSet build_sampled_reference_set(const Dataset& dataset,
                                         const Composition& composition,
                                         std::uint64_t seed,
                                         bool allow_shortfall,
                                         std::vector<std::string>* warnings) {
  ReferenceSet set;
  set.composition = composition.str();
  set.regime = "multi_grade";
  set.seed = seed;
  for (const Question& q : dataset.questions) {
    const GradedPool pool = pool_for(dataset, q.question_id);
    Composition realized;
    ReferenceList list = sample_reference_list(pool, composition, seed,
                                               allow_shortfall, &realized);
    if (warnings && realized.str() != composition.str()) {
      warnings->push_back("question " + q.question_id +
                          ": pool shortfall, realized composition " +
                          (realized.empty() ? "(empty)" : realized.str()));
    }
    set.lists.push_back(std::move(list));
  }
  return set;
}

void GenerationPlan::validate() const {
  if (golden_backend.empty()) {
    throw ConfigError("generation plan needs a golden backend");
  }
  if (generator_backends.empty()) {
    throw ConfigError("generation plan needs at least one generator backend");
  }
  if (shots < 0) throw ConfigError("generation plan: shots must be >= 0");
  for (std::size_t i = 1; i < target_grades.size(); ++i) {
    if (target_grades[i] >= target_grades[i - 1]) {
      throw ConfigError(
          "generation plan: target grades must be strictly descending");
    }
  }
}

GradedAnswer generate_golden(const Question& question,
                             const std::optional<GradedAnswer>& original_golden,
                             Backend& backend, const GenerationContext& ctx,
                             const GradeScale& scale, int shots,
                             std::uint64_t seed) {
  const PromptTemplate& tpl = ctx.templates.golden_generation;
  std::map<std::string, std::string> slots{
      {"question", question.text},
      {"shots", generation_shot_block(ctx.exemplars, shots)},
      {"references",
       original_golden ? "Original answer, for grounding:\n" +
                             original_golden->text + "\n\n"
                       : std::string{}}};
  const std::string prompt = render_prompt(tpl, slots);
  const std::string digest = prompt_digest(tpl, prompt);
  CompletionRequest request;
  request.prompt = prompt;
  request.temperature = ctx.temperature;
  request.seed = derive_seed(seed, "golden|" + question.question_id);
  request.max_output_tokens = ctx.max_output_tokens;
  std::string text;
  try {
    text = cached_complete(backend, request, digest, ctx.cache, ctx.retry);
  } catch (const BackendError& e) {
    throw GenerationError("golden answer for question " +
                          question.question_id + " via backend " +
                          backend.id() + ": " + e.what());
  }
  text = trim(text);
  if (text.empty()) {
    throw GenerationError("golden answer for question " +
                          question.question_id + " via backend " +
                          backend.id() + ": empty completion");
  }
  GradedAnswer golden;
  golden.answer_id = question.question_id + "|" + backend.id() + "|golden";
  golden.question_id = question.question_id;
  golden.text = std::move(text);
  golden.grade = scale.max_level();
  golden.origin = Origin::llm_generated;
  return golden;
}

GenerationOutcome generate_descending_references(
    const Question& question, const GradedAnswer& golden,
    const GenerationPlan& plan, const BackendRegistry& registry,
    const GenerationContext& ctx) {
  plan.validate();
  GenerationOutcome out;
  const std::string shots = generation_shot_block(ctx.exemplars, plan.shots);
  const std::string tier_list = join_grades(plan.target_grades);
  for (const std::string& backend_id : plan.generator_backends) {
    auto backend = registry.get(backend_id);  // unknown id is a hard error
    if (plan.target_grades.empty()) {
      out.lists[backend_id] = {};
      continue;
    }
    const PromptTemplate& tpl = ctx.templates.descending_generation;
    const std::map<std::string, std::string> slots{
        {"question", question.text},
        {"references", golden.text},
        {"candidate", tier_list},
        {"shots", shots}};
    const std::string prompt = render_prompt(tpl, slots);
    const std::string digest = prompt_digest(tpl, prompt);
    CompletionRequest request;
    request.prompt = prompt;
    request.temperature = ctx.temperature;
    request.seed = derive_seed(
        plan.seed, "descend|" + question.question_id + "|" + backend_id);
    request.max_output_tokens = ctx.max_output_tokens;
    try {
      const std::string text =
          cached_complete(*backend, request, digest, ctx.cache, ctx.retry);
      const auto by_tier = parse_tier_lines(text, backend_id);
      std::vector<GradedAnswer> answers;
      for (int grade : plan.target_grades) {
        const auto it = by_tier.find(grade);
        if (it == by_tier.end() || it->second.empty()) {
          throw ParseError("backend " + backend_id +
                           ": completion has no answer for grade " +
                           std::to_string(grade));
        }
        GradedAnswer a;
        a.answer_id = question.question_id + "|" + backend_id + "|g" +
                      std::to_string(grade);
        a.question_id = question.question_id;
        a.text = it->second;
        a.grade = grade;
        a.origin = Origin::llm_generated;
        answers.push_back(std::move(a));
      }
      out.lists[backend_id] = std::move(answers);
    } catch (const BackendError& e) {
      out.errors[backend_id] = e.what();
    } catch (const ParseError& e) {
      out.errors[backend_id] = e.what();
    }
  }
  return out;
}

ReferenceList merge_generated_lists(
    const std::map<std::string, std::vector<GradedAnswer>>& per_backend_lists,
    const GradedAnswer& golden, const std::vector<int>& target_grades,
    std::uint64_t seed) {
  ReferenceList list(golden.question_id);
  list.add(golden);
  Rng rng(derive_seed(seed, "merge|" + golden.question_id));
  for (int grade : target_grades) {
    std::vector<const GradedAnswer*> eligible;
    for (const auto& [backend_id, answers] : per_backend_lists) {
      for (const GradedAnswer& a : answers) {
        if (a.grade && *a.grade == grade) eligible.push_back(&a);
      }
    }
    if (eligible.empty()) {
      throw GenerationError("no generated answer covers grade " +
                            std::to_string(grade) + " for question " +
                            golden.question_id);
    }
    list.add(*eligible[rng.uniform(eligible.size())]);
  }
  return list;
}

ReferenceList build_generated_reference_list(
    const Question& question,
    const std::optional<GradedAnswer>& original_golden,
    const GenerationPlan& plan, const BackendRegistry& registry,
    const GenerationContext& ctx, const GradeScale& scale,
    std::vector<std::string>* warnings) {
  plan.validate();
  auto golden_backend = registry.get(plan.golden_backend);
  const GradedAnswer golden =
      generate_golden(question, original_golden, *golden_backend, ctx, scale,
                      plan.shots, plan.seed);
  const GenerationOutcome outcome =
      generate_descending_references(question, golden, plan, registry, ctx);
  if (warnings) {
    for (const auto& [backend_id, why] : outcome.errors) {
      warnings->push_back("question " + question.question_id + ": " + why);
    }
  }
  if (outcome.lists.empty() && !plan.target_grades.empty()) {
    throw GenerationError("every generator backend failed for question " +
                          question.question_id);
  }
  return merge_generated_lists(outcome.lists, golden, plan.target_grades,
                               plan.seed);
}

}  // namespace nfqa
