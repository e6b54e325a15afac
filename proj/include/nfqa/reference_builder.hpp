#pragma once
// Builds the graded reference list each question is judged against. Three
// ways in: sample it from an already-graded answer pool, generate it from
// one known-good answer, or generate everything from scratch.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfqa/corpus.hpp"
#include "nfqa/judge.hpp"

namespace nfqa {

// Grade multiset the reference list should realize, kept sorted descending.
struct Composition {
  std::vector<int> grades;

  bool empty() const { return grades.empty(); }
  std::size_t size() const { return grades.size(); }
  // Multiplicity per distinct grade, highest grade first.
  std::map<int, int, std::greater<int>> multiplicities() const;
  std::string str() const;  // digit string, e.g. "3210"
};

// "3210" -> [3,2,1,0]; order is normalized descending; any digit outside
// the scale raises ConfigError.
Composition parse_composition(const std::string& spec,
                              const GradeScale& scale);

// Named composition shortcuts accepted wherever a digit string is. The
// four-level and eight-level balanced defaults plus the two skewed
// eight-level variants.
const std::map<std::string, std::string>& composition_presets();

// Preset name or digit string -> Composition.
Composition resolve_composition(const std::string& name_or_digits,
                                const GradeScale& scale);

// A grade the pool cannot cover in strict mode.
class ShortfallError : public std::runtime_error {
 public:
  ShortfallError(int grade, int wanted, int available);
  int grade() const { return grade_; }

 private:
  int grade_;
};

// Uniform sampling without replacement within each grade, assembled best
// first. Deterministic for a fixed (pool, composition, seed). In strict
// mode a grade with too few answers raises ShortfallError; with
// allow_shortfall the list shrinks and `actual` (when given) receives the
// realized composition.
ReferenceList sample_reference_list(const GradedPool& pool,
                                    const Composition& composition,
                                    std::uint64_t seed,
                                    bool allow_shortfall = false,
                                    Composition* actual = nullptr);

// One sampled list per dataset question. Shortfall questions shrink (with
// a warning line) when allowed, else the error propagates.
ReferenceSet build_sampled_reference_set(const Dataset& dataset,
                                         const Composition& composition,
                                         std::uint64_t seed,
                                         bool allow_shortfall = false,
                                         std::vector<std::string>* warnings =
                                             nullptr);

// ---------------------------------------------------------------------------
// Generation

// How to fabricate a reference list with completion backends.
struct GenerationPlan {
  std::string golden_backend;
  std::vector<std::string> generator_backends;  // at least one
  int shots = 3;
  std::vector<int> target_grades;  // strictly descending, all below top
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError on violated invariants
};

// Shared plumbing for generation calls.
struct GenerationContext {
  TemplateSet templates = TemplateSet::builtin();
  ExemplarSet exemplars = ExemplarSet::builtin();
  CompletionCache* cache = nullptr;
  RetryPolicy retry;
  double temperature = 0.8;
  int max_output_tokens = 512;
};

// Top-grade answer written by the backend. When original_golden is given
// its text is embedded in the prompt as grounding; the result always gets
// the scale's top grade and origin llm_generated. Backend failure after
// retries or an empty completion raises GenerationError.
GradedAnswer generate_golden(const Question& question,
                             const std::optional<GradedAnswer>& original_golden,
                             Backend& backend, const GenerationContext& ctx,
                             const GradeScale& scale, int shots,
                             std::uint64_t seed);

// Per-backend answer lists for the grades below the top, parsed from
// "Grade <tier>: <text>" completion lines.
struct GenerationOutcome {
  // backend id -> one answer per target grade, descending.
  std::map<std::string, std::vector<GradedAnswer>> lists;
  // backend id -> why it produced nothing. A failing backend never blocks
  // the others.
  std::map<std::string, std::string> errors;
};

GenerationOutcome generate_descending_references(const Question& question,
                                                 const GradedAnswer& golden,
                                                 const GenerationPlan& plan,
                                                 const BackendRegistry& registry,
                                                 const GenerationContext& ctx);

// One answer per target grade, picked uniformly across the backends that
// covered it, golden first. A target grade no backend covered raises
// GenerationError naming the grade. Deterministic per seed.
ReferenceList merge_generated_lists(
    const std::map<std::string, std::vector<GradedAnswer>>& per_backend_lists,
    const GradedAnswer& golden, const std::vector<int>& target_grades,
    std::uint64_t seed);

// Full generation pipeline for one question: golden, per-backend tiers,
// merge. Per-backend failures become warning lines; all backends failing
// raises GenerationError.
ReferenceList build_generated_reference_list(
    const Question& question,
    const std::optional<GradedAnswer>& original_golden,
    const GenerationPlan& plan, const BackendRegistry& registry,
    const GenerationContext& ctx, const GradeScale& scale,
    std::vector<std::string>* warnings = nullptr);

}  // namespace nfqa
