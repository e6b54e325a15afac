#pragma once
// The scoring protocols: single-answer point grading, pair comparisons
// (against sibling candidates or against graded references with per-grade
// weights), rank insertion into a reference list, and the text-similarity
// baselines. Every path ends in a Score normalized onto [0,10].

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nfqa/core.hpp"
#include "nfqa/corpus.hpp"
#include "nfqa/judge.hpp"
#include "nfqa/similarity.hpp"

namespace nfqa {

// Per-grade weights for reference comparisons. Negative weights are
// rejected; monotonicity is the default choice, not a requirement.
struct PairwiseWeights {
  std::map<int, double> weight_by_grade;

  // grade + 1 for every scale level: the simplest monotone assignment.
  static PairwiseWeights linear_default(const GradeScale& scale);
  double at(int grade) const;  // ConfigError for an uncovered grade
  void validate() const;
};

// linear_rank: linear map over the method's theoretical range. minmax:
// empirical min/max over the question's score set (only meaningful for
// methods scoring whole candidate sets). identity: keep the raw value.
enum class Normalization { linear_rank, identity, minmax };

struct StrategyConfig {
  Method method = Method::listwise;
  int shots = 0;
  bool permute_positions = true;
  std::optional<PairwiseWeights> weights;
  Normalization normalization = Normalization::linear_rank;
};

// Monotone map of raw from [lo, hi] onto [0,10]; a collapsed range maps
// everything to the neutral 5.0.
double normalize_to_range(double raw, double lo, double hi);

// Raw 1..10 from the judge; normalized (raw-1)*10/9. References must be
// present exactly when the method is the reference-based point score.
Score score_pointwise(const Question& question, const GradedAnswer& candidate,
                      const ReferenceList* references,
                      const StrategyConfig& config, JudgeClient& judge,
                      std::uint64_t* digest_acc = nullptr);

// Every unordered candidate pair is compared once (twice and averaged when
// the judge permutes positions); a candidate's raw score is the sum of its
// per-opponent outcomes, so raws across the question sum to 0 when no
// comparison fails. A failed comparison counts as a tie and bumps
// *comparison_errors; the run continues. Fewer than 2 candidates is a
// ConfigError. Normalization is empirical minmax within the question.
std::map<std::string, Score> score_pairwise_candidates(
    const Question& question, const std::vector<GradedAnswer>& candidates,
    const StrategyConfig& config, JudgeClient& judge,
    std::size_t* comparison_errors = nullptr,
    std::map<std::string, std::uint64_t>* digest_by_answer = nullptr);

// raw = sum over references of weight(grade_j) * verdict_j with verdict in
// [-1,1]; normalized linearly from the theoretical range [-sum w, +sum w].
// Weights default to grade+1 when the config carries none. A failed
// comparison scores 0 and bumps *comparison_errors.
Score score_pairwise_references(const Question& question,
                                const GradedAnswer& candidate,
                                const ReferenceList& references,
                                const StrategyConfig& config,
                                JudgeClient& judge,
                                std::size_t* comparison_errors = nullptr,
                                std::uint64_t* digest_acc = nullptr);

// raw = insertion rank p in [1, m+1]; normalized = 10 (m + 1 - p) / m, so
// better than every reference gives 10 and worse than all gives 0.
Score score_listwise(const Question& question, const GradedAnswer& candidate,
                     const ReferenceList& references,
                     const StrategyConfig& config, JudgeClient& judge,
                     std::uint64_t* digest_acc = nullptr);

// ---------------------------------------------------------------------------
// Similarity baselines

// A reference list viewed as a grade-bucketed pool (for scoring candidates
// against the same references the judges see).
GradedPool pool_from_references(const Question& question,
                                const ReferenceList& references);

// Similarity metric against every top-grade pool answer, maximum taken,
// mapped onto [0,10] by x10. An empty top grade falls back to the best
// populated grade and appends a warning; an empty pool is a ConfigError.
// ROUGE and the embedding metric report F1 unless use_recall is set; the
// embedding metric uses the given provider (hash embedder when null).
Score score_against_pool(const GradedAnswer& candidate, const GradedPool& pool,
                         Method metric,
                         const EmbeddingProvider* embedder = nullptr,
                         bool use_recall = false,
                         std::vector<std::string>* warnings = nullptr);

}  // namespace nfqa
