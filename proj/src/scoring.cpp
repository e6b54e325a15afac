#include "nfqa/scoring.hpp"

#include <algorithm>

#include "nfqa/util.hpp"

namespace nfqa {

namespace {

void fold_digest(std::uint64_t* acc, std::uint64_t value) {
  if (acc) *acc = mix64(*acc ^ value);
}

double metric_value(const std::vector<std::string>& cand_tokens,
                    const std::vector<std::string>& ref_tokens, Method metric,
                    const EmbeddingProvider& embedder, bool use_recall) {
  auto pick = [&](const Overlap& o) { return use_recall ? o.recall : o.f1; };
  switch (metric) {
    case Method::rouge1:
      return pick(ngram_overlap(cand_tokens, ref_tokens, 1));
    case Method::rouge2:
      return pick(ngram_overlap(cand_tokens, ref_tokens, 2));
    case Method::rougeL:
      return pick(lcs_overlap(cand_tokens, ref_tokens));
    case Method::bleu:
      return gm_precision_score(cand_tokens, ref_tokens);
    case Method::bertscore:
      return pick(embedding_overlap_text(cand_tokens, ref_tokens, embedder));
    default:
      throw ConfigError("method " + std::string(to_string(metric)) +
                        " is not a similarity metric");
  }
}

}  // namespace

PairwiseWeights PairwiseWeights::linear_default(const GradeScale& scale) {
  PairwiseWeights w;
  for (int level : scale.levels()) {
    w.weight_by_grade[level] = static_cast<double>(level) + 1.0;
  }
  w.validate();
  return w;
}

double PairwiseWeights::at(int grade) const {
  auto it = weight_by_grade.find(grade);
  if (it == weight_by_grade.end()) {
    throw ConfigError("no pairwise weight for grade " + std::to_string(grade));
  }
  return it->second;
}

void PairwiseWeights::validate() const {
  if (weight_by_grade.empty()) {
    throw ConfigError("pairwise weights are empty");
  }
  for (const auto& [grade, w] : weight_by_grade) {
    if (w < 0.0) {
      throw ConfigError("pairwise weight for grade " + std::to_string(grade) +
                        " is negative");
    }
  }
}

double normalize_to_range(double raw, double lo, double hi) {
  if (hi <= lo) return 5.0;
  double v = (raw - lo) * 10.0 / (hi - lo);
  if (v < 0.0) v = 0.0;
  if (v > 10.0) v = 10.0;
  return v;
}

Score score_pointwise(const Question& question, const GradedAnswer& candidate,
                      const ReferenceList* references,
                      const StrategyConfig& config, JudgeClient& judge,
                      std::uint64_t* digest_acc) {
  const bool wants_refs = config.method == Method::pointwise_ref;
  if (wants_refs && (!references || references->empty())) {
    throw ConfigError("reference-based point scoring needs a reference list (" +
                      question.question_id + ")");
  }
  if (!wants_refs && references) {
    throw ConfigError(
        "reference-free point scoring was handed a reference list (" +
        question.question_id + ")");
  }
  int raw = 0;
  try {
    raw = judge.point_score(question, candidate,
                            wants_refs ? references : nullptr, digest_acc);
  } catch (const BackendError& e) {
    throw BackendError("question " + question.question_id + ", answer " +
                           candidate.answer_id + ": " + e.what(),
                       e.transient);
  }
  Score s;
  s.question_id = question.question_id;
  s.answer_id = candidate.answer_id;
  s.method = config.method;
  s.raw = raw;
  s.normalized = config.normalization == Normalization::identity
                     ? s.raw
                     : normalize_to_range(s.raw, 1.0, 10.0);
  return s;
}

std::map<std::string, Score> score_pairwise_candidates(
    const Question& question, const std::vector<GradedAnswer>& candidates,
    const StrategyConfig& config, JudgeClient& judge,
    std::size_t* comparison_errors,
    std::map<std::string, std::uint64_t>* digest_by_answer) {
  if (candidates.size() < 2) {
    throw ConfigError("pairwise comparison needs at least 2 candidates (" +
                      question.question_id + " has " +
                      std::to_string(candidates.size()) + ")");
  }
  std::vector<double> sums(candidates.size(), 0.0);
  std::vector<std::uint64_t> digests(candidates.size(), 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      double v = 0.0;
      std::uint64_t pair_digest = 0;
      try {
        v = judge.preference(question, candidates[i], candidates[j],
                             &pair_digest);
      } catch (const BackendError&) {
        if (comparison_errors) ++*comparison_errors;
      } catch (const ParseError&) {
        if (comparison_errors) ++*comparison_errors;
      }
      sums[i] += v;
      sums[j] -= v;
      fold_digest(&digests[i], pair_digest);
      fold_digest(&digests[j], pair_digest);
    }
  }
  double lo = sums[0];
  double hi = sums[0];
  for (double v : sums) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double n = static_cast<double>(candidates.size());
  std::map<std::string, Score> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Score s;
    s.question_id = question.question_id;
    s.answer_id = candidates[i].answer_id;
    s.method = config.method;
    s.raw = sums[i];
    switch (config.normalization) {
      case Normalization::identity:
        s.normalized = s.raw;
        break;
      case Normalization::linear_rank:
        s.normalized = normalize_to_range(s.raw, -(n - 1.0), n - 1.0);
        break;
      case Normalization::minmax:
        s.normalized = normalize_to_range(s.raw, lo, hi);
        break;
    }
    if (digest_by_answer) {
      (*digest_by_answer)[candidates[i].answer_id] = digests[i];
    }
    out.emplace(candidates[i].answer_id, std::move(s));
  }
  return out;
}

Score score_pairwise_references(const Question& question,
                                const GradedAnswer& candidate,
                                const ReferenceList& references,
                                const StrategyConfig& config,
                                JudgeClient& judge,
                                std::size_t* comparison_errors,
                                std::uint64_t* digest_acc) {
  if (references.empty()) {
    throw ConfigError("reference comparison needs a non-empty list (" +
                      question.question_id + ")");
  }
  const PairwiseWeights weights = [&] {
    if (config.weights) {
      config.weights->validate();
      return *config.weights;
    }
    PairwiseWeights w;
    for (int g : references.grades()) {
      w.weight_by_grade[g] = static_cast<double>(g) + 1.0;
    }
    return w;
  }();
  double raw = 0.0;
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < references.size(); ++j) {
    const GradedAnswer& ref = references.at(j);
    const double w = weights.at(*ref.grade);
    weight_sum += w;
    double v = 0.0;
    try {
      v = judge.preference(question, candidate, ref, digest_acc);
    } catch (const BackendError&) {
      if (comparison_errors) ++*comparison_errors;
    } catch (const ParseError&) {
      if (comparison_errors) ++*comparison_errors;
    }
    raw += w * v;
  }
  Score s;
  s.question_id = question.question_id;
  s.answer_id = candidate.answer_id;
  s.method = config.method;
  s.raw = raw;
  s.normalized = config.normalization == Normalization::identity
                     ? raw
                     : normalize_to_range(raw, -weight_sum, weight_sum);
  return s;
}

Score score_listwise(const Question& question, const GradedAnswer& candidate,
                     const ReferenceList& references,
                     const StrategyConfig& config, JudgeClient& judge,
                     std::uint64_t* digest_acc) {
  if (references.empty()) {
    throw ConfigError("rank scoring needs a non-empty reference list (" +
                      question.question_id + ")");
  }
  const double m = static_cast<double>(references.size());
  const RankParse parsed =
      judge.rank(question, candidate, references, digest_acc);
  Score s;
  s.question_id = question.question_id;
  s.answer_id = candidate.answer_id;
  s.method = config.method;
  s.raw = parsed.rank;
  s.normalized = config.normalization == Normalization::identity
                     ? s.raw
                     : 10.0 * (m + 1.0 - parsed.rank) / m;
  return s;
}

GradedPool pool_from_references(const Question& question,
                                const ReferenceList& references) {
  GradedPool pool;
  pool.question = question;
  for (const GradedAnswer& a : references.answers()) {
    pool.answers_by_grade[*a.grade].push_back(a);
  }
  return pool;
}

Score score_against_pool(const GradedAnswer& candidate, const GradedPool& pool,
                         Method metric, const EmbeddingProvider* embedder,
                         bool use_recall, std::vector<std::string>* warnings) {
  if (pool.total() == 0) {
    throw ConfigError("similarity scoring needs a non-empty pool (" +
                      pool.question.question_id + ")");
  }
  // answers_by_grade is keyed best grade first; the first non-empty bucket
  // is the best populated grade.
  auto bucket = pool.answers_by_grade.begin();
  while (bucket != pool.answers_by_grade.end() && bucket->second.empty()) {
    ++bucket;
  }
  if (bucket != pool.answers_by_grade.begin() && warnings) {
    warnings->push_back("question " + pool.question.question_id +
                        ": no top-grade ground truth, scoring against grade " +
                        std::to_string(bucket->first));
  }
  static const HashEmbedder fallback_embedder(64);
  const EmbeddingProvider& provider =
      embedder ? *embedder : fallback_embedder;
  const auto cand_tokens = tokenize(candidate.text);
  double best = 0.0;
  for (const GradedAnswer& gt : bucket->second) {
    best = std::max(best, metric_value(cand_tokens, tokenize(gt.text), metric,
                                       provider, use_recall));
  }
  Score s;
  s.question_id = pool.question.question_id;
  s.answer_id = candidate.answer_id;
  s.method = metric;
  s.raw = best;
  s.normalized = best * 10.0;
  return s;
}

}  // namespace nfqa
