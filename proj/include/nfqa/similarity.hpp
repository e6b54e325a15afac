#pragma once
// Lexical and embedding overlap baselines: tokenizer, n-gram overlap, LCS
// overlap, geometric-mean n-gram precision with brevity penalty, and a
// greedy soft-matching score over token embeddings.

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nfqa {

// Lowercases (ASCII), splits on whitespace, strips punctuation from token
// edges but keeps interior punctuation ("don't" survives intact). Tokens
// that are all punctuation are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Precision/recall/F1 triple shared by the overlap scores.
struct Overlap {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// N-gram overlap with clipped counts: each candidate n-gram is credited at
// most as many times as it appears in the reference.
Overlap ngram_overlap(const std::vector<std::string>& candidate,
                      const std::vector<std::string>& reference, int n);

// Longest-common-subsequence overlap.
Overlap lcs_overlap(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference);

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b);

// Geometric mean of clipped n-gram precisions for n = 1..max_n (orders the
// candidate is too short to populate are skipped), times a brevity penalty
// exp(1 - |ref|/|cand|) applied when the candidate is shorter than the
// reference. Zero-count precisions are floored at 1e-9 instead of zeroing
// the whole product.
double gm_precision_score(const std::vector<std::string>& candidate,
                          const std::vector<std::string>& reference,
                          int max_n = 4);

// ---------------------------------------------------------------------------
// Embedding-based soft overlap

using Embedding = std::vector<double>;

// Mismatched dimensions raise invalid_argument; a zero vector scores 0.
double cosine_similarity(const Embedding& a, const Embedding& b);

// Greedy soft matching over token embeddings: recall averages, over
// reference tokens, each token's best cosine similarity against the
// candidate; precision mirrors it; F1 combines them. Optional per-token
// weights (e.g. idf) reweight the averages; empty weights mean uniform.
// Counts are not clipped: two candidate tokens may both match the same
// reference token.
Overlap embedding_overlap(const std::vector<Embedding>& candidate,
                          const std::vector<Embedding>& reference,
                          const std::vector<double>& candidate_weights = {},
                          const std::vector<double>& reference_weights = {});

// Token -> vector provider for the embedding overlap baseline.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(const std::string& token) const = 0;
};

// Deterministic offline embedder: each token maps to a fixed unit vector
// derived from its hash. Identical tokens get identical vectors; distinct
// tokens are near-orthogonal in expectation, so the score behaves like a
// soft unigram match without any model on disk.
class HashEmbedder : public EmbeddingProvider {
 public:
  explicit HashEmbedder(int dim = 64);
  Embedding embed(const std::string& token) const override;

 private:
  int dim_;
};

// Document-frequency based idf weights over a corpus of token sequences:
// idf(t) = log((1 + N) / (1 + df(t))) + 1.
std::unordered_map<std::string, double> idf_weights(
    const std::vector<std::vector<std::string>>& documents);

Overlap embedding_overlap_text(
    const std::vector<std::string>& candidate,
    const std::vector<std::string>& reference,
    const EmbeddingProvider& provider,
    const std::unordered_map<std::string, double>* idf = nullptr);

}  // namespace nfqa
