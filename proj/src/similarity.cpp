#include "nfqa/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "nfqa/util.hpp"

namespace nfqa {
namespace {

bool is_edge_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

double f1_of(double p, double r) {
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

// n-gram key: tokens joined with an unlikely separator.
std::unordered_map<std::string, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string& piece : split_ws(text)) {
    std::size_t b = 0;
    std::size_t e = piece.size();
    while (b < e && is_edge_punct(piece[b])) ++b;
    while (e > b && is_edge_punct(piece[e - 1])) --e;
    if (b >= e) continue;
    std::string token = piece.substr(b, e - b);
    for (char& c : token) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    out.push_back(std::move(token));
  }
  return out;
}

Overlap ngram_overlap(const std::vector<std::string>& candidate,
                      const std::vector<std::string>& reference, int n) {
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t cand_total = 0;
  std::size_t ref_total = 0;
  for (const auto& [k, v] : cand) cand_total += static_cast<std::size_t>(v);
  for (const auto& [k, v] : ref) ref_total += static_cast<std::size_t>(v);
  std::size_t clipped = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) {
      clipped += static_cast<std::size_t>(std::min(count, it->second));
    }
  }
  Overlap o;
  o.precision = cand_total ? static_cast<double>(clipped) / cand_total : 0.0;
  o.recall = ref_total ? static_cast<double>(clipped) / ref_total : 0.0;
  o.f1 = f1_of(o.precision, o.recall);
  return o;
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  // Rolling single-row DP.
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Overlap lcs_overlap(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference) {
  const std::size_t lcs = lcs_length(candidate, reference);
  Overlap o;
  o.precision = candidate.empty()
                    ? 0.0
                    : static_cast<double>(lcs) / candidate.size();
  o.recall = reference.empty()
                 ? 0.0
                 : static_cast<double>(lcs) / reference.size();
  o.f1 = f1_of(o.precision, o.recall);
  return o;
}

double gm_precision_score(const std::vector<std::string>& candidate,
                          const std::vector<std::string>& reference,
                          int max_n) {
  if (candidate.empty() || reference.empty() || max_n < 1) return 0.0;
  constexpr double kFloor = 1e-9;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (candidate.size() < static_cast<std::size_t>(n)) break;
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t total = 0;
    std::size_t clipped = 0;
    for (const auto& [gram, count] : cand) {
      total += static_cast<std::size_t>(count);
      auto it = ref.find(gram);
      if (it != ref.end()) {
        clipped += static_cast<std::size_t>(std::min(count, it->second));
      }
    }
    double p = total ? static_cast<double>(clipped) / total : 0.0;
    log_sum += std::log(std::max(p, kFloor));
    ++orders;
  }
  if (orders == 0) return 0.0;
  double gm = std::exp(log_sum / orders);
  double bp = 1.0;
  if (candidate.size() < reference.size()) {
    bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                            static_cast<double>(candidate.size()));
  }
  return bp * gm;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(
        "cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
        " vs " + std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += a[i] * b[i];
  for (double v : a) na += v * v;
  for (double v : b) nb += v * v;
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Overlap embedding_overlap(const std::vector<Embedding>& candidate,
                          const std::vector<Embedding>& reference,
                          const std::vector<double>& candidate_weights,
                          const std::vector<double>& reference_weights) {
  Overlap o;
  if (candidate.empty() || reference.empty()) return o;
  auto weighted_best = [](const std::vector<Embedding>& from,
                          const std::vector<Embedding>& against,
                          const std::vector<double>& weights) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = 0.0;
      for (const auto& other : against) {
        best = std::max(best, cosine_similarity(from[i], other));
      }
      const double w = weights.empty() ? 1.0 : weights[i];
      num += w * best;
      den += w;
    }
    return den > 0.0 ? num / den : 0.0;
  };
  o.precision = weighted_best(candidate, reference, candidate_weights);
  o.recall = weighted_best(reference, candidate, reference_weights);
  o.f1 = f1_of(o.precision, o.recall);
  return o;
}

HashEmbedder::HashEmbedder(int dim) : dim_(dim) {
  if (dim_ < 1) dim_ = 1;
}

Embedding HashEmbedder::embed(const std::string& token) const {
  Rng rng(mix64(fnv1a64(token) ^ 0x5eedbeefcafef00dULL));
  Embedding v(static_cast<std::size_t>(dim_));
  double norm = 0.0;
  for (double& x : v) {
    // Box-Muller-free symmetric draw; direction uniformity is not needed,
    // only determinism and near-orthogonality between distinct tokens.
    x = rng.uniform_real() * 2.0 - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm <= 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

std::unordered_map<std::string, double> idf_weights(
    const std::vector<std::vector<std::string>>& documents) {
  std::unordered_map<std::string, int> df;
  for (const auto& doc : documents) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& t : doc) {
      if (!seen[t]) {
        seen[t] = true;
        ++df[t];
      }
    }
  }
  std::unordered_map<std::string, double> out;
  const double n = static_cast<double>(documents.size());
  for (const auto& [token, count] : df) {
    out[token] = std::log((1.0 + n) / (1.0 + count)) + 1.0;
  }
  return out;
}

Overlap embedding_overlap_text(
    const std::vector<std::string>& candidate,
    const std::vector<std::string>& reference,
    const EmbeddingProvider& provider,
    const std::unordered_map<std::string, double>* idf) {
  auto embed_all = [&](const std::vector<std::string>& tokens) {
    std::vector<Embedding> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(provider.embed(t));
    return out;
  };
  auto weigh_all = [&](const std::vector<std::string>& tokens) {
    std::vector<double> out;
    if (!idf) return out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
      auto it = idf->find(t);
      out.push_back(it != idf->end() ? it->second : 1.0);
    }
    return out;
  };
  return embedding_overlap(embed_all(candidate), embed_all(reference),
                           weigh_all(candidate), weigh_all(reference));
}

}  // namespace nfqa
