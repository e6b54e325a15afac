#pragma once
// Rank agreement statistics between automatic scores and human labels:
// Kendall tau-b, Spearman rho, Pearson r, plus best-answer hit rates.
// Degenerate inputs (constant vectors, fewer than two points) yield nullopt
// rather than NaN so aggregation can count them as skipped.

#include <cstddef>
#include <optional>
#include <vector>

namespace nfqa {

double mean(const std::vector<double>& xs);

// Sample standard deviation (n - 1 denominator); nullopt for n < 2.
std::optional<double> sample_std(const std::vector<double>& xs);

// Average ranks with midranks for ties, 1-based: {10, 20, 20} -> {1, 2.5, 2.5}.
std::vector<double> midranks(const std::vector<double>& xs);

// Product-moment correlation. Nullopt when either vector is constant or
// shorter than 2. Vectors must be the same length.
std::optional<double> pearson_r(const std::vector<double>& x,
                                const std::vector<double>& y);

// Spearman rho: Pearson over midranks.
std::optional<double> spearman_rho(const std::vector<double>& x,
                                   const std::vector<double>& y);

// Kendall tau-b with tie correction:
//   tau_b = (C - D) / sqrt((n0 - n1) (n0 - n2))
// where n0 = n(n-1)/2 and n1, n2 are tied-pair counts in x and y. Computed
// in O(n log n) with a merge-sort inversion count. Nullopt when either side
// is constant.
std::optional<double> kendall_tau_b(const std::vector<double>& x,
                                    const std::vector<double>& y);

// Mean over the present values; `skipped` counts the absent ones. Nullopt
// mean when every entry was absent.
struct CorrelationSummary {
  std::optional<double> mean;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

CorrelationSummary summarize_correlations(
    const std::vector<std::optional<double>>& per_question);

// Whether the top-scored answer of one question is a top-labeled answer.
// Tie handling: if several answers tie at the best score, the hit requires
// all of them to carry the best label; a question where every label is
// equal is excluded (nullopt) since any pick would be trivially right.
std::optional<bool> best_hit(const std::vector<double>& scores,
                             const std::vector<double>& labels);

// Same idea at both ends: best-scored must be best-labeled and worst-scored
// worst-labeled, with the same tie rule on each end.
std::optional<bool> best_worst_hit(const std::vector<double>& scores,
                                   const std::vector<double>& labels);

// Fraction of present hits that are true; `used` gets the denominator.
double hit_rate(const std::vector<std::optional<bool>>& hits,
                std::size_t* used = nullptr);

}  // namespace nfqa
