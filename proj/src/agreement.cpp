#include "nfqa/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nfqa {
namespace {

void require_same_size(const std::vector<double>& x,
                       const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("correlation inputs differ in length");
  }
}

// Pairs (i, j), i < j, with equal values, computed from group sizes.
std::uint64_t tied_pairs(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::uint64_t total = 0;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    const std::uint64_t g = j - i;
    total += g * (g - 1) / 2;
    i = j;
  }
  return total;
}

// Counts strict inversions (a[i] > a[j] for i < j) while sorting.
std::uint64_t merge_count(std::vector<double>& a) {
  const std::size_t n = a.size();
  std::vector<double> buf(n);
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo;
      std::size_t j = mid;
      std::size_t k = lo;
      while (i < mid && j < hi) {
        if (a[i] <= a[j]) {
          buf[k++] = a[i++];
        } else {
          inversions += mid - i;
          buf[k++] = a[j++];
        }
      }
      while (i < mid) buf[k++] = a[i++];
      while (j < hi) buf[k++] = a[j++];
      std::copy(buf.begin() + lo, buf.begin() + hi, a.begin() + lo);
    }
  }
  return inversions;
}

}  // namespace

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

std::optional<double> sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return std::nullopt;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> midranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && xs[order[j]] == xs[order[i]]) ++j;
    // Ranks are 1-based; tied values share the average of their positions.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> pearson_r(const std::vector<double>& x,
                                const std::vector<double>& y) {
  require_same_size(x, y);
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman_rho(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  require_same_size(x, y);
  if (x.size() < 2) return std::nullopt;
  return pearson_r(midranks(x), midranks(y));
}

std::optional<double> kendall_tau_b(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  require_same_size(x, y);
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;

  const std::uint64_t n0 =
      static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tied_pairs(x);
  const std::uint64_t n2 = tied_pairs(y);
  if (n1 == n0 || n2 == n0) return std::nullopt;

  // Sort indices by x, breaking x-ties by y, so pairs tied in x contribute
  // no inversions to the y mergesort.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  // Pairs tied in both: group by (x, y).
  std::uint64_t n3 = 0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && x[order[j]] == x[order[i]] &&
             y[order[j]] == y[order[i]]) {
        ++j;
      }
      const std::uint64_t g = j - i;
      n3 += g * (g - 1) / 2;
      i = j;
    }
  }

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::uint64_t discordant = merge_count(ys);

  // Pairs strictly ordered in both coordinates split into concordant and
  // discordant; everything else is a tie on at least one side.
  const std::uint64_t strict = n0 - n1 - n2 + n3;
  const double cd = static_cast<double>(strict) -
                    2.0 * static_cast<double>(discordant);
  // One fused sqrt keeps matching tie structures exact: when n1 == n2 the
  // radicand is a perfect square, so full concordance is 1.0, not 1 + ulp.
  const double denom = std::sqrt(static_cast<double>(n0 - n1) *
                                 static_cast<double>(n0 - n2));
  return cd / denom;
}

CorrelationSummary summarize_correlations(
    const std::vector<std::optional<double>>& per_question) {
  CorrelationSummary s;
  double sum = 0.0;
  for (const auto& v : per_question) {
    if (v.has_value()) {
      sum += *v;
      ++s.used;
    } else {
      ++s.skipped;
    }
  }
  if (s.used > 0) s.mean = sum / static_cast<double>(s.used);
  return s;
}

namespace {

// Hit test at one end of the label range. `best_end` flips between the
// maximum (true) and minimum (false) ends.
bool end_hit(const std::vector<double>& scores,
             const std::vector<double>& labels, bool best_end) {
  const double target_label =
      best_end ? *std::max_element(labels.begin(), labels.end())
               : *std::min_element(labels.begin(), labels.end());
  const double extreme_score =
      best_end ? *std::max_element(scores.begin(), scores.end())
               : *std::min_element(scores.begin(), scores.end());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == extreme_score && labels[i] != target_label) return false;
  }
  return true;
}

bool degenerate_labels(const std::vector<double>& labels) {
  return std::all_of(labels.begin(), labels.end(),
                     [&](double l) { return l == labels.front(); });
}

}  // namespace

std::optional<bool> best_hit(const std::vector<double>& scores,
                             const std::vector<double>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("hit inputs differ in length");
  }
  if (scores.size() < 2 || degenerate_labels(labels)) return std::nullopt;
  return end_hit(scores, labels, true);
}

std::optional<bool> best_worst_hit(const std::vector<double>& scores,
                                   const std::vector<double>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("hit inputs differ in length");
  }
  if (scores.size() < 2 || degenerate_labels(labels)) return std::nullopt;
  return end_hit(scores, labels, true) && end_hit(scores, labels, false);
}

double hit_rate(const std::vector<std::optional<bool>>& hits,
                std::size_t* used) {
  std::size_t denom = 0;
  std::size_t num = 0;
  for (const auto& h : hits) {
    if (h.has_value()) {
      ++denom;
      if (*h) ++num;
    }
  }
  if (used) *used = denom;
  return denom ? static_cast<double>(num) / static_cast<double>(denom) : 0.0;
}

}  // namespace nfqa
