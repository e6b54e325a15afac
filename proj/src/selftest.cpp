#include "nfqa/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>

#include "nfqa/agreement.hpp"
#include "nfqa/corpus.hpp"
#include "nfqa/harness.hpp"
#include "nfqa/judge.hpp"
#include "nfqa/reference_builder.hpp"
#include "nfqa/scoring.hpp"
#include "nfqa/similarity.hpp"
#include "nfqa/util.hpp"

namespace nfqa {

namespace {

using nlohmann::json;

// First failed requirement wins; later ones are not evaluated for detail.
struct Checker {
  bool ok = true;
  std::string why;

  void require(bool cond, const std::string& msg) {
    if (ok && !cond) {
      ok = false;
      why = msg;
    }
  }
};

double unit_double(Rng& rng) {
  return static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Independent correlation implementations: explicit pair enumeration,
// counting midranks, and the textbook product-moment formula. Deliberately
// O(n^2) and structurally unlike the production code they cross-check.

std::optional<double> product_moment_r(const std::vector<double>& x,
                                       const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> pair_enumeration_tau(const std::vector<double>& x,
                                           const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      const double s = dx * dy;
      if (s > 0) ++concordant;
      if (s < 0) ++discordant;
    }
  }
  auto tie_pairs = [n](const std::vector<double>& v) {
    std::map<double, long long> counts;
    for (double e : v) ++counts[e];
    long long t = 0;
    for (const auto& [value, c] : counts) t += c * (c - 1) / 2;
    (void)n;
    return t;
  };
  const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
  const long long n1 = tie_pairs(x);
  const long long n2 = tie_pairs(y);
  if (n0 == n1 || n0 == n2) return std::nullopt;
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(n0 - n1) *
                   static_cast<double>(n0 - n2));
}

std::vector<double> counting_midranks(const std::vector<double>& v) {
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    ranks[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1) / 2;
  }
  return ranks;
}

std::optional<double> rank_then_pearson_rho(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  return product_moment_r(counting_midranks(x), counting_midranks(y));
}

CheckResult check_correlations(const std::string&) {
  Checker c;
  Rng rng(0x5eed5eedULL);
  double max_err = 0.0;
  std::size_t degenerate = 0;
  for (int t = 0; t < 1000 && c.ok; ++t) {
    const std::size_t n = 3 + rng.uniform(6);
    std::vector<double> xs(n), ys(n);
    const bool tied = t % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = tied ? static_cast<double>(rng.uniform(4)) : unit_double(rng);
      ys[i] = tied ? static_cast<double>(rng.uniform(4)) : unit_double(rng);
    }
    if (t % 97 == 0) std::fill(xs.begin(), xs.end(), 1.0);
    auto compare = [&](std::optional<double> got, std::optional<double> want,
                       const char* what) {
      c.require(got.has_value() == want.has_value(),
                std::string(what) + ": definedness mismatch at trial " +
                    std::to_string(t));
      if (!got || !want) {
        ++degenerate;
        return;
      }
      const double err = std::fabs(*got - *want);
      max_err = std::max(max_err, err);
      c.require(err <= 1e-12, std::string(what) + ": |delta| " + sci(err) +
                                  " at trial " + std::to_string(t));
    };
    compare(kendall_tau_b(xs, ys), pair_enumeration_tau(xs, ys), "tau_b");
    compare(spearman_rho(xs, ys), rank_then_pearson_rho(xs, ys), "rho");
    compare(pearson_r(xs, ys), product_moment_r(xs, ys), "r");
  }
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "1000 vector pairs, max |delta| " + sci(max_err) + ", " +
                        std::to_string(degenerate) +
                        " degenerate stats matched as undefined"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

// Maps "t<i>" to the i-th basis vector, so cosine is exact set membership.
class OneHotEmbedder final : public EmbeddingProvider {
 public:
  Embedding embed(const std::string& token) const override {
    Embedding e(30, 0.0);
    e[std::stoul(token.substr(1)) % 30] = 1.0;
    return e;
  }
};

CheckResult check_similarity(const std::string&) {
  Checker c;

  c.require(tokenize("The cat sat.") ==
                std::vector<std::string>({"the", "cat", "sat"}),
            "tokenizer: basic sentence");
  c.require(tokenize("").empty(), "tokenizer: empty input");
  c.require(tokenize("don't stop") ==
                std::vector<std::string>({"don't", "stop"}),
            "tokenizer: interior punctuation kept");

  const auto cat_sat = tokenize("the cat sat");
  const auto cat_slept = tokenize("the cat slept");
  const Overlap u = ngram_overlap(cat_sat, cat_slept, 1);
  c.require(u.precision == 2.0 / 3.0 && u.recall == 2.0 / 3.0 &&
                u.f1 == 2.0 / 3.0,
            "unigram overlap: 2-of-3 fixture");
  const Overlap u_same = ngram_overlap(cat_sat, cat_sat, 1);
  c.require(u_same.precision == 1.0 && u_same.f1 == 1.0,
            "unigram overlap: identity");
  const Overlap u_disjoint = ngram_overlap(cat_sat, tokenize("dogs bark"), 1);
  c.require(u_disjoint.f1 == 0.0, "unigram overlap: disjoint");

  const std::vector<std::string> abcd{"a", "b", "c", "d"};
  const std::vector<std::string> acbd{"a", "c", "b", "d"};
  const Overlap l = lcs_overlap(abcd, acbd);
  c.require(l.precision == 0.75 && l.recall == 0.75 && l.f1 == 0.75,
            "subsequence overlap: length-3 fixture");
  c.require(lcs_overlap(abcd, abcd).f1 == 1.0, "subsequence overlap: identity");
  c.require(lcs_overlap({}, abcd).f1 == 0.0,
            "subsequence overlap: empty candidate");

  c.require(gm_precision_score({"the", "cat"}, {"the", "cat", "sat"}, 1) ==
                std::exp(-0.5),
            "precision score: brevity penalty fixture");
  c.require(gm_precision_score(abcd, abcd, 4) == 1.0,
            "precision score: identity");
  c.require(gm_precision_score({}, abcd, 4) == 0.0,
            "precision score: empty candidate");

  // 2x2 soft-match toy with candidate-reference cosines
  // {(1.0, 0.2), (0.3, 0.9)}: greedy row and column maxima average 0.95.
  {
    const double y2 = std::sqrt(1 - 0.2 * 0.2);
    const double yc = (0.9 - 0.2 * 0.3) / y2;
    const double zc = std::sqrt(1 - 0.3 * 0.3 - yc * yc);
    const std::vector<Embedding> cand{{1, 0, 0}, {0.3, yc, zc}};
    const std::vector<Embedding> refs{{1, 0, 0}, {0.2, y2, 0}};
    const Overlap toy = embedding_overlap(cand, refs);
    c.require(std::fabs(toy.precision - 0.95) <= 1e-12 &&
                  std::fabs(toy.recall - 0.95) <= 1e-12,
              "soft match: 2x2 greedy fixture");
  }
  {
    const std::vector<Embedding> a{{1, 0}, {0, 1}};
    c.require(embedding_overlap(a, a).f1 == 1.0, "soft match: identity");
    const Overlap ortho = embedding_overlap({{1, 0}}, {{0, 1}});
    c.require(ortho.f1 == 0.0, "soft match: orthogonal");
  }

  // One-hot embeddings turn greedy matching into hard set overlap, which
  // equals unigram overlap exactly as long as no token repeats inside a
  // sequence (clipped counts never bind), so sample without replacement.
  {
    const OneHotEmbedder onehot;
    Rng rng(0x0e1bedd1ULL);
    std::vector<int> ids(30);
    std::iota(ids.begin(), ids.end(), 0);
    auto draw = [&](std::size_t k) {
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(ids[i], ids[i + rng.uniform(30 - i)]);
      }
      std::vector<std::string> tokens;
      for (std::size_t i = 0; i < k; ++i) {
        tokens.push_back("t" + std::to_string(ids[i]));
      }
      return tokens;
    };
    for (int t = 0; t < 200 && c.ok; ++t) {
      const auto cand = draw(1 + rng.uniform(10));
      const auto ref = draw(1 + rng.uniform(10));
      const Overlap a = ngram_overlap(cand, ref, 1);
      const Overlap b = embedding_overlap_text(cand, ref, onehot);
      c.require(std::fabs(a.precision - b.precision) <= 1e-12 &&
                    std::fabs(a.recall - b.recall) <= 1e-12 &&
                    std::fabs(a.f1 - b.f1) <= 1e-12,
                "one-hot soft match != unigram overlap at trial " +
                    std::to_string(t));
    }
  }

  // Pool aggregation: per-reference F1 {0.2, 0.5} -> max 0.5 -> 5.0.
  {
    auto mk = [](const char* id, const char* text) {
      GradedAnswer a;
      a.answer_id = id;
      a.question_id = "fx";
      a.text = text;
      a.grade = 3;
      return a;
    };
    GradedPool pool;
    pool.question = {"fx", "fixture"};
    pool.answers_by_grade[3] = {mk("r1", "a p q r s t u"), mk("r2", "a")};
    GradedAnswer cand = mk("c", "a b c");
    const Score s = score_against_pool(cand, pool, Method::rouge1);
    c.require(s.raw == 0.5 && s.normalized == 5.0,
              "pool aggregation: max rule fixture");
    bool threw = false;
    try {
      score_against_pool(cand, GradedPool{}, Method::rouge1);
    } catch (const ConfigError&) {
      threw = true;
    }
    c.require(threw, "pool aggregation: empty pool must raise");
  }

  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "all hand-derived fixtures exact; one-hot soft match == "
                    "unigram overlap on 200 random sequences"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_perfect_judge(const std::string& scratch) {
  Checker c;
  ExperimentConfig cfg;
  cfg.dataset.synthetic = true;
  cfg.regime = Regime::multi_grade;
  cfg.composition = "3210";
  cfg.seeds = {1};
  cfg.parallelism = 4;
  cfg.output_dir = scratch + "/perfect";
  MethodSpec m;
  m.strategy.method = Method::listwise;
  m.backend_id = "oracle";
  m.label = "listwise";
  cfg.methods = {m};
  cfg.backends = {json{{"kind", "oracle"}, {"id", "oracle"}}};

  const RunArtifact art = run_experiment(cfg);
  const SeedMethodResult* row = nullptr;
  for (const SeedMethodResult& r : art.per_seed) {
    if (r.label == "listwise" && r.aggregation == "per_question") row = &r;
  }
  c.require(row != nullptr, "no per-question result row");
  if (row) {
    c.require(row->used_questions == 20 && row->skipped_questions == 0,
              "expected all 20 questions usable");
    c.require(row->kendall && *row->kendall == 1.0,
              "mean tau_b != 1.0: " +
                  (row->kendall ? format_fixed(*row->kendall, 12) : "undefined"));
    c.require(row->spearman && *row->spearman == 1.0,
              "mean rho != 1.0: " +
                  (row->spearman ? format_fixed(*row->spearman, 12)
                                 : "undefined"));
  }
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "noise-free judge: mean per-question tau_b = 1.0 and "
                    "rho = 1.0 over 20 questions"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_noise_ordering(const std::string& scratch) {
  Checker c;
  ExperimentConfig cfg;
  cfg.dataset.synthetic = true;
  cfg.regime = Regime::multi_grade;
  cfg.composition = "3210";
  cfg.parallelism = 4;
  cfg.output_dir = scratch + "/noise";
  cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= 30; ++s) cfg.seeds.push_back(s);
  cfg.backends = {
      json{{"kind", "oracle"}, {"id", "noisy"}, {"noise", 0.2}}};
  MethodSpec lw;
  lw.strategy.method = Method::listwise;
  lw.backend_id = "noisy";
  lw.label = "listwise";
  MethodSpec pw;
  pw.strategy.method = Method::pointwise_noref;
  pw.backend_id = "noisy";
  pw.label = "pointwise";
  cfg.methods = {lw, pw};

  const RunArtifact art = run_experiment(cfg);
  std::map<std::uint64_t, std::map<std::string, double>> rho;
  for (const SeedMethodResult& r : art.per_seed) {
    if (r.aggregation != "per_question") continue;
    c.require(r.spearman.has_value(),
              r.label + " seed " + std::to_string(r.seed) + ": rho undefined");
    if (r.spearman) rho[r.seed][r.label] = *r.spearman;
  }
  int wins = 0;
  double sum_l = 0, sum_p = 0;
  for (const auto& [seed, by_label] : rho) {
    const double l = by_label.at("listwise");
    const double p = by_label.at("pointwise");
    sum_l += l;
    sum_p += p;
    if (l > p) ++wins;
  }
  const double mean_l = sum_l / 30.0, mean_p = sum_p / 30.0;
  c.require(mean_l > mean_p, "mean rho ordering violated: listwise " +
                                 format_fixed(mean_l, 4) + " vs pointwise " +
                                 format_fixed(mean_p, 4));
  // One-sided sign test over seeds: P(X >= 20 | n=30, p=1/2) ~= 0.049 < 0.05.
  c.require(wins >= 20, "listwise won only " + std::to_string(wins) +
                            "/30 seeds (need >= 20)");
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "mean rho listwise " + format_fixed(mean_l, 4) +
                        " > pointwise " + format_fixed(mean_p, 4) + "; wins " +
                        std::to_string(wins) + "/30 (sign test needs >= 20)"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_bias_cancellation(const std::string&) {
  Checker c;
  const Dataset ds = synthesize_dataset(SyntheticSpec{});
  const Composition comp = parse_composition("3210", ds.scale);
  const ReferenceSet refs =
      build_sampled_reference_set(ds, comp, 7, false, nullptr);

  auto biased = std::make_shared<BiasedBackend>();
  JudgeOptions base;
  base.seed = 5;
  JudgeClient permuted(biased, TemplateSet::builtin(), nullptr, base);
  JudgeOptions fixed_order = base;
  fixed_order.permute_positions = false;
  JudgeClient unpermuted(biased, TemplateSet::builtin(), nullptr, fixed_order);

  StrategyConfig strat;
  strat.method = Method::pairwise_refs;
  std::size_t checked = 0;
  for (const Question& q : ds.questions) {
    const ReferenceList* list = refs.find(q.question_id);
    c.require(list != nullptr, "missing reference list");
    if (!list) break;
    double weight_sum = 0;
    for (int g : list->grades()) weight_sum += g + 1;
    for (const GradedAnswer* a : ds.answers_for(q.question_id)) {
      if (!a->grade || list->contains_answer(a->answer_id)) continue;
      const Score with = score_pairwise_references(q, *a, *list, strat,
                                                   permuted);
      c.require(with.raw == 0.0,
                "permuted raw not cancelled: " + format_fixed(with.raw, 6) +
                    " for " + a->answer_id);
      const Score without = score_pairwise_references(q, *a, *list, strat,
                                                      unpermuted);
      c.require(without.raw == weight_sum && without.normalized == 10.0,
                "unpermuted score not maximal for " + a->answer_id);
      ++checked;
      if (!c.ok) break;
    }
    if (!c.ok) break;
  }
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "first-position judge: " + std::to_string(checked) +
                        " candidates all raw 0 with permutation, all maximal "
                        "without"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_degeneration(const std::string&) {
  Checker c;
  const Dataset ds = synthesize_dataset(SyntheticSpec{});
  auto oracle = std::make_shared<OracleBackend>(OracleBackend::Options{});
  // A pair between equal grades depends on presentation order, so the exact
  // listwise equivalence needs the fixed forward order.
  JudgeOptions opts;
  opts.seed = 3;
  opts.permute_positions = false;
  JudgeClient judge(oracle, TemplateSet::builtin(), nullptr, opts);
  StrategyConfig list_cfg;
  list_cfg.method = Method::listwise;
  StrategyConfig pair_cfg;
  pair_cfg.method = Method::pairwise_refs;

  std::size_t checked = 0;
  bool saw_low = false, saw_high = false;
  for (const char* digits : {"3", "2"}) {
    const Composition comp = parse_composition(digits, ds.scale);
    const ReferenceSet refs =
        build_sampled_reference_set(ds, comp, 11, false, nullptr);
    for (const Question& q : ds.questions) {
      const ReferenceList* list = refs.find(q.question_id);
      c.require(list && list->size() == 1, "reference list is not a single answer");
      if (!c.ok) break;
      for (const GradedAnswer* a : ds.answers_for(q.question_id)) {
        if (!a->grade || list->contains_answer(a->answer_id)) continue;
        const Score sl = score_listwise(q, *a, *list, list_cfg, judge);
        const Score sp =
            score_pairwise_references(q, *a, *list, pair_cfg, judge);
        c.require(sl.normalized == sp.normalized,
                  "rank-based " + format_fixed(sl.normalized, 6) +
                      " != pair-based " + format_fixed(sp.normalized, 6) +
                      " for " + a->answer_id);
        saw_low = saw_low || sl.normalized == 0.0;
        saw_high = saw_high || sl.normalized == 10.0;
        ++checked;
        if (!c.ok) break;
      }
      if (!c.ok) break;
    }
    if (!c.ok) break;
  }
  c.require(saw_low && saw_high,
            "expected both extremes across single-reference lists");
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "single-reference lists: listwise == pairwise-references "
                    "on " +
                        std::to_string(checked) +
                        " candidate scores, both extremes realized"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_sampling_uniformity(const std::string&) {
  Checker c;
  const GradeScale scale = GradeScale::parse("3,2,1,0");
  auto mk = [](const std::string& id, int grade) {
    GradedAnswer a;
    a.answer_id = id;
    a.question_id = "u0";
    a.text = "answer " + id;
    a.grade = grade;
    return a;
  };
  GradedPool pool;
  pool.question = {"u0", "uniformity probe"};
  for (int i = 0; i < 3; ++i) pool.answers_by_grade[3].push_back(mk("b" + std::to_string(i), 3));
  for (int i = 0; i < 5; ++i) pool.answers_by_grade[2].push_back(mk("a" + std::to_string(i), 2));
  for (int i = 0; i < 2; ++i) pool.answers_by_grade[1].push_back(mk("c" + std::to_string(i), 1));
  for (int i = 0; i < 2; ++i) pool.answers_by_grade[0].push_back(mk("d" + std::to_string(i), 0));

  const Composition comp = parse_composition("3210", scale);
  const int trials = 2000;
  std::map<int, std::map<std::string, int>> counts;
  for (int seed = 1; seed <= trials; ++seed) {
    const ReferenceList list = sample_reference_list(pool, comp, seed);
    for (const GradedAnswer& a : list.answers()) ++counts[*a.grade][a.answer_id];
  }
  // 0.99 quantiles of chi-square by degrees of freedom.
  const std::map<int, double> chi2_99{
      {1, 6.634896601}, {2, 9.210340372}, {3, 11.344866730}, {4, 13.276704136}};
  std::string cells;
  for (const auto& [grade, bucket] : pool.answers_by_grade) {
    const double k = static_cast<double>(bucket.size());
    const double expected = trials / k;
    const double sigma = std::sqrt(trials * (1.0 / k) * (1.0 - 1.0 / k));
    double chi2 = 0;
    for (const GradedAnswer& a : bucket) {
      const int obs = counts[grade][a.answer_id];
      chi2 += (obs - expected) * (obs - expected) / expected;
      c.require(std::fabs(obs - expected) <= 3 * sigma,
                "grade " + std::to_string(grade) + " answer " + a.answer_id +
                    ": " + std::to_string(obs) + " picks vs expected " +
                    format_fixed(expected, 1) + " (3 sigma " +
                    format_fixed(3 * sigma, 1) + ")");
    }
    const int df = static_cast<int>(k) - 1;
    c.require(chi2 < chi2_99.at(df),
              "grade " + std::to_string(grade) + ": chi-square " +
                  format_fixed(chi2, 2) + " >= 0.99 quantile " +
                  format_fixed(chi2_99.at(df), 2));
    cells += (cells.empty() ? "" : " ") + std::to_string(grade) + ":" +
             format_fixed(chi2, 1);
  }

  // Every draw of the two-per-grade composition fills all eight slots.
  const Composition comp8 = parse_composition("33221100", scale);
  std::size_t eight_draws = 0;
  auto assert_two_per_grade = [&](const ReferenceList& list) {
    c.require(list.size() == 8, "eight-slot draw produced " +
                                    std::to_string(list.size()) + " entries");
    std::map<int, int> per_grade;
    for (int g : list.grades()) ++per_grade[g];
    for (const auto& [g, n] : per_grade) {
      c.require(n == 2, "grade " + std::to_string(g) + " drawn " +
                            std::to_string(n) + " times, expected 2");
    }
    ++eight_draws;
  };
  for (int seed = 1; seed <= trials && c.ok; ++seed) {
    assert_two_per_grade(sample_reference_list(pool, comp8, seed));
  }
  const Dataset ds = synthesize_dataset(SyntheticSpec{});
  for (int seed = 1; seed <= 25 && c.ok; ++seed) {
    for (const GradedPool& p : pools(ds)) {
      assert_two_per_grade(sample_reference_list(p, comp8, seed));
    }
  }

  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "2000 draws uniform per grade (chi-square " + cells +
                        "); two-per-grade composition exact in " +
                        std::to_string(eight_draws) + " draws"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_byte_identical_reruns(const std::string& scratch) {
  Checker c;
  const std::string dir = scratch + "/rerun";
  std::filesystem::remove_all(dir);

  ExperimentConfig cfg;
  cfg.dataset.synthetic = true;
  cfg.regime = Regime::multi_grade;
  cfg.composition = "3210";
  cfg.seeds = {1, 2};
  cfg.parallelism = 4;
  cfg.cache_path = dir + "/cache.jsonl";
  cfg.output_dir = dir + "/out";
  cfg.backends = {json{{"kind", "oracle"}, {"id", "o"}}};
  auto add = [&](Method method, const char* label, const char* backend) {
    MethodSpec m;
    m.strategy.method = method;
    m.backend_id = backend;
    m.label = label;
    cfg.methods.push_back(m);
  };
  add(Method::listwise, "listwise", "o");
  add(Method::pointwise_ref, "pointwise", "o");
  add(Method::pairwise_refs, "pairwise_refs", "o");
  add(Method::pairwise_candidates, "pairwise_cands", "o");
  add(Method::rouge1, "rouge_1", "");

  const RunArtifact first = run_experiment(cfg);
  emit_report(first);
  const std::vector<std::string> files = report_files(cfg.output_dir, cfg.seeds);
  std::map<std::string, std::string> snapshot;
  for (const std::string& f : files) snapshot[f] = read_file(f);

  const RunArtifact second = run_experiment(cfg);
  emit_report(second);
  for (const std::string& f : files) {
    c.require(read_file(f) == snapshot[f],
              "file differs between runs: " + f);
  }
  c.require(first.backend_calls > 0, "first run made no backend calls");
  c.require(second.backend_calls == 0,
            "warm cache still hit the backend " +
                std::to_string(second.backend_calls) + " times");
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? std::to_string(files.size()) +
                        " report files byte-identical; backend calls " +
                        std::to_string(first.backend_calls) + " then 0"
                  : c.why;
  return r;
}

// ---------------------------------------------------------------------------

CheckResult check_trial_stability(const std::string& scratch) {
  Checker c;
  std::vector<double> trial_means;
  for (int trial = 0; trial < 3; ++trial) {
    ExperimentConfig cfg;
    cfg.dataset.synthetic = true;
    cfg.regime = Regime::multi_grade;
    cfg.composition = "3210";
    cfg.parallelism = 4;
    cfg.output_dir = scratch + "/trial" + std::to_string(trial);
    cfg.seeds.clear();
    for (std::uint64_t s = 1; s <= 10; ++s) {
      cfg.seeds.push_back(static_cast<std::uint64_t>(trial) * 100 + s);
    }
    cfg.backends = {
        json{{"kind", "oracle"}, {"id", "noisy"}, {"noise", 0.2}}};
    MethodSpec m;
    m.strategy.method = Method::listwise;
    m.backend_id = "noisy";
    m.label = "listwise";
    cfg.methods = {m};
    const RunArtifact art = run_experiment(cfg);
    const MethodSummary* row = nullptr;
    for (const MethodSummary& s : art.summary) {
      if (s.label == "listwise" && s.aggregation == "per_question") row = &s;
    }
    c.require(row && row->spearman_mean.has_value(),
              "trial " + std::to_string(trial) + ": no mean rho");
    if (row && row->spearman_mean) trial_means.push_back(*row->spearman_mean);
  }
  std::string listing;
  for (double m : trial_means) {
    listing += (listing.empty() ? "" : ", ") + format_fixed(m, 4);
  }
  const std::optional<double> spread = sample_std(trial_means);
  c.require(spread.has_value(), "trial std undefined");
  if (spread) {
    c.require(*spread < 0.05, "3-trial std of mean rho " +
                                  format_fixed(*spread, 4) + " >= 0.05");
  }
  CheckResult r;
  r.passed = c.ok;
  r.detail = c.ok ? "trial mean rho {" + listing + "}; 3-trial std " +
                        format_fixed(*spread, 4) + " < 0.05"
                  : c.why;
  return r;
}

struct CheckDef {
  const char* name;
  CheckResult (*fn)(const std::string&);
  double budget_seconds;  // 0 = no declared budget
};

constexpr CheckDef kChecks[] = {
    {"correlation_matches_brute_force", check_correlations, 10.0},
    {"similarity_fixture_values", check_similarity, 10.0},
    {"perfect_judge_perfect_agreement", check_perfect_judge, 30.0},
    {"listwise_beats_pointwise_under_noise", check_noise_ordering, 300.0},
    {"position_bias_cancellation", check_bias_cancellation, 0.0},
    {"single_reference_degeneration", check_degeneration, 0.0},
    {"reference_sampling_uniformity", check_sampling_uniformity, 0.0},
    {"byte_identical_reruns", check_byte_identical_reruns, 0.0},
    {"cross_trial_stability", check_trial_stability, 0.0},
};

}  // namespace

std::vector<CheckResult> run_acceptance_checks(std::ostream& out,
                                               const std::string& scratch_dir,
                                               const std::string& filter) {
  std::filesystem::create_directories(scratch_dir);
  std::vector<CheckResult> results;
  for (const CheckDef& def : kChecks) {
    if (!filter.empty() &&
        std::string(def.name).find(filter) == std::string::npos) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = def.fn(scratch_dir);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.name = def.name;
    r.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (def.budget_seconds > 0 && r.seconds > def.budget_seconds) {
      r.passed = false;
      r.detail += " [exceeded " + format_fixed(def.budget_seconds, 0) +
                  "s time budget]";
    }
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " ("
        << format_fixed(r.seconds, 2) << "s): " << r.detail << "\n";
    out.flush();
    results.push_back(std::move(r));
  }
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return !results.empty() &&
         std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.passed; });
}

}  // namespace nfqa
