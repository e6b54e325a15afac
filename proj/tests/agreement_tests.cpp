#include "nfqa/agreement.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "nfqa/util.hpp"

using namespace nfqa;

TEST_CASE("mean and sample std") {
  CHECK(mean({0.45, 0.47, 0.46}) == doctest::Approx(0.46));
  CHECK(sample_std({0.45, 0.47, 0.46}).value() ==
        doctest::Approx(0.01).epsilon(1e-9));
  CHECK_FALSE(sample_std({1.0}).has_value());
  CHECK(sample_std({2.0, 2.0}).value() == 0.0);
}

TEST_CASE("midranks average tied positions") {
  CHECK(midranks({10, 20, 20}) == std::vector<double>{1.0, 2.5, 2.5});
  CHECK(midranks({3, 1, 2}) == std::vector<double>{3.0, 1.0, 2.0});
  CHECK(midranks({5, 5, 5}) == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("pearson fixtures") {
  CHECK(pearson_r({0, 1, 2}, {1, 3, 5}).value() == 1.0);   // y = 2x + 1
  CHECK(pearson_r({0, 1, 2}, {0, -1, -2}).value() == -1.0);
  // Direct product-moment formula on these points gives exactly 1/2.
  CHECK(pearson_r({1, 2, 3}, {1, 3, 2}).value() == 0.5);
  CHECK_FALSE(pearson_r({1, 1, 1}, {1, 2, 3}).has_value());
  CHECK_FALSE(pearson_r({1}, {2}).has_value());
}

TEST_CASE("spearman fixtures") {
  CHECK(spearman_rho({10, 8, 6, 4}, {3, 2, 1, 0}).value() == 1.0);
  CHECK(spearman_rho({1, 2, 3, 4}, {4, 3, 2, 1}).value() == -1.0);
  // Ranks equal the values here, so rho equals the pearson fixture.
  CHECK(spearman_rho({1, 2, 3}, {1, 3, 2}).value() == 0.5);
  CHECK_FALSE(spearman_rho({2, 2, 2}, {1, 2, 3}).has_value());
}

TEST_CASE("kendall tau-b fixtures") {
  CHECK(kendall_tau_b({1, 2, 3}, {1, 2, 3}).value() == 1.0);
  // 2 concordant, 1 discordant of 3 pairs, no ties.
  CHECK(kendall_tau_b({3, 1, 2}, {3, 2, 1}).value() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_FALSE(kendall_tau_b({1, 1}, {1, 2}).has_value());
  CHECK(kendall_tau_b({1, 2, 3, 4}, {4, 3, 2, 1}).value() == -1.0);
}

TEST_CASE("correlations are symmetric and monotone invariant") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + rng.uniform(6);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(static_cast<double>(rng.uniform(20)));
      y.push_back(static_cast<double>(rng.uniform(20)));
    }
    const auto tau_xy = kendall_tau_b(x, y), tau_yx = kendall_tau_b(y, x);
    const auto rho_xy = spearman_rho(x, y), rho_yx = spearman_rho(y, x);
    const auto r_xy = pearson_r(x, y), r_yx = pearson_r(y, x);
    CHECK(tau_xy.has_value() == tau_yx.has_value());
    CHECK(rho_xy.has_value() == rho_yx.has_value());
    CHECK(r_xy.has_value() == r_yx.has_value());
    if (tau_xy) CHECK(*tau_xy == doctest::Approx(*tau_yx).epsilon(1e-12));
    if (rho_xy) CHECK(*rho_xy == doctest::Approx(*rho_yx).epsilon(1e-12));
    if (r_xy) CHECK(*r_xy == doctest::Approx(*r_yx).epsilon(1e-12));

    // Strictly increasing map of x: cube preserves order and ties.
    std::vector<double> mapped;
    for (double v : x) mapped.push_back(v * v * v + 2.0);
    const auto tau_m = kendall_tau_b(mapped, y);
    const auto rho_m = spearman_rho(mapped, y);
    if (tau_xy) CHECK(*tau_m == doctest::Approx(*tau_xy).epsilon(1e-12));
    if (rho_xy) CHECK(*rho_m == doctest::Approx(*rho_xy).epsilon(1e-12));
    // Pearson: affine positive maps only.
    std::vector<double> affine;
    for (double v : x) affine.push_back(3.0 * v + 1.0);
    if (r_xy) {
      CHECK(pearson_r(affine, y).value() ==
            doctest::Approx(*r_xy).epsilon(1e-12));
    }
  }
}

TEST_CASE("summarize_correlations splits used from skipped") {
  const auto s = summarize_correlations({1.0, std::nullopt, 0.5});
  CHECK(s.used == 2);
  CHECK(s.skipped == 1);
  CHECK(s.mean.value() == 0.75);
  const auto none = summarize_correlations({std::nullopt, std::nullopt});
  CHECK_FALSE(none.mean.has_value());
  CHECK(none.skipped == 2);
}

TEST_CASE("best hit follows the strict tie rule") {
  // Highest score picks answer 2, which holds the highest label.
  CHECK(best_hit({5, 9, 2}, {1, 3, 2}).value());
  // Score tie includes a non-maximal label: a miss.
  CHECK_FALSE(best_hit({9, 9, 2}, {3, 1, 2}).value());
  // Score tie where every tied answer is label-maximal: still a hit.
  CHECK(best_hit({9, 9, 2}, {3, 3, 2}).value());
  // All labels equal: excluded, any pick would be trivially right.
  CHECK_FALSE(best_hit({1, 2, 3}, {2, 2, 2}).has_value());
}

TEST_CASE("best-worst hit needs both extremes") {
  CHECK(best_worst_hit({9, 5, 1}, {3, 2, 1}).value());
  // Best right, worst wrong.
  CHECK_FALSE(best_worst_hit({9, 5, 1}, {3, 1, 2}).value());
  CHECK_FALSE(best_worst_hit({1, 2, 3}, {2, 2, 2}).has_value());
}

TEST_CASE("scores equal to labels always hit") {
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.uniform(6);
    std::vector<double> labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(static_cast<double>(rng.uniform(4)));
    }
    const auto hit = best_hit(labels, labels);
    const auto both = best_worst_hit(labels, labels);
    // Degenerate (all one label) questions are excluded, never misses.
    if (hit) CHECK(*hit);
    if (both) CHECK(*both);
  }
}

TEST_CASE("hit_rate counts present entries only") {
  std::size_t used = 0;
  const double rate = hit_rate({true, false, std::nullopt, true}, &used);
  CHECK(used == 3);
  CHECK(rate == doctest::Approx(2.0 / 3.0));
  CHECK(hit_rate({std::nullopt}, &used) == 0.0);
  CHECK(used == 0);
}
