#include "nfqa/util.hpp"

#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"

using namespace nfqa;

TEST_CASE("fnv1a64 is stable and order sensitive") {
  // Reference value of the empty string is the FNV offset basis.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
  CHECK(fnv1a64("ab") != fnv1a64("ba"));
  CHECK(fnv1a64("question-1") == fnv1a64("question-1"));
}

TEST_CASE("to_hex pads to 16 digits") {
  CHECK(to_hex(0) == "0000000000000000");
  CHECK(to_hex(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(to_hex(0xffffffffffffffffULL) == "ffffffffffffffff");
}

TEST_CASE("derive_seed separates labels and bases") {
  CHECK(derive_seed(1, "q1") == derive_seed(1, "q1"));
  CHECK(derive_seed(1, "q1") != derive_seed(1, "q2"));
  CHECK(derive_seed(1, "q1") != derive_seed(2, "q1"));
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng uniform stays in bounds and covers them") {
  Rng rng(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 400; ++i) {
    const std::uint64_t v = rng.uniform(5);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  CHECK(rng.uniform(1) == 0);
}

TEST_CASE("rng uniform_int covers inclusive range") {
  Rng rng(9);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 300; ++i) {
    const std::int64_t v = rng.uniform_int(-2, 2);
    CHECK(v >= -2);
    CHECK(v <= 2);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("rng uniform_real lies in [0,1)") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.uniform_real();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> items{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> copy = items;
  Rng a(5), b(5);
  a.shuffle(items);
  b.shuffle(copy);
  CHECK(items == copy);
  std::multiset<int> content(items.begin(), items.end());
  CHECK(content == std::multiset<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("sample_without_replacement draws distinct indices") {
  Rng rng(3);
  const auto picks = rng.sample_without_replacement(10, 4);
  CHECK(picks.size() == 4);
  std::set<std::size_t> distinct(picks.begin(), picks.end());
  CHECK(distinct.size() == 4);
  for (std::size_t p : picks) CHECK(p < 10);
  Rng again(3);
  CHECK(again.sample_without_replacement(10, 4) == picks);
}

TEST_CASE("string helpers") {
  CHECK(trim("  a b \t\n") == "a b");
  CHECK(trim("") == "");
  CHECK(trim(" \t ") == "");
  CHECK(split_ws("a  b\tc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_ws("   ") == std::vector<std::string>{});
  CHECK(starts_with("abcdef", "abc"));
  CHECK_FALSE(starts_with("ab", "abc"));
  CHECK(replace_all("a-b-c", "-", "+") == "a+b+c");
  CHECK(replace_all("aaa", "aa", "b") == "ba");
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 8,
               [&](std::size_t i) { hits[i].fetch_add(1); });
  for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("parallel_for propagates the first worker exception") {
  CHECK_THROWS_AS(
      parallel_for(16, 4,
                   [](std::size_t i) {
                     if (i == 7) throw std::runtime_error("boom");
                   }),
      std::runtime_error);
  // Sequential path (single worker) rethrows too.
  CHECK_THROWS_AS(
      parallel_for(4, 1,
                   [](std::size_t) { throw std::runtime_error("boom"); }),
      std::runtime_error);
}

TEST_CASE("format_fixed is locale free and sign stable") {
  CHECK(format_fixed(1.0) == "1.0000");
  CHECK(format_fixed(2.0 / 3.0) == "0.6667");
  CHECK(format_fixed(1.25, 2) == "1.25");
  CHECK(format_fixed(-0.00004) == "0.0000");  // no "-0.0000" artifact
  CHECK(format_fixed(-1.5, 1) == "-1.5");
}
