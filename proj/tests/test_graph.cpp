#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kgr/errors.hpp"
#include "kgr/graph.hpp"
#include "kgr/rng.hpp"

using namespace kgr;

TEST_CASE("single edge produces symmetric neighbor entries") {
  const std::vector<Triple> triples{{0, 0, 1}};
  const auto g = KnowledgeGraph::build(triples, 2, 1);

  REQUIRE(g.degree(0) == 1);
  REQUIRE(g.degree(1) == 1);
  CHECK(g.neighbors(0)[0] == NeighborEntry{1, 0, Direction::Out});
  CHECK(g.neighbors(1)[0] == NeighborEntry{0, 0, Direction::In});
}

TEST_CASE("duplicate triples are stored once") {
  const std::vector<Triple> triples{{0, 0, 1}, {0, 0, 1}};
  const auto g = KnowledgeGraph::build(triples, 2, 1);
  CHECK(g.triples().size() == 1);
  CHECK(g.degree(0) == 1);
}

TEST_CASE("chain degrees count both directions") {
  const std::vector<Triple> triples{{0, 0, 1}, {1, 0, 2}};
  const auto g = KnowledgeGraph::build(triples, 3, 1);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 2);
  CHECK(g.degree(2) == 1);
}

TEST_CASE("self-loops contribute two neighbor entries") {
  const std::vector<Triple> triples{{0, 0, 0}};
  const auto g = KnowledgeGraph::build(triples, 1, 1);
  CHECK(g.degree(0) == 2);
}

TEST_CASE("out-of-range ids are rejected with the offending triple") {
  const std::vector<Triple> triples{{0, 0, 1}, {0, 0, 9}};
  CHECK_THROWS_WITH_AS(KnowledgeGraph::build(triples, 2, 1), doctest::Contains("triple 1"), ValidationError);
  const std::vector<Triple> bad_rel{{0, 5, 1}};
  CHECK_THROWS_AS(KnowledgeGraph::build(bad_rel, 2, 1), ValidationError);
}

TEST_CASE("build is deterministic under input permutation") {
  std::vector<Triple> triples{{0, 0, 1}, {1, 1, 2}, {2, 0, 3}, {3, 1, 0}, {1, 0, 3}};
  const auto g1 = KnowledgeGraph::build(triples, 4, 2);
  std::reverse(triples.begin(), triples.end());
  const auto g2 = KnowledgeGraph::build(triples, 4, 2);

  REQUIRE(g1.triples() == g2.triples());
  for (EntityId i = 0; i < 4; ++i) {
    auto n1 = g1.neighbors(i);
    auto n2 = g2.neighbors(i);
    REQUIRE(n1.size() == n2.size());
    for (std::size_t k = 0; k < n1.size(); ++k) CHECK(n1[k] == n2[k]);
  }
}

TEST_CASE("degree sum is twice the deduplicated triple count") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + rng.next_int(10);
    std::vector<Triple> triples;
    for (int i = 0; i < 25; ++i) {
      triples.push_back({rng.next_int(n), rng.next_int(2), rng.next_int(n)});
    }
    const auto g = KnowledgeGraph::build(triples, n, 2);
    long long degree_sum = 0;
    for (EntityId i = 0; i < n; ++i) degree_sum += g.degree(i);
    CHECK(degree_sum == 2 * static_cast<long long>(g.triples().size()));
  }
}

TEST_CASE("norm coefficients follow the degree formula") {
  SUBCASE("single edge between degree-1 nodes") {
    const std::vector<Triple> triples{{0, 0, 1}};
    const auto g = KnowledgeGraph::build(triples, 2, 1);
    const auto norms = norm_coefficients(g);
    CHECK(norms.coeff[0][0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(norms.coeff[1][0] == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("chain endpoint against interior node") {
    const std::vector<Triple> triples{{0, 0, 1}, {1, 0, 2}};
    const auto g = KnowledgeGraph::build(triples, 3, 1);
    const auto norms = norm_coefficients(g);
    CHECK(norms.coeff[0][0] == doctest::Approx(std::sqrt(6.0)).epsilon(1e-15));
  }
  SUBCASE("isolated node has no entries and no singularities") {
    const std::vector<Triple> triples{{0, 0, 1}};
    const auto g = KnowledgeGraph::build(triples, 3, 1);
    const auto norms = norm_coefficients(g);
    CHECK(norms.coeff[2].empty());
    CHECK(g.degree(2) == 0);
  }
  SUBCASE("coefficients are positive and symmetric") {
    Rng rng(37);
    std::vector<Triple> triples;
    for (int i = 0; i < 15; ++i) triples.push_back({rng.next_int(6), rng.next_int(2), rng.next_int(6)});
    const auto g = KnowledgeGraph::build(triples, 6, 2);
    const auto norms = norm_coefficients(g);
    for (EntityId i = 0; i < 6; ++i) {
      auto entries = g.neighbors(i);
      for (std::size_t k = 0; k < entries.size(); ++k) {
        CHECK(norms.coeff[i][k] > 0.0);
        const double expected =
            std::sqrt((g.degree(i) + 1.0) * (g.degree(entries[k].neighbor) + 1.0));
        CHECK(norms.coeff[i][k] == expected);
      }
    }
  }
}

TEST_CASE("contains matches a linear scan") {
  const std::vector<Triple> triples{{0, 0, 1}, {1, 1, 2}, {2, 0, 0}};
  const auto g = KnowledgeGraph::build(triples, 3, 2);

  CHECK(g.contains({0, 0, 1}));
  CHECK_FALSE(g.contains({0, 1, 1}));  // same pair, different relation

  Rng rng(41);
  for (int probe = 0; probe < 1000; ++probe) {
    const Triple t{rng.next_int(3), rng.next_int(2), rng.next_int(3)};
    const bool scanned = std::find(g.triples().begin(), g.triples().end(), t) != g.triples().end();
    CHECK(g.contains(t) == scanned);
  }
}
