#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "kgr/errors.hpp"
#include "kgr/loss.hpp"
#include "kgr/rng.hpp"

using namespace kgr;

namespace {

double central_diff(const std::function<double()>& f, double& x, double step = 1e-7) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace

TEST_CASE("sampler stays inside the candidate space on a two-entity graph") {
  const std::vector<Triple> triples{{0, 0, 1}};
  const auto g = KnowledgeGraph::build(triples, 2, 1);

  // exhaustive candidate space: head corruption gives (0,r,1)/(1,r,1),
  // tail corruption gives (0,r,0)/(0,r,1); the positive itself is filtered
  const std::set<Triple> valid{{1, 0, 1}, {0, 0, 0}};
  Rng rng(97);
  for (int rep = 0; rep < 50; ++rep) {
    const auto negs = sample_negatives(g, g.triples(), 1, rng);
    REQUIRE(negs.size() == 1);
    CHECK(valid.count(negs[0].triple) == 1);
    CHECK(negs[0].source_index == 0);
  }
}

TEST_CASE("sampler emits exactly k negatives per positive") {
  const std::vector<Triple> triples{{0, 0, 1}, {1, 0, 2}, {2, 1, 3}};
  const auto g = KnowledgeGraph::build(triples, 5, 2);
  Rng rng(101);
  const auto negs = sample_negatives(g, g.triples(), 3, rng);
  CHECK(negs.size() == 9);
}

TEST_CASE("sampler is deterministic for a fixed seed") {
  const std::vector<Triple> triples{{0, 0, 1}, {1, 0, 2}, {2, 1, 3}, {3, 0, 4}};
  const auto g = KnowledgeGraph::build(triples, 6, 2);

  Rng rng1(103), rng2(103);
  const auto a = sample_negatives(g, g.triples(), 2, rng1);
  const auto b = sample_negatives(g, g.triples(), 2, rng2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].triple == b[i].triple);
    CHECK(a[i].corrupted_slot == b[i].corrupted_slot);
  }
}

TEST_CASE("sampler never returns a training triple when candidates exist") {
  Rng topo(107);
  std::vector<Triple> triples;
  for (int i = 0; i < 20; ++i) triples.push_back({topo.next_int(8), topo.next_int(2), topo.next_int(8)});
  const auto g = KnowledgeGraph::build(triples, 8, 2);

  Rng rng(109);
  SamplerStats stats;
  const auto negs = sample_negatives(g, g.triples(), 4, rng, &stats);
  CHECK(stats.exhausted == 0);
  for (const auto& n : negs) CHECK_FALSE(g.contains(n.triple));
}

TEST_CASE("sampler survives a saturated graph by emitting the last candidate") {
  // every possible (h, r, t) over two entities is a training triple
  const std::vector<Triple> triples{{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 1}};
  const auto g = KnowledgeGraph::build(triples, 2, 1);

  Rng rng(113);
  SamplerStats stats;
  const auto negs = sample_negatives(g, g.triples(), 1, rng, &stats);
  CHECK(negs.size() == 4);
  CHECK(stats.exhausted == 4);  // no candidate can escape the training set
}

TEST_CASE("relation_loss: perfect scores give (near) zero loss") {
  const std::vector<double> pos{1.0 - 1e-9};
  const std::vector<double> neg{1e-9};
  const auto lb = relation_loss(pos, neg, 1.0);
  CHECK(lb.total == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("relation_loss: 0.5 scores give 2 ln 2") {
  const std::vector<double> pos{0.5};
  const std::vector<double> neg{0.5};
  const auto lb = relation_loss(pos, neg, 1.0);
  CHECK(lb.relation_pos == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(lb.relation_neg == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(lb.total == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("relation_loss: lambda 0 removes the negative term") {
  const std::vector<double> pos{0.7};
  const std::vector<double> neg{0.9, 0.99};
  const auto lb = relation_loss(pos, neg, 0.0);
  CHECK(lb.total == lb.relation_pos);
  CHECK(lb.relation_neg > 0.0);  // still reported, just unweighted
}

TEST_CASE("relation_loss stays finite at clamped extremes") {
  const std::vector<double> pos{0.0, 1.0};
  const std::vector<double> neg{0.0, 1.0};
  const auto lb = relation_loss(pos, neg, 2.0);
  CHECK(std::isfinite(lb.relation_pos));
  CHECK(std::isfinite(lb.relation_neg));
  CHECK(std::isfinite(lb.total));
  CHECK(lb.relation_pos >= 0.0);
  CHECK(lb.relation_neg >= 0.0);
}

TEST_CASE("relation_loss is monotone in each score") {
  Rng rng(127);
  std::vector<double> pos(4), neg(4);
  for (double& v : pos) v = rng.next_real(0.1, 0.9);
  for (double& v : neg) v = rng.next_real(0.1, 0.9);
  const double base = relation_loss(pos, neg, 0.8).total;

  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto lowered = pos;
    lowered[i] -= 0.05;
    CHECK(relation_loss(lowered, neg, 0.8).total > base);
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    auto raised = neg;
    raised[i] += 0.05;
    CHECK(relation_loss(pos, raised, 0.8).total > base);
  }
}

TEST_CASE("relation_loss_backward matches finite differences at interior scores") {
  Rng rng(131);
  std::vector<double> pos(3), neg(5);
  for (double& v : pos) v = rng.next_real(0.05, 0.95);
  for (double& v : neg) v = rng.next_real(0.05, 0.95);
  const double lambda = 0.6;

  const auto grads = relation_loss_backward(pos, neg, lambda);
  const auto loss = [&] { return relation_loss(pos, neg, lambda).total; };
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double fd = central_diff(loss, pos[i]);
    CHECK(grads.pos[i] == doctest::Approx(fd).epsilon(1e-5));
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    const double fd = central_diff(loss, neg[i]);
    CHECK(grads.neg[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("entity_loss: perfect, uniform and empty cases") {
  Matrix perfect(2, 3);
  perfect(0, 1) = 1.0;
  perfect(1, 2) = 1.0;
  const std::vector<int> labels{1, 2};
  CHECK(entity_loss(perfect, labels).value == doctest::Approx(0.0).epsilon(1e-9));

  Matrix uniform(2, 4);
  uniform.fill(0.25);
  const std::vector<int> labels4{0, 3};
  const auto lu = entity_loss(uniform, labels4);
  CHECK(lu.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(lu.num_labeled == 2);

  const std::vector<int> unlabeled{-1, -1};
  const auto le = entity_loss(uniform, unlabeled);
  CHECK(le.value == 0.0);
  CHECK_FALSE(le.active);
}

TEST_CASE("entity_loss rejects out-of-range labels") {
  Matrix probs(1, 2);
  probs.fill(0.5);
  const std::vector<int> labels{5};
  CHECK_THROWS_AS(entity_loss(probs, labels), ValidationError);
}

TEST_CASE("entity_loss_backward matches finite differences") {
  Rng rng(137);
  Matrix probs(3, 4);
  for (double& v : probs.values()) v = rng.next_real(0.05, 0.95);
  const std::vector<int> labels{2, -1, 0};

  const Matrix grads = entity_loss_backward(probs, labels);
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 4; ++c) {
      const auto loss = [&] { return entity_loss(probs, labels).value; };
      const double fd = central_diff(loss, probs(i, c));
      CHECK(grads(i, c) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}
