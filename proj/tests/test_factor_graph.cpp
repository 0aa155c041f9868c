#include <doctest.h>

#include <algorithm>
#include <random>

#include "generators.hpp"
#include "srmp/factor_graph.hpp"
#include "srmp/oracle.hpp"

using namespace srmp;
using testgen::UaiModel;

namespace {

bool has_edge(const FactorGraph& g, const std::vector<NodeId>& parent,
              const std::vector<NodeId>& child)
{
  const FactorId p = g.find_factor(parent);
  const FactorId c = g.find_factor(child);
  if (p < 0 || c < 0) return false;
  for (const Edge& e : g.edges)
    if (e.parent == p && e.child == c) return true;
  return false;
}

}  // namespace

TEST_CASE("blp mode connects non-unary factors to their singletons")
{
  NodeSet nodes{{2, 2}};
  std::vector<Factor> factors = {{{0}, {0, 1}}, {{1}, {0, 0}}, {{0, 1}, {0, 1, 2, 3}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  CHECK(g.edge_count() == 2);
  CHECK(has_edge(g, {0, 1}, {0}));
  CHECK(has_edge(g, {0, 1}, {1}));
}

TEST_CASE("blp mode creates missing zero-cost singletons")
{
  NodeSet nodes{{2, 3}};
  std::vector<Factor> factors = {{{0, 1}, std::vector<Cost>(6, 1.0)}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  REQUIRE(g.factor_count() == 3);
  const FactorId s1 = g.find_factor({1});
  REQUIRE(s1 >= 0);
  CHECK(g.factors[static_cast<std::size_t>(s1)].costs == std::vector<Cost>{0, 0, 0});
  CHECK(g.edge_count() == 2);
}

TEST_CASE("blp mode on a single unary factor yields no edges")
{
  NodeSet nodes{{3}};
  std::vector<Factor> factors = {{{0}, {1, 2, 3}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  CHECK(g.edge_count() == 0);
}

TEST_CASE("maximal nesting skips pairs with an intermediate factor")
{
  NodeSet nodes{{2, 2, 2}};
  std::vector<Factor> factors = {
      {{0, 1, 2}, std::vector<Cost>(8, 0.0)}, {{0, 1}, std::vector<Cost>(4, 0.0)}, {{0}, {0, 0}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::MaximalNesting);
  CHECK(has_edge(g, {0, 1, 2}, {0, 1}));
  CHECK(has_edge(g, {0, 1}, {0}));
  CHECK_FALSE(has_edge(g, {0, 1, 2}, {0}));
  CHECK(g.edge_count() == 2);
}

TEST_CASE("construction rejects invalid input")
{
  NodeSet nodes{{2, 2}};
  SUBCASE("duplicate scopes")
  {
    std::vector<Factor> factors = {{{0}, {0, 1}}, {{0}, {1, 0}}};
    CHECK_THROWS_AS(build_graph(nodes, factors, EdgeMode::BLP), std::invalid_argument);
  }
  SUBCASE("explicit edge without strict inclusion")
  {
    std::vector<Factor> factors = {{{0}, {0, 1}}, {{1}, {0, 1}}};
    CHECK_THROWS_AS(build_graph(nodes, factors, EdgeMode::Explicit, {{0, 1}}),
                    std::invalid_argument);
  }
  SUBCASE("wrong table size")
  {
    std::vector<Factor> factors = {{{0, 1}, {0, 1, 2}}};
    CHECK_THROWS_AS(build_graph(nodes, factors, EdgeMode::BLP), std::invalid_argument);
  }
  SUBCASE("decreasing scope")
  {
    std::vector<Factor> factors = {{{1, 0}, {0, 1, 2, 3}}};
    CHECK_THROWS_AS(build_graph(nodes, factors, EdgeMode::BLP), std::invalid_argument);
  }
}

TEST_CASE("close_under_intersections adds the overlap with a zero table")
{
  NodeSet nodes{{2, 2, 2, 2}};
  std::vector<Factor> factors = {{{0, 1, 2}, std::vector<Cost>(8, 1.0)},
                                 {{1, 2, 3}, std::vector<Cost>(8, 2.0)}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit);
  FactorGraph closed = close_under_intersections(g);
  REQUIRE(closed.factor_count() == 3);
  const FactorId pair = closed.find_factor({1, 2});
  REQUIRE(pair >= 0);
  CHECK(closed.factors[static_cast<std::size_t>(pair)].costs == std::vector<Cost>(4, 0.0));

  FactorGraph twice = close_under_intersections(closed);
  CHECK(twice.factor_count() == closed.factor_count());
}

TEST_CASE("close_under_intersections leaves disjoint families unchanged")
{
  NodeSet nodes{{2, 2, 2, 2}};
  std::vector<Factor> factors = {{{0, 1}, std::vector<Cost>(4, 0.0)},
                                 {{2, 3}, std::vector<Cost>(4, 0.0)}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit);
  CHECK(close_under_intersections(g).factor_count() == 2);
}

TEST_CASE("absorb removes a single-child factor and preserves the optimum")
{
  NodeSet nodes{{2, 2}};
  std::vector<Factor> factors = {{{0}, {1, 4}}, {{0, 1}, {0, 5, 3, 4}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit, {{1, 0}});
  const MapResult before = brute_force_map(g);

  FactorGraph absorbed = absorb_single_child_factors(g);
  CHECK(absorbed.find_factor({0, 1}) == -1);
  REQUIRE(absorbed.find_factor({0}) >= 0);
  // Unary gains the row minima (0, 3).
  const auto& costs = absorbed.factors[static_cast<std::size_t>(absorbed.find_factor({0}))].costs;
  CHECK(costs == std::vector<Cost>{1, 7});

  CHECK(brute_force_map(absorbed).value == doctest::Approx(before.value));
}

TEST_CASE("absorb is a no-op when out-degrees are 0 or 2+")
{
  UaiModel m = testgen::e1_instance();
  FactorGraph g = build_graph(m.nodes, m.factors, EdgeMode::BLP);
  FactorGraph absorbed = absorb_single_child_factors(g);
  CHECK(absorbed.factor_count() == g.factor_count());
  CHECK(absorbed.edge_count() == g.edge_count());
}

TEST_CASE("absorb cascades to a fixpoint and keeps the optimum")
{
  std::mt19937 rng(21);
  NodeSet nodes{{2, 2, 2}};
  std::vector<Factor> factors = {
      {{0}, testgen::random_table(rng, 2)},
      {{0, 1}, testgen::random_table(rng, 4)},
      {{0, 1, 2}, testgen::random_table(rng, 8)},
  };
  // Ternary -> pair -> singleton; absorbing the ternary frees the pair.
  FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit, {{2, 1}, {1, 0}});
  const MapResult before = brute_force_map(g);
  FactorGraph absorbed = absorb_single_child_factors(g);
  CHECK(absorbed.factor_count() == 1);
  for (FactorId f = 0; f < absorbed.factor_count(); f++)
    CHECK(absorbed.outgoing(f).size() != 1);
  CHECK(brute_force_map(absorbed).value == doctest::Approx(before.value));
}

TEST_CASE("absorb rejects a single-child factor that keeps incoming edges")
{
  NodeSet nodes{{2, 2, 2}};
  std::vector<Factor> factors = {
      {{0}, {0, 0}},
      {{1}, {0, 0}},
      {{0, 1}, std::vector<Cost>(4, 1.0)},
      {{0, 1, 2}, std::vector<Cost>(8, 1.0)},
  };
  // The pair has one child but also a parent with two children, so the
  // parent is never absorbable and the pair stays blocked.
  FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit, {{3, 2}, {3, 1}, {2, 0}});
  CHECK_THROWS_AS(absorb_single_child_factors(g), std::invalid_argument);
}

TEST_CASE("energy sums factor tables")
{
  UaiModel m = testgen::e1_instance();
  FactorGraph g = build_graph(m.nodes, m.factors, EdgeMode::BLP);
  SUBCASE("zero tables give zero energy")
  {
    NodeSet nodes{{2, 2}};
    std::vector<Factor> factors = {{{0, 1}, std::vector<Cost>(4, 0.0)}};
    FactorGraph zg = build_graph(nodes, factors, EdgeMode::BLP);
    CHECK(energy(zg, {1, 0}) == 0.0);
  }
  CHECK(energy(g, {1, 0}) == 5.0);
  CHECK(energy(g, {0, 0}) == 0.0);
  CHECK(brute_force_map(g).value == 0.0);
  CHECK_THROWS_AS(energy(g, {2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(energy(g, Labeling{0}), std::invalid_argument);
}

TEST_CASE("edges always point from larger to strictly smaller scopes")
{
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; trial++) {
    UaiModel m = testgen::mixed_instance(rng);
    FactorGraph g = testgen::maximal_graph(m);
    for (const Edge& e : g.edges) {
      const auto& ps = g.factors[static_cast<std::size_t>(e.parent)].scope;
      const auto& cs = g.factors[static_cast<std::size_t>(e.child)].scope;
      CHECK(cs.size() < ps.size());
      CHECK(std::includes(ps.begin(), ps.end(), cs.begin(), cs.end()));
    }
    for (FactorId f = 0; f < g.factor_count(); f++) CHECK(g.outgoing(f).size() != 1);
  }
}

TEST_CASE("assignment iterator matches stride indexing")
{
  NodeSet nodes{{2, 3, 2}};
  std::vector<NodeId> scope = {0, 1, 2};
  const auto strides = scope_strides(scope, nodes);
  CHECK(strides == std::vector<std::size_t>{6, 2, 1});
  std::size_t count = 0;
  for (AssignmentIterator it(scope, nodes); it.valid(); it.advance()) {
    CHECK(it.index() == flat_index(it.digits(), strides));
    count++;
  }
  CHECK(count == 12);
}
