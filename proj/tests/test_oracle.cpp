#include <doctest.h>

#include <random>

#include "generators.hpp"
#include "srmp/oracle.hpp"

using namespace srmp;
using testgen::UaiModel;

TEST_CASE("brute force map on the two-node instance")
{
  FactorGraph g = testgen::blp_graph(testgen::e1_instance());
  const MapResult r = brute_force_map(g);
  CHECK(r.value == 0.0);
  CHECK(r.argmin == Labeling{0, 0});
}

TEST_CASE("brute force map on a zero instance returns the first labeling")
{
  NodeSet nodes{{2, 2, 2}};
  std::vector<Factor> factors = {{{0, 1, 2}, std::vector<Cost>(8, 0.0)}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  const MapResult r = brute_force_map(g);
  CHECK(r.value == 0.0);
  CHECK(r.argmin == Labeling{0, 0, 0});
}

TEST_CASE("brute force map respects hard constraints")
{
  NodeSet nodes{{2, 2}};
  // Forbid equal labels; unaries prefer (0,0).
  std::vector<Factor> factors = {
      {{0}, {0, 5}}, {{1}, {0, 5}}, {{0, 1}, {kInfiniteCost, 0, 0, kInfiniteCost}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  const MapResult r = brute_force_map(g);
  CHECK(r.value == 5.0);
  CHECK(r.argmin == Labeling{0, 1});
}

TEST_CASE("brute force map refuses an oversized labeling space")
{
  NodeSet nodes{{16, 16, 16, 16, 16, 16}};
  std::vector<Factor> factors = {{{0}, std::vector<Cost>(16, 0.0)}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  CHECK_THROWS_AS(brute_force_map(g, EnumerationBudget{1 << 20}), std::invalid_argument);
}

TEST_CASE("brute force min-marginal on known tables")
{
  SUBCASE("pair rows") { CHECK(brute_force_min_marginal({0, 3, 3, 0}, {2, 2}, {0}) == std::vector<Cost>{0, 0}); }
  SUBCASE("constant") { CHECK(brute_force_min_marginal(std::vector<Cost>(8, 2.0), {2, 2, 2}, {1}) == std::vector<Cost>{2, 2}); }
  SUBCASE("ternary onto a pair")
  {
    // Table over three binary nodes, keep the first two positions.
    std::vector<Cost> t = {5, 1, 7, 2, 9, 0, 4, 3};
    CHECK(brute_force_min_marginal(t, {2, 2, 2}, {0, 1}) == std::vector<Cost>{1, 2, 0, 3});
  }
}

TEST_CASE("bound certificate accepts honest states and flags corrupted ones")
{
  std::mt19937 rng(5);
  UaiModel m = testgen::chain_instance(5, 3, rng);
  FactorGraph g = testgen::blp_graph(m);

  Reparameterization theta = reparameterize(g, MessageSet::zeros(g));
  CHECK(verify_bound_certificate(g, theta, 100, 1).pass);

  SUBCASE("raising a whole table lifts the bound above reachable energies")
  {
    Reparameterization bad = theta;
    for (Cost& c : bad.tables[0]) c += 50.0;
    const CertificateReport r = verify_bound_certificate(g, bad, 200, 1);
    CHECK_FALSE(r.pass);
    CHECK(r.worst_margin < 0);
  }
  SUBCASE("zero instance has exactly zero margin")
  {
    NodeSet nodes{{2, 2}};
    std::vector<Factor> factors = {{{0, 1}, std::vector<Cost>(4, 0.0)}};
    FactorGraph zg = build_graph(nodes, factors, EdgeMode::BLP);
    Reparameterization zt = reparameterize(zg, MessageSet::zeros(zg));
    const CertificateReport r = verify_bound_certificate(zg, zt, 50, 2);
    CHECK(r.pass);
    CHECK(r.worst_margin == 0.0);
  }
}

TEST_CASE("brute force map tie-break is the lowest labeling index")
{
  NodeSet nodes{{2, 2}};
  // Two optima: (0,1) and (1,0); the smaller flat index wins.
  std::vector<Factor> factors = {{{0, 1}, {1, 0, 0, 1}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  const MapResult r = brute_force_map(g);
  CHECK(r.value == 0.0);
  CHECK(r.argmin == Labeling{0, 1});
}
