#include <doctest.h>

#include <random>

#include "generators.hpp"
#include "srmp/oracle.hpp"
#include "srmp/scheduler.hpp"

using namespace srmp;
using testgen::UaiModel;

namespace {

std::vector<std::vector<NodeId>> scopes_of(const FactorGraph& g, const std::vector<FactorId>& ids)
{
  std::vector<std::vector<NodeId>> out;
  for (FactorId f : ids) out.push_back(g.factors[static_cast<std::size_t>(f)].scope);
  return out;
}

int position_of(const PassSchedule& s, const FactorGraph& g, const std::vector<NodeId>& scope)
{
  const FactorId f = g.find_factor(scope);
  REQUIRE(f >= 0);
  return s.order.rank[static_cast<std::size_t>(f)];
}

bool messages_close(const MessageSet& a, const MessageSet& b, double tol)
{
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t e = 0; e < a.values.size(); e++)
    for (std::size_t i = 0; i < a.values[e].size(); i++)
      if (std::abs(a.values[e][i] - b.values[e][i]) > tol) return false;
  return true;
}

SolverConfig fixed_run(int iterations)
{
  SolverConfig c;
  c.max_iterations = iterations;
  c.epsilon = -1;  // never stop early
  return c;
}

}  // namespace

TEST_CASE("factor order sorts by min node, then max node, then scope")
{
  std::mt19937 rng(2);
  UaiModel m = testgen::grid_instance(2, 2, 2, rng);
  FactorGraph g = testgen::blp_graph(m);
  FactorOrdering order = order_factors(g);

  // Full family in order: {0},{0,1},{0,2},{1},{1,3},{2},{2,3},{3}.
  std::vector<FactorId> all;
  for (FactorId f = 0; f < g.factor_count(); f++) all.push_back(f);
  std::sort(all.begin(), all.end(), [&](FactorId a, FactorId b) { return precedes(g, order, a, b); });
  CHECK(scopes_of(g, all) ==
        std::vector<std::vector<NodeId>>{{0}, {0, 1}, {0, 2}, {1}, {1, 3}, {2}, {2, 3}, {3}});

  // S keeps only the singletons, in node order.
  CHECK(scopes_of(g, order.sequence) == std::vector<std::vector<NodeId>>{{0}, {1}, {2}, {3}});
}

TEST_CASE("equal minima fall back to the maximum node, then the full scope")
{
  NodeSet nodes{{2, 2, 2, 2, 2, 2}};
  std::vector<Factor> factors = {{{1, 3}, std::vector<Cost>(4, 0.0)},
                                 {{1, 5}, std::vector<Cost>(4, 0.0)},
                                 {{1, 2, 5}, std::vector<Cost>(8, 0.0)},
                                 {{1, 4, 5}, std::vector<Cost>(8, 0.0)}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit);
  FactorOrdering order = order_factors(g);
  const FactorId f13 = g.find_factor({1, 3});
  const FactorId f15 = g.find_factor({1, 5});
  const FactorId f125 = g.find_factor({1, 2, 5});
  const FactorId f145 = g.find_factor({1, 4, 5});
  CHECK(precedes(g, order, f13, f15));    // same min, max 3 < 5
  CHECK(precedes(g, order, f125, f145));  // same min and max, middle 2 < 4
  CHECK_FALSE(precedes(g, order, f15, f13));
}

TEST_CASE("pass sets on a pairwise chain split by the other endpoint")
{
  std::mt19937 rng(4);
  UaiModel m = testgen::chain_instance(3, 2, rng);
  FactorGraph g = testgen::blp_graph(m);
  PassSchedule s = make_schedule(g, {}, WeightRule::SRMP);

  const int pos = position_of(s, g, {1});
  const auto& edges = s.in_all[static_cast<std::size_t>(pos)];
  REQUIRE(edges.size() == 2);
  for (std::size_t k = 0; k < edges.size(); k++) {
    const FactorId parent = g.edges[static_cast<std::size_t>(edges[k])].parent;
    const auto& scope = g.factors[static_cast<std::size_t>(parent)].scope;
    if (scope == std::vector<NodeId>{1, 2}) {
      CHECK(s.in_fw[static_cast<std::size_t>(pos)][k] == 1);
      CHECK(s.in_bw[static_cast<std::size_t>(pos)][k] == 0);
    } else {
      REQUIRE(scope == std::vector<NodeId>{0, 1});
      CHECK(s.in_fw[static_cast<std::size_t>(pos)][k] == 0);
      CHECK(s.in_bw[static_cast<std::size_t>(pos)][k] == 1);
    }
  }

  // The last node has no later access: its forward set is empty.
  const int last = position_of(s, g, {2});
  for (char b : s.in_fw[static_cast<std::size_t>(last)]) CHECK(b == 0);
  for (char b : s.in_bw[static_cast<std::size_t>(last)]) CHECK(b == 1);
}

TEST_CASE("pass sets on a ternary chain classify middle-layer factors")
{
  std::mt19937 rng(6);
  UaiModel m = testgen::ternary_chain_instance(5, 2, rng);
  FactorGraph g = testgen::maximal_graph(m);
  PassSchedule s = make_schedule(g, {}, WeightRule::SRMP);

  // Pair {1,2} receives from triples {0,1,2} (earlier other child {0,1})
  // and {1,2,3} (later other child {2,3}).
  const int pos = position_of(s, g, {1, 2});
  REQUIRE(pos >= 0);
  const auto& edges = s.in_all[static_cast<std::size_t>(pos)];
  REQUIRE(edges.size() == 2);
  for (std::size_t k = 0; k < edges.size(); k++) {
    const FactorId parent = g.edges[static_cast<std::size_t>(edges[k])].parent;
    const auto& scope = g.factors[static_cast<std::size_t>(parent)].scope;
    if (scope == std::vector<NodeId>{1, 2, 3}) {
      CHECK(s.in_fw[static_cast<std::size_t>(pos)][k] == 1);
      CHECK(s.in_bw[static_cast<std::size_t>(pos)][k] == 0);
    } else {
      REQUIRE(scope == std::vector<NodeId>{0, 1, 2});
      CHECK(s.in_fw[static_cast<std::size_t>(pos)][k] == 0);
      CHECK(s.in_bw[static_cast<std::size_t>(pos)][k] == 1);
    }
  }
  // One later child ({2}), one earlier ({1}).
  CHECK(s.out_fw_count[static_cast<std::size_t>(pos)] == 1);
  CHECK(s.out_bw_count[static_cast<std::size_t>(pos)] == 1);
  // lambda = 1/(1 + max(1, 1)) = 1/2 with residual 1/2.
  CHECK(s.lambda_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.5));
  CHECK(s.residual_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.5));
}

TEST_CASE("default weights match the hand-derived values")
{
  SUBCASE("grid interior: half weight, zero residual")
  {
    std::mt19937 rng(8);
    UaiModel m = testgen::grid_instance(3, 3, 2, rng);
    FactorGraph g = testgen::blp_graph(m);
    PassSchedule s = make_schedule(g, {}, WeightRule::SRMP);
    const int pos = position_of(s, g, {4});  // center of the 3x3 grid
    CHECK(s.in_all[static_cast<std::size_t>(pos)].size() == 4);
    CHECK(s.lambda_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.5));
    CHECK(s.residual_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.0));
    CHECK(s.lambda_bw[static_cast<std::size_t>(pos)] == doctest::Approx(0.5));
  }
  SUBCASE("chain interior: full weight, zero residual")
  {
    std::mt19937 rng(9);
    UaiModel m = testgen::chain_instance(5, 3, rng);
    FactorGraph g = testgen::blp_graph(m);
    PassSchedule s = make_schedule(g, {}, WeightRule::SRMP);
    const int pos = position_of(s, g, {2});
    CHECK(s.lambda_fw[static_cast<std::size_t>(pos)] == doctest::Approx(1.0));
    CHECK(s.residual_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.0));
  }
  SUBCASE("pair with one later child and two forward parents: one third")
  {
    NodeSet nodes{{2, 2, 2, 2, 2}};
    std::vector<Factor> factors;
    factors.push_back({{1, 2, 3}, std::vector<Cost>(8, 0.0)});
    factors.push_back({{1, 2, 4}, std::vector<Cost>(8, 0.0)});
    factors.push_back({{1, 2}, std::vector<Cost>(4, 0.0)});
    factors.push_back({{1}, {0, 0}});
    factors.push_back({{2}, {0, 0}});
    factors.push_back({{3}, {0, 0}});
    factors.push_back({{4}, {0, 0}});
    std::vector<std::pair<FactorId, FactorId>> edges = {{0, 2}, {0, 5}, {1, 2}, {1, 6}, {2, 3}, {2, 4}};
    FactorGraph g = build_graph(nodes, factors, EdgeMode::Explicit, edges);
    PassSchedule s = make_schedule(g, {}, WeightRule::SRMP);
    const int pos = position_of(s, g, {1, 2});
    CHECK(s.out_fw_count[static_cast<std::size_t>(pos)] == 1);
    CHECK(std::count(s.in_fw[static_cast<std::size_t>(pos)].begin(),
                     s.in_fw[static_cast<std::size_t>(pos)].end(), 1) == 2);
    CHECK(s.lambda_fw[static_cast<std::size_t>(pos)] == doctest::Approx(1.0 / 3.0));
    CHECK(s.residual_fw[static_cast<std::size_t>(pos)] == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("uniform weights use one over one plus the in-degree")
{
  std::mt19937 rng(10);
  SUBCASE("grid interior gets 1/5")
  {
    UaiModel m = testgen::grid_instance(3, 3, 2, rng);
    FactorGraph g = testgen::blp_graph(m);
    PassSchedule s = make_schedule(g, {}, WeightRule::CMP);
    const int pos = position_of(s, g, {4});
    CHECK(s.lambda_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.2));
    CHECK(s.residual_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.2));
  }
  SUBCASE("a single incoming edge gives the diffusion weights")
  {
    UaiModel m = testgen::chain_instance(2, 2, rng);
    FactorGraph g = testgen::blp_graph(m);
    PassSchedule s = make_schedule(g, {}, WeightRule::CMP);
    const int pos = position_of(s, g, {0});
    CHECK(s.lambda_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.5));
    CHECK(s.residual_fw[static_cast<std::size_t>(pos)] == doctest::Approx(0.5));
  }
}

TEST_CASE("every generated weight vector is a valid distribution")
{
  std::mt19937 rng(12);
  for (int trial = 0; trial < 15; trial++) {
    UaiModel m = testgen::mixed_instance(rng);
    FactorGraph g = testgen::maximal_graph(m);
    for (WeightRule rule : {WeightRule::SRMP, WeightRule::CMP, WeightRule::SRMPRemark2}) {
      PassSchedule s = make_schedule(g, {}, rule);
      for (int pos = 0; pos < s.size(); pos++) {
        for (Direction dir : {Direction::Forward, Direction::Backward}) {
          const WeightDistribution w = s.weight_distribution(pos, dir);
          CHECK_NOTHROW(w.validate(s.in_all[static_cast<std::size_t>(pos)].size()));
          CHECK(w.residual >= -1e-15);
        }
      }
    }
  }
}

TEST_CASE("srmp reaches the optimum of chains by the second iteration")
{
  std::mt19937 rng(14);
  for (int trial = 0; trial < 10; trial++) {
    UaiModel m = testgen::chain_instance(8, 3, rng);
    FactorGraph g = testgen::blp_graph(m);
    const MapResult best = brute_force_map(g);
    SolveResult r = run_srmp(g, fixed_run(4));
    CHECK(r.trace.iterations[1].phi == doctest::Approx(best.value).epsilon(1e-9));
    CHECK(r.trace.final_bound == doctest::Approx(best.value).epsilon(1e-9));
    CHECK(r.trace.best_energy == doctest::Approx(best.value).epsilon(1e-9));
  }
}

TEST_CASE("srmp bound is non-decreasing from the second pass")
{
  std::mt19937 rng(16);
  UaiModel m = testgen::grid_instance(4, 4, 3, rng);
  FactorGraph g = testgen::blp_graph(m);
  SolveResult r = run_srmp(g, fixed_run(20));
  for (std::size_t k = 2; k < r.trace.pass_bounds.size(); k++)
    CHECK(r.trace.pass_bounds[k] >= r.trace.pass_bounds[k - 1] - 1e-9);
}

TEST_CASE("srmp solves the two-node instance exactly")
{
  FactorGraph g = testgen::blp_graph(testgen::e1_instance());
  SolveResult r = run_srmp(g, fixed_run(6));
  CHECK(r.trace.final_bound == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.trace.best_energy == doctest::Approx(0.0));
  CHECK(r.trace.best_labeling == Labeling{0, 0});
}

TEST_CASE("cmp and mplp solve chains and keep zero instances at zero")
{
  std::mt19937 rng(18);
  UaiModel m = testgen::chain_instance(7, 3, rng);
  FactorGraph g = testgen::blp_graph(m);
  const MapResult best = brute_force_map(g);

  SolverConfig config;
  config.max_iterations = 300;
  config.epsilon = 1e-12;
  SolveResult cmp = run_cmp(g, config);
  CHECK(cmp.trace.final_bound == doctest::Approx(best.value).epsilon(1e-9));
  CHECK(cmp.trace.best_energy == doctest::Approx(best.value).epsilon(1e-9));
  for (std::size_t k = 1; k < cmp.trace.pass_bounds.size(); k++)
    CHECK(cmp.trace.pass_bounds[k] >= cmp.trace.pass_bounds[k - 1] - 1e-9);

  SolveResult mplp = run_mplp(g, config);
  CHECK(mplp.trace.final_bound == doctest::Approx(best.value).epsilon(1e-9));
  CHECK(mplp.trace.best_energy == doctest::Approx(best.value).epsilon(1e-9));
  for (std::size_t k = 1; k < mplp.trace.pass_bounds.size(); k++)
    CHECK(mplp.trace.pass_bounds[k] >= mplp.trace.pass_bounds[k - 1] - 1e-9);

  SUBCASE("zero instance stays at zero")
  {
    NodeSet nodes{{2, 2}};
    std::vector<Factor> factors = {{{0}, {0, 0}}, {{1}, {0, 0}}, {{0, 1}, std::vector<Cost>(4, 0.0)}};
    FactorGraph zg = build_graph(nodes, factors, EdgeMode::BLP);
    CHECK(run_cmp(zg, fixed_run(5)).trace.final_bound == 0.0);
    CHECK(run_mplp(zg, fixed_run(5)).trace.final_bound == 0.0);
  }
}

TEST_CASE("the pairwise alternative matches srmp at every pass boundary")
{
  std::mt19937 rng(20);
  UaiModel m = testgen::grid_instance(5, 5, 3, rng);
  FactorGraph g = testgen::blp_graph(m);
  SolveResult a = run_srmp(g, fixed_run(12));
  SolveResult b = run_srmp_alt_pairwise(g, fixed_run(12));
  REQUIRE(a.trace.pass_bounds.size() == b.trace.pass_bounds.size());
  for (std::size_t k = 0; k < a.trace.pass_bounds.size(); k++)
    CHECK(a.trace.pass_bounds[k] == doctest::Approx(b.trace.pass_bounds[k]).epsilon(1e-6));

  // The final reparameterizations agree as well.
  const Reparameterization ta = reparameterize(g, a.messages);
  const Reparameterization tb = reparameterize(g, b.messages);
  for (std::size_t f = 0; f < ta.tables.size(); f++)
    for (std::size_t i = 0; i < ta.tables[f].size(); i++)
      CHECK(ta.tables[f][i] == doctest::Approx(tb.tables[f][i]).epsilon(1e-6));
}

TEST_CASE("alternative messages on a chain converge after one iteration")
{
  std::mt19937 rng(22);
  UaiModel m = testgen::chain_instance(6, 3, rng);
  FactorGraph g = testgen::blp_graph(m);
  SolveResult one = run_srmp_alt_pairwise(g, fixed_run(1));
  SolveResult two = run_srmp_alt_pairwise(g, fixed_run(2));
  SolveResult three = run_srmp_alt_pairwise(g, fixed_run(3));
  CHECK(messages_close(one.messages, two.messages, 1e-9));
  CHECK(messages_close(two.messages, three.messages, 1e-9));
}

TEST_CASE("alternative implementation requires pairwise structure")
{
  std::mt19937 rng(24);
  UaiModel m = testgen::ternary_chain_instance(5, 2, rng);
  FactorGraph g = testgen::maximal_graph(m);
  CHECK_THROWS_AS(run_srmp_alt_pairwise(g, fixed_run(2)), std::invalid_argument);

  SUBCASE("zero pairwise instance keeps zero messages")
  {
    NodeSet nodes{{2, 2, 2}};
    std::vector<Factor> factors = {{{0}, {0, 0}},
                                   {{1}, {0, 0}},
                                   {{2}, {0, 0}},
                                   {{0, 1}, std::vector<Cost>(4, 0.0)},
                                   {{1, 2}, std::vector<Cost>(4, 0.0)}};
    FactorGraph zg = build_graph(nodes, factors, EdgeMode::BLP);
    SolveResult r = run_srmp_alt_pairwise(zg, fixed_run(3));
    for (const auto& msg : r.messages.values)
      for (Cost c : msg) CHECK(c == 0.0);
  }
}

TEST_CASE("extraction recovers exact optima on trees")
{
  std::mt19937 rng(26);
  for (int trial = 0; trial < 8; trial++) {
    UaiModel m = testgen::tree_instance(9, 4, rng);
    FactorGraph g = testgen::blp_graph(m);
    const MapResult best = brute_force_map(g);
    SolverConfig config;
    config.max_iterations = 100;
    config.epsilon = 1e-12;
    SolveResult r = run_srmp(g, config);
    CHECK(r.trace.final_bound == doctest::Approx(best.value).epsilon(1e-7));
    CHECK(r.trace.best_energy == doctest::Approx(best.value));
    CHECK(energy(g, r.trace.best_labeling) == doctest::Approx(r.trace.best_energy));
  }
}

TEST_CASE("a single unary factor extracts its argmin")
{
  NodeSet nodes{{3}};
  std::vector<Factor> factors = {{{0}, {5, 1, 7}}};
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);
  SolveResult r = run_srmp(g, fixed_run(3));
  CHECK(r.trace.best_labeling == Labeling{1});
  CHECK(r.trace.best_energy == 1.0);
  CHECK(r.trace.final_bound == doctest::Approx(1.0));
}

TEST_CASE("a frustrated cycle leaves a primal-dual gap")
{
  NodeSet nodes{{2, 2, 2}};
  std::vector<Factor> factors;
  for (NodeId v = 0; v < 3; v++) factors.push_back({{v}, {0, 0}});
  const std::vector<Cost> same_penalty = {1, 0, 0, 1};
  factors.push_back({{0, 1}, same_penalty});
  factors.push_back({{1, 2}, same_penalty});
  factors.push_back({{0, 2}, same_penalty});
  FactorGraph g = build_graph(nodes, factors, EdgeMode::BLP);

  SolveResult r = run_srmp(g, fixed_run(50));
  const MapResult best = brute_force_map(g);
  CHECK(best.value == 1.0);
  CHECK(r.trace.best_energy >= r.trace.final_bound - 1e-9);
  CHECK(r.trace.best_energy >= best.value);
  CHECK(r.trace.final_bound <= best.value + 1e-9);
}

TEST_CASE("per-pass normalization leaves the bound trace unchanged")
{
  std::mt19937 rng(28);
  UaiModel m = testgen::grid_instance(4, 4, 3, rng);
  FactorGraph g = testgen::blp_graph(m);
  SolverConfig plain = fixed_run(10);
  SolverConfig normalized = plain;
  normalized.normalize_each_pass = true;
  SolveResult a = run_srmp(g, plain);
  SolveResult b = run_srmp(g, normalized);
  REQUIRE(a.trace.pass_bounds.size() == b.trace.pass_bounds.size());
  for (std::size_t k = 0; k < a.trace.pass_bounds.size(); k++)
    CHECK(a.trace.pass_bounds[k] == doctest::Approx(b.trace.pass_bounds[k]).epsilon(1e-9));
}

TEST_CASE("collecting over the full incoming set changes nothing from pass 2")
{
  std::mt19937 rng(30);
  for (int trial = 0; trial < 4; trial++) {
    UaiModel m = (trial % 2 == 0) ? testgen::grid_instance(3, 3, 3, rng)
                                  : testgen::ternary_chain_instance(5, 2, rng);
    FactorGraph g = (trial % 2 == 0) ? testgen::blp_graph(m) : testgen::maximal_graph(m);

    auto snapshots = [&](bool full_in) {
      SolverConfig config = fixed_run(6);
      config.full_in_collection_from_pass2 = full_in;
      std::vector<MessageSet> snaps;
      int updates = 0;
      const int per_pass = make_schedule(g, {}, WeightRule::SRMP).size();
      UpdateHook hook = [&](const AmsdUpdateInfo& info) {
        if (per_pass > 0 && ++updates % per_pass == 0) snaps.push_back(*info.messages);
      };
      run_srmp(g, config, hook);
      return snaps;
    };

    const auto a = snapshots(false);
    const auto b = snapshots(true);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); k++) CHECK(messages_close(a[k], b[k], 1e-9));
  }
}

TEST_CASE("best energy never increases along the trace")
{
  std::mt19937 rng(32);
  UaiModel m = testgen::grid_instance(4, 4, 2, rng);
  FactorGraph g = testgen::blp_graph(m);
  SolverConfig config = fixed_run(15);
  config.primal_period = 1;
  SolveResult r = run_srmp(g, config);
  for (std::size_t k = 1; k < r.trace.iterations.size(); k++)
    CHECK(r.trace.iterations[k].best_energy <= r.trace.iterations[k - 1].best_energy + 1e-12);
  CHECK(r.trace.best_energy >= r.trace.final_bound - 1e-9);
}

TEST_CASE("remark-2 weighting runs and stays monotone after the first pass")
{
  std::mt19937 rng(34);
  UaiModel m = testgen::grid_instance(4, 4, 3, rng);
  FactorGraph g = testgen::blp_graph(m);
  SolverConfig config = fixed_run(10);
  config.remark2_weighting = true;
  SolveResult r = run_srmp(g, config);
  for (std::size_t k = 2; k < r.trace.pass_bounds.size(); k++)
    CHECK(r.trace.pass_bounds[k] >= r.trace.pass_bounds[k - 1] - 1e-9);
}
