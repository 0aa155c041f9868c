#include "srmp/factor_graph.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>
#include <stdexcept>

namespace srmp {

void NodeSet::validate() const
{
  for (std::size_t v = 0; v < cardinalities.size(); v++) {
    if (cardinalities[v] < 1)
      throw std::invalid_argument("node " + std::to_string(v) + " has cardinality < 1");
  }
}

std::size_t table_size_for(const std::vector<NodeId>& scope, const NodeSet& nodes)
{
  std::size_t size = 1;
  for (NodeId v : scope) size *= static_cast<std::size_t>(nodes.labels(v));
  return size;
}

std::vector<std::size_t> scope_strides(const std::vector<NodeId>& scope, const NodeSet& nodes)
{
  std::vector<std::size_t> strides(scope.size());
  std::size_t s = 1;
  for (int i = static_cast<int>(scope.size()) - 1; i >= 0; i--) {
    strides[static_cast<std::size_t>(i)] = s;
    s *= static_cast<std::size_t>(nodes.labels(scope[static_cast<std::size_t>(i)]));
  }
  return strides;
}

std::size_t flat_index(const std::vector<int>& digits, const std::vector<std::size_t>& strides)
{
  assert(digits.size() == strides.size());
  std::size_t idx = 0;
  for (std::size_t i = 0; i < digits.size(); i++) idx += static_cast<std::size_t>(digits[i]) * strides[i];
  return idx;
}

AssignmentIterator::AssignmentIterator(const std::vector<NodeId>& scope, const NodeSet& nodes)
    : radix_(scope.size()), digits_(scope.size(), 0)
{
  for (std::size_t i = 0; i < scope.size(); i++) radix_[i] = nodes.labels(scope[i]);
}

void AssignmentIterator::advance()
{
  index_++;
  for (int i = static_cast<int>(digits_.size()) - 1; i >= 0; i--) {
    std::size_t p = static_cast<std::size_t>(i);
    if (++digits_[p] < radix_[p]) return;
    digits_[p] = 0;
  }
  valid_ = false;
}

namespace {

bool strictly_increasing(const std::vector<NodeId>& scope)
{
  for (std::size_t i = 1; i < scope.size(); i++)
    if (scope[i] <= scope[i - 1]) return false;
  return !scope.empty();
}

// True iff sub is a strict subset of super (both strictly increasing).
bool strict_subscope(const std::vector<NodeId>& sub, const std::vector<NodeId>& super)
{
  if (sub.size() >= super.size()) return false;
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

std::vector<NodeId> scope_intersection(const std::vector<NodeId>& a, const std::vector<NodeId>& b)
{
  std::vector<NodeId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Projection map parent flat index -> child flat index for a nested pair.
std::vector<int32_t> build_child_index(const Factor& parent, const Factor& child, const NodeSet& nodes)
{
  std::vector<std::size_t> child_pos;  // positions of child's nodes inside parent scope
  for (NodeId v : child.scope) {
    auto it = std::lower_bound(parent.scope.begin(), parent.scope.end(), v);
    assert(it != parent.scope.end() && *it == v);
    child_pos.push_back(static_cast<std::size_t>(it - parent.scope.begin()));
  }
  const auto child_strides = scope_strides(child.scope, nodes);

  std::vector<int32_t> map(table_size_for(parent.scope, nodes));
  for (AssignmentIterator it(parent.scope, nodes); it.valid(); it.advance()) {
    std::size_t ci = 0;
    for (std::size_t j = 0; j < child_pos.size(); j++)
      ci += static_cast<std::size_t>(it.digits()[child_pos[j]]) * child_strides[j];
    map[it.index()] = static_cast<int32_t>(ci);
  }
  return map;
}

}  // namespace

void FactorGraph::finalize()
{
  nodes.validate();

  std::set<std::vector<NodeId>> seen;
  for (const Factor& f : factors) {
    if (!strictly_increasing(f.scope))
      throw std::invalid_argument("factor scope must be non-empty and strictly increasing");
    for (NodeId v : f.scope) {
      if (v < 0 || v >= nodes.count())
        throw std::invalid_argument("factor scope references unknown node " + std::to_string(v));
    }
    if (!seen.insert(f.scope).second)
      throw std::invalid_argument("duplicate factor scope");
    if (f.costs.size() != table_size_for(f.scope, nodes))
      throw std::invalid_argument("cost table size does not match scope cardinalities");
    for (Cost c : f.costs) {
      if (std::isnan(c) || c == -kInfiniteCost)
        throw std::invalid_argument("cost tables may not contain NaN or -inf");
    }
  }

  in_edges.assign(factors.size(), {});
  out_edges.assign(factors.size(), {});
  for (EdgeId e = 0; e < edge_count(); e++) {
    Edge& edge = edges[static_cast<std::size_t>(e)];
    if (edge.parent < 0 || edge.parent >= factor_count() || edge.child < 0 || edge.child >= factor_count())
      throw std::invalid_argument("edge references unknown factor");
    const Factor& p = factors[static_cast<std::size_t>(edge.parent)];
    const Factor& c = factors[static_cast<std::size_t>(edge.child)];
    if (!strict_subscope(c.scope, p.scope))
      throw std::invalid_argument("edge child scope must be strictly contained in parent scope");
    edge.child_index = build_child_index(p, c, nodes);
    out_edges[static_cast<std::size_t>(edge.parent)].push_back(e);
    in_edges[static_cast<std::size_t>(edge.child)].push_back(e);
  }
}

FactorId FactorGraph::find_factor(const std::vector<NodeId>& scope) const
{
  for (FactorId f = 0; f < factor_count(); f++)
    if (factors[static_cast<std::size_t>(f)].scope == scope) return f;
  return -1;
}

FactorGraph build_graph(NodeSet nodes, std::vector<Factor> factors, EdgeMode mode,
                        const std::vector<std::pair<FactorId, FactorId>>& explicit_edges)
{
  FactorGraph g;
  g.nodes = std::move(nodes);
  g.factors = std::move(factors);

  auto add_edge = [&g](FactorId parent, FactorId child) {
    g.edges.push_back(Edge{parent, child, {}});
  };

  switch (mode) {
    case EdgeMode::BLP: {
      // Locate (or create) the singleton factor of each node used by some
      // non-unary factor.
      std::map<NodeId, FactorId> singleton;
      for (FactorId f = 0; f < g.factor_count(); f++) {
        const Factor& fac = g.factors[static_cast<std::size_t>(f)];
        if (fac.arity() == 1) singleton[fac.scope[0]] = f;
      }
      std::set<NodeId> needed;
      for (const Factor& fac : g.factors)
        if (fac.arity() >= 2)
          for (NodeId v : fac.scope) needed.insert(v);
      for (NodeId v : needed) {
        if (singleton.count(v)) continue;
        Factor unary;
        unary.scope = {v};
        unary.costs.assign(static_cast<std::size_t>(g.nodes.labels(v)), 0.0);
        singleton[v] = g.factor_count();
        g.factors.push_back(std::move(unary));
      }
      for (FactorId f = 0; f < g.factor_count(); f++) {
        const Factor& fac = g.factors[static_cast<std::size_t>(f)];
        if (fac.arity() < 2) continue;
        for (NodeId v : fac.scope) add_edge(f, singleton.at(v));
      }
      break;
    }
    case EdgeMode::MaximalNesting: {
      for (FactorId a = 0; a < g.factor_count(); a++) {
        for (FactorId b = 0; b < g.factor_count(); b++) {
          if (a == b) continue;
          const auto& sa = g.factors[static_cast<std::size_t>(a)].scope;
          const auto& sb = g.factors[static_cast<std::size_t>(b)].scope;
          if (!strict_subscope(sb, sa)) continue;
          bool intermediate = false;
          for (FactorId c = 0; c < g.factor_count() && !intermediate; c++) {
            if (c == a || c == b) continue;
            const auto& sc = g.factors[static_cast<std::size_t>(c)].scope;
            if (strict_subscope(sb, sc) && strict_subscope(sc, sa)) intermediate = true;
          }
          if (!intermediate) add_edge(a, b);
        }
      }
      break;
    }
    case EdgeMode::Explicit: {
      std::set<std::pair<FactorId, FactorId>> seen;
      for (const auto& [parent, child] : explicit_edges) {
        if (!seen.insert({parent, child}).second)
          throw std::invalid_argument("duplicate explicit edge");
        add_edge(parent, child);
      }
      break;
    }
  }

  g.finalize();
  return g;
}

FactorGraph close_under_intersections(const FactorGraph& graph)
{
  FactorGraph g = graph;

  std::set<std::vector<NodeId>> scopes;
  for (const Factor& f : g.factors) scopes.insert(f.scope);

  // Pairwise closure iterated to a fixpoint closes under all intersections.
  bool changed = true;
  while (changed) {
    changed = false;
    const int n = g.factor_count();
    for (int a = 0; a < n && !changed; a++) {
      for (int b = a + 1; b < n && !changed; b++) {
        auto inter = scope_intersection(g.factors[static_cast<std::size_t>(a)].scope,
                                        g.factors[static_cast<std::size_t>(b)].scope);
        if (inter.empty() || scopes.count(inter)) continue;
        Factor f;
        f.scope = inter;
        f.costs.assign(table_size_for(inter, g.nodes), 0.0);
        g.factors.push_back(std::move(f));
        scopes.insert(inter);
        changed = true;
      }
    }
  }

  g.finalize();
  return g;
}

FactorGraph absorb_single_child_factors(const FactorGraph& graph)
{
  // Work on a mutable copy of factors plus a live edge list; rebuild at the end.
  std::vector<Factor> factors = graph.factors;
  std::vector<char> removed(factors.size(), 0);
  std::vector<std::pair<FactorId, FactorId>> live_edges;
  for (const Edge& e : graph.edges) live_edges.emplace_back(e.parent, e.child);

  auto out_degree = [&](FactorId f) {
    int d = 0;
    for (const auto& [p, c] : live_edges)
      if (p == f) d++;
    return d;
  };
  auto in_degree = [&](FactorId f) {
    int d = 0;
    for (const auto& [p, c] : live_edges)
      if (c == f) d++;
    return d;
  };

  NodeSet nodes = graph.nodes;
  for (;;) {
    FactorId candidate = -1;
    bool blocked = false;
    for (FactorId f = 0; f < static_cast<FactorId>(factors.size()); f++) {
      if (removed[static_cast<std::size_t>(f)]) continue;
      if (out_degree(f) != 1) continue;
      if (in_degree(f) == 0) {
        candidate = f;
        break;
      }
      blocked = true;
    }
    if (candidate < 0) {
      if (blocked)
        throw std::invalid_argument(
            "factor with a single child and incoming edges: absorption order is ambiguous");
      break;
    }

    FactorId child = -1;
    for (const auto& [p, c] : live_edges)
      if (p == candidate) child = c;
    assert(child >= 0);

    // Push min_{x_alpha ~ x_beta} theta(x_alpha) into the child table.
    const Factor& alpha = factors[static_cast<std::size_t>(candidate)];
    Factor& beta = factors[static_cast<std::size_t>(child)];
    {
      std::vector<std::size_t> child_pos;
      for (NodeId v : beta.scope) {
        auto it = std::lower_bound(alpha.scope.begin(), alpha.scope.end(), v);
        child_pos.push_back(static_cast<std::size_t>(it - alpha.scope.begin()));
      }
      const auto child_strides = scope_strides(beta.scope, nodes);
      std::vector<Cost> mins(beta.costs.size(), kInfiniteCost);
      for (AssignmentIterator it(alpha.scope, nodes); it.valid(); it.advance()) {
        std::size_t ci = 0;
        for (std::size_t j = 0; j < child_pos.size(); j++)
          ci += static_cast<std::size_t>(it.digits()[child_pos[j]]) * child_strides[j];
        mins[ci] = std::min(mins[ci], alpha.costs[it.index()]);
      }
      for (std::size_t i = 0; i < beta.costs.size(); i++) beta.costs[i] += mins[i];
    }

    removed[static_cast<std::size_t>(candidate)] = 1;
    std::erase_if(live_edges, [&](const auto& pc) { return pc.first == candidate; });
  }

  // Compact surviving factors and remap edges.
  std::vector<FactorId> remap(factors.size(), -1);
  FactorGraph g;
  g.nodes = nodes;
  for (FactorId f = 0; f < static_cast<FactorId>(factors.size()); f++) {
    if (removed[static_cast<std::size_t>(f)]) continue;
    remap[static_cast<std::size_t>(f)] = g.factor_count();
    g.factors.push_back(std::move(factors[static_cast<std::size_t>(f)]));
  }
  for (const auto& [p, c] : live_edges)
    g.edges.push_back(Edge{remap[static_cast<std::size_t>(p)], remap[static_cast<std::size_t>(c)], {}});
  g.finalize();
  return g;
}

Cost energy(const FactorGraph& graph, const Labeling& labeling)
{
  if (static_cast<int>(labeling.size()) != graph.nodes.count())
    throw std::invalid_argument("labeling length must equal the node count");
  for (NodeId v = 0; v < graph.nodes.count(); v++) {
    int x = labeling[static_cast<std::size_t>(v)];
    if (x < 0 || x >= graph.nodes.labels(v))
      throw std::invalid_argument("label out of range for node " + std::to_string(v));
  }

  Cost total = 0;
  for (const Factor& f : graph.factors) {
    const auto strides = scope_strides(f.scope, graph.nodes);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < f.scope.size(); i++)
      idx += static_cast<std::size_t>(labeling[static_cast<std::size_t>(f.scope[i])]) * strides[i];
    Cost c = f.costs[idx];
    if (is_infinite(c)) return kInfiniteCost;
    total += c;
  }
  return total;
}

Labeling restrict_labeling(const Labeling& full, const std::vector<NodeId>& scope)
{
  Labeling out;
  out.reserve(scope.size());
  for (NodeId v : scope) out.push_back(full[static_cast<std::size_t>(v)]);
  return out;
}

}  // namespace srmp
