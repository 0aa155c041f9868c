#include "srmp/messages.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace srmp {

MessageSet MessageSet::zeros(const FactorGraph& graph)
{
  MessageSet m;
  m.values.resize(static_cast<std::size_t>(graph.edge_count()));
  for (EdgeId e = 0; e < graph.edge_count(); e++) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    m.values[static_cast<std::size_t>(e)].assign(graph.table_size(edge.child), 0.0);
  }
  return m;
}

void MessageSet::validate(const FactorGraph& graph) const
{
  if (values.size() != static_cast<std::size_t>(graph.edge_count()))
    throw std::invalid_argument("message set does not match edge count");
  for (EdgeId e = 0; e < graph.edge_count(); e++) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    const auto& v = values[static_cast<std::size_t>(e)];
    if (v.size() != graph.table_size(edge.child))
      throw std::invalid_argument("message vector has wrong length");
    for (Cost c : v)
      if (!std::isfinite(c)) throw std::invalid_argument("message entries must be finite");
  }
}

Reparameterization reparameterize(const FactorGraph& graph, const MessageSet& m)
{
  Reparameterization theta;
  theta.tables.resize(static_cast<std::size_t>(graph.factor_count()));
  for (FactorId f = 0; f < graph.factor_count(); f++) {
    auto& table = theta.tables[static_cast<std::size_t>(f)];
    table = graph.factors[static_cast<std::size_t>(f)].costs;
    for (EdgeId e : graph.incoming(f)) {
      const auto& msg = m.values[static_cast<std::size_t>(e)];
      for (std::size_t i = 0; i < table.size(); i++) table[i] += msg[i];
    }
    for (EdgeId e : graph.outgoing(f)) {
      const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
      const auto& msg = m.values[static_cast<std::size_t>(e)];
      // +inf - finite stays +inf.
      for (std::size_t i = 0; i < table.size(); i++)
        if (!is_infinite(table[i])) table[i] -= msg[static_cast<std::size_t>(edge.child_index[i])];
    }
  }
  return theta;
}

LowerBound lower_bound(const Reparameterization& theta)
{
  LowerBound lb;
  for (const auto& table : theta.tables) {
    Cost m = kInfiniteCost;
    for (Cost c : table) m = std::min(m, c);
    if (is_infinite(m)) {
      lb.infeasible = true;
      lb.value = kInfiniteCost;
      return lb;
    }
    lb.value += m;
  }
  return lb;
}

std::vector<Cost> min_marginal(const std::vector<Cost>& parent_table,
                               const std::vector<int32_t>& child_index, std::size_t child_size)
{
  assert(parent_table.size() == child_index.size());
  std::vector<Cost> out(child_size, kInfiniteCost);
  for (std::size_t i = 0; i < parent_table.size(); i++) {
    const std::size_t ci = static_cast<std::size_t>(child_index[i]);
    if (parent_table[i] < out[ci]) out[ci] = parent_table[i];
  }
  return out;
}

std::vector<Cost> min_marginal(const FactorGraph& graph, const std::vector<Cost>& alpha_table,
                               const std::vector<NodeId>& alpha_scope,
                               const std::vector<NodeId>& beta_scope)
{
  std::vector<std::size_t> child_pos;
  for (NodeId v : beta_scope) {
    auto it = std::lower_bound(alpha_scope.begin(), alpha_scope.end(), v);
    if (it == alpha_scope.end() || *it != v)
      throw std::invalid_argument("beta scope is not contained in alpha scope");
    child_pos.push_back(static_cast<std::size_t>(it - alpha_scope.begin()));
  }
  const auto child_strides = scope_strides(beta_scope, graph.nodes);
  std::vector<Cost> out(table_size_for(beta_scope, graph.nodes), kInfiniteCost);
  for (AssignmentIterator it(alpha_scope, graph.nodes); it.valid(); it.advance()) {
    std::size_t ci = 0;
    for (std::size_t j = 0; j < child_pos.size(); j++)
      ci += static_cast<std::size_t>(it.digits()[child_pos[j]]) * child_strides[j];
    out[ci] = std::min(out[ci], alpha_table[it.index()]);
  }
  return out;
}

void normalize_messages(MessageSet& m)
{
  for (auto& msg : m.values) {
    if (msg.empty()) continue;
    Cost lo = *std::min_element(msg.begin(), msg.end());
    for (Cost& c : msg) c -= lo;
  }
}

}  // namespace srmp
