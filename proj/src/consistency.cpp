#include "srmp/consistency.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace srmp {

int Relation::count() const
{
  return static_cast<int>(std::count(member.begin(), member.end(), std::uint8_t{1}));
}

Relation epsilon_argmin(const std::vector<Cost>& table, double eps, FactorId factor)
{
  Relation rel;
  rel.factor = factor;
  rel.member.assign(table.size(), 0);
  Cost lo = kInfiniteCost;
  for (Cost c : table) lo = std::min(lo, c);
  if (is_infinite(lo)) {
    // All entries infinite: every labeling is a minimizer.
    std::fill(rel.member.begin(), rel.member.end(), std::uint8_t{1});
    return rel;
  }
  for (std::size_t i = 0; i < table.size(); i++)
    if (table[i] <= lo + eps) rel.member[i] = 1;
  return rel;
}

namespace {

// Index map from the larger scope's labelings to the smaller scope's.
std::vector<int32_t> subscope_map(const FactorGraph& graph, const std::vector<NodeId>& big,
                                  const std::vector<NodeId>& small)
{
  std::vector<std::size_t> pos;
  for (NodeId v : small) {
    auto it = std::lower_bound(big.begin(), big.end(), v);
    if (it == big.end() || *it != v)
      throw std::invalid_argument("project: neither scope contains the other");
    pos.push_back(static_cast<std::size_t>(it - big.begin()));
  }
  const auto strides = scope_strides(small, graph.nodes);
  std::vector<int32_t> map(table_size_for(big, graph.nodes));
  for (AssignmentIterator it(big, graph.nodes); it.valid(); it.advance()) {
    std::size_t ci = 0;
    for (std::size_t j = 0; j < pos.size(); j++)
      ci += static_cast<std::size_t>(it.digits()[pos[j]]) * strides[j];
    map[it.index()] = static_cast<int32_t>(ci);
  }
  return map;
}

}  // namespace

Relation project(const FactorGraph& graph, const Relation& rel, FactorId target)
{
  const auto& from_scope = graph.factors[static_cast<std::size_t>(rel.factor)].scope;
  const auto& to_scope = graph.factors[static_cast<std::size_t>(target)].scope;

  Relation out;
  out.factor = target;
  out.member.assign(graph.table_size(target), 0);

  if (to_scope.size() <= from_scope.size()) {
    const auto map = subscope_map(graph, from_scope, to_scope);
    for (std::size_t i = 0; i < rel.member.size(); i++)
      if (rel.member[i]) out.member[static_cast<std::size_t>(map[i])] = 1;
  } else {
    const auto map = subscope_map(graph, to_scope, from_scope);
    for (std::size_t i = 0; i < out.member.size(); i++)
      out.member[i] = rel.member[static_cast<std::size_t>(map[i])];
  }
  return out;
}

ConsistencyResult check_j_consistency(const FactorGraph& graph, const Reparameterization& theta,
                                      double eps, const std::vector<EdgeId>* edge_order)
{
  ConsistencyResult result;
  result.relations.resize(static_cast<std::size_t>(graph.factor_count()));
  for (FactorId f = 0; f < graph.factor_count(); f++)
    result.relations[static_cast<std::size_t>(f)] =
        epsilon_argmin(theta.tables[static_cast<std::size_t>(f)], eps, f);

  std::vector<EdgeId> order;
  if (edge_order) {
    order = *edge_order;
  } else {
    order.resize(static_cast<std::size_t>(graph.edge_count()));
    std::iota(order.begin(), order.end(), 0);
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (EdgeId e : order) {
      const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
      auto& rp = result.relations[static_cast<std::size_t>(edge.parent)].member;
      auto& rc = result.relations[static_cast<std::size_t>(edge.child)].member;

      // R_child &= pi_child(R_parent)
      std::vector<std::uint8_t> proj(rc.size(), 0);
      for (std::size_t i = 0; i < rp.size(); i++)
        if (rp[i]) proj[static_cast<std::size_t>(edge.child_index[i])] = 1;
      for (std::size_t j = 0; j < rc.size(); j++) {
        if (rc[j] && !proj[j]) {
          rc[j] = 0;
          changed = true;
        }
      }
      // R_parent &= pi_parent(R_child)
      for (std::size_t i = 0; i < rp.size(); i++) {
        if (rp[i] && !rc[static_cast<std::size_t>(edge.child_index[i])]) {
          rp[i] = 0;
          changed = true;
        }
      }
    }
  }

  for (FactorId f = 0; f < graph.factor_count(); f++) {
    if (result.relations[static_cast<std::size_t>(f)].empty()) {
      result.consistent = false;
      result.empty_factor = f;
      return result;
    }
  }

#ifndef NDEBUG
  // At the non-empty fixpoint the marginalization property is exact.
  for (const Edge& edge : graph.edges) {
    const auto& rp = result.relations[static_cast<std::size_t>(edge.parent)].member;
    const auto& rc = result.relations[static_cast<std::size_t>(edge.child)].member;
    std::vector<std::uint8_t> proj(rc.size(), 0);
    for (std::size_t i = 0; i < rp.size(); i++)
      if (rp[i]) proj[static_cast<std::size_t>(edge.child_index[i])] = 1;
    assert(proj == rc);
  }
#endif
  result.consistent = true;
  return result;
}

// --- RelationTracker -------------------------------------------------------

RelationTracker::RelationTracker(const FactorGraph& graph, double eps) : graph_(graph), eps_(eps)
{
  factor_rel_.resize(static_cast<std::size_t>(graph.factor_count()));
  edge_rel_.resize(static_cast<std::size_t>(graph.edge_count()));
  edge_assigned_.assign(static_cast<std::size_t>(graph.edge_count()), 0);
  lock_.assign(static_cast<std::size_t>(graph.factor_count()), -1);
}

void RelationTracker::reset(const MessageSet& m)
{
  const Reparameterization theta = reparameterize(graph_, m);
  for (FactorId f = 0; f < graph_.factor_count(); f++)
    factor_rel_[static_cast<std::size_t>(f)] =
        epsilon_argmin(theta.tables[static_cast<std::size_t>(f)], eps_, f);
  for (EdgeId e = 0; e < graph_.edge_count(); e++) {
    const Edge& edge = graph_.edges[static_cast<std::size_t>(e)];
    edge_rel_[static_cast<std::size_t>(e)].factor = edge.child;
    edge_rel_[static_cast<std::size_t>(e)].member.assign(graph_.table_size(edge.child), 1);
  }
  std::fill(edge_assigned_.begin(), edge_assigned_.end(), 0);
  std::fill(lock_.begin(), lock_.end(), -1);
  phi_prev_ = lower_bound(theta).value;
  updates_since_change_ = 0;
  initialized_ = true;
}

void RelationTracker::add_violation(char invariant, FactorId factor, EdgeId edge, std::string detail)
{
  report_.violations.push_back({report_.updates, invariant, factor, edge, std::move(detail)});
}

void RelationTracker::on_update(const AmsdUpdateInfo& info)
{
  if (!initialized_) reset(*info.messages);
  report_.updates++;

  const Reparameterization theta = reparameterize(graph_, *info.messages);
  const double phi = lower_bound(theta).value;
  if (phi > phi_prev_ + 1e-9 * (1.0 + std::abs(phi_prev_))) {
    // The bound moved: the stall premise is void, restart at this point.
    report_.restarts++;
    reset(*info.messages);
    return;
  }
  phi_prev_ = phi;

  const FactorId beta = info.beta;
  const auto& edges = *info.in_edges;
  const auto& weights = *info.edge_weights;

  // Schedule legality.  R1: a processed factor with children must keep
  // mass.  R2: locks of the center and of all parents must allow the call.
  if (!graph_.outgoing(beta).empty() && info.residual <= 0)
    add_violation('1', beta, -1, "center with outgoing edges processed with zero residual");
  if (lock_[static_cast<std::size_t>(beta)] != -1)
    add_violation('2', beta, lock_[static_cast<std::size_t>(beta)], "center factor is locked");
  for (std::size_t k = 0; k < edges.size(); k++) {
    const FactorId alpha = graph_.edges[static_cast<std::size_t>(edges[k])].parent;
    const EdgeId g = lock_[static_cast<std::size_t>(alpha)];
    if (g != -1 && g != edges[k])
      add_violation('2', alpha, g, "parent locked by a different edge");
  }

  // Relation updates.
  bool any_change = false;
  auto assign_checked = [&](Relation& dst, Relation&& value, char letter, FactorId f, EdgeId e) {
    for (std::size_t i = 0; i < dst.member.size(); i++) {
      if (value.member[i] && !dst.member[i]) {
        add_violation(letter, f, e, "relation acquired a new element");
        break;
      }
    }
    if (dst.member != value.member) any_change = true;
    dst = std::move(value);
  };

  Relation hat = epsilon_argmin(*info.theta_hat, eps_, beta);
  assign_checked(factor_rel_[static_cast<std::size_t>(beta)], Relation(hat), 's', beta, -1);
  for (std::size_t k = 0; k < edges.size(); k++) {
    const EdgeId e = edges[k];
    const FactorId alpha = graph_.edges[static_cast<std::size_t>(e)].parent;
    assign_checked(edge_rel_[static_cast<std::size_t>(e)], Relation(hat), 's', beta, e);
    edge_assigned_[static_cast<std::size_t>(e)] = 1;

    Relation next;
    if (weights[k] > 0) {
      next = epsilon_argmin(theta.tables[static_cast<std::size_t>(alpha)], eps_, alpha);
    } else {
      next = factor_rel_[static_cast<std::size_t>(alpha)];
      const Relation lifted = project(graph_, edge_rel_[static_cast<std::size_t>(e)], alpha);
      for (std::size_t i = 0; i < next.member.size(); i++)
        next.member[i] = next.member[i] && lifted.member[i];
    }
    assign_checked(factor_rel_[static_cast<std::size_t>(alpha)], std::move(next), 's', alpha, e);

    lock_[static_cast<std::size_t>(alpha)] = (weights[k] == 0) ? e : -1;
  }
  updates_since_change_ = any_change ? 0 : updates_since_change_ + 1;

  check_global_invariants(theta);
}

void RelationTracker::check_global_invariants(const Reparameterization& theta)
{
  // (a) unlocked factors with children carry exactly the argmin relation;
  // (b) leaves carry the argmin relation unless zeroed out;
  // (c) a locked factor carries argmin intersected with the lift of its
  //     lock edge's relation;
  // (d) the center relation refines each edge relation, exactly for leaves;
  // (e) factor relations project into their edge relations.
  for (FactorId f = 0; f < graph_.factor_count(); f++) {
    const auto& table = theta.tables[static_cast<std::size_t>(f)];
    const Relation arg = epsilon_argmin(table, eps_, f);
    const Relation& rel = factor_rel_[static_cast<std::size_t>(f)];
    const EdgeId lock = lock_[static_cast<std::size_t>(f)];

    if (!graph_.outgoing(f).empty() && lock == -1) {
      if (!(rel == arg)) add_violation('a', f, -1, "relation differs from the argmin set");
    } else if (graph_.outgoing(f).empty()) {
      bool zero = true;
      for (Cost c : table)
        if (std::abs(c) > eps_) zero = false;
      if (!(rel == arg) && !zero)
        add_violation('b', f, -1, "leaf relation differs from the argmin set of a nonzero table");
    }
    if (lock != -1) {
      Relation expect = arg;
      const Relation lifted = project(graph_, edge_rel_[static_cast<std::size_t>(lock)], f);
      for (std::size_t i = 0; i < expect.member.size(); i++)
        expect.member[i] = expect.member[i] && lifted.member[i];
      if (!(rel == expect))
        add_violation('c', f, lock, "locked relation differs from argmin restricted to the lock");
    }
  }

  for (EdgeId e = 0; e < graph_.edge_count(); e++) {
    const Edge& edge = graph_.edges[static_cast<std::size_t>(e)];
    const Relation& re = edge_rel_[static_cast<std::size_t>(e)];
    const Relation& rb = factor_rel_[static_cast<std::size_t>(edge.child)];
    const Relation& ra = factor_rel_[static_cast<std::size_t>(edge.parent)];

    for (std::size_t j = 0; j < rb.member.size(); j++)
      if (rb.member[j] && !re.member[j]) {
        add_violation('d', edge.child, e, "center relation not contained in the edge relation");
        break;
      }
    // The equality for leaves is established by the child's first update;
    // before that the edge relation still holds its initial full space.
    if (graph_.outgoing(edge.child).empty() && edge_assigned_[static_cast<std::size_t>(e)] &&
        !(rb == re))
      add_violation('d', edge.child, e, "leaf edge relation differs from the factor relation");

    const Relation lifted = project(graph_, re, edge.parent);
    for (std::size_t i = 0; i < ra.member.size(); i++)
      if (ra.member[i] && !lifted.member[i]) {
        add_violation('e', edge.parent, e, "parent relation escapes the edge relation's lift");
        break;
      }
  }
}

UpdateHook RelationTracker::hook()
{
  return [this](const AmsdUpdateInfo& info) { on_update(info); };
}

std::string RelationTracker::Report::to_text() const
{
  std::ostringstream out;
  out << "updates=" << updates << " restarts=" << restarts << " violations=" << violations.size()
      << "\n";
  for (const auto& v : violations)
    out << "  update " << v.update_index << " invariant " << v.invariant << " factor " << v.factor
        << " edge " << v.edge << ": " << v.detail << "\n";
  return out.str();
}

std::string RelationTracker::Report::to_json() const
{
  nlohmann::json j;
  j["updates"] = updates;
  j["restarts"] = restarts;
  j["violations"] = nlohmann::json::array();
  for (const auto& v : violations) {
    j["violations"].push_back({{"update", v.update_index},
                               {"invariant", std::string(1, v.invariant)},
                               {"factor", v.factor},
                               {"edge", v.edge},
                               {"detail", v.detail}});
  }
  return j.dump(2);
}

}  // namespace srmp
