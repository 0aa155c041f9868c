#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "srmp/types.hpp"

namespace srmp {

// The node universe V together with the label-space sizes |X_v|.
struct NodeSet {
  std::vector<int> cardinalities;

  int count() const { return static_cast<int>(cardinalities.size()); }
  int labels(NodeId v) const { return cardinalities[static_cast<std::size_t>(v)]; }
  void validate() const;
};

// A factor: a strictly increasing scope over V plus a dense cost table.
// Tables are indexed with the LAST scope variable varying fastest, so for
// scope (v0,...,vk) the flat index is x[v0]*stride0 + ... + x[vk] with
// stride(k)=1 and stride(i)=stride(i+1)*|X_{v(i+1)}|.  Entries may be
// +infinity (hard constraints) but never -infinity or NaN.
struct Factor {
  std::vector<NodeId> scope;
  std::vector<Cost> costs;

  int arity() const { return static_cast<int>(scope.size()); }
};

// Directed relaxation edge (parent, child) with scope(child) strictly
// contained in scope(parent).  child_index maps a flat index into the
// parent table to the flat index of the restricted labeling in the child
// table; it is precomputed when the graph is finalized.
struct Edge {
  FactorId parent = -1;
  FactorId child = -1;
  std::vector<int32_t> child_index;
};

enum class EdgeMode { BLP, MaximalNesting, Explicit };

struct FactorGraph {
  NodeSet nodes;
  std::vector<Factor> factors;
  std::vector<Edge> edges;

  // Adjacency, indexed by factor id.
  std::vector<std::vector<EdgeId>> in_edges;
  std::vector<std::vector<EdgeId>> out_edges;

  int factor_count() const { return static_cast<int>(factors.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }
  std::size_t table_size(FactorId f) const { return factors[static_cast<std::size_t>(f)].costs.size(); }

  const std::vector<EdgeId>& incoming(FactorId f) const { return in_edges[static_cast<std::size_t>(f)]; }
  const std::vector<EdgeId>& outgoing(FactorId f) const { return out_edges[static_cast<std::size_t>(f)]; }

  // Rebuilds adjacency lists and edge projection maps; validates all
  // structural invariants (unique sorted scopes, table sizes, strict
  // scope inclusion on edges, finite-or-+inf entries).
  void finalize();

  FactorId find_factor(const std::vector<NodeId>& scope) const;  // -1 if absent
};

// --- table indexing helpers -------------------------------------------

std::size_t table_size_for(const std::vector<NodeId>& scope, const NodeSet& nodes);

// Strides for a scope under the last-variable-fastest convention.
std::vector<std::size_t> scope_strides(const std::vector<NodeId>& scope, const NodeSet& nodes);

// Flat index of a scope labeling given per-position digits.
std::size_t flat_index(const std::vector<int>& digits, const std::vector<std::size_t>& strides);

// Mixed-radix enumeration of all labelings of a scope.  digits() holds the
// current per-position labels; advancing past the end returns false.
class AssignmentIterator {
 public:
  AssignmentIterator(const std::vector<NodeId>& scope, const NodeSet& nodes);
  const std::vector<int>& digits() const { return digits_; }
  std::size_t index() const { return index_; }
  bool valid() const { return valid_; }
  void advance();

 private:
  std::vector<int> radix_;
  std::vector<int> digits_;
  std::size_t index_ = 0;
  bool valid_ = true;
};

// --- construction ------------------------------------------------------

// Assembles a relaxation graph over the given factors.
//   BLP: one edge (alpha, {i}) for every i in alpha, |alpha| >= 2;
//        zero-cost singleton factors are created where missing.
//   MaximalNesting: edges between every strictly nested pair with no
//        intermediate factor in F.
//   Explicit: caller-provided (parent, child) factor-index pairs.
// Rejects duplicate scopes and explicit edges without strict inclusion.
FactorGraph build_graph(NodeSet nodes, std::vector<Factor> factors, EdgeMode mode,
                        const std::vector<std::pair<FactorId, FactorId>>& explicit_edges = {});

// Closes the factor set under pairwise (hence all) non-empty scope
// intersections; added factors get all-zero tables.  Edges are preserved
// as-is; callers typically rebuild them afterwards (see build_graph).
FactorGraph close_under_intersections(const FactorGraph& graph);

// Removes every factor with exactly one outgoing edge and no incoming
// edges by pushing its min-marginal into the unique child, repeating to a
// fixpoint.  A factor with one child that still has incoming edges at the
// fixpoint is an unsupported configuration and is rejected.
FactorGraph absorb_single_child_factors(const FactorGraph& graph);

// Energy of a full labeling: sum of theta-bar_alpha(x_alpha) over factors.
Cost energy(const FactorGraph& graph, const Labeling& labeling);

// Restriction of a full labeling to a scope.
Labeling restrict_labeling(const Labeling& full, const std::vector<NodeId>& scope);

}  // namespace srmp
