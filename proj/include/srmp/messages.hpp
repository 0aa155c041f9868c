#pragma once

#include <vector>

#include "srmp/factor_graph.hpp"
#include "srmp/types.hpp"

namespace srmp {

// One finite real vector per relaxation edge, indexed by child labelings.
struct MessageSet {
  std::vector<std::vector<Cost>> values;  // values[e] has size |X_child(e)|

  static MessageSet zeros(const FactorGraph& graph);
  void validate(const FactorGraph& graph) const;
};

// Reparameterized tables theta_alpha, one per factor.
struct Reparameterization {
  std::vector<std::vector<Cost>> tables;
};

struct LowerBound {
  Cost value = 0;
  bool infeasible = false;  // some factor table is identically +inf
};

// theta_beta = bar_theta_beta + sum of incoming messages
//            - sum of outgoing messages (broadcast over child labelings).
Reparameterization reparameterize(const FactorGraph& graph, const MessageSet& m);

// Phi(theta) = sum over factors of the minimum table entry.
LowerBound lower_bound(const Reparameterization& theta);

// Componentwise min over parent labelings consistent with each child
// labeling, using the edge's precomputed projection map.
std::vector<Cost> min_marginal(const std::vector<Cost>& parent_table,
                               const std::vector<int32_t>& child_index, std::size_t child_size);

// Standalone form: beta_scope must be a strict subscope of alpha_scope.
std::vector<Cost> min_marginal(const FactorGraph& graph, const std::vector<Cost>& alpha_table,
                               const std::vector<NodeId>& alpha_scope,
                               const std::vector<NodeId>& beta_scope);

// Shifts each message so its minimum is zero; bounds and argmins of the
// induced reparameterization are unchanged.
void normalize_messages(MessageSet& m);

}  // namespace srmp
