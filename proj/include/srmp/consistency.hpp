#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srmp/factor_graph.hpp"
#include "srmp/messages.hpp"
#include "srmp/scheduler.hpp"
#include "srmp/types.hpp"

namespace srmp {

// A subset of a factor's labeling space.
struct Relation {
  FactorId factor = -1;
  std::vector<std::uint8_t> member;

  int count() const;
  bool empty() const { return count() == 0; }
  bool operator==(const Relation&) const = default;
};

// { x : theta(x) <= min theta + eps }.
Relation epsilon_argmin(const std::vector<Cost>& table, double eps, FactorId factor = -1);

// pi_target(rel): the labelings of the target factor sharing a consistent
// extension with some member of rel.  Requires one scope to contain the
// other (projection downward or cylinder upward).
Relation project(const FactorGraph& graph, const Relation& rel, FactorId target);

struct ConsistencyResult {
  bool consistent = false;
  std::vector<Relation> relations;  // per factor; meaningful when consistent
  FactorId empty_factor = -1;       // first factor whose relation emptied
};

// Arc-consistency closure of the epsilon-argmin relations over the edges
// of J.  The maximal fixpoint decides existence: the vector is
// J-consistent iff the closure is everywhere non-empty, in which case
// pi_beta(R_alpha) = R_beta holds on every edge.  An explicit edge order
// may be supplied; the fixpoint does not depend on it.
ConsistencyResult check_j_consistency(const FactorGraph& graph, const Reparameterization& theta,
                                      double eps, const std::vector<EdgeId>* edge_order = nullptr);

// Tracks the relation/lock system along a sequence of AMSD updates on a
// run whose bound has stalled.  Verifies the update-rule invariants
// (a)-(e), monotone shrinkage, and the schedule legality rules R1/R2,
// reporting each violation with the update index and invariant letter.
// A bound increase restarts the tracked relations at the new point.
class RelationTracker {
 public:
  struct Violation {
    int update_index = 0;
    char invariant = '?';  // 'a'..'e', 's' shrinkage, '1'/'2' schedule rules
    FactorId factor = -1;
    EdgeId edge = -1;
    std::string detail;
  };

  struct Report {
    int updates = 0;
    int restarts = 0;  // bound increases observed
    std::vector<Violation> violations;
    bool clean() const { return violations.empty(); }
    std::string to_text() const;
    std::string to_json() const;
  };

  RelationTracker(const FactorGraph& graph, double eps);

  // Re-initializes relations and locks from the current message state.
  void reset(const MessageSet& m);

  void on_update(const AmsdUpdateInfo& info);
  UpdateHook hook();

  const Report& report() const { return report_; }
  const std::vector<Relation>& factor_relations() const { return factor_rel_; }
  const std::vector<Relation>& edge_relations() const { return edge_rel_; }
  int updates_since_change() const { return updates_since_change_; }

 private:
  void check_global_invariants(const Reparameterization& theta);
  void add_violation(char invariant, FactorId factor, EdgeId edge, std::string detail);

  const FactorGraph& graph_;
  double eps_;
  std::vector<Relation> factor_rel_;
  std::vector<Relation> edge_rel_;       // over the child space of each edge
  std::vector<char> edge_assigned_;      // edge relation written by an update
  std::vector<EdgeId> lock_;             // Gamma per factor; -1 when unset
  double phi_prev_ = -kInfiniteCost;
  bool initialized_ = false;
  int updates_since_change_ = 0;
  Report report_;
};

}  // namespace srmp
