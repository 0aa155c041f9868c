#pragma once

#include <vector>

#include "srmp/factor_graph.hpp"
#include "srmp/messages.hpp"
#include "srmp/types.hpp"

namespace srmp {

struct EnumerationBudget {
  std::size_t max_labelings = std::size_t{1} << 20;
};

struct MapResult {
  Cost value = kInfiniteCost;
  Labeling argmin;
};

// Exhaustive minimization over all full labelings.  Ties break to the
// lowest labeling index (last node fastest).  Refuses when the labeling
// space exceeds the budget.
MapResult brute_force_map(const FactorGraph& graph, EnumerationBudget budget = {});

// Reference min-marginal: enumerates parent labelings as digit vectors and
// recomputes every index from scratch, independent of the strided fast
// path.  keep_positions selects which positions of the parent scope form
// the sub-scope, in increasing order.
std::vector<Cost> brute_force_min_marginal(const std::vector<Cost>& table,
                                           const std::vector<int>& scope_cards,
                                           const std::vector<int>& keep_positions);

struct CertificateReport {
  bool pass = true;
  double worst_margin = kInfiniteCost;  // min over checked labelings of energy - Phi
  int samples = 0;
};

// Samples random full labelings (plus the brute-force optimum when the
// budget allows) and checks Phi(theta) <= energy for each.
CertificateReport verify_bound_certificate(const FactorGraph& graph, const Reparameterization& theta,
                                           int trials, unsigned seed,
                                           EnumerationBudget budget = {});

}  // namespace srmp
