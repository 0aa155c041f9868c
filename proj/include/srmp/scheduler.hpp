#pragma once

#include <functional>
#include <string>
#include <vector>

#include "srmp/block_updates.hpp"
#include "srmp/factor_graph.hpp"
#include "srmp/messages.hpp"
#include "srmp/types.hpp"

namespace srmp {

enum class Direction { Forward, Backward };
enum class Algorithm { SRMP, CMP, MPLP, SRMP_AltPairwise };
enum class WeightRule { SRMP, CMP, SRMPRemark2 };

// Total order on the updatable factors S = { beta : IN(beta) != empty }.
// Sort key under the node order: (min rank in scope, max rank, sorted rank
// vector lexicographically, scope size).
struct FactorOrdering {
  std::vector<NodeId> node_order;
  std::vector<int> node_rank;      // per node: position in node_order
  std::vector<FactorId> sequence;  // S in the order
  std::vector<int> rank;           // per factor: position in sequence, -1 outside S
};

FactorOrdering order_factors(const FactorGraph& graph, const std::vector<NodeId>& node_order = {});

// True iff a precedes b under the ordering's sort key (defined for any
// pair of factors, not only members of S).
bool precedes(const FactorGraph& graph, const FactorOrdering& order, FactorId a, FactorId b);

// Pass sets and weights, aligned with FactorOrdering::sequence.
struct PassSchedule {
  FactorOrdering order;

  std::vector<std::vector<EdgeId>> in_all;    // IN beta
  std::vector<std::vector<char>> in_fw;       // mask over in_all: edge in IN+ beta
  std::vector<std::vector<char>> in_bw;       // mask over in_all: edge in IN- beta
  std::vector<int> out_fw_count, out_bw_count;

  WeightRule rule = WeightRule::SRMP;
  std::vector<double> lambda_fw, lambda_bw;      // common edge weight per factor
  std::vector<double> residual_fw, residual_bw;  // center weight per factor
  bool weights_ready = false;

  int size() const { return static_cast<int>(order.sequence.size()); }
  // As a WeightDistribution over in_all[pos] for tests and diagnostics.
  WeightDistribution weight_distribution(int pos, Direction dir) const;
};

// Requires every factor to have an outgoing degree different from one
// (run absorb_single_child_factors first).
PassSchedule compute_pass_sets(const FactorGraph& graph, const FactorOrdering& order);

void srmp_weights(const FactorGraph& graph, PassSchedule& schedule, Direction dir);
void cmp_weights(const FactorGraph& graph, PassSchedule& schedule);
// Remark-2 variant: lambda = 1/|IN+-beta|; no performance claim attached.
void srmp_remark2_weights(const FactorGraph& graph, PassSchedule& schedule, Direction dir);

PassSchedule make_schedule(const FactorGraph& graph, const std::vector<NodeId>& node_order,
                           WeightRule rule);

// --- solver --------------------------------------------------------------

struct SolverConfig {
  Algorithm algorithm = Algorithm::SRMP;
  int max_iterations = 1000;
  // Stop when the Phi gain over one full iteration drops below
  // epsilon * (1 + |Phi|).
  double epsilon = 1e-7;
  int primal_period = 3;  // extract a labeling every k-th iteration (and on the last)
  unsigned seed = 0;
  std::vector<NodeId> node_order;  // empty: input order

  bool normalize_each_pass = false;
  // Apply the full incoming-edge collection from pass 2 onward instead of
  // the backward-set-only update; changes nothing but the work performed.
  bool full_in_collection_from_pass2 = false;
  bool remark2_weighting = false;
};

struct IterationRecord {
  int iteration = 0;
  double phi = 0;
  double best_energy = kInfiniteCost;
  double seconds = 0;
};

struct RunTrace {
  std::vector<IterationRecord> iterations;
  std::vector<double> pass_bounds;  // Phi after every pass (2 per SRMP iteration)
  Labeling best_labeling;           // empty if extraction never ran
  double best_energy = kInfiniteCost;
  double final_bound = -kInfiniteCost;
  std::string status;  // "converged" or "iteration-limit"
};

// Per-update view for diagnostics hooks: the processed factor, its full
// incoming edge list with the weights used, the post-collection center
// table, and the message state after the update.
struct AmsdUpdateInfo {
  FactorId beta = -1;
  const std::vector<EdgeId>* in_edges = nullptr;
  const std::vector<double>* edge_weights = nullptr;  // aligned with in_edges
  double residual = 0;
  const std::vector<Cost>* theta_hat = nullptr;
  const MessageSet* messages = nullptr;
};
using UpdateHook = std::function<void(const AmsdUpdateInfo&)>;

struct SolveResult {
  RunTrace trace;
  MessageSet messages;  // final messages in the standard interpretation
  PassSchedule schedule;
};

SolveResult run_srmp(const FactorGraph& graph, const SolverConfig& config,
                     const UpdateHook& hook = {});
SolveResult run_cmp(const FactorGraph& graph, const SolverConfig& config,
                    const UpdateHook& hook = {});
SolveResult run_mplp(const FactorGraph& graph, const SolverConfig& config);
// Pairwise-only variant keeping per-singleton excess vectors and messages
// with a two-stage reparameterization; matches run_srmp's bounds at every
// pass boundary.
SolveResult run_srmp_alt_pairwise(const FactorGraph& graph, const SolverConfig& config);

SolveResult solve(const FactorGraph& graph, const SolverConfig& config);

// Restricted-message primal extraction: sweeps the updatable factors in
// the given direction, labelling each factor's nodes by minimizing its
// restricted reparameterized table; remaining factors and nodes are
// filled in afterwards.
Labeling extract_primal(const FactorGraph& graph, const MessageSet& m,
                        const PassSchedule& schedule, Direction dir);

// Work accounting used to compare algorithms under an equal budget:
// message-vector writes per iteration.
std::size_t message_updates_per_iteration(const FactorGraph& graph, const PassSchedule& schedule,
                                          Algorithm algorithm);

}  // namespace srmp
