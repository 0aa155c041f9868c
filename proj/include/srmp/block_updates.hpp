#pragma once

#include <vector>

#include "srmp/factor_graph.hpp"
#include "srmp/messages.hpp"
#include "srmp/types.hpp"

namespace srmp {

// A star-shaped update block: a center factor plus a non-empty set of its
// incident edges (incoming for AMSD, outgoing for AMPLP).
struct StarSelection {
  FactorId center = -1;
  std::vector<EdgeId> edges;
};

// Probability distribution over the star edges plus the center residual.
// edge_weights aligns with StarSelection::edges.
struct WeightDistribution {
  std::vector<double> edge_weights;
  double residual = 0;

  void validate(std::size_t edge_count) const;  // non-negative, sums to 1 within 1e-12
};

struct AmsdResult {
  std::vector<std::vector<Cost>> deltas;  // per star edge, over child labelings
  std::vector<Cost> theta_hat;            // post-collection center table
};

// Collection then weighted propagation on a star of incoming edges.
// Afterwards min over consistent parent labelings equals w_e * theta_hat
// on every star edge, and the center table equals residual * theta_hat.
// The lower bound never decreases.
AmsdResult amsd(const FactorGraph& graph, Reparameterization& theta, const StarSelection& star,
                const WeightDistribution& w);

// Absorbs the children into the center, then redistributes the center's
// min-marginals with weights rho.  The lower bound never decreases.
void amplp(const FactorGraph& graph, Reparameterization& theta, const StarSelection& star,
           const WeightDistribution& rho);

// Largest lower-bound gain found by perturbing the block's messages along
// random line-searched directions.  Zero (up to noise) certifies block
// optimality.
double max_perturbation_gain(const FactorGraph& graph, const Reparameterization& theta,
                             const std::vector<EdgeId>& edges, int trials, unsigned seed);

bool amsd_optimality_check(const FactorGraph& graph, const Reparameterization& theta_before,
                           const Reparameterization& theta_after, const StarSelection& star,
                           const WeightDistribution& w, int trials, unsigned seed = 1,
                           double tolerance = 1e-7);

bool amplp_optimality_check(const FactorGraph& graph, const Reparameterization& theta_after,
                            const StarSelection& star, const WeightDistribution& rho, int trials,
                            unsigned seed = 1, double tolerance = 1e-7);

// --- AMPLP via messages -------------------------------------------------
//
// Stores the current messages plus the reparameterized table theta_beta of
// every factor with at least one incoming edge, so an update reads child
// vectors instead of summing their incoming messages each time.

struct MplpMessageState {
  MessageSet messages;
  std::vector<std::vector<Cost>> cached_theta;  // per factor; empty when IN(f) is empty

  bool has_cache(FactorId f) const { return !cached_theta[static_cast<std::size_t>(f)].empty(); }
};

MplpMessageState make_mplp_state(const FactorGraph& graph);

// Recomputes every cached table from the messages.
void refresh_mplp_caches(const FactorGraph& graph, MplpMessageState& state);

// Largest absolute deviation between a cached table and its value under
// the current messages.
double mplp_cache_drift(const FactorGraph& graph, const MplpMessageState& state);

// One AMPLP update at `center` over its full outgoing edge set, performed
// on messages and cached child tables.  When probe_tolerance >= 0 the
// touched caches are checked first and a drift beyond the tolerance
// triggers a full recompute from messages.
void amplp_message_form(const FactorGraph& graph, MplpMessageState& state, FactorId center,
                        const WeightDistribution& rho, double probe_tolerance = -1.0);

}  // namespace srmp
