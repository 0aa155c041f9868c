#include "srmp/block_updates.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace srmp {

namespace {

void validate_star(const FactorGraph& graph, const StarSelection& star, bool incoming)
{
  if (star.edges.empty()) throw std::invalid_argument("star edge set must be non-empty");
  for (EdgeId e : star.edges) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    const FactorId endpoint = incoming ? edge.child : edge.parent;
    if (endpoint != star.center)
      throw std::invalid_argument("star edge does not touch the center factor");
  }
}

Cost table_min(const std::vector<Cost>& t)
{
  Cost m = kInfiniteCost;
  for (Cost c : t) m = std::min(m, c);
  return m;
}

#ifndef NDEBUG
// Local contribution to Phi from the factors a star update touches.
double local_bound(const Reparameterization& theta, const std::set<FactorId>& touched)
{
  double v = 0;
  for (FactorId f : touched) v += table_min(theta.tables[static_cast<std::size_t>(f)]);
  return v;
}

std::set<FactorId> touched_factors(const FactorGraph& graph, const StarSelection& star)
{
  std::set<FactorId> s{star.center};
  for (EdgeId e : star.edges) {
    s.insert(graph.edges[static_cast<std::size_t>(e)].parent);
    s.insert(graph.edges[static_cast<std::size_t>(e)].child);
  }
  return s;
}
#endif

}  // namespace

void WeightDistribution::validate(std::size_t edge_count) const
{
  if (edge_weights.size() != edge_count)
    throw std::invalid_argument("weight vector does not match the star edge count");
  double sum = residual;
  if (residual < 0) throw std::invalid_argument("residual weight must be non-negative");
  for (double w : edge_weights) {
    if (w < 0) throw std::invalid_argument("edge weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("weights must sum to 1");
}

AmsdResult amsd(const FactorGraph& graph, Reparameterization& theta, const StarSelection& star,
                const WeightDistribution& w)
{
  validate_star(graph, star, /*incoming=*/true);
  w.validate(star.edges.size());

#ifndef NDEBUG
  const auto touched = touched_factors(graph, star);
  const double bound_before = local_bound(theta, touched);
#endif

  auto& theta_beta = theta.tables[static_cast<std::size_t>(star.center)];
  AmsdResult result;
  result.deltas.reserve(star.edges.size());

  // Collection: move parent min-marginals into the center.
  for (EdgeId e : star.edges) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    auto& theta_alpha = theta.tables[static_cast<std::size_t>(edge.parent)];
    std::vector<Cost> delta = min_marginal(theta_alpha, edge.child_index, theta_beta.size());
    for (Cost& d : delta) d = clamp_message_value(d);
    for (std::size_t i = 0; i < theta_alpha.size(); i++)
      if (!is_infinite(theta_alpha[i]))
        theta_alpha[i] -= delta[static_cast<std::size_t>(edge.child_index[i])];
    for (std::size_t i = 0; i < theta_beta.size(); i++) theta_beta[i] += delta[i];
    result.deltas.push_back(std::move(delta));
  }

  // Propagation: redistribute theta_hat with the edge weights.
  result.theta_hat = theta_beta;
  for (std::size_t k = 0; k < star.edges.size(); k++) {
    const double weight = w.edge_weights[k];
    if (weight == 0) continue;
    const Edge& edge = graph.edges[static_cast<std::size_t>(star.edges[k])];
    auto& theta_alpha = theta.tables[static_cast<std::size_t>(edge.parent)];
    for (std::size_t i = 0; i < theta_alpha.size(); i++)
      theta_alpha[i] += weight * result.theta_hat[static_cast<std::size_t>(edge.child_index[i])];
    for (std::size_t i = 0; i < theta_beta.size(); i++)
      theta_beta[i] -= weight * result.theta_hat[i];
  }

#ifndef NDEBUG
  const double bound_after = local_bound(theta, touched);
  assert(std::isinf(bound_before) || std::isinf(bound_after) ||
         bound_after >= bound_before - 1e-9 * (1.0 + std::abs(bound_before)));
#endif
  return result;
}

void amplp(const FactorGraph& graph, Reparameterization& theta, const StarSelection& star,
           const WeightDistribution& rho)
{
  validate_star(graph, star, /*incoming=*/false);
  rho.validate(star.edges.size());

#ifndef NDEBUG
  const auto touched = touched_factors(graph, star);
  const double bound_before = local_bound(theta, touched);
#endif

  auto& theta_alpha = theta.tables[static_cast<std::size_t>(star.center)];

  // Absorb children.
  for (EdgeId e : star.edges) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    auto& theta_beta = theta.tables[static_cast<std::size_t>(edge.child)];
    for (std::size_t i = 0; i < theta_alpha.size(); i++)
      theta_alpha[i] += theta_beta[static_cast<std::size_t>(edge.child_index[i])];
    std::fill(theta_beta.begin(), theta_beta.end(), 0.0);
  }

  // Redistribute min-marginals of the absorbed table.
  const std::vector<Cost> theta_hat = theta_alpha;
  for (std::size_t k = 0; k < star.edges.size(); k++) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(star.edges[k])];
    auto& theta_beta = theta.tables[static_cast<std::size_t>(edge.child)];
    std::vector<Cost> delta = min_marginal(theta_hat, edge.child_index, theta_beta.size());
    for (Cost& d : delta) d = clamp_message_value(d);
    const double weight = rho.edge_weights[k];
    for (std::size_t i = 0; i < theta_alpha.size(); i++)
      if (!is_infinite(theta_alpha[i]))
        theta_alpha[i] -= weight * delta[static_cast<std::size_t>(edge.child_index[i])];
    for (std::size_t i = 0; i < theta_beta.size(); i++) theta_beta[i] = weight * delta[i];
  }

#ifndef NDEBUG
  const double bound_after = local_bound(theta, touched);
  assert(std::isinf(bound_before) || std::isinf(bound_after) ||
         bound_after >= bound_before - 1e-9 * (1.0 + std::abs(bound_before)));
#endif
}

double max_perturbation_gain(const FactorGraph& graph, const Reparameterization& theta,
                             const std::vector<EdgeId>& edges, int trials, unsigned seed)
{
  std::set<FactorId> touched;
  for (EdgeId e : edges) {
    touched.insert(graph.edges[static_cast<std::size_t>(e)].parent);
    touched.insert(graph.edges[static_cast<std::size_t>(e)].child);
  }

  double base = 0;
  for (FactorId f : touched) base += table_min(theta.tables[static_cast<std::size_t>(f)]);

  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Working copies of the touched tables only.
  std::vector<std::vector<Cost>> work;
  std::vector<FactorId> order(touched.begin(), touched.end());
  auto slot = [&](FactorId f) {
    return static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), f) - order.begin());
  };

  double best_gain = 0;
  for (int t = 0; t < trials; t++) {
    // One random direction per star edge, over the child labelings.
    std::vector<std::vector<double>> dir(edges.size());
    for (std::size_t k = 0; k < edges.size(); k++) {
      const Edge& edge = graph.edges[static_cast<std::size_t>(edges[k])];
      dir[k].resize(graph.table_size(edge.child));
      for (double& d : dir[k]) d = gauss(rng);
    }

    for (double mag = 1.0 / 1024.0; mag <= 32.0; mag *= 4.0) {
      for (double sign : {1.0, -1.0}) {
        const double step = sign * mag;
        work.clear();
        for (FactorId f : order) work.push_back(theta.tables[static_cast<std::size_t>(f)]);
        for (std::size_t k = 0; k < edges.size(); k++) {
          const Edge& edge = graph.edges[static_cast<std::size_t>(edges[k])];
          auto& pt = work[slot(edge.parent)];
          auto& ct = work[slot(edge.child)];
          for (std::size_t i = 0; i < pt.size(); i++)
            pt[i] -= step * dir[k][static_cast<std::size_t>(edge.child_index[i])];
          for (std::size_t i = 0; i < ct.size(); i++) ct[i] += step * dir[k][i];
        }
        double v = 0;
        for (const auto& table : work) v += table_min(table);
        best_gain = std::max(best_gain, v - base);
      }
    }
  }
  return best_gain;
}

bool amsd_optimality_check(const FactorGraph& graph, const Reparameterization& theta_before,
                           const Reparameterization& theta_after, const StarSelection& star,
                           const WeightDistribution& w, int trials, unsigned seed, double tolerance)
{
  validate_star(graph, star, /*incoming=*/true);
  w.validate(star.edges.size());
  const LowerBound before = lower_bound(theta_before);
  const LowerBound after = lower_bound(theta_after);
  if (!before.infeasible && !after.infeasible &&
      after.value < before.value - 1e-9 * (1.0 + std::abs(before.value)))
    return false;
  return max_perturbation_gain(graph, theta_after, star.edges, trials, seed) <= tolerance;
}

bool amplp_optimality_check(const FactorGraph& graph, const Reparameterization& theta_after,
                            const StarSelection& star, const WeightDistribution& rho, int trials,
                            unsigned seed, double tolerance)
{
  validate_star(graph, star, /*incoming=*/false);
  rho.validate(star.edges.size());
  return max_perturbation_gain(graph, theta_after, star.edges, trials, seed) <= tolerance;
}

// --- AMPLP via messages -------------------------------------------------

namespace {

std::vector<Cost> cached_value_from_messages(const FactorGraph& graph, const MessageSet& m,
                                             FactorId f)
{
  std::vector<Cost> table = graph.factors[static_cast<std::size_t>(f)].costs;
  for (EdgeId e : graph.incoming(f)) {
    const auto& msg = m.values[static_cast<std::size_t>(e)];
    for (std::size_t i = 0; i < table.size(); i++) table[i] += msg[i];
  }
  for (EdgeId e : graph.outgoing(f)) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    const auto& msg = m.values[static_cast<std::size_t>(e)];
    for (std::size_t i = 0; i < table.size(); i++)
      if (!is_infinite(table[i])) table[i] -= msg[static_cast<std::size_t>(edge.child_index[i])];
  }
  return table;
}

}  // namespace

MplpMessageState make_mplp_state(const FactorGraph& graph)
{
  MplpMessageState state;
  state.messages = MessageSet::zeros(graph);
  state.cached_theta.resize(static_cast<std::size_t>(graph.factor_count()));
  refresh_mplp_caches(graph, state);
  return state;
}

void refresh_mplp_caches(const FactorGraph& graph, MplpMessageState& state)
{
  for (FactorId f = 0; f < graph.factor_count(); f++) {
    if (graph.incoming(f).empty()) {
      state.cached_theta[static_cast<std::size_t>(f)].clear();
      continue;
    }
    state.cached_theta[static_cast<std::size_t>(f)] =
        cached_value_from_messages(graph, state.messages, f);
  }
}

double mplp_cache_drift(const FactorGraph& graph, const MplpMessageState& state)
{
  double drift = 0;
  for (FactorId f = 0; f < graph.factor_count(); f++) {
    if (!state.has_cache(f)) continue;
    const auto expected = cached_value_from_messages(graph, state.messages, f);
    const auto& cached = state.cached_theta[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < expected.size(); i++) {
      if (is_infinite(expected[i]) && is_infinite(cached[i])) continue;
      drift = std::max(drift, std::abs(expected[i] - cached[i]));
    }
  }
  return drift;
}

void amplp_message_form(const FactorGraph& graph, MplpMessageState& state, FactorId center,
                        const WeightDistribution& rho, double probe_tolerance)
{
  const auto& out = graph.outgoing(center);
  if (out.empty()) throw std::invalid_argument("amplp center must have outgoing edges");
  rho.validate(out.size());

  if (probe_tolerance >= 0) {
    double drift = 0;
    for (EdgeId e : out) {
      const FactorId child = graph.edges[static_cast<std::size_t>(e)].child;
      const auto expected = cached_value_from_messages(graph, state.messages, child);
      const auto& cached = state.cached_theta[static_cast<std::size_t>(child)];
      for (std::size_t i = 0; i < expected.size(); i++) {
        if (is_infinite(expected[i]) && is_infinite(cached[i])) continue;
        drift = std::max(drift, std::abs(expected[i] - cached[i]));
      }
    }
    if (drift > probe_tolerance) refresh_mplp_caches(graph, state);
  }

  // Step 1: zero the messages to the children, adjusting the caches.
  std::vector<std::vector<Cost>> theta_hat(out.size());
  for (std::size_t k = 0; k < out.size(); k++) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(out[k])];
    auto& cache = state.cached_theta[static_cast<std::size_t>(edge.child)];
    const auto& msg = state.messages.values[static_cast<std::size_t>(out[k])];
    for (std::size_t i = 0; i < cache.size(); i++)
      if (!is_infinite(cache[i])) cache[i] -= msg[i];
    theta_hat[k] = cache;
  }

  // Step 2: absorbed working table for the center.
  std::vector<Cost> work = graph.factors[static_cast<std::size_t>(center)].costs;
  for (EdgeId e : graph.incoming(center)) {
    const auto& msg = state.messages.values[static_cast<std::size_t>(e)];
    for (std::size_t i = 0; i < work.size(); i++) work[i] += msg[i];
  }
  for (std::size_t k = 0; k < out.size(); k++) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(out[k])];
    const auto& cache = state.cached_theta[static_cast<std::size_t>(edge.child)];
    for (std::size_t i = 0; i < work.size(); i++)
      work[i] += cache[static_cast<std::size_t>(edge.child_index[i])];
  }

  // Step 3: redistribute min-marginals; messages carry the change.
  for (std::size_t k = 0; k < out.size(); k++) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(out[k])];
    auto& cache = state.cached_theta[static_cast<std::size_t>(edge.child)];
    auto& msg = state.messages.values[static_cast<std::size_t>(out[k])];
    std::vector<Cost> delta = min_marginal(work, edge.child_index, cache.size());
    for (std::size_t i = 0; i < cache.size(); i++) {
      cache[i] = rho.edge_weights[k] * clamp_message_value(delta[i]);
      msg[i] = clamp_message_value(cache[i]) - clamp_message_value(theta_hat[k][i]);
    }
  }

  // Step 4: keep the center cache consistent when it exists.
  if (state.has_cache(center)) {
    for (std::size_t k = 0; k < out.size(); k++) {
      const Edge& edge = graph.edges[static_cast<std::size_t>(out[k])];
      const auto& cache = state.cached_theta[static_cast<std::size_t>(edge.child)];
      for (std::size_t i = 0; i < work.size(); i++)
        if (!is_infinite(work[i])) work[i] -= cache[static_cast<std::size_t>(edge.child_index[i])];
    }
    state.cached_theta[static_cast<std::size_t>(center)] = std::move(work);
  }
}

}  // namespace srmp
