#include "srmp/scheduler.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace srmp {

namespace {

std::vector<int> ranks_of_scope(const std::vector<NodeId>& scope, const std::vector<int>& node_rank)
{
  std::vector<int> r;
  r.reserve(scope.size());
  for (NodeId v : scope) r.push_back(node_rank[static_cast<std::size_t>(v)]);
  std::sort(r.begin(), r.end());
  return r;
}

}  // namespace

FactorOrdering order_factors(const FactorGraph& graph, const std::vector<NodeId>& node_order)
{
  FactorOrdering order;
  const int n = graph.nodes.count();
  if (node_order.empty()) {
    order.node_order.resize(static_cast<std::size_t>(n));
    std::iota(order.node_order.begin(), order.node_order.end(), 0);
  } else {
    order.node_order = node_order;
  }
  if (static_cast<int>(order.node_order.size()) != n)
    throw std::invalid_argument("node order must be a permutation of the nodes");
  order.node_rank.assign(static_cast<std::size_t>(n), -1);
  for (int pos = 0; pos < n; pos++) {
    NodeId v = order.node_order[static_cast<std::size_t>(pos)];
    if (v < 0 || v >= n || order.node_rank[static_cast<std::size_t>(v)] != -1)
      throw std::invalid_argument("node order must be a permutation of the nodes");
    order.node_rank[static_cast<std::size_t>(v)] = pos;
  }

  order.sequence.clear();
  for (FactorId f = 0; f < graph.factor_count(); f++)
    if (!graph.incoming(f).empty()) order.sequence.push_back(f);

  auto key = [&](FactorId f) {
    auto ranks = ranks_of_scope(graph.factors[static_cast<std::size_t>(f)].scope, order.node_rank);
    return std::tuple<int, int, std::vector<int>, std::size_t>(ranks.front(), ranks.back(), ranks,
                                                               ranks.size());
  };
  std::sort(order.sequence.begin(), order.sequence.end(),
            [&](FactorId a, FactorId b) { return key(a) < key(b); });

  order.rank.assign(static_cast<std::size_t>(graph.factor_count()), -1);
  for (int pos = 0; pos < static_cast<int>(order.sequence.size()); pos++)
    order.rank[static_cast<std::size_t>(order.sequence[static_cast<std::size_t>(pos)])] = pos;
  return order;
}

bool precedes(const FactorGraph& graph, const FactorOrdering& order, FactorId a, FactorId b)
{
  auto ka = ranks_of_scope(graph.factors[static_cast<std::size_t>(a)].scope, order.node_rank);
  auto kb = ranks_of_scope(graph.factors[static_cast<std::size_t>(b)].scope, order.node_rank);
  return std::tuple(ka.front(), ka.back(), ka, ka.size()) <
         std::tuple(kb.front(), kb.back(), kb, kb.size());
}

WeightDistribution PassSchedule::weight_distribution(int pos, Direction dir) const
{
  const auto& mask = (dir == Direction::Forward) ? in_fw[static_cast<std::size_t>(pos)]
                                                 : in_bw[static_cast<std::size_t>(pos)];
  const double lambda = (dir == Direction::Forward) ? lambda_fw[static_cast<std::size_t>(pos)]
                                                    : lambda_bw[static_cast<std::size_t>(pos)];
  WeightDistribution w;
  w.residual = (dir == Direction::Forward) ? residual_fw[static_cast<std::size_t>(pos)]
                                           : residual_bw[static_cast<std::size_t>(pos)];
  const auto& edges = in_all[static_cast<std::size_t>(pos)];
  w.edge_weights.resize(edges.size(), 0.0);
  for (std::size_t k = 0; k < edges.size(); k++) {
    if (rule == WeightRule::CMP)
      w.edge_weights[k] = lambda;
    else if (mask[k])
      w.edge_weights[k] = lambda;
  }
  return w;
}

PassSchedule compute_pass_sets(const FactorGraph& graph, const FactorOrdering& order)
{
  for (FactorId f = 0; f < graph.factor_count(); f++) {
    if (graph.outgoing(f).size() == 1)
      throw std::invalid_argument(
          "factor with exactly one outgoing edge: run absorb_single_child_factors first");
  }

  PassSchedule s;
  s.order = order;
  const int n = s.size();
  s.in_all.resize(static_cast<std::size_t>(n));
  s.in_fw.resize(static_cast<std::size_t>(n));
  s.in_bw.resize(static_cast<std::size_t>(n));
  s.out_fw_count.assign(static_cast<std::size_t>(n), 0);
  s.out_bw_count.assign(static_cast<std::size_t>(n), 0);

  auto rank = [&](FactorId f) { return s.order.rank[static_cast<std::size_t>(f)]; };

  for (int pos = 0; pos < n; pos++) {
    const FactorId beta = s.order.sequence[static_cast<std::size_t>(pos)];
    const int beta_rank = rank(beta);
    auto& edges = s.in_all[static_cast<std::size_t>(pos)];
    edges = graph.incoming(beta);
    auto& fw = s.in_fw[static_cast<std::size_t>(pos)];
    auto& bw = s.in_bw[static_cast<std::size_t>(pos)];
    fw.assign(edges.size(), 0);
    bw.assign(edges.size(), 0);

    for (std::size_t k = 0; k < edges.size(); k++) {
      const FactorId alpha = graph.edges[static_cast<std::size_t>(edges[k])].parent;
      bool is_fw = (rank(alpha) >= 0 && rank(alpha) > beta_rank);
      bool is_bw = (rank(alpha) >= 0 && rank(alpha) < beta_rank);
      for (EdgeId g : graph.outgoing(alpha)) {
        const FactorId gamma = graph.edges[static_cast<std::size_t>(g)].child;
        if (gamma == beta) continue;
        if (rank(gamma) > beta_rank) is_fw = true;
        if (rank(gamma) < beta_rank) is_bw = true;
      }
      if (!is_fw && !is_bw)
        throw std::invalid_argument("incoming edge in neither pass set; graph not preprocessed");
      fw[k] = is_fw ? 1 : 0;
      bw[k] = is_bw ? 1 : 0;
    }

    for (EdgeId g : graph.outgoing(beta)) {
      const FactorId gamma = graph.edges[static_cast<std::size_t>(g)].child;
      if (rank(gamma) > beta_rank) s.out_fw_count[static_cast<std::size_t>(pos)]++;
      if (rank(gamma) < beta_rank) s.out_bw_count[static_cast<std::size_t>(pos)]++;
    }
  }

  s.lambda_fw.assign(static_cast<std::size_t>(n), 0.0);
  s.lambda_bw.assign(static_cast<std::size_t>(n), 0.0);
  s.residual_fw.assign(static_cast<std::size_t>(n), 1.0);
  s.residual_bw.assign(static_cast<std::size_t>(n), 1.0);
  return s;
}

namespace {

void fill_direction_weights(PassSchedule& s, Direction dir, bool remark2)
{
  for (int pos = 0; pos < s.size(); pos++) {
    const auto& mask = (dir == Direction::Forward) ? s.in_fw[static_cast<std::size_t>(pos)]
                                                   : s.in_bw[static_cast<std::size_t>(pos)];
    const int out_count = (dir == Direction::Forward) ? s.out_fw_count[static_cast<std::size_t>(pos)]
                                                      : s.out_bw_count[static_cast<std::size_t>(pos)];
    const int in_dir = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
    const int in_opp = static_cast<int>(mask.size()) - in_dir;

    double lambda = 0, residual = 1;
    if (in_dir > 0) {
      lambda = remark2 ? 1.0 / in_dir : 1.0 / (out_count + std::max(in_dir, in_opp));
      residual = 1.0 - lambda * in_dir;
    }
    if (dir == Direction::Forward) {
      s.lambda_fw[static_cast<std::size_t>(pos)] = lambda;
      s.residual_fw[static_cast<std::size_t>(pos)] = residual;
    } else {
      s.lambda_bw[static_cast<std::size_t>(pos)] = lambda;
      s.residual_bw[static_cast<std::size_t>(pos)] = residual;
    }
  }
}

}  // namespace

void srmp_weights(const FactorGraph&, PassSchedule& schedule, Direction dir)
{
  schedule.rule = WeightRule::SRMP;
  fill_direction_weights(schedule, dir, /*remark2=*/false);
  schedule.weights_ready = true;
}

void srmp_remark2_weights(const FactorGraph&, PassSchedule& schedule, Direction dir)
{
  schedule.rule = WeightRule::SRMPRemark2;
  fill_direction_weights(schedule, dir, /*remark2=*/true);
  schedule.weights_ready = true;
}

void cmp_weights(const FactorGraph&, PassSchedule& schedule)
{
  schedule.rule = WeightRule::CMP;
  for (int pos = 0; pos < schedule.size(); pos++) {
    const double lambda = 1.0 / (1.0 + static_cast<double>(schedule.in_all[static_cast<std::size_t>(pos)].size()));
    schedule.lambda_fw[static_cast<std::size_t>(pos)] = lambda;
    schedule.lambda_bw[static_cast<std::size_t>(pos)] = lambda;
    schedule.residual_fw[static_cast<std::size_t>(pos)] = lambda;
    schedule.residual_bw[static_cast<std::size_t>(pos)] = lambda;
  }
  schedule.weights_ready = true;
}

PassSchedule make_schedule(const FactorGraph& graph, const std::vector<NodeId>& node_order,
                           WeightRule rule)
{
  PassSchedule s = compute_pass_sets(graph, order_factors(graph, node_order));
  switch (rule) {
    case WeightRule::SRMP:
      srmp_weights(graph, s, Direction::Forward);
      srmp_weights(graph, s, Direction::Backward);
      break;
    case WeightRule::SRMPRemark2:
      srmp_remark2_weights(graph, s, Direction::Forward);
      srmp_remark2_weights(graph, s, Direction::Backward);
      break;
    case WeightRule::CMP:
      cmp_weights(graph, s);
      break;
  }
  return s;
}

// --- message kernels ------------------------------------------------------

namespace {

// Current reparameterized table of a factor under the messages.
std::vector<Cost> working_table(const FactorGraph& graph, const MessageSet& m, FactorId f)
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

// The sequential message update: minimize the parent's reparameterized
// table (with the updated message itself excluded) over labelings
// consistent with each child labeling.
std::vector<Cost> sequential_message(const FactorGraph& graph, const MessageSet& m, EdgeId e)
{
  const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
  const auto work = working_table(graph, m, edge.parent);
  const auto& old_msg = m.values[static_cast<std::size_t>(e)];
  std::vector<Cost> out = min_marginal(work, edge.child_index, old_msg.size());
  for (std::size_t i = 0; i < out.size(); i++) out[i] = clamp_message_value(out[i] + old_msg[i]);
  return out;
}

double bound_from_messages(const FactorGraph& graph, const MessageSet& m)
{
  return lower_bound(reparameterize(graph, m)).value;
}

// --- primal extraction ----------------------------------------------------

constexpr int kUnlabeled = -1;

// Labels all nodes of `f` by minimizing its restricted reparameterized
// table, holding already-labeled nodes fixed.  For updatable factors the
// incoming messages are recomputed in restricted form first.
void extend_labeling_at(const FactorGraph& graph, const MessageSet& m, FactorId f, Labeling& labels)
{
  const Factor& fac = graph.factors[static_cast<std::size_t>(f)];

  // Start from the factor's table with its outgoing messages applied; the
  // incoming ones are replaced by their restricted counterparts below.
  std::vector<Cost> theta_star = fac.costs;
  for (EdgeId e : graph.outgoing(f)) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    const auto& msg = m.values[static_cast<std::size_t>(e)];
    for (std::size_t i = 0; i < theta_star.size(); i++)
      if (!is_infinite(theta_star[i]))
        theta_star[i] -= msg[static_cast<std::size_t>(edge.child_index[i])];
  }

  for (EdgeId e : graph.incoming(f)) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    const Factor& parent = graph.factors[static_cast<std::size_t>(edge.parent)];
    const auto work = working_table(graph, m, edge.parent);
    const auto& old_msg = m.values[static_cast<std::size_t>(e)];

    // Restricted min-marginal: only parent labelings consistent with the
    // already-labeled nodes participate.
    std::vector<Cost> restricted(theta_star.size(), kInfiniteCost);
    for (AssignmentIterator it(parent.scope, graph.nodes); it.valid(); it.advance()) {
      bool consistent = true;
      for (std::size_t p = 0; p < parent.scope.size() && consistent; p++) {
        const int fixed = labels[static_cast<std::size_t>(parent.scope[p])];
        if (fixed != kUnlabeled && fixed != it.digits()[p]) consistent = false;
      }
      if (!consistent) continue;
      const std::size_t ci = static_cast<std::size_t>(edge.child_index[it.index()]);
      restricted[ci] = std::min(restricted[ci], work[it.index()]);
    }
    for (std::size_t i = 0; i < theta_star.size(); i++) theta_star[i] += restricted[i] + old_msg[i];
  }

  std::size_t best = 0;
  Cost best_cost = kInfiniteCost;
  bool found = false;
  for (AssignmentIterator it(fac.scope, graph.nodes); it.valid(); it.advance()) {
    bool consistent = true;
    for (std::size_t p = 0; p < fac.scope.size() && consistent; p++) {
      const int fixed = labels[static_cast<std::size_t>(fac.scope[p])];
      if (fixed != kUnlabeled && fixed != it.digits()[p]) consistent = false;
    }
    if (!consistent) continue;
    if (!found || theta_star[it.index()] < best_cost) {
      found = true;
      best_cost = theta_star[it.index()];
      best = it.index();
    }
  }
  assert(found);

  // Decode and commit the chosen labeling.
  std::size_t rest = best;
  for (int p = static_cast<int>(fac.scope.size()) - 1; p >= 0; p--) {
    const NodeId v = fac.scope[static_cast<std::size_t>(p)];
    const int card = graph.nodes.labels(v);
    labels[static_cast<std::size_t>(v)] = static_cast<int>(rest % static_cast<std::size_t>(card));
    rest /= static_cast<std::size_t>(card);
  }
}

// Fills nodes not covered by the updatable sweep: remaining factors in
// order, then label 0 for nodes outside every factor.
void finish_labeling(const FactorGraph& graph, const MessageSet& m, const FactorOrdering& order,
                     Labeling& labels)
{
  std::vector<FactorId> rest;
  for (FactorId f = 0; f < graph.factor_count(); f++)
    if (order.rank[static_cast<std::size_t>(f)] < 0) rest.push_back(f);
  std::sort(rest.begin(), rest.end(), [&](FactorId a, FactorId b) {
    return precedes(graph, order, a, b);
  });
  for (FactorId f : rest) {
    bool has_unlabeled = false;
    for (NodeId v : graph.factors[static_cast<std::size_t>(f)].scope)
      if (labels[static_cast<std::size_t>(v)] == kUnlabeled) has_unlabeled = true;
    if (has_unlabeled) extend_labeling_at(graph, m, f, labels);
  }
  for (auto& l : labels)
    if (l == kUnlabeled) l = 0;
}

}  // namespace

Labeling extract_primal(const FactorGraph& graph, const MessageSet& m,
                        const PassSchedule& schedule, Direction dir)
{
  Labeling labels(static_cast<std::size_t>(graph.nodes.count()), kUnlabeled);
  const int n = schedule.size();
  for (int step = 0; step < n; step++) {
    const int pos = (dir == Direction::Forward) ? step : n - 1 - step;
    extend_labeling_at(graph, m, schedule.order.sequence[static_cast<std::size_t>(pos)], labels);
  }
  finish_labeling(graph, m, schedule.order, labels);
  return labels;
}

// --- shared AMSD-sweep runner (SRMP and CMP) -------------------------------

namespace {

struct PassContext {
  const FactorGraph& graph;
  const PassSchedule& schedule;
  const SolverConfig& config;
  Algorithm algorithm;
  MessageSet& m;
  const UpdateHook& hook;
};

// One factor update: collection (sequential messages), excess computation,
// weighted subtraction.  Returns nothing; mutates messages in place.
void update_factor(PassContext& ctx, int pos, Direction dir, int pass_number, Labeling* labels)
{
  const PassSchedule& s = ctx.schedule;
  const FactorId beta = s.order.sequence[static_cast<std::size_t>(pos)];
  const auto& edges = s.in_all[static_cast<std::size_t>(pos)];
  const auto& fw_mask = s.in_fw[static_cast<std::size_t>(pos)];
  const auto& bw_mask = s.in_bw[static_cast<std::size_t>(pos)];

  if (labels) extend_labeling_at(ctx.graph, ctx.m, beta, *labels);

  const bool cmp = (ctx.algorithm == Algorithm::CMP);
  const bool full_collect =
      cmp || (ctx.config.full_in_collection_from_pass2 && pass_number >= 2);

  // Collection: refresh messages on the opposite direction's set (or all).
  for (std::size_t k = 0; k < edges.size(); k++) {
    const bool in_collect =
        full_collect || (dir == Direction::Forward ? bw_mask[k] : fw_mask[k]);
    if (!in_collect) continue;
    ctx.m.values[static_cast<std::size_t>(edges[k])] =
        sequential_message(ctx.graph, ctx.m, edges[k]);
  }

  // Excess of the processed factor under the refreshed messages.  For
  // factors with outgoing edges this subtracts those messages as well, so
  // theta_beta is the full reparameterized table.
  std::vector<Cost> theta_beta = working_table(ctx.graph, ctx.m, beta);

  const double lambda = cmp ? s.lambda_fw[static_cast<std::size_t>(pos)]
                            : (dir == Direction::Forward ? s.lambda_fw[static_cast<std::size_t>(pos)]
                                                         : s.lambda_bw[static_cast<std::size_t>(pos)]);
  for (std::size_t k = 0; k < edges.size(); k++) {
    const bool weighted = cmp || (dir == Direction::Forward ? fw_mask[k] : bw_mask[k]);
    if (!weighted || lambda == 0) continue;
    auto& msg = ctx.m.values[static_cast<std::size_t>(edges[k])];
    for (std::size_t i = 0; i < msg.size(); i++)
      msg[i] = clamp_message_value(msg[i] - lambda * theta_beta[i]);
  }

  if (ctx.hook) {
    std::vector<double> weights(edges.size(), 0.0);
    for (std::size_t k = 0; k < edges.size(); k++) {
      const bool weighted = cmp || (dir == Direction::Forward ? fw_mask[k] : bw_mask[k]);
      if (weighted) weights[k] = lambda;
    }
    const double residual = cmp ? s.residual_fw[static_cast<std::size_t>(pos)]
                                : (dir == Direction::Forward
                                       ? s.residual_fw[static_cast<std::size_t>(pos)]
                                       : s.residual_bw[static_cast<std::size_t>(pos)]);
    AmsdUpdateInfo info;
    info.beta = beta;
    info.in_edges = &edges;
    info.edge_weights = &weights;
    info.residual = residual;
    info.theta_hat = &theta_beta;
    info.messages = &ctx.m;
    ctx.hook(info);
  }
}

SolveResult run_amsd_sweeps(const FactorGraph& graph, const SolverConfig& config,
                            const UpdateHook& hook, Algorithm algorithm)
{
  const WeightRule rule = (algorithm == Algorithm::CMP)
                              ? WeightRule::CMP
                              : (config.remark2_weighting ? WeightRule::SRMPRemark2 : WeightRule::SRMP);
  SolveResult result;
  result.schedule = make_schedule(graph, config.node_order, rule);
  result.messages = MessageSet::zeros(graph);

  PassContext ctx{graph, result.schedule, config, algorithm, result.messages, hook};
  RunTrace& trace = result.trace;
  const auto t0 = std::chrono::steady_clock::now();
  const bool two_passes = (algorithm == Algorithm::SRMP);
  const int n = result.schedule.size();

  int pass_number = 0;
  auto run_pass = [&](Direction dir, bool extracting) {
    pass_number++;
    Labeling labels;
    if (extracting) labels.assign(static_cast<std::size_t>(graph.nodes.count()), -1);
    for (int step = 0; step < n; step++) {
      const int pos = (dir == Direction::Forward) ? step : n - 1 - step;
      update_factor(ctx, pos, dir, pass_number, extracting ? &labels : nullptr);
    }
    if (config.normalize_each_pass) normalize_messages(result.messages);
    trace.pass_bounds.push_back(bound_from_messages(graph, result.messages));
    if (extracting) {
      finish_labeling(graph, result.messages, result.schedule.order, labels);
      const Cost e = energy(graph, labels);
      if (e < trace.best_energy) {
        trace.best_energy = e;
        trace.best_labeling = labels;
      }
    }
  };

  double phi_last = -kInfiniteCost, phi_prev = -kInfiniteCost;
  for (int iter = 1; iter <= config.max_iterations; iter++) {
    bool last = (iter == config.max_iterations);
    if (iter >= 3 && phi_last - phi_prev < config.epsilon * (1.0 + std::abs(phi_last))) {
      last = true;
      trace.status = "converged";
    }
    const bool extracting =
        last || (config.primal_period > 0 && iter % config.primal_period == 0);

    run_pass(Direction::Forward, extracting);
    if (two_passes) run_pass(Direction::Backward, extracting);

    const double phi = trace.pass_bounds.back();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.iterations.push_back({iter, phi, trace.best_energy, seconds});

    phi_prev = phi_last;
    phi_last = phi;
    if (last) break;
  }
  if (trace.status.empty()) trace.status = "iteration-limit";
  trace.final_bound = phi_last;
  return result;
}

}  // namespace

SolveResult run_srmp(const FactorGraph& graph, const SolverConfig& config, const UpdateHook& hook)
{
  return run_amsd_sweeps(graph, config, hook, Algorithm::SRMP);
}

SolveResult run_cmp(const FactorGraph& graph, const SolverConfig& config, const UpdateHook& hook)
{
  return run_amsd_sweeps(graph, config, hook, Algorithm::CMP);
}

// --- MPLP -------------------------------------------------------------------

SolveResult run_mplp(const FactorGraph& graph, const SolverConfig& config)
{
  SolveResult result;
  result.schedule = make_schedule(graph, config.node_order, WeightRule::SRMP);

  std::vector<FactorId> parents;
  for (FactorId f = 0; f < graph.factor_count(); f++)
    if (!graph.outgoing(f).empty()) parents.push_back(f);
  std::sort(parents.begin(), parents.end(), [&](FactorId a, FactorId b) {
    return precedes(graph, result.schedule.order, a, b);
  });

  MplpMessageState state = make_mplp_state(graph);
  RunTrace& trace = result.trace;
  const auto t0 = std::chrono::steady_clock::now();

  double phi_last = -kInfiniteCost, phi_prev = -kInfiniteCost;
  for (int iter = 1; iter <= config.max_iterations; iter++) {
    bool last = (iter == config.max_iterations);
    if (iter >= 3 && phi_last - phi_prev < config.epsilon * (1.0 + std::abs(phi_last))) {
      last = true;
      trace.status = "converged";
    }
    const bool extracting =
        last || (config.primal_period > 0 && iter % config.primal_period == 0);

    if (iter % 50 == 0) refresh_mplp_caches(graph, state);  // numerical-drift guard

    for (FactorId alpha : parents) {
      WeightDistribution rho;
      rho.edge_weights.assign(graph.outgoing(alpha).size(),
                              1.0 / static_cast<double>(graph.outgoing(alpha).size()));
      rho.residual = 0;
      amplp_message_form(graph, state, alpha, rho);
    }

    trace.pass_bounds.push_back(bound_from_messages(graph, state.messages));
    if (extracting) {
      Labeling labels = extract_primal(graph, state.messages, result.schedule, Direction::Forward);
      const Cost e = energy(graph, labels);
      if (e < trace.best_energy) {
        trace.best_energy = e;
        trace.best_labeling = labels;
      }
    }

    const double phi = trace.pass_bounds.back();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.iterations.push_back({iter, phi, trace.best_energy, seconds});

    phi_prev = phi_last;
    phi_last = phi;
    if (last) break;
  }
  if (trace.status.empty()) trace.status = "iteration-limit";
  trace.final_bound = phi_last;
  result.messages = std::move(state.messages);
  return result;
}

// --- alternative pairwise implementation -------------------------------------

namespace {

void require_pairwise_blp(const FactorGraph& graph)
{
  for (FactorId f = 0; f < graph.factor_count(); f++) {
    const Factor& fac = graph.factors[static_cast<std::size_t>(f)];
    if (fac.arity() > 2)
      throw std::invalid_argument("alternative implementation requires a pairwise model");
    if (fac.arity() == 2) {
      if (!graph.incoming(f).empty() || graph.outgoing(f).size() != 2)
        throw std::invalid_argument(
            "alternative implementation requires edges from each pair to exactly its two nodes");
    } else if (!graph.outgoing(f).empty()) {
      throw std::invalid_argument("alternative implementation requires singleton factors as leaves");
    }
  }
}

}  // namespace

SolveResult run_srmp_alt_pairwise(const FactorGraph& graph, const SolverConfig& config)
{
  require_pairwise_blp(graph);

  SolveResult result;
  result.schedule = make_schedule(
      graph, config.node_order,
      config.remark2_weighting ? WeightRule::SRMPRemark2 : WeightRule::SRMP);
  const PassSchedule& s = result.schedule;
  const int n = s.size();

  // State: messages with the two-stage interpretation, the excess vector of
  // every updatable singleton, and the per-edge weight used at the child's
  // most recent update.
  MessageSet mhat = MessageSet::zeros(graph);
  std::vector<std::vector<Cost>> excess(static_cast<std::size_t>(graph.factor_count()));
  for (FactorId f = 0; f < graph.factor_count(); f++)
    if (!graph.incoming(f).empty()) excess[static_cast<std::size_t>(f)] = graph.factors[static_cast<std::size_t>(f)].costs;
  std::vector<double> last_weight(static_cast<std::size_t>(graph.edge_count()), 0.0);

  // Standard-interpretation messages: m = mhat - last_weight * excess(child).
  auto convert_message = [&](EdgeId e) {
    const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
    std::vector<Cost> out = mhat.values[static_cast<std::size_t>(e)];
    const double w = last_weight[static_cast<std::size_t>(e)];
    if (w != 0) {
      const auto& ex = excess[static_cast<std::size_t>(edge.child)];
      for (std::size_t i = 0; i < out.size(); i++) out[i] -= w * ex[i];
    }
    return out;
  };
  auto convert_all = [&]() {
    MessageSet m = mhat;
    for (EdgeId e = 0; e < graph.edge_count(); e++)
      m.values[static_cast<std::size_t>(e)] = convert_message(e);
    return m;
  };

  // Reparameterization induced by the two-stage interpretation.
  auto current_theta = [&]() {
    Reparameterization theta;
    theta.tables.resize(static_cast<std::size_t>(graph.factor_count()));
    for (FactorId f = 0; f < graph.factor_count(); f++) {
      auto& table = theta.tables[static_cast<std::size_t>(f)];
      table = graph.factors[static_cast<std::size_t>(f)].costs;
      if (!graph.incoming(f).empty()) {
        // Updatable singleton: residual share of the stored excess.
        double used = 0;
        for (EdgeId e : graph.incoming(f)) used += last_weight[static_cast<std::size_t>(e)];
        const auto& ex = excess[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < table.size(); i++) table[i] = (1.0 - used) * ex[i];
      } else {
        for (EdgeId e : graph.outgoing(f)) {
          const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
          const auto& msg = mhat.values[static_cast<std::size_t>(e)];
          const double w = last_weight[static_cast<std::size_t>(e)];
          const auto& ex = excess[static_cast<std::size_t>(edge.child)];
          for (std::size_t i = 0; i < table.size(); i++) {
            const std::size_t ci = static_cast<std::size_t>(edge.child_index[i]);
            if (!is_infinite(table[i])) table[i] += w * ex[ci] - msg[ci];
          }
        }
      }
    }
    return theta;
  };

  RunTrace& trace = result.trace;
  const auto t0 = std::chrono::steady_clock::now();

  MessageSet converted;  // live standard messages, maintained on extraction passes
  auto run_pass = [&](Direction dir, bool extracting) {
    Labeling labels;
    if (extracting) {
      converted = convert_all();
      labels.assign(static_cast<std::size_t>(graph.nodes.count()), -1);
    }
    for (int step = 0; step < n; step++) {
      const int pos = (dir == Direction::Forward) ? step : n - 1 - step;
      const FactorId beta = s.order.sequence[static_cast<std::size_t>(pos)];
      const auto& edges = s.in_all[static_cast<std::size_t>(pos)];
      const auto& collect_mask = (dir == Direction::Forward) ? s.in_bw[static_cast<std::size_t>(pos)]
                                                             : s.in_fw[static_cast<std::size_t>(pos)];
      const auto& weight_mask = (dir == Direction::Forward) ? s.in_fw[static_cast<std::size_t>(pos)]
                                                            : s.in_bw[static_cast<std::size_t>(pos)];
      const double lambda = (dir == Direction::Forward) ? s.lambda_fw[static_cast<std::size_t>(pos)]
                                                        : s.lambda_bw[static_cast<std::size_t>(pos)];

      if (extracting) extend_labeling_at(graph, converted, beta, labels);

      for (std::size_t k = 0; k < edges.size(); k++) {
        if (!collect_mask[k]) continue;
        const EdgeId e = edges[k];
        const Edge& edge = graph.edges[static_cast<std::size_t>(e)];
        // The parent is a pair with exactly two outgoing edges.
        EdgeId other = -1;
        for (EdgeId g : graph.outgoing(edge.parent))
          if (g != e) other = g;
        const Edge& oe = graph.edges[static_cast<std::size_t>(other)];
        const auto& other_excess = excess[static_cast<std::size_t>(oe.child)];
        const auto& other_msg = mhat.values[static_cast<std::size_t>(other)];
        const double ow = last_weight[static_cast<std::size_t>(other)];

        const auto& pt = graph.factors[static_cast<std::size_t>(edge.parent)].costs;
        std::vector<Cost> work(pt.size());
        for (std::size_t i = 0; i < pt.size(); i++) {
          const std::size_t oi = static_cast<std::size_t>(oe.child_index[i]);
          work[i] = pt[i] + ow * other_excess[oi] - other_msg[oi];
        }
        auto msg = min_marginal(work, edge.child_index, graph.table_size(beta));
        for (Cost& c : msg) c = clamp_message_value(c);
        mhat.values[static_cast<std::size_t>(e)] = std::move(msg);
      }

      auto& ex = excess[static_cast<std::size_t>(beta)];
      ex = graph.factors[static_cast<std::size_t>(beta)].costs;
      for (EdgeId e : edges) {
        const auto& msg = mhat.values[static_cast<std::size_t>(e)];
        for (std::size_t i = 0; i < ex.size(); i++) ex[i] += msg[i];
      }
      for (std::size_t k = 0; k < edges.size(); k++)
        last_weight[static_cast<std::size_t>(edges[k])] = weight_mask[k] ? lambda : 0.0;

      if (extracting) {
        // Only this factor's incoming edges changed interpretation.
        for (EdgeId e : edges)
          converted.values[static_cast<std::size_t>(e)] = convert_message(e);
      }
    }
    trace.pass_bounds.push_back(lower_bound(current_theta()).value);
    if (extracting) {
      finish_labeling(graph, converted, s.order, labels);
      const Cost e = energy(graph, labels);
      if (e < trace.best_energy) {
        trace.best_energy = e;
        trace.best_labeling = labels;
      }
    }
  };

  double phi_last = -kInfiniteCost, phi_prev = -kInfiniteCost;
  for (int iter = 1; iter <= config.max_iterations; iter++) {
    bool last = (iter == config.max_iterations);
    if (iter >= 3 && phi_last - phi_prev < config.epsilon * (1.0 + std::abs(phi_last))) {
      last = true;
      trace.status = "converged";
    }
    const bool extracting =
        last || (config.primal_period > 0 && iter % config.primal_period == 0);

    run_pass(Direction::Forward, extracting);
    run_pass(Direction::Backward, extracting);

    const double phi = trace.pass_bounds.back();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.iterations.push_back({iter, phi, trace.best_energy, seconds});

    phi_prev = phi_last;
    phi_last = phi;
    if (last) break;
  }
  if (trace.status.empty()) trace.status = "iteration-limit";
  trace.final_bound = phi_last;
  result.messages = convert_all();
  return result;
}

SolveResult solve(const FactorGraph& graph, const SolverConfig& config)
{
  switch (config.algorithm) {
    case Algorithm::SRMP:
      return run_srmp(graph, config);
    case Algorithm::CMP:
      return run_cmp(graph, config);
    case Algorithm::MPLP:
      return run_mplp(graph, config);
    case Algorithm::SRMP_AltPairwise:
      return run_srmp_alt_pairwise(graph, config);
  }
  throw std::invalid_argument("unknown algorithm");
}

std::size_t message_updates_per_iteration(const FactorGraph& graph, const PassSchedule& schedule,
                                          Algorithm algorithm)
{
  std::size_t per_pass = 0;
  switch (algorithm) {
    case Algorithm::SRMP:
    case Algorithm::SRMP_AltPairwise: {
      for (int pos = 0; pos < schedule.size(); pos++) {
        per_pass += static_cast<std::size_t>(std::count(
            schedule.in_fw[static_cast<std::size_t>(pos)].begin(),
            schedule.in_fw[static_cast<std::size_t>(pos)].end(), 1));
        per_pass += static_cast<std::size_t>(std::count(
            schedule.in_bw[static_cast<std::size_t>(pos)].begin(),
            schedule.in_bw[static_cast<std::size_t>(pos)].end(), 1));
      }
      return 2 * per_pass;  // forward + backward
    }
    case Algorithm::CMP: {
      for (int pos = 0; pos < schedule.size(); pos++)
        per_pass += 2 * schedule.in_all[static_cast<std::size_t>(pos)].size();
      return per_pass;
    }
    case Algorithm::MPLP: {
      for (FactorId f = 0; f < graph.factor_count(); f++)
        per_pass += 2 * graph.outgoing(f).size();
      return per_pass;
    }
  }
  return 0;
}

}  // namespace srmp
