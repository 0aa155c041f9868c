#include "srmp/oracle.hpp"

#include <random>
#include <stdexcept>

namespace srmp {

MapResult brute_force_map(const FactorGraph& graph, EnumerationBudget budget)
{
  std::size_t space = 1;
  for (int v = 0; v < graph.nodes.count(); v++) {
    space *= static_cast<std::size_t>(graph.nodes.labels(v));
    if (space > budget.max_labelings)
      throw std::invalid_argument("labeling space exceeds enumeration budget");
  }

  std::vector<NodeId> all_nodes(static_cast<std::size_t>(graph.nodes.count()));
  for (int v = 0; v < graph.nodes.count(); v++) all_nodes[static_cast<std::size_t>(v)] = v;

  // Per-factor strides over the full digit vector, so each labeling's
  // energy is a plain table sum.
  std::vector<std::vector<std::size_t>> strides;
  for (const Factor& f : graph.factors) strides.push_back(scope_strides(f.scope, graph.nodes));

  MapResult best;
  for (AssignmentIterator it(all_nodes, graph.nodes); it.valid(); it.advance()) {
    Cost total = 0;
    for (FactorId f = 0; f < graph.factor_count(); f++) {
      const Factor& fac = graph.factors[static_cast<std::size_t>(f)];
      std::size_t idx = 0;
      for (std::size_t i = 0; i < fac.scope.size(); i++)
        idx += static_cast<std::size_t>(it.digits()[static_cast<std::size_t>(fac.scope[i])]) *
               strides[static_cast<std::size_t>(f)][i];
      Cost c = fac.costs[idx];
      if (is_infinite(c)) {
        total = kInfiniteCost;
        break;
      }
      total += c;
    }
    if (total < best.value) {
      best.value = total;
      best.argmin = it.digits();
    }
  }
  if (best.argmin.empty() && graph.nodes.count() > 0)
    best.argmin.assign(static_cast<std::size_t>(graph.nodes.count()), 0);  // all labelings +inf
  return best;
}

std::vector<Cost> brute_force_min_marginal(const std::vector<Cost>& table,
                                           const std::vector<int>& scope_cards,
                                           const std::vector<int>& keep_positions)
{
  std::size_t out_size = 1;
  for (int p : keep_positions) out_size *= static_cast<std::size_t>(scope_cards[static_cast<std::size_t>(p)]);
  std::vector<Cost> out(out_size, kInfiniteCost);

  for (std::size_t flat = 0; flat < table.size(); flat++) {
    // Decode digits from the flat index (last position fastest).
    std::vector<int> digits(scope_cards.size());
    std::size_t rest = flat;
    for (int i = static_cast<int>(scope_cards.size()) - 1; i >= 0; i--) {
      const int card = scope_cards[static_cast<std::size_t>(i)];
      digits[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(card));
      rest /= static_cast<std::size_t>(card);
    }
    // Encode the kept digits by Horner's rule.
    std::size_t ci = 0;
    for (int p : keep_positions)
      ci = ci * static_cast<std::size_t>(scope_cards[static_cast<std::size_t>(p)]) +
           static_cast<std::size_t>(digits[static_cast<std::size_t>(p)]);
    if (table[flat] < out[ci]) out[ci] = table[flat];
  }
  return out;
}

CertificateReport verify_bound_certificate(const FactorGraph& graph, const Reparameterization& theta,
                                           int trials, unsigned seed, EnumerationBudget budget)
{
  const LowerBound phi = lower_bound(theta);
  CertificateReport report;
  if (phi.infeasible) return report;  // +inf bound is vacuously below any energy

  std::mt19937 rng(seed);
  auto check = [&](const Labeling& x) {
    const Cost e = energy(graph, x);
    if (!is_infinite(e)) {
      const double margin = e - phi.value;
      report.worst_margin = std::min(report.worst_margin, margin);
      if (margin < -1e-9 * (1.0 + std::abs(e))) report.pass = false;
    }
    report.samples++;
  };

  Labeling x(static_cast<std::size_t>(graph.nodes.count()));
  for (int t = 0; t < trials; t++) {
    for (int v = 0; v < graph.nodes.count(); v++) {
      std::uniform_int_distribution<int> dist(0, graph.nodes.labels(v) - 1);
      x[static_cast<std::size_t>(v)] = dist(rng);
    }
    check(x);
  }

  std::size_t space = 1;
  bool enumerable = true;
  for (int v = 0; v < graph.nodes.count(); v++) {
    space *= static_cast<std::size_t>(graph.nodes.labels(v));
    if (space > budget.max_labelings) {
      enumerable = false;
      break;
    }
  }
  if (enumerable) check(brute_force_map(graph, budget).argmin);

  return report;
}

}  // namespace srmp
