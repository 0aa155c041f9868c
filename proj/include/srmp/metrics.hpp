#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "srmp/scheduler.hpp"

namespace srmp {

struct MetricsRecord {
  int iteration = 0;
  double seconds = 0;
  double lower_bound = 0;
  double best_energy = kInfiniteCost;
  double normalized_bound = 0;
  double normalized_energy = 0;
};

// Affine map shared by a comparison group: the zero-message initial bound
// goes to -1 and the best bound over all compared runs goes to 0.
struct Normalization {
  double initial_bound = 0;
  double best_bound = 0;

  double apply(double v) const
  {
    const double scale = best_bound - initial_bound;
    if (!(scale > 0)) return 0;
    return (v - best_bound) / scale;
  }
};

std::string format_metric(double v);  // 17 significant digits

std::vector<MetricsRecord> trace_to_records(const RunTrace& trace);
void apply_normalization(std::vector<MetricsRecord>& records, const Normalization& norm);

// Header: iteration,seconds,lower_bound,best_energy
void write_solve_csv(std::ostream& out, const std::vector<MetricsRecord>& records);

// Header adds algorithm and the normalized columns; one block per run.
void write_compare_csv(std::ostream& out, const std::vector<std::string>& algorithms,
                       const std::vector<std::vector<MetricsRecord>>& runs);

}  // namespace srmp
