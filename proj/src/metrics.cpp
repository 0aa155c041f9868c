#include "srmp/metrics.hpp"

#include <cstdio>

namespace srmp {

std::string format_metric(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<MetricsRecord> trace_to_records(const RunTrace& trace)
{
  std::vector<MetricsRecord> records;
  records.reserve(trace.iterations.size());
  for (const IterationRecord& it : trace.iterations) {
    MetricsRecord r;
    r.iteration = it.iteration;
    r.seconds = it.seconds;
    r.lower_bound = it.phi;
    r.best_energy = it.best_energy;
    records.push_back(r);
  }
  return records;
}

void apply_normalization(std::vector<MetricsRecord>& records, const Normalization& norm)
{
  for (MetricsRecord& r : records) {
    r.normalized_bound = norm.apply(r.lower_bound);
    r.normalized_energy = norm.apply(r.best_energy);
  }
}

void write_solve_csv(std::ostream& out, const std::vector<MetricsRecord>& records)
{
  out << "iteration,seconds,lower_bound,best_energy\n";
  for (const MetricsRecord& r : records) {
    out << r.iteration << ',' << format_metric(r.seconds) << ',' << format_metric(r.lower_bound)
        << ',' << format_metric(r.best_energy) << '\n';
  }
}

void write_compare_csv(std::ostream& out, const std::vector<std::string>& algorithms,
                       const std::vector<std::vector<MetricsRecord>>& runs)
{
  out << "algorithm,iteration,seconds,lower_bound,best_energy,normalized_bound,normalized_energy\n";
  for (std::size_t a = 0; a < algorithms.size(); a++) {
    for (const MetricsRecord& r : runs[a]) {
      out << algorithms[a] << ',' << r.iteration << ',' << format_metric(r.seconds) << ','
          << format_metric(r.lower_bound) << ',' << format_metric(r.best_energy) << ','
          << format_metric(r.normalized_bound) << ',' << format_metric(r.normalized_energy) << '\n';
    }
  }
}

}  // namespace srmp
