#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srmp/consistency.hpp"
#include "srmp/metrics.hpp"
#include "srmp/oracle.hpp"
#include "srmp/scheduler.hpp"
#include "srmp/uai.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitParseError = 2;
constexpr int kExitConfigError = 3;

struct CommonOptions {
  std::string input;
  std::string relaxation = "blp";
  int iterations = 1000;
  double eps = 1e-7;
  int primal_period = 3;
  unsigned seed = 0;
  std::string node_order = "input";
};

std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw srmp::UaiParseError(0, "cannot open input file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

srmp::FactorGraph build_relaxation(const srmp::UaiModel& model, const std::string& relaxation)
{
  if (relaxation == "blp")
    return srmp::absorb_single_child_factors(
        srmp::build_graph(model.nodes, model.factors, srmp::EdgeMode::BLP));
  // maximal: close the factor set under intersections, then connect every
  // nested pair without an intermediate factor.
  srmp::FactorGraph flat = srmp::build_graph(model.nodes, model.factors, srmp::EdgeMode::Explicit);
  srmp::FactorGraph closed = srmp::close_under_intersections(flat);
  return srmp::absorb_single_child_factors(
      srmp::build_graph(closed.nodes, closed.factors, srmp::EdgeMode::MaximalNesting));
}

std::vector<srmp::NodeId> load_node_order(const std::string& spec, int node_count)
{
  if (spec == "input") return {};
  std::ifstream in(spec);
  if (!in) throw std::invalid_argument("cannot open node-order file '" + spec + "'");
  std::vector<srmp::NodeId> order;
  srmp::NodeId v;
  while (in >> v) order.push_back(v);
  if (static_cast<int>(order.size()) != node_count)
    throw std::invalid_argument("node-order file must list every node exactly once");
  return order;
}

srmp::Algorithm algorithm_from_name(const std::string& name)
{
  static const std::map<std::string, srmp::Algorithm> table = {
      {"srmp", srmp::Algorithm::SRMP},
      {"cmp", srmp::Algorithm::CMP},
      {"mplp", srmp::Algorithm::MPLP},
      {"srmp-alt", srmp::Algorithm::SRMP_AltPairwise},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown algorithm '" + name + "'");
  return it->second;
}

srmp::SolverConfig make_config(const CommonOptions& opt, const std::string& algorithm,
                               int node_count)
{
  srmp::SolverConfig config;
  config.algorithm = algorithm_from_name(algorithm);
  config.max_iterations = opt.iterations;
  config.epsilon = opt.eps;
  config.primal_period = opt.primal_period;
  config.seed = opt.seed;
  config.node_order = load_node_order(opt.node_order, node_count);
  return config;
}

nlohmann::json verify_report(const srmp::FactorGraph& graph, const srmp::SolveResult& result,
                             const std::string& input_text, unsigned seed)
{
  nlohmann::json report;
  bool pass = true;

  const srmp::Reparameterization theta = srmp::reparameterize(graph, result.messages);
  const srmp::CertificateReport cert = srmp::verify_bound_certificate(graph, theta, 200, seed);
  report["bound_certificate"] = {{"pass", cert.pass},
                                 {"worst_margin", cert.worst_margin},
                                 {"samples", cert.samples}};
  pass = pass && cert.pass;

  std::size_t space = 1;
  bool enumerable = true;
  for (int v = 0; v < graph.nodes.count() && enumerable; v++) {
    space *= static_cast<std::size_t>(graph.nodes.labels(v));
    if (space > (std::size_t{1} << 20)) enumerable = false;
  }
  if (enumerable) {
    const srmp::MapResult map = srmp::brute_force_map(graph);
    const double tol = 1e-7 * (1.0 + std::abs(map.value));
    const bool bound_ok = result.trace.final_bound <= map.value + tol;
    const bool energy_ok = result.trace.best_energy >= map.value - tol;
    report["brute_force"] = {{"map_value", map.value},
                             {"bound_below_map", bound_ok},
                             {"best_energy_at_least_map", energy_ok}};
    pass = pass && bound_ok && energy_ok;
  } else {
    report["brute_force"] = "skipped (labeling space exceeds budget)";
  }

  const srmp::UaiModel reparsed = srmp::parse_uai(srmp::emit_uai(srmp::parse_uai(input_text)));
  const srmp::UaiModel original = srmp::parse_uai(input_text);
  bool roundtrip = reparsed.nodes.cardinalities == original.nodes.cardinalities &&
                   reparsed.factors.size() == original.factors.size();
  for (std::size_t f = 0; roundtrip && f < original.factors.size(); f++)
    roundtrip = reparsed.factors[f].scope == original.factors[f].scope &&
                reparsed.factors[f].costs == original.factors[f].costs;
  report["parser_roundtrip"] = roundtrip;
  pass = pass && roundtrip;

  report["pass"] = pass;
  return report;
}

int run_solve(const CommonOptions& opt, const std::string& algorithm, const std::string& metrics_path,
              const std::string& labeling_path, bool check_consistency, bool verify)
{
  const std::string text = read_file(opt.input);
  const srmp::UaiModel model = srmp::parse_uai(text);
  const srmp::FactorGraph graph = build_relaxation(model, opt.relaxation);

  const srmp::SolverConfig config = make_config(opt, algorithm, graph.nodes.count());
  const srmp::SolveResult result = srmp::solve(graph, config);

  if (!metrics_path.empty()) {
    std::ofstream out(metrics_path);
    if (!out) throw std::invalid_argument("cannot open metrics path '" + metrics_path + "'");
    srmp::write_solve_csv(out, srmp::trace_to_records(result.trace));
  }
  if (!labeling_path.empty()) {
    std::ofstream out(labeling_path);
    if (!out) throw std::invalid_argument("cannot open labeling path '" + labeling_path + "'");
    for (std::size_t i = 0; i < result.trace.best_labeling.size(); i++)
      out << result.trace.best_labeling[i] << (i + 1 == result.trace.best_labeling.size() ? '\n' : ' ');
  }

  nlohmann::json summary;
  summary["algorithm"] = algorithm;
  summary["status"] = result.trace.status;
  summary["iterations"] = result.trace.iterations.size();
  summary["final_lower_bound"] = result.trace.final_bound;
  summary["final_best_energy"] = result.trace.best_energy;
  summary["gap"] = result.trace.best_energy - result.trace.final_bound;

  if (check_consistency) {
    const srmp::Reparameterization theta = srmp::reparameterize(graph, result.messages);
    const srmp::ConsistencyResult jc = srmp::check_j_consistency(graph, theta, 1e-6);
    summary["consistency"] = {{"consistent", jc.consistent}, {"empty_factor", jc.empty_factor}};
  }

  bool verify_pass = true;
  if (verify) {
    summary["verify"] = verify_report(graph, result, text, opt.seed);
    verify_pass = summary["verify"]["pass"].get<bool>();
  }

  std::cout << summary.dump(2) << "\n";
  return verify_pass ? kExitOk : kExitVerifyFailed;
}

int run_compare(const CommonOptions& opt, const std::vector<std::string>& algorithms,
                const std::string& metrics_path)
{
  const std::string text = read_file(opt.input);
  const srmp::UaiModel model = srmp::parse_uai(text);
  const srmp::FactorGraph graph = build_relaxation(model, opt.relaxation);

  const srmp::LowerBound initial =
      srmp::lower_bound(srmp::reparameterize(graph, srmp::MessageSet::zeros(graph)));

  std::vector<std::vector<srmp::MetricsRecord>> runs;
  std::vector<double> time_per_iteration;
  double best_bound = -srmp::kInfiniteCost;
  for (const std::string& name : algorithms) {
    const srmp::SolverConfig config = make_config(opt, name, graph.nodes.count());
    const srmp::SolveResult result = srmp::solve(graph, config);
    best_bound = std::max(best_bound, result.trace.final_bound);
    runs.push_back(srmp::trace_to_records(result.trace));
    const auto& iters = result.trace.iterations;
    time_per_iteration.push_back(iters.empty() ? 0.0 : iters.back().seconds / iters.size());
  }

  const srmp::Normalization norm{initial.value, best_bound};
  for (auto& records : runs) srmp::apply_normalization(records, norm);

  if (metrics_path.empty()) {
    srmp::write_compare_csv(std::cout, algorithms, runs);
  } else {
    std::ofstream out(metrics_path);
    if (!out) throw std::invalid_argument("cannot open metrics path '" + metrics_path + "'");
    srmp::write_compare_csv(out, algorithms, runs);
  }

  // Per-iteration cost ratios relative to the first algorithm: its one
  // iteration costs the same as ratio[k] iterations of algorithm k.
  nlohmann::json summary;
  summary["normalization"] = {{"initial_bound", initial.value}, {"best_bound", best_bound}};
  nlohmann::json ratios;
  for (std::size_t k = 0; k < algorithms.size(); k++) {
    const double r = (time_per_iteration[k] > 0) ? time_per_iteration[0] / time_per_iteration[k] : 0.0;
    ratios[algorithms[k]] = r;
  }
  summary["iteration_cost_ratios"] = ratios;
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Message-passing MAP solver for higher-order discrete graphical models"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string algorithm = "srmp";
  std::string metrics_path;
  std::string labeling_path;
  bool check_consistency = false;
  bool verify = false;
  std::vector<std::string> algorithms;

  const std::vector<std::string> known = {"srmp", "cmp", "mplp", "srmp-alt"};

  CLI::App* solve = app.add_subcommand("solve", "Solve one instance with one algorithm");
  solve->add_option("--input", opt.input, "UAI MARKOV model file")->required();
  solve->add_option("--algorithm", algorithm, "srmp|cmp|mplp|srmp-alt")
      ->check(CLI::IsMember(known));
  solve->add_option("--relaxation", opt.relaxation, "blp|maximal")
      ->check(CLI::IsMember({"blp", "maximal"}));
  solve->add_option("--iterations", opt.iterations, "iteration limit")->check(CLI::PositiveNumber);
  solve->add_option("--eps", opt.eps, "relative bound-gain stopping threshold")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("--node-order", opt.node_order, "'input' or a file with a node permutation");
  solve->add_option("--primal-period", opt.primal_period, "extract a labeling every k-th iteration")
      ->check(CLI::PositiveNumber);
  solve->add_option("--metrics", metrics_path, "write per-iteration CSV here");
  solve->add_option("--labeling", labeling_path, "write the best labeling here");
  solve->add_flag("--check-consistency", check_consistency, "report the consistency verdict");
  solve->add_flag("--verify", verify, "run the brute-force oracle suite on small inputs");
  solve->add_option("--seed", opt.seed, "seed for randomized verification");

  CLI::App* compare = app.add_subcommand("compare", "Run several algorithms on one instance");
  compare->add_option("--input", opt.input, "UAI MARKOV model file")->required();
  compare->add_option("--algorithms", algorithms, "algorithms to compare")
      ->delimiter(',')
      ->check(CLI::IsMember(known))
      ->required();
  compare->add_option("--relaxation", opt.relaxation, "blp|maximal")
      ->check(CLI::IsMember({"blp", "maximal"}));
  compare->add_option("--iterations", opt.iterations, "iteration budget per algorithm")
      ->check(CLI::PositiveNumber);
  compare->add_option("--eps", opt.eps, "relative bound-gain stopping threshold")
      ->check(CLI::NonNegativeNumber);
  compare->add_option("--node-order", opt.node_order, "'input' or a file with a node permutation");
  compare->add_option("--primal-period", opt.primal_period, "extract a labeling every k-th iteration")
      ->check(CLI::PositiveNumber);
  compare->add_option("--metrics", metrics_path, "write the normalized multi-run CSV here");
  compare->add_option("--seed", opt.seed, "seed for randomized verification");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (solve->parsed())
      return run_solve(opt, algorithm, metrics_path, labeling_path, check_consistency, verify);
    return run_compare(opt, algorithms, metrics_path);
  } catch (const srmp::UaiParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParseError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}
