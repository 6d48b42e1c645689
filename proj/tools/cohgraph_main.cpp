// Command-line front end.
//
//   cohgraph analyze  --input data.csv [options]   frequency-band testing of
//                                                  partial coherences on a CSV
//   cohgraph simulate --kind varma11 [options]     FDR/power experiments on
//                                                  synthetic sparse models
//
// Exit codes: 0 success, 1 configuration error, 2 input error (with line
// number for malformed CSV), 3 numerical failure (with the stage name).

#include "cohgraph/cohgraph.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace cohgraph;

struct AnalyzeArgs {
  std::string input;
  double delta = 0.0;
  double alpha = 0.1;
  std::string band = "0:pi";
  std::string kernel = "bartlett_modified";
  std::string bandwidth = "auto";
  std::string prewhiten = "on";
  int order = 0;
  std::string inverse = "glasso";
  std::string lambda = "auto";
  std::string output;
  std::string dot;
  double rate = 0.0;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string pairs = "all";
};

// "LO:HI" in radians, or "LO:HIHz" converted through the sampling rate.
std::pair<double, double> parse_band(const std::string& spec, double rate) {
  std::string body = spec;
  bool hz = false;
  if (body.size() >= 2) {
    std::string tail = body.substr(body.size() - 2);
    if (tail == "Hz" || tail == "hz" || tail == "HZ") {
      hz = true;
      body = body.substr(0, body.size() - 2);
    }
  }
  const std::size_t colon = body.find(':');
  if (colon == std::string::npos)
    throw InvalidInput("band must look like LO:HI or LO:HIHz");
  auto parse_edge = [](std::string s) {
    if (s == "pi") return kPi;
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidInput("bad band endpoint: " + s);
    return v;
  };
  double lo = parse_edge(body.substr(0, colon));
  double hi = parse_edge(body.substr(colon + 1));
  if (hz) {
    if (rate <= 0.0)
      throw InvalidInput("band in Hz requires --rate (sampling rate in Hz)");
    lo = 2.0 * kPi * lo / rate;
    hi = 2.0 * kPi * hi / rate;
  }
  if (!(lo < hi)) throw InvalidInput("band must satisfy LO < HI");
  if (lo < 0.0 || hi > kPi + 1e-12)
    throw InvalidInput("band must be a subset of [0, pi] after conversion");
  return {lo, hi};
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& spec, int p) {
  std::vector<std::pair<int, int>> pairs;
  if (spec == "all" || spec.empty()) return pairs;
  std::stringstream stream(spec);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const std::size_t dash = item.find('-');
    if (dash == std::string::npos)
      throw InvalidInput("pairs must look like 1-2,1-3");
    const int u = std::stoi(item.substr(0, dash));
    const int v = std::stoi(item.substr(dash + 1));
    if (u < 1 || v < 1 || u > p || v > p || u == v)
      throw InvalidInput("pair out of range: " + item);
    pairs.emplace_back(std::min(u, v) - 1, std::max(u, v) - 1);
  }
  return pairs;
}

int run_analyze(const AnalyzeArgs& args) {
  CsvTable table;
  try {
    table = read_csv(args.input);
  } catch (const CsvError& e) {
    std::cerr << "input error (line " << e.line << "): " << e.what() << "\n";
    return 2;
  }

  PipelineOptions opts;
  Json config_echo;
  try {
    if (table.values.cols() < 2) throw InvalidInput("need at least 2 columns");
    if (table.values.rows() < 64) throw InvalidInput("need at least 64 rows");
    opts.delta = args.delta;
    opts.alpha = args.alpha;
    std::tie(opts.band_lo, opts.band_hi) = parse_band(args.band, args.rate);
    if (args.kernel == "bartlett_modified" || args.kernel == "bartlett")
      opts.kernel = KernelSpec::bartlett();
    else if (args.kernel == "uniform")
      opts.kernel = KernelSpec::uniform();
    else
      throw InvalidInput("unknown kernel: " + args.kernel);
    if (args.bandwidth != "auto") opts.bandwidth = std::stoi(args.bandwidth);
    if (args.prewhiten == "on") opts.prewhiten = true;
    else if (args.prewhiten == "off") opts.prewhiten = false;
    else throw InvalidInput("--prewhiten must be on or off");
    opts.var_order = args.order;
    if (args.inverse == "glasso") opts.inverse = InverseMethod::glasso;
    else if (args.inverse == "clime") opts.inverse = InverseMethod::clime;
    else throw InvalidInput("unknown inverse method: " + args.inverse);
    if (args.lambda != "auto") opts.lambda = std::stod(args.lambda);
    opts.workers = args.workers;
    opts.pairs = parse_pairs(args.pairs, static_cast<int>(table.values.cols()));
    if (opts.delta < 0.0 || opts.delta >= 1.0) throw InvalidInput("delta must lie in [0,1)");
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw InvalidInput("alpha must lie in (0,1)");

    config_echo["input"] = args.input;
    config_echo["delta"] = opts.delta;
    config_echo["alpha"] = opts.alpha;
    config_echo["band"] = args.band;
    config_echo["band_lo_rad"] = opts.band_lo;
    config_echo["band_hi_rad"] = opts.band_hi;
    config_echo["sampling_rate"] = args.rate;
    config_echo["kernel"] = args.kernel;
    config_echo["bandwidth"] = args.bandwidth;
    config_echo["prewhiten"] = args.prewhiten;
    config_echo["order"] = args.order;
    config_echo["inverse"] = args.inverse;
    config_echo["lambda"] = args.lambda;
    config_echo["pairs"] = args.pairs;
    config_echo["seed"] = args.seed;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  PipelineResult result;
  try {
    MultivariateSeries series = center_series(table.values, args.rate);
    result = analyze_series(series, opts);
  } catch (const EmptyGrid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidBandwidth& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "numerical failure (stage: pipeline): " << e.what() << "\n";
    return 3;
  }

  Json out = analysis_json(result, opts, table.column_names, std::move(config_echo));
  if (args.output.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream file(args.output);
    if (!file) {
      std::cerr << "input error: cannot write " << args.output << "\n";
      return 2;
    }
    file << out.dump(2) << "\n";
  }
  if (!args.dot.empty()) {
    std::ofstream file(args.dot);
    if (!file) {
      std::cerr << "input error: cannot write " << args.dot << "\n";
      return 2;
    }
    file << dot_graph(result, table.column_names);
  }
  std::cerr << "pairs tested: " << result.test.q
            << ", rejected: " << result.test.rejected.size()
            << ", t_hat: " << result.test.t_hat << "\n";
  return 0;
}

struct SimulateArgs {
  std::string kind = "varma11";
  int p = 20;
  int n = 512;
  double alpha = 0.1;
  double delta = 0.0;
  int reps = 100;
  std::string method = "testing";
  std::uint64_t seed = 1;
  std::string output;
  double density = 0.05;
  double strong_margin = 0.2;
  int workers = 0;
  bool list_kinds = false;
};

int run_simulate(const SimulateArgs& args) {
  if (args.list_kinds) {
    std::cout << "varma11\nvma5\n";
    return 0;
  }
  ExperimentConfig config;
  try {
    if (args.kind == "varma11") config.kind = DgpKind::varma11;
    else if (args.kind == "vma5") config.kind = DgpKind::vma5;
    else throw InvalidInput("unknown kind: " + args.kind + " (see --list-kinds)");
    if (args.method == "testing") config.method = ExperimentMethod::testing;
    else if (args.method == "regularizing") config.method = ExperimentMethod::regularizing;
    else throw InvalidInput("unknown method: " + args.method);
    config.p = args.p;
    config.n = args.n;
    config.alpha = args.alpha;
    config.delta = args.delta;
    config.replications = args.reps;
    config.seed = args.seed;
    config.density = args.density;
    config.strong_margin = args.strong_margin;
    config.workers = args.workers;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  ExperimentReport report;
  try {
    report = run_experiment(config);
  } catch (const Error& e) {
    std::cerr << "numerical failure (stage: experiment): " << e.what() << "\n";
    return 3;
  }

  Json out = experiment_json(report);
  if (args.output.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream file(args.output);
    if (!file) {
      std::cerr << "input error: cannot write " << args.output << "\n";
      return 2;
    }
    file << out.dump(2) << "\n";
  }
  std::cout << experiment_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain partial coherence testing with FDR control"};
  app.require_subcommand(1);

  AnalyzeArgs a;
  CLI::App* analyze = app.add_subcommand("analyze", "Test partial coherences on a CSV");
  analyze->add_option("--input", a.input, "input CSV (rows = time)")->required();
  analyze->add_option("--delta", a.delta, "null threshold in [0,1)");
  analyze->add_option("--alpha", a.alpha, "FDR level in (0,1)");
  analyze->add_option("--band", a.band, "frequency band LO:HI (radians) or LO:HIHz");
  analyze->add_option("--rate", a.rate, "sampling rate in Hz (needed for Hz bands)");
  analyze->add_option("--kernel", a.kernel, "bartlett_modified | uniform");
  analyze->add_option("--bandwidth", a.bandwidth, "auto or a positive integer");
  analyze->add_option("--prewhiten", a.prewhiten, "on | off");
  analyze->add_option("--order", a.order, "VAR order (0 = ceil(log10 n))");
  analyze->add_option("--inverse", a.inverse, "clime | glasso");
  analyze->add_option("--lambda", a.lambda, "auto or a fixed penalty");
  analyze->add_option("--pairs", a.pairs, "all or 1-based list like 1-2,1-3");
  analyze->add_option("--output", a.output, "result JSON path (default: stdout)");
  analyze->add_option("--dot", a.dot, "DOT graph of rejected edges");
  analyze->add_option("--seed", a.seed, "seed recorded in the output");
  analyze->add_option("--workers", a.workers, "worker threads (0 = all cores)");

  SimulateArgs s;
  CLI::App* simulate = app.add_subcommand("simulate", "FDR/power experiment");
  simulate->add_option("--kind", s.kind, "varma11 | vma5");
  simulate->add_flag("--list-kinds", s.list_kinds, "print available kinds and exit");
  simulate->add_option("--p", s.p, "process dimension");
  simulate->add_option("--n", s.n, "sample size");
  simulate->add_option("--alpha", s.alpha, "FDR level");
  simulate->add_option("--delta", s.delta, "null threshold");
  simulate->add_option("--reps", s.reps, "replications");
  simulate->add_option("--method", s.method, "testing | regularizing");
  simulate->add_option("--seed", s.seed, "base seed");
  simulate->add_option("--density", s.density, "target edge density in (0, 0.2]");
  simulate->add_option("--strong-margin", s.strong_margin,
                       "strong-signal margin above delta");
  simulate->add_option("--output", s.output, "report JSON path (default: stdout)");
  simulate->add_option("--workers", s.workers, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (analyze->parsed()) return run_analyze(a);
    return run_simulate(s);
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
