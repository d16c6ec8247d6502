// ducg: run inference on a graph document, generate model files, benchmark
// backends on the full-joined family.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ducg/ducg.hpp"

namespace {

using namespace ducg;
using json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kInfeasible = 3, kNotConverged = 4 };

class UsageError : public Error {
 public:
  using Error::Error;
};

std::pair<int, int> parse_assignment(const std::string& text, const char* what) {
  const auto eq = text.find('=');
  try {
    if (eq == std::string::npos) throw std::invalid_argument("");
    std::size_t a = 0, b = 0;
    const int var = std::stoi(text.substr(0, eq), &a);
    const int state = std::stoi(text.substr(eq + 1), &b);
    if (a != eq || b != text.size() - eq - 1) throw std::invalid_argument("");
    return {var, state};
  } catch (const std::exception&) {
    throw UsageError(std::string("malformed ") + what + " '" + text + "', expected VAR=STATE");
  }
}

// Whitespace-separated VAR=STATE tokens; '#' starts a comment.
Evidence read_evidence_file(const std::string& path) {
  std::istringstream in(read_file(path));
  Evidence e;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      const auto [v, s] = parse_assignment(tok, "evidence");
      e[v] = s;
    }
  }
  return e;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string trace_path(const std::string& base, const Hypothesis& h, bool several) {
  if (!several) return base;
  const std::string tag = ".B" + std::to_string(h.var) + "-" + std::to_string(h.state);
  const auto dot = base.find_last_of('.');
  const auto slash = base.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return base + tag;
  return base.substr(0, dot) + tag + base.substr(dot);
}

void validate_config(const SamplerConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

struct InferArgs {
  std::string graph;
  std::vector<std::string> evidence;
  std::string evidence_file;
  std::vector<std::string> hypotheses;
  std::string backend = "exact";
  std::string estimator = "auto";
  SamplerConfig cfg;
  double column_tolerance = kColumnTolerance;
  double max_states = 1e8;
  std::size_t max_terms = 1000000;
  std::string out;
  std::string trace;
};

struct Outcome {
  HypothesisResult result;
  long cycles = 0;
  bool converged = true;
  std::string status = "exact";
  double wall_ms = 0.0;
  SamplerTrace trace;
};

Outcome run_backend(const InferArgs& a, const Graph& sub, const Evidence& ev, const Hypothesis& h) {
  Outcome o;
  o.result.hypothesis = h;
  const auto t0 = std::chrono::steady_clock::now();
  if (a.backend == "exact") {
    o.result.likelihood = enumerate_likelihood(sub, ev, h, {a.max_states});
  } else if (a.backend == "symbolic") {
    o.result.likelihood = symbolic_likelihood(sub, ev, h, {a.max_terms});
  } else if (a.backend == "recursive") {
    o.result.likelihood = recursive_general(sub, ev, h, {a.max_terms});
  } else if (a.backend == "layered") {
    o.result.likelihood = likelihood_layered(sub, ev, h);
  } else {
    auto r = run(sub, ev, h, a.cfg, {!a.trace.empty()});
    o.result.likelihood = r.result.likelihood;
    o.cycles = r.cycles;
    o.converged = r.converged;
    o.status = to_string(r.verdict);
    o.trace = std::move(r.trace);
  }
  o.wall_ms = ms_since(t0);
  return o;
}

int cmd_infer(InferArgs a) {
  if (a.estimator == "simple") a.cfg.estimator = Estimator::Simple;
  else if (a.estimator == "cutoff") a.cfg.estimator = Estimator::Cutoff;
  else a.cfg.estimator = Estimator::Auto;
  if (a.backend == "sampling") validate_config(a.cfg);

  const Graph g = load_graph_file(a.graph, {a.column_tolerance});
  Evidence extra;
  if (!a.evidence_file.empty()) extra = read_evidence_file(a.evidence_file);
  for (const auto& s : a.evidence) {
    const auto [v, st] = parse_assignment(s, "evidence");
    extra[v] = st;
  }
  const Evidence ev = merged_evidence(g, extra);
  if (auto rep = check_evidence(g, ev); !rep.ok()) throw ValidationError(rep.issues);
  if (ev.empty()) throw ValidationError({"no evidence given"});

  // hypothesis space: requested pairs, or every state of every B variable
  // whose sub-graph explains some evidence
  std::vector<Hypothesis> hyps;
  std::map<VarId, Graph> subs;
  const bool explicit_h = !a.hypotheses.empty();
  if (explicit_h) {
    for (const auto& s : a.hypotheses) {
      const auto [v, st] = parse_assignment(s, "hypothesis");
      if (!g.contains(v) || g.variable(v).kind != VarKind::B)
        throw ValidationError({"hypothesis " + s + " does not name a B variable"});
      if (st < 0 || st >= g.variable(v).states) throw ValidationError({"hypothesis " + s + " state out of range"});
      hyps.push_back({v, st});
    }
    std::sort(hyps.begin(), hyps.end());
    hyps.erase(std::unique(hyps.begin(), hyps.end()), hyps.end());
  } else {
    for (const auto& v : g.variables())
      if (v.kind == VarKind::B)
        for (int s = 0; s < v.states; ++s) hyps.push_back({v.id, s});
  }
  std::vector<Hypothesis> kept;
  for (const auto& h : hyps) {
    if (!subs.contains(h.var)) {
      try {
        subs.emplace(h.var, restrict_to_hypothesis(g, ev, h.var));
      } catch (const HypothesisError& e) {
        if (explicit_h) throw;
        std::cerr << "note: B" << h.var << " dropped: " << e.what() << "\n";
        continue;
      }
    }
    kept.push_back(h);
  }
  if (kept.empty()) throw HypothesisError("no B variable can explain the evidence");

  std::vector<std::future<Outcome>> jobs;
  for (const auto& h : kept) {
    const Graph* sub = &subs.at(h.var);
    Evidence sub_ev;
    for (const auto& [id, s] : ev)
      if (sub->contains(id)) sub_ev.emplace(id, s);
    jobs.push_back(std::async(std::launch::async, [&a, sub, sub_ev, h] { return run_backend(a, *sub, sub_ev, h); }));
  }
  std::vector<Outcome> outs;
  for (auto& j : jobs) outs.push_back(j.get());

  std::vector<HypothesisResult> results;
  for (const auto& o : outs) results.push_back(o.result);
  results = posterior(std::move(results), g);
  for (std::size_t i = 0; i < outs.size(); ++i) outs[i].result = results[i];

  std::vector<std::size_t> rank(outs.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t x, std::size_t y) { return outs[x].result.posterior > outs[y].result.posterior; });

  std::printf("backend: %s\n", a.backend.c_str());
  std::printf("%-5s %-12s %-16s %-16s %-10s %s\n", "rank", "hypothesis", "likelihood", "posterior", "cycles", "status");
  for (std::size_t r = 0; r < rank.size(); ++r) {
    const auto& o = outs[rank[r]];
    const std::string cycles = a.backend == "sampling" ? std::to_string(o.cycles) : "-";
    std::printf("%-5zu %-12s %-16.9e %-16.9e %-10s %s\n", r + 1, to_string(o.result.hypothesis).c_str(),
                o.result.likelihood, o.result.posterior, cycles.c_str(), o.status.c_str());
  }

  if (!a.out.empty()) {
    json report;
    report["backend"] = a.backend;
    json cfg;
    cfg["graph"] = a.graph;
    if (a.backend == "sampling") {
      cfg["burn_in"] = a.cfg.burn_in;
      cfg["window"] = a.cfg.window;
      cfg["epsilon"] = a.cfg.epsilon;
      cfg["delta"] = a.cfg.delta;
      cfg["c"] = a.cfg.c_value();
      cfg["ig_layer"] = a.cfg.ig_layer;
      cfg["ig_x"] = a.cfg.ig_x;
      cfg["cycle_max"] = a.cfg.cycle_max;
      cfg["seed"] = a.cfg.seed;
      cfg["estimator"] = a.estimator;
    }
    json evj = json::object();
    for (const auto& [id, s] : ev) evj[std::to_string(id)] = s;
    cfg["evidence"] = evj;
    report["config"] = cfg;
    json arr = json::array();
    for (const auto& o : outs) {
      json h;
      h["var"] = o.result.hypothesis.var;
      h["state"] = o.result.hypothesis.state;
      h["likelihood"] = o.result.likelihood;
      h["joint"] = o.result.joint;
      h["posterior"] = o.result.posterior;
      h["cycles"] = o.cycles;
      h["converged"] = o.converged;
      h["status"] = o.status;
      h["wall_ms"] = o.wall_ms;
      arr.push_back(h);
    }
    report["hypotheses"] = arr;
    write_text(a.out, report.dump(2) + "\n");
  }
  if (!a.trace.empty() && a.backend == "sampling")
    for (const auto& o : outs) write_text(trace_path(a.trace, o.result.hypothesis, outs.size() > 1), trace_csv(o.trace));

  const bool all_converged = std::all_of(outs.begin(), outs.end(), [](const Outcome& o) { return o.converged; });
  if (!all_converged) {
    std::cerr << "error: sampling did not converge within cycle-max for every hypothesis\n";
    return kNotConverged;
  }
  return kOk;
}

struct GenerateArgs {
  std::string family;
  int n = 2;
  int k = 0;
  int layers = 2;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  Model m;
  if (a.family == "full-joined") m = full_joined(a.n, a.k ? a.k : 3, a.seed);
  else if (a.family == "three-wide") m = three_wide(a.layers, a.seed, a.k ? a.k : 2);
  else if (a.family == "compact") m = compact_fixture();
  else if (a.family == "recursion") m = recursion_fixture(a.seed, a.k ? a.k : 2);
  else if (a.family == "five-layer") m = five_layer_fixture(a.seed);
  else throw UsageError("unknown family '" + a.family + "'");
  const std::string text = serialize(m.graph);
  if (a.out.empty()) std::cout << text;
  else write_text(a.out, text);
  return kOk;
}

struct BenchArgs {
  int n_min = 2;
  int n_max = 8;
  int k = 3;
  std::uint64_t seed = 1;
  double max_states = 1e8;
  std::size_t max_work = 100000000;
  int repeat = 1;
  SamplerConfig cfg;
};

int cmd_bench(const BenchArgs& a) {
  if (a.n_min < 1 || a.n_max < a.n_min) throw UsageError("need 1 <= n-min <= n-max");
  validate_config(a.cfg);
  std::printf("n,backend,wall_ms,cycles,work,likelihood,reference,error_ratio,status\n");
  for (int n = a.n_min; n <= a.n_max; ++n) {
    const Model m = full_joined(n, a.k, a.seed);
    const double ref = marginal_propagation(m.graph, m.hypothesis).at(n * n + 1).at(1);
    for (const std::string backend : {"exact", "recursive", "sampling"}) {
      std::vector<double> walls;
      double value = std::nan("");
      long cycles = 0;
      double work = 0;
      std::string status = "ok";
      for (int rep = 0; rep < a.repeat && status == "ok"; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
          if (backend == "exact") {
            value = enumerate_likelihood(m.graph, m.evidence, m.hypothesis, {a.max_states});
            work = std::pow(static_cast<double>(a.k), n * n);
          } else if (backend == "recursive") {
            const auto r = recursive_general_detailed(m.graph, m.evidence, m.hypothesis,
                                                      plan(m.graph, m.evidence, m.hypothesis),
                                                      {1000000, a.max_work});
            value = r.likelihood;
            work = static_cast<double>(r.work);
          } else {
            const auto r = run(m.graph, m.evidence, m.hypothesis, a.cfg, {false});
            value = r.result.likelihood;
            cycles = r.cycles;
            work = static_cast<double>(r.cycles) * static_cast<double>(m.graph.links().size());
            if (!r.converged) status = "not-converged";
          }
        } catch (const InfeasibleError&) {
          status = "infeasible";
        }
        walls.push_back(ms_since(t0));
      }
      std::sort(walls.begin(), walls.end());
      const double wall = walls[walls.size() / 2];
      if (status == "infeasible") {
        std::printf("%d,%s,%.3f,,,,%.9g,,infeasible\n", n, backend.c_str(), wall, ref);
      } else {
        std::printf("%d,%s,%.3f,%ld,%.6g,%.9g,%.9g,%.6g,%s\n", n, backend.c_str(), wall, cycles, work, value, ref,
                    value / ref - 1.0, status.c_str());
      }
      std::fflush(stdout);
    }
  }
  return kOk;
}

void add_sampler_flags(CLI::App* cmd, SamplerConfig& cfg) {
  cmd->add_option("--burn-in", cfg.burn_in, "burn-in cycles b")->capture_default_str();
  cmd->add_option("--window", cfg.window, "window width")->capture_default_str();
  cmd->add_option("--epsilon", cfg.epsilon, "relative error target")->capture_default_str();
  cmd->add_option("--delta", cfg.delta, "1 - confidence")->capture_default_str();
  cmd->add_option("--ig-layer", cfg.ig_layer, "cut-off expansion depth")->capture_default_str();
  cmd->add_option("--ig-x", cfg.ig_x, "max distinct X variables per retained term")->capture_default_str();
  cmd->add_option("--cycle-max", cfg.cycle_max, "hard cycle cap")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DUCG inference engine"};
  app.require_subcommand(1);

  InferArgs infer;
  auto* ci = app.add_subcommand("infer", "compute Pr{B|E} for every hypothesis");
  ci->add_option("--graph", infer.graph, "graph document")->required();
  ci->add_option("--evidence", infer.evidence, "VAR=STATE (repeatable)");
  ci->add_option("--evidence-file", infer.evidence_file, "file of VAR=STATE tokens");
  ci->add_option("--hypothesis", infer.hypotheses, "VAR=STATE (repeatable; default: all B states)");
  ci->add_option("--backend", infer.backend, "inference backend")
      ->check(CLI::IsMember({"exact", "symbolic", "recursive", "layered", "sampling"}))
      ->capture_default_str();
  ci->add_option("--estimator", infer.estimator, "sampling estimator")
      ->check(CLI::IsMember({"auto", "simple", "cutoff"}))
      ->capture_default_str();
  add_sampler_flags(ci, infer.cfg);
  ci->add_option("--column-tolerance", infer.column_tolerance, "allowed |column sum - 1|")->capture_default_str();
  ci->add_option("--max-states", infer.max_states, "enumeration joint-state cap")->capture_default_str();
  ci->add_option("--max-terms", infer.max_terms, "symbolic/recursive term cap")->capture_default_str();
  ci->add_option("--out", infer.out, "write JSON report");
  ci->add_option("--trace", infer.trace, "write sampling trace CSV");

  GenerateArgs gen;
  auto* cg = app.add_subcommand("generate", "write a model family as a graph document");
  cg->add_option("--family", gen.family, "full-joined | three-wide | compact | recursion | five-layer")->required();
  cg->add_option("--n", gen.n, "full-joined size")->capture_default_str();
  cg->add_option("--k", gen.k, "states per variable (family default when 0)")->capture_default_str();
  cg->add_option("--layers", gen.layers, "three-wide layer count")->capture_default_str();
  cg->add_option("--seed", gen.seed, "matrix seed")->capture_default_str();
  cg->add_option("--out", gen.out, "output file (default stdout)");

  BenchArgs bench;
  auto* cb = app.add_subcommand("bench", "time backends on full-joined models");
  cb->add_option("--n-min", bench.n_min)->capture_default_str();
  cb->add_option("--n-max", bench.n_max)->capture_default_str();
  cb->add_option("--k", bench.k)->capture_default_str();
  cb->add_option("--model-seed", bench.seed, "full-joined matrix seed")->capture_default_str();
  cb->add_option("--max-states", bench.max_states, "enumeration joint-state cap")->capture_default_str();
  cb->add_option("--max-work", bench.max_work, "recursive term-product cap")->capture_default_str();
  cb->add_option("--repeat", bench.repeat, "runs per cell; the median wall time is reported")->capture_default_str();
  add_sampler_flags(cb, bench.cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ci) return cmd_infer(infer);
    if (*cg) return cmd_generate(gen);
    if (*cb) return cmd_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const NotApplicableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
