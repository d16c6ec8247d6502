#pragma once

// Conditional stochastic simulation of Pr{E | B_kj}.
//
// Every cycle redraws each state-unknown X variable from its conditional
// given its parents' current states (topological order, so one cycle is an
// exact ancestral draw under the hypothesis, with evidence clamped). The
// per-cycle value P_t is either the product of the evidence conditionals
// ("simple") or a truncated symbolic expansion of the evidence product in
// which single-variable terms are scored by indicator ("cutoff").

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ducg/event_algebra.hpp"
#include "ducg/exact.hpp"
#include "ducg/graph.hpp"

namespace ducg {

// c such that the upper normal tail beyond c has mass delta/2.
inline double c_from_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  const double target = delta / 2.0;
  auto tail = [](double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); };
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

enum class Estimator { Auto, Simple, Cutoff };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::Auto: return "auto";
    case Estimator::Simple: return "simple";
    case Estimator::Cutoff: return "cutoff";
  }
  return "?";
}

struct SamplerConfig {
  long burn_in = 300;
  long window = 200;
  double epsilon = 1e-3;
  double delta = 0.05;
  std::optional<double> c;  // derived from delta when unset
  int ig_layer = 2;
  int ig_x = 6;
  long cycle_max = 1000000;
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::Auto;

  double c_value() const { return c ? *c : c_from_delta(delta); }

  void validate() const {
    std::vector<std::string> issues;
    if (burn_in < 1) issues.push_back("burn-in must be >= 1");
    if (window < 1) issues.push_back("window must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) issues.push_back("epsilon must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) issues.push_back("delta must lie in (0,1)");
    if (c && !(*c > 0.0)) issues.push_back("c must be positive");
    if (ig_layer < 1) issues.push_back("ig-layer must be >= 1");
    if (ig_x < 1) issues.push_back("ig-x must be >= 1");
    if (cycle_max <= burn_in + window) issues.push_back("cycle-max must exceed burn-in + window");
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }
};

// SplitMix64, used to derive independent 64-bit seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// 64-bit Mersenne Twister (std::mt19937_64, whose output sequence is fixed
// by the standard) seeded through SplitMix64 from (seed, stream). Doubles
// take the top 53 bits, so draws are identical on every platform.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix64(s);
    std::uint64_t t = stream ^ a;
    engine_.seed(splitmix64(t));
  }

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

  // Inverse-CDF draw; never returns a zero-probability index.
  int categorical(std::span<const double> p) {
    double total = 0.0;
    for (double x : p) total += x;
    const double u = uniform() * total;
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      acc += p[i];
      last = static_cast<int>(i);
      if (u < acc) return last;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t stream_of(const Hypothesis& h) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h.var)) << 32) |
         static_cast<std::uint32_t>(h.state);
}

struct SampleAssignment {
  std::map<VarId, int> states;  // state-unknown X variables only
  long t = 0;
};

// Compiled chain over one graph, evidence and hypothesis.
class ChainSampler {
 public:
  ChainSampler(const Graph& g, const Evidence& evidence, const Hypothesis& h)
      : g_(&g), cg_(g), st_(cg_.ids.size(), 0) {
    detail::require_hypothesis(g, h);
    detail::require_evidence(g, evidence);
    std::vector<char> fixed(cg_.ids.size(), 0);
    for (std::size_t i = 0; i < cg_.ids.size(); ++i) {
      if (cg_.kinds[i] == VarKind::B) {
        if (cg_.ids[i] != h.var)
          throw HypothesisError("sampling needs a graph restricted to one hypothesis; found extra root B" +
                                std::to_string(cg_.ids[i]));
        st_[i] = h.state;
        fixed[i] = 1;
      } else if (cg_.kinds[i] == VarKind::D) {
        fixed[i] = 1;
      }
    }
    for (const auto& [id, s] : evidence) {
      const int i = static_cast<int>(g.index_of(id));
      st_[i] = s;
      fixed[i] = 1;
      evidence_.push_back({i, s});
    }
    for (int i : cg_.topo)
      if (!fixed[i]) unknown_.push_back(i);
  }

  const detail::CompiledGraph& compiled() const noexcept { return cg_; }
  const std::vector<int>& unknown_indices() const noexcept { return unknown_; }
  int state_at(int index) const { return st_[index]; }
  int state_of(VarId id) const { return st_[g_->index_of(id)]; }

  void init(Rng& rng) {
    for (int i : unknown_) st_[i] = rng.uniform_int(cg_.states[i]);
  }

  void cycle(Rng& rng) {
    for (int i : unknown_) {
      cg_.cpd_vector(i, st_, buf_);
      st_[i] = rng.categorical(buf_);
    }
  }

  double simple_likelihood() const {
    double p = 1.0;
    for (const auto& [i, s] : evidence_) p *= cg_.cpd(i, s, st_);
    return p;
  }

  SampleAssignment assignment(long t) const {
    SampleAssignment a;
    a.t = t;
    for (int i : unknown_) a.states.emplace(cg_.ids[i], st_[i]);
    return a;
  }

  void load(const SampleAssignment& a) {
    for (int i : unknown_) {
      const auto it = a.states.find(cg_.ids[i]);
      if (it == a.states.end()) throw std::invalid_argument("assignment misses X" + std::to_string(cg_.ids[i]));
      st_[i] = it->second;
    }
  }

 private:
  const Graph* g_;
  detail::CompiledGraph cg_;
  std::vector<int> st_;
  std::vector<int> unknown_;
  std::vector<std::pair<int, int>> evidence_;
  std::vector<double> buf_;
};

inline SampleAssignment init_assignment(const Graph& g, const Evidence& evidence, const Hypothesis& h, Rng& rng) {
  ChainSampler s(g, evidence, h);
  s.init(rng);
  return s.assignment(0);
}

inline SampleAssignment resample_cycle(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                       const SampleAssignment& a, Rng& rng) {
  ChainSampler s(g, evidence, h);
  s.load(a);
  s.cycle(rng);
  return s.assignment(a.t + 1);
}

// P_t = product over evidence of its conditional given the current parents.
// A B parent takes its state from the hypothesis when it is the hypothesis variable.
inline double cycle_likelihood_simple(const Graph& g, const Evidence& evidence, const SampleAssignment& a,
                                      const std::optional<Hypothesis>& h = std::nullopt) {
  double p = 1.0;
  for (const auto& [id, s] : evidence) {
    std::map<VarId, int> ps;
    for (VarId parent : g.parents(id)) {
      const auto& pv = g.variable(parent);
      if (pv.kind == VarKind::D) continue;
      if (const auto e = evidence.find(parent); e != evidence.end()) {
        ps[parent] = e->second;
      } else if (const auto it = a.states.find(parent); it != a.states.end()) {
        ps[parent] = it->second;
      } else if (h && pv.kind == VarKind::B && parent == h->var) {
        ps[parent] = h->state;
      }
    }
    p *= conditional_distribution(g, id, ps)[s];
  }
  return p;
}

// Truncated expansion of the evidence product.
struct CutoffExpression {
  struct Leaf {
    VarId var = 0;
    int state = 0;
    double weight = 0.0;  // numeric value of the term with X(var,state) set to 1
  };

  SymbolicExpr frozen;       // retained terms: grounded ones and single-X leaves
  std::vector<Leaf> leaves;  // numeric leaf weights, merged per (var, state)
  double constant = 0.0;     // numeric value of the grounded terms
  std::size_t dropped_terms = 0;
  int steps = 0;

  // Expected per-cycle value when every leaf variable follows `marginals`.
  double expected_value(const std::map<VarId, std::vector<double>>& marginals) const {
    double v = constant;
    for (const auto& l : leaves) v += l.weight * marginals.at(l.var).at(l.state);
    return v;
  }
};

struct CutoffOptions {
  // Keep A-literals in the retained terms (slower; for inspection).
  bool keep_functional = false;
};

// The evidence product is expanded once, then up to `ig_layer` more times.
// Before each further step, terms without X-literals are frozen as constants
// and terms whose only X variable is state-unknown are frozen as leaves; terms
// with more than `ig_x` distinct X variables are dropped. Whatever is still
// unresolved after the last step is dropped.
inline CutoffExpression build_cutoff_expression(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                                int ig_layer, int ig_x, const CutoffOptions& opts = {}) {
  detail::require_hypothesis(g, h);
  detail::require_evidence(g, evidence);
  if (ig_layer < 1) throw std::invalid_argument("ig_layer must be >= 1");
  if (ig_x < 1) throw std::invalid_argument("ig_x must be >= 1");
  const Expander ex(g, ExpandOptions{.fold_functional = !opts.keep_functional});
  CutoffExpression out;

  SymbolicExpr exp = ex.expand_layer(evidence_product(evidence));
  out.steps = 1;
  for (int step = 0;; ++step) {
    SymbolicExpr pending;
    for (const auto& t : exp.terms()) {
      const int nx = distinct_x_count(t);
      if (nx == 0) {
        out.frozen.add_normalized(t);
        continue;
      }
      if (nx == 1) {
        const auto it = std::find_if(t.lits.begin(), t.lits.end(),
                                     [](const Literal& l) { return l.kind == LitKind::X; });
        if (!evidence.contains(it->var)) {
          out.frozen.add_normalized(t);
          continue;
        }
      }
      if (nx > ig_x || step == ig_layer) {
        ++out.dropped_terms;
        continue;
      }
      pending.add_normalized(t);
    }
    if (step == ig_layer || pending.empty()) break;
    exp = ex.expand_layer(pending);
    ++out.steps;
  }

  std::map<std::pair<VarId, int>, double> leaf_weight;
  for (const auto& t : out.frozen.terms()) {
    Term numeric = t;
    const Literal* x = nullptr;
    numeric.lits.clear();
    for (const auto& l : t.lits) {
      if (l.kind == LitKind::X) x = &l;
      else numeric.lits.push_back(l);
    }
    SymbolicExpr single;
    single.add_normalized(numeric);
    const double v = evaluate(single, g, {}, h);
    if (x) leaf_weight[{x->var, x->state}] += v;
    else out.constant += v;
  }
  for (const auto& [key, w] : leaf_weight) out.leaves.push_back({key.first, key.second, w});
  return out;
}

inline double cycle_likelihood_cutoff(const CutoffExpression& expr, const SampleAssignment& a) {
  double v = expr.constant;
  for (const auto& l : expr.leaves) {
    const auto it = a.states.find(l.var);
    if (it == a.states.end()) throw std::invalid_argument("leaf variable X" + std::to_string(l.var) + " not sampled");
    if (it->second == l.state) v += l.weight;
  }
  return v;
}

// Simple estimator when there is one evidence node or no two evidence nodes
// share a state-unknown X ancestor; cutoff otherwise.
inline Estimator select_estimator(const Graph& g, const Evidence& evidence) {
  if (evidence.size() <= 1) return Estimator::Simple;
  std::set<VarId> seen;
  for (const auto& [id, s] : evidence) {
    for (VarId a : detail::reach(g, {id}, false)) {
      if (a == id || evidence.contains(a) || g.variable(a).kind != VarKind::X) continue;
      if (!seen.insert(a).second) return Estimator::Cutoff;
    }
  }
  return Estimator::Simple;
}

enum class Verdict { BurnIn, Continue, Converged, ConvergedAtZero, CapReached };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::BurnIn: return "burn-in";
    case Verdict::Continue: return "continue";
    case Verdict::Converged: return "converged";
    case Verdict::ConvergedAtZero: return "converged-at-zero";
    case Verdict::CapReached: return "cap-reached";
  }
  return "?";
}

struct TraceRow {
  long t = 0;
  double p_t = 0.0;
  double running_mean = 0.0;
  double window_mean = 0.0;  // NaN until a full window exists
  double window_std = 0.0;
  Verdict verdict = Verdict::BurnIn;
};

struct SamplerTrace {
  std::vector<TraceRow> rows;
};

// Window statistics over the last `window` running means. The window covers
// the running-mean sequence rather than raw P_t: raw per-cycle spread never
// meets a 1e-3 relative target at c = 2, whereas the running mean settles
// within a few thousand cycles.
struct WindowStats {
  double mean = 0.0;
  double std = 0.0;
};

inline WindowStats window_stats(std::span<const double> running_means) {
  WindowStats w;
  if (running_means.empty()) return w;
  for (double x : running_means) w.mean += x;
  w.mean /= static_cast<double>(running_means.size());
  double ss = 0.0;
  for (double x : running_means) ss += (x - w.mean) * (x - w.mean);
  w.std = std::sqrt(ss / static_cast<double>(running_means.size()));
  return w;
}

inline Verdict halting_verdict(long t, const WindowStats& w, const SamplerConfig& cfg, double c) {
  if (t < cfg.burn_in + cfg.window) return t <= cfg.burn_in ? Verdict::BurnIn : Verdict::Continue;
  if (w.mean == 0.0 && w.std == 0.0) return Verdict::ConvergedAtZero;
  if (c * w.std < cfg.epsilon * w.mean) return Verdict::Converged;
  if (t >= cfg.cycle_max) return Verdict::CapReached;
  return Verdict::Continue;
}

// Verdict for the last row of a trace (window recomputed from the trace).
inline Verdict halting_check(const SamplerTrace& trace, const SamplerConfig& cfg) {
  if (trace.rows.empty()) return Verdict::BurnIn;
  const long t = trace.rows.back().t;
  std::vector<double> tail;
  const std::size_t n = trace.rows.size();
  const std::size_t from = n > static_cast<std::size_t>(cfg.window) ? n - cfg.window : 0;
  for (std::size_t i = from; i < n; ++i) tail.push_back(trace.rows[i].running_mean);
  return halting_verdict(t, window_stats(tail), cfg, cfg.c_value());
}

struct SamplingResult {
  HypothesisResult result;
  long cycles = 0;
  bool converged = false;
  Verdict verdict = Verdict::Continue;
  Estimator estimator = Estimator::Simple;
  std::size_t cutoff_leaves = 0;
  std::size_t cutoff_dropped = 0;
  SamplerTrace trace;
};

struct RunOptions {
  bool keep_trace = true;
};

inline SamplingResult run(const Graph& g, const Evidence& evidence, const Hypothesis& h, const SamplerConfig& cfg,
                          const RunOptions& ropts = {}) {
  cfg.validate();
  const double c = cfg.c_value();
  ChainSampler chain(g, evidence, h);
  Rng rng(cfg.seed, stream_of(h));

  SamplingResult res;
  res.result.hypothesis = h;
  res.estimator = cfg.estimator == Estimator::Auto ? select_estimator(g, evidence) : cfg.estimator;

  // leaf lookups compiled to chain indices
  std::vector<std::pair<int, int>> leaf_at;
  std::vector<double> leaf_w;
  double constant = 0.0;
  if (res.estimator == Estimator::Cutoff) {
    const auto cut = build_cutoff_expression(g, evidence, h, cfg.ig_layer, cfg.ig_x);
    constant = cut.constant;
    for (const auto& l : cut.leaves) {
      leaf_at.emplace_back(static_cast<int>(g.index_of(l.var)), l.state);
      leaf_w.push_back(l.weight);
    }
    res.cutoff_leaves = cut.leaves.size();
    res.cutoff_dropped = cut.dropped_terms;
  }

  chain.init(rng);
  std::vector<double> ring(static_cast<std::size_t>(cfg.window), 0.0);
  double mean = 0.0;
  Verdict verdict = Verdict::BurnIn;
  long t = 0;
  while (true) {
    ++t;
    chain.cycle(rng);
    double p;
    if (res.estimator == Estimator::Cutoff) {
      p = constant;
      for (std::size_t i = 0; i < leaf_at.size(); ++i)
        if (chain.state_at(leaf_at[i].first) == leaf_at[i].second) p += leaf_w[i];
    } else {
      p = chain.simple_likelihood();
    }
    mean += (p - mean) / static_cast<double>(t);
    ring[static_cast<std::size_t>((t - 1) % cfg.window)] = mean;

    WindowStats w{std::nan(""), std::nan("")};
    if (t >= cfg.window) w = window_stats(ring);
    verdict = halting_verdict(t, w, cfg, c);
    if (verdict == Verdict::Continue && t >= cfg.cycle_max) verdict = Verdict::CapReached;
    if (ropts.keep_trace) res.trace.rows.push_back({t, p, mean, w.mean, w.std, verdict});
    if (verdict == Verdict::Converged || verdict == Verdict::ConvergedAtZero || verdict == Verdict::CapReached)
      break;
  }
  res.cycles = t;
  res.verdict = verdict;
  res.converged = verdict == Verdict::Converged || verdict == Verdict::ConvergedAtZero;
  res.result.likelihood = mean;
  return res;
}

// t,P_t,running_mean,window_mean,window_std,verdict
inline std::string trace_csv(const SamplerTrace& trace) {
  std::string out = "t,P_t,running_mean,window_mean,window_std,verdict\n";
  char buf[256];
  for (const auto& r : trace.rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g,%s\n", r.t, r.p_t, r.running_mean, r.window_mean,
                  r.window_std, to_string(r.verdict));
    out += buf;
  }
  return out;
}

}  // namespace ducg
