#pragma once

// Exact inference: weighted-OR conditionals, enumeration over unknown
// ancestors, linear marginal propagation, full symbolic expansion and the
// posterior normalization.

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "ducg/event_algebra.hpp"
#include "ducg/graph.hpp"

namespace ducg {

struct HypothesisResult {
  Hypothesis hypothesis;
  double likelihood = 0.0;  // Pr{E | B_kj}
  double joint = 0.0;       // Pr{B_kj, E}
  double posterior = 0.0;   // Pr{B_kj | E}
};

// x_n = sum_i (r_{n;i}/r_n) * column parent_states[i] of A_{n;i}.
inline std::vector<double> conditional_distribution(const Graph& g, VarId var,
                                                    const std::map<VarId, int>& parent_states) {
  const auto& v = g.variable(var);
  if (v.kind != VarKind::X) throw std::invalid_argument("X" + std::to_string(var) + " is not an X variable");
  std::vector<double> out(v.states, 0.0);
  const double rn = g.r_total(var);
  for (auto li : g.in_links(var)) {
    const auto& link = g.links()[li];
    int ps = 0;
    if (g.variable(link.parent).kind != VarKind::D) {
      const auto it = parent_states.find(link.parent);
      if (it == parent_states.end())
        throw std::invalid_argument("missing state for parent " + std::to_string(link.parent) + " of X" +
                                    std::to_string(var));
      ps = it->second;
    }
    const double w = link.r / rn;
    for (int s = 0; s < v.states; ++s) out[s] += w * link.matrix(s, ps);
  }
  return out;
}

namespace detail {

// Index-based view of a graph for the numeric inner loops.
struct CompiledGraph {
  struct In {
    int parent;  // index into vars
    double w;
    const Matrix* m;
  };
  std::vector<VarId> ids;
  std::vector<int> states;
  std::vector<VarKind> kinds;
  std::vector<std::vector<In>> in;
  std::vector<std::vector<int>> out;
  std::vector<int> topo;  // indices

  explicit CompiledGraph(const Graph& g) {
    for (const auto& v : g.variables()) {
      ids.push_back(v.id);
      states.push_back(v.states);
      kinds.push_back(v.kind);
    }
    in.resize(ids.size());
    out.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double rn = g.r_total(ids[i]);
      for (auto li : g.in_links(ids[i])) {
        const auto& l = g.links()[li];
        const int p = static_cast<int>(g.index_of(l.parent));
        in[i].push_back({p, l.r / rn, &l.matrix});
        out[p].push_back(static_cast<int>(i));
      }
    }
    for (VarId v : g.topological_order()) topo.push_back(static_cast<int>(g.index_of(v)));
  }

  // Probability that variable i takes state s given parent states in `st`
  // (D parents read state 0).
  double cpd(int i, int s, const std::vector<int>& st) const {
    double p = 0.0;
    for (const auto& e : in[i]) p += e.w * (*e.m)(s, kinds[e.parent] == VarKind::D ? 0 : st[e.parent]);
    return p;
  }

  void cpd_vector(int i, const std::vector<int>& st, std::vector<double>& out_vec) const {
    out_vec.assign(states[i], 0.0);
    for (const auto& e : in[i]) {
      const int ps = kinds[e.parent] == VarKind::D ? 0 : st[e.parent];
      for (int s = 0; s < states[i]; ++s) out_vec[s] += e.w * (*e.m)(s, ps);
    }
  }
};

inline void require_hypothesis(const Graph& g, const Hypothesis& h) {
  if (!g.contains(h.var) || g.variable(h.var).kind != VarKind::B)
    throw std::invalid_argument("hypothesis variable " + std::to_string(h.var) + " is not a B variable");
  if (h.state < 0 || h.state >= g.variable(h.var).states)
    throw std::invalid_argument("hypothesis state out of range for B" + std::to_string(h.var));
}

inline void require_evidence(const Graph& g, const Evidence& e) {
  auto report = check_evidence(g, e);
  if (!report.ok()) throw ValidationError(std::move(report.issues));
}

}  // namespace detail

struct EnumerationOptions {
  double max_joint_states = 1e8;
};

// Sum over joint assignments of the unknown ancestors of the evidence of the
// product of every conditional. B variables other than the hypothesis are
// summed against their priors.
inline double enumerate_likelihood(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                   const EnumerationOptions& opts = {}) {
  detail::require_hypothesis(g, h);
  detail::require_evidence(g, evidence);
  const detail::CompiledGraph cg(g);
  const std::size_t n = cg.ids.size();

  std::vector<VarId> targets;
  for (const auto& [id, s] : evidence) targets.push_back(id);
  const auto relevant = detail::reach(g, targets, false);

  std::vector<int> st(n, 0);
  std::vector<char> fixed(n, 0);
  const int hi = static_cast<int>(g.index_of(h.var));
  st[hi] = h.state;
  fixed[hi] = 1;
  for (std::size_t i = 0; i < n; ++i)
    if (cg.kinds[i] == VarKind::D) fixed[i] = 1;
  for (const auto& [id, s] : evidence) {
    const auto i = g.index_of(id);
    st[i] = s;
    fixed[i] = 1;
  }

  // free variables in topological order
  std::vector<int> order;
  double space = 1.0;
  for (int i : cg.topo) {
    if (fixed[i] || !relevant.contains(cg.ids[i])) continue;
    order.push_back(i);
    space *= cg.states[i];
  }
  if (space > opts.max_joint_states)
    throw InfeasibleError("enumeration infeasible: " + std::to_string(space) + " joint states exceed cap " +
                          std::to_string(opts.max_joint_states));

  std::vector<int> pos(n, -1);
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = static_cast<int>(k);

  // evidence factors attached to the step after which all their parents are set
  std::vector<std::vector<int>> ready(order.size() + 1);
  for (const auto& [id, s] : evidence) {
    const int e = static_cast<int>(g.index_of(id));
    int step = -1;
    for (const auto& in : cg.in[e]) step = std::max(step, pos[in.parent]);
    ready[step + 1].push_back(e);
  }

  auto evidence_factor = [&](std::size_t slot) {
    double f = 1.0;
    for (int e : ready[slot]) f *= cg.cpd(e, st[e], st);
    return f;
  };

  const double base = evidence_factor(0);
  if (order.empty() || base == 0.0) return base;

  std::vector<std::vector<double>> dist(order.size());
  std::vector<double> partial(order.size() + 1, 0.0);
  std::vector<int> choice(order.size(), -1);
  partial[0] = base;
  double total = 0.0;
  std::size_t k = 0;
  // iterative depth-first odometer
  auto load = [&](std::size_t depth) {
    const int v = order[depth];
    if (cg.kinds[v] == VarKind::B) {
      dist[depth] = g.variable(cg.ids[v]).prior;
    } else {
      cg.cpd_vector(v, st, dist[depth]);
    }
    choice[depth] = -1;
  };
  load(0);
  for (;;) {
    const int v = order[k];
    int& c = choice[k];
    ++c;
    while (c < cg.states[v] && dist[k][c] == 0.0) ++c;
    if (c >= cg.states[v]) {
      if (k == 0) break;
      --k;
      continue;
    }
    st[v] = c;
    const double p = partial[k] * dist[k][c] * evidence_factor(k + 1);
    if (k + 1 == order.size()) {
      total += p;
      continue;
    }
    if (p == 0.0) continue;
    partial[k + 1] = p;
    ++k;
    load(k);
  }
  return total;
}

struct PropagationOptions {
  // Treat these variables as one-hot at their observed state (the sampler's
  // view, where observed variables are clamped rather than drawn).
  const Evidence* clamp = nullptr;
};

// Pr{X_n = s | B_kj} for every variable, in one topological pass. Exact
// because each conditional is linear in each parent's state indicator.
inline std::map<VarId, std::vector<double>> marginal_propagation(const Graph& g, const Hypothesis& h,
                                                                 const PropagationOptions& opts = {}) {
  detail::require_hypothesis(g, h);
  std::map<VarId, std::vector<double>> m;
  for (VarId id : g.topological_order()) {
    const auto& v = g.variable(id);
    std::vector<double> p(v.states, 0.0);
    if (opts.clamp && opts.clamp->contains(id)) {
      p.at(opts.clamp->at(id)) = 1.0;
    } else if (v.kind == VarKind::B) {
      if (id == h.var) {
        p[h.state] = 1.0;
      } else {
        p = v.prior;
      }
    } else if (v.kind == VarKind::D) {
      p[0] = 1.0;
    } else {
      const double rn = g.r_total(id);
      for (auto li : g.in_links(id)) {
        const auto& link = g.links()[li];
        const auto& pm = m.at(link.parent);
        const double w = link.r / rn;
        for (int s = 0; s < v.states; ++s)
          for (int j = 0; j < link.matrix.cols(); ++j) p[s] += w * link.matrix(s, j) * pm[j];
      }
    }
    m.emplace(id, std::move(p));
  }
  return m;
}

struct SymbolicOptions {
  std::size_t max_terms = 1000000;
  std::size_t max_work = 100000000;
};

// Full expansion of the evidence product down to B/D literals, with
// A-literals kept symbolic.
inline SymbolicExpr full_expansion(const Graph& g, const Evidence& evidence, const SymbolicOptions& opts = {}) {
  detail::require_evidence(g, evidence);
  ExpansionBudget budget{opts.max_terms, opts.max_work};
  return Expander(g).expand_fully(evidence_product(evidence), &budget);
}

inline double symbolic_likelihood(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                  const SymbolicOptions& opts = {}) {
  detail::require_hypothesis(g, h);
  return evaluate(full_expansion(g, evidence, opts), g, {}, h);
}

// Prior b_kj of a hypothesis.
inline double prior_of(const Graph& g, const Hypothesis& h) {
  const auto& prior = g.variable(h.var).prior;
  return h.state < static_cast<int>(prior.size()) ? prior[h.state] : 0.0;
}

// Fills joint and posterior from likelihood and the stated priors.
inline std::vector<HypothesisResult> posterior(std::vector<HypothesisResult> results,
                                               const std::vector<double>& priors) {
  if (priors.size() != results.size()) throw std::invalid_argument("one prior per hypothesis required");
  double total = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].joint = results[i].likelihood * priors[i];
    total += results[i].joint;
  }
  if (!(total > 0.0)) throw HypothesisError("evidence impossible under all hypotheses");
  for (auto& r : results) r.posterior = r.joint / total;
  return results;
}

inline std::vector<HypothesisResult> posterior(std::vector<HypothesisResult> results, const Graph& g) {
  std::vector<double> priors;
  for (const auto& r : results) priors.push_back(prior_of(g, r.hypothesis));
  return posterior(std::move(results), priors);
}

}  // namespace ducg
