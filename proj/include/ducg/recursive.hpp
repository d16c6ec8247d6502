#pragma once

// Layer-by-layer exact inference. Evidence is partitioned by layer; the
// evidence product is built from the deepest layer upward, substituting each
// layer's observed states before expanding that layer into the one above.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ducg/event_algebra.hpp"
#include "ducg/exact.hpp"
#include "ducg/graph.hpp"

namespace ducg {

struct LayerPlan {
  std::map<int, std::vector<VarId>> layers;  // E(l), l >= 1
  std::map<int, std::set<VarId>> aeb;        // evidence/B/D parents of E(l)
  std::map<VarId, int> layer_of;
  int l_max = 0;
  // every parent of an E(l) member is in E(l-1), the hypothesis B, or D
  bool adjacent_layers_only = false;
  // every parent of every evidence node is evidence, the hypothesis B, or D
  bool parents_all_known = false;
};

inline LayerPlan plan(const Graph& g, const Evidence& evidence, const Hypothesis& h) {
  detail::require_hypothesis(g, h);
  LayerPlan p;
  p.layer_of = layer_assignment(g, h.var);
  p.adjacent_layers_only = true;
  p.parents_all_known = true;
  for (const auto& [id, s] : evidence) {
    const int l = p.layer_of.at(id);
    p.layers[l].push_back(id);
    p.l_max = std::max(p.l_max, l);
    for (VarId parent : g.parents(id)) {
      const auto kind = g.variable(parent).kind;
      const bool source = kind == VarKind::D || (kind == VarKind::B && parent == h.var);
      const bool observed = evidence.contains(parent);
      if (source || observed) p.aeb[l].insert(parent);
      if (!source && !observed) p.parents_all_known = false;
      if (!source && !(observed && p.layer_of.at(parent) == l - 1)) p.adjacent_layers_only = false;
    }
  }
  return p;
}

// Product over evidence nodes of sum over their (all known) parents of
// f_{nk;ij}; requires parents_all_known.
inline double likelihood_layered(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                 const LayerPlan& p) {
  if (!p.parents_all_known)
    throw NotApplicableError("assumptions not satisfied; use recursive_general or sampling");
  double out = 1.0;
  for (const auto& [l, members] : p.layers) {
    for (VarId e : members) {
      std::map<VarId, int> ps;
      for (VarId parent : g.parents(e)) {
        if (parent == h.var) ps[parent] = h.state;
        else if (const auto it = evidence.find(parent); it != evidence.end()) ps[parent] = it->second;
      }
      out *= conditional_distribution(g, e, ps)[evidence.at(e)];
    }
  }
  return out;
}

inline double likelihood_layered(const Graph& g, const Evidence& evidence, const Hypothesis& h) {
  return likelihood_layered(g, evidence, h, plan(g, evidence, h));
}

struct RecursiveOptions {
  std::size_t max_terms = 1000000;
  std::size_t max_work = 100000000;  // term products attempted over the run
};

struct RecursiveResult {
  double likelihood = 0.0;
  std::size_t peak_terms = 0;  // largest intermediate expression
  std::size_t steps = 0;
  std::size_t work = 0;  // term products attempted
};

// Sweeps layers l_max..1: multiply in X(e,k) for e in E(l), then expand
// every layer-l literal one layer up. Functional events are folded into the
// coefficients, so the intermediate expression is a weighted sum over
// joint states of the current frontier.
inline RecursiveResult recursive_general_detailed(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                                  const LayerPlan& p, const RecursiveOptions& opts = {}) {
  detail::require_hypothesis(g, h);
  detail::require_evidence(g, evidence);
  const Expander ex(g, ExpandOptions{.fold_functional = true});
  RecursiveResult res;
  ExpansionBudget budget{opts.max_terms, opts.max_work};
  SymbolicExpr exp = SymbolicExpr::unit();
  for (int l = p.l_max; l >= 1; --l) {
    if (const auto it = p.layers.find(l); it != p.layers.end()) {
      Evidence layer_ev;
      for (VarId e : it->second) layer_ev.emplace(e, evidence.at(e));
      exp = multiply(exp, evidence_product(layer_ev));
    }
    try {
      exp = ex.expand_at_layer(exp, l, &budget);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError(std::string("recursion infeasible: ") + e.what());
    }
    res.peak_terms = std::max(res.peak_terms, exp.size());
    ++res.steps;
  }
  res.likelihood = evaluate(exp, g, {}, h);
  res.work = budget.work;
  return res;
}

inline double recursive_general(const Graph& g, const Evidence& evidence, const Hypothesis& h, const LayerPlan& p,
                                const RecursiveOptions& opts = {}) {
  return recursive_general_detailed(g, evidence, h, p, opts).likelihood;
}

inline double recursive_general(const Graph& g, const Evidence& evidence, const Hypothesis& h,
                                const RecursiveOptions& opts = {}) {
  return recursive_general(g, evidence, h, plan(g, evidence, h), opts);
}

// Evidence product written as nested link events F(child;parent). In
// single-shot form every factor is expanded down to B/D parents. In
// recursive form a factor stops at parents that are themselves evidence,
// because their own factor already accounts for them.
enum class FactoredMode { SingleShot, Recursive };

struct FactorTree {
  struct Branch {
    VarId parent = 0;
    std::vector<FactorTree> sub;  // empty when the branch ends at this parent
  };
  VarId var = 0;
  std::vector<Branch> branches;

  int a_literal_count() const {
    int n = 0;
    for (const auto& b : branches) {
      ++n;
      for (const auto& s : b.sub) n += s.a_literal_count();
    }
    return n;
  }

  std::string render() const {
    std::string out;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      if (i) out += " + ";
      const auto& b = branches[i];
      out += "F(" + std::to_string(var) + ";" + std::to_string(b.parent) + ")";
      for (const auto& s : b.sub) {
        const std::string inner = s.render();
        out += s.branches.size() > 1 ? "·(" + inner + ")" : "·" + inner;
      }
    }
    return out;
  }
};

struct FactoredExpr {
  FactoredMode mode = FactoredMode::SingleShot;
  std::vector<FactorTree> factors;  // one per evidence node, ascending id

  int a_literal_count() const {
    int n = 0;
    for (const auto& f : factors) n += f.a_literal_count();
    return n;
  }

  std::string render() const {
    std::string out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (i) out += "·";
      const std::string inner = factors[i].render();
      out += factors[i].branches.size() > 1 ? "(" + inner + ")" : inner;
    }
    return out;
  }
};

namespace detail {

inline FactorTree build_factor(const Graph& g, VarId var, const Evidence& evidence, FactoredMode mode) {
  FactorTree t;
  t.var = var;
  for (VarId p : g.parents(var)) {
    FactorTree::Branch b;
    b.parent = p;
    const bool source = g.variable(p).kind != VarKind::X;
    const bool stop = source || (mode == FactoredMode::Recursive && evidence.contains(p));
    if (!stop) b.sub.push_back(build_factor(g, p, evidence, mode));
    t.branches.push_back(std::move(b));
  }
  return t;
}

// Sum-of-products form of a factor with the factor's variable at `state`.
inline SymbolicExpr flatten_factor(const Graph& g, const FactorTree& t, int state) {
  SymbolicExpr out;
  const double rn = g.r_total(t.var);
  for (const auto& b : t.branches) {
    const auto* link = g.find_link(t.var, b.parent);
    const auto& pv = g.variable(b.parent);
    const double w = link->r / rn;
    for (int j = 0; j < pv.states; ++j) {
      const Term head{w, {Literal::a(t.var, state, b.parent, j, w)}};
      if (!b.sub.empty()) {
        const SymbolicExpr sub = flatten_factor(g, b.sub.front(), j);
        for (const auto& st : sub.terms())
          if (auto m = multiply_terms(head, st)) out.add_normalized(std::move(*m));
        continue;
      }
      Term term = head;
      switch (pv.kind) {
        case VarKind::B: term.lits.push_back(Literal::b(b.parent, j)); break;
        case VarKind::D: term.lits.push_back(Literal::d(b.parent)); break;
        case VarKind::X: term.lits.push_back(Literal::x(b.parent, j)); break;
      }
      out.add(std::move(term));
    }
  }
  return out;
}

}  // namespace detail

inline FactoredExpr factored_expression(const Graph& g, const Evidence& evidence, FactoredMode mode) {
  FactoredExpr f;
  f.mode = mode;
  for (const auto& [id, s] : evidence) f.factors.push_back(detail::build_factor(g, id, evidence, mode));
  return f;
}

// Sum-of-products form of the whole factored product at the observed states.
inline SymbolicExpr flatten(const Graph& g, const Evidence& evidence, const FactoredExpr& f) {
  SymbolicExpr out = SymbolicExpr::unit();
  for (const auto& t : f.factors) out = multiply(out, detail::flatten_factor(g, t, evidence.at(t.var)));
  return out;
}

}  // namespace ducg
