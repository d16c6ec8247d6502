#pragma once

// Sum-of-products event algebra over B, D, A (functional) and X literals.
//
// A term is coefficient * product of literals. The coefficient carries the
// r-ratios picked up during expansion; an A-literal evaluates to the bare
// matrix entry a_{nk;ij} and remembers its own ratio so that a duplicated
// A-literal can give the ratio back when idempotency removes the copy.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "ducg/graph.hpp"

namespace ducg {

enum class LitKind : int { B = 0, D = 1, X = 2, A = 3 };

inline constexpr int kUnknownState = -1;

struct Literal {
  LitKind kind = LitKind::X;
  VarId var = 0;          // the variable the literal talks about (child for A)
  int state = 0;          // kUnknownState only for X
  VarId parent = -1;      // A only
  int parent_state = -1;  // A only
  double weight = 1.0;    // A only: r_{n;i}/r_n, not part of identity

  static Literal b(VarId v, int s) { return {LitKind::B, v, s}; }
  static Literal d(VarId v) { return {LitKind::D, v, 0}; }
  static Literal x(VarId v, int s) { return {LitKind::X, v, s}; }
  static Literal a(VarId child, int s, VarId parent, int ps, double w) {
    return {LitKind::A, child, s, parent, ps, w};
  }

  auto key() const { return std::tie(var, kind, state, parent, parent_state); }
  friend bool operator==(const Literal& l, const Literal& r) { return l.key() == r.key(); }
  friend bool operator<(const Literal& l, const Literal& r) { return l.key() < r.key(); }
};

inline std::string to_string(const Literal& l) {
  const std::string s = std::to_string(l.state);
  switch (l.kind) {
    case LitKind::B: return "B(" + std::to_string(l.var) + "," + s + ")";
    case LitKind::D: return "D(" + std::to_string(l.var) + ")";
    case LitKind::X:
      return "X(" + std::to_string(l.var) + "," + (l.state == kUnknownState ? std::string("?") : s) + ")";
    case LitKind::A:
      return "A(" + std::to_string(l.var) + "," + s + ";" + std::to_string(l.parent) + "," +
             std::to_string(l.parent_state) + ")";
  }
  return "?";
}

struct Term {
  double coef = 1.0;
  std::vector<Literal> lits;  // canonical: sorted, normalized
};

struct LiteralsHash {
  std::size_t operator()(const std::vector<Literal>& lits) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::size_t v) { h = (h ^ v) * 0x100000001b3ULL; };
    for (const auto& l : lits) {
      mix(static_cast<std::size_t>(l.kind));
      mix(static_cast<std::size_t>(l.var));
      mix(static_cast<std::size_t>(l.state + 1));
      mix(static_cast<std::size_t>(l.parent + 1));
      mix(static_cast<std::size_t>(l.parent_state + 1));
    }
    return h;
  }
};

// Puts literals in canonical order and applies the absorption rules:
//  - identical literals collapse (an A duplicate returns its ratio);
//  - two states of one B or X variable annihilate the term;
//  - two different A-literals for the same child annihilate the term, since
//    under the weighted OR a child's state comes from a single cause;
//  - an A-literal for child n asserts n's state: a matching X(n,.) is
//    absorbed, a conflicting one annihilates;
//  - X(n,?) is absorbed by any literal fixing n's state.
// Returns false when the term is zero.
inline bool normalize(Term& t) {
  auto& v = t.lits;
  std::sort(v.begin(), v.end());
  std::vector<Literal> out;
  out.reserve(v.size());
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j].var == v[i].var) ++j;
    // group [i, j) refers to one variable; sorted by kind then state
    const Literal* a = nullptr;
    const Literal* x_fixed = nullptr;
    bool x_unknown = false;
    for (std::size_t k = i; k < j; ++k) {
      const Literal& l = v[k];
      switch (l.kind) {
        case LitKind::B:
          if (!out.empty() && out.back().var == l.var && out.back().kind == LitKind::B) {
            if (out.back().state != l.state) return false;
          } else {
            out.push_back(l);
          }
          break;
        case LitKind::D:
          if (out.empty() || out.back().var != l.var || out.back().kind != LitKind::D) out.push_back(l);
          break;
        case LitKind::X:
          if (l.state == kUnknownState) {
            x_unknown = true;
          } else if (x_fixed && x_fixed->state != l.state) {
            return false;
          } else {
            x_fixed = &l;
          }
          break;
        case LitKind::A:
          if (a) {
            if (!(*a == l)) return false;
            t.coef /= l.weight;
          } else {
            a = &l;
          }
          break;
      }
    }
    if (a) {
      if (x_fixed && x_fixed->state != a->state) return false;
      out.push_back(*a);
    } else if (x_fixed) {
      out.push_back(*x_fixed);
    } else if (x_unknown) {
      out.push_back(Literal::x(v[i].var, kUnknownState));
    }
    i = j;
  }
  // `out` is still sorted: within a variable A sorts after X and only one of
  // them survives, B/D groups never mix with X/A groups in a valid graph.
  std::sort(out.begin(), out.end());
  v = std::move(out);
  return true;
}

inline std::optional<Term> multiply_terms(const Term& a, const Term& b) {
  Term t;
  t.coef = a.coef * b.coef;
  t.lits.reserve(a.lits.size() + b.lits.size());
  t.lits.insert(t.lits.end(), a.lits.begin(), a.lits.end());
  t.lits.insert(t.lits.end(), b.lits.begin(), b.lits.end());
  if (!normalize(t) || !(t.coef > 0.0)) return std::nullopt;
  return t;
}

class SymbolicExpr {
 public:
  SymbolicExpr() = default;

  static SymbolicExpr unit() {
    SymbolicExpr e;
    e.add_normalized(Term{});
    return e;
  }

  static SymbolicExpr literal(const Literal& l, double coef = 1.0) {
    SymbolicExpr e;
    e.add(Term{coef, {l}});
    return e;
  }

  const std::vector<Term>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }

  // Adds a term, normalizing it and merging it into a like term if present.
  void add(Term t) {
    if (!normalize(t) || !(t.coef > 0.0)) return;
    add_normalized(std::move(t));
  }

  void add_normalized(Term t) {
    const auto [it, inserted] = index_.try_emplace(t.lits, terms_.size());
    if (inserted) {
      terms_.push_back(std::move(t));
    } else {
      terms_[it->second].coef += t.coef;
    }
  }

 private:
  std::vector<Term> terms_;
  std::unordered_map<std::vector<Literal>, std::size_t, LiteralsHash> index_;
};

inline SymbolicExpr multiply(const SymbolicExpr& a, const SymbolicExpr& b) {
  SymbolicExpr out;
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms())
      if (auto t = multiply_terms(ta, tb)) out.add_normalized(std::move(*t));
  return out;
}

inline SymbolicExpr add(const SymbolicExpr& a, const SymbolicExpr& b) {
  SymbolicExpr out = a;
  for (const auto& t : b.terms()) out.add_normalized(t);
  return out;
}

// Limits for one expansion run. `work` counts term products attempted.
struct ExpansionBudget {
  std::size_t max_terms = 0;  // 0 = unlimited
  std::size_t max_work = 0;   // 0 = unlimited
  std::size_t work = 0;
};

struct ExpandOptions {
  // Multiply r-ratio times matrix entry into the coefficient instead of
  // keeping A-literals. Numerically identical; terms stay smaller.
  bool fold_functional = false;
};

// Expansion of X-literals to their parents, bound to one graph.
class Expander {
 public:
  explicit Expander(const Graph& g, ExpandOptions opts = {}) : g_(&g), opts_(opts) {
    const auto layers = layer_assignment(g);
    for (const auto& [id, l] : layers) layer_.emplace(id, l);
  }

  const Graph& graph() const noexcept { return *g_; }
  int layer(VarId v) const { return layer_.at(v); }

  // One term per (parent, parent state) pair, summed over the child's states
  // when `state` is kUnknownState.
  const SymbolicExpr& expand_event(VarId var, int state) const {
    const auto key = std::make_pair(var, state);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const auto& v = g_->variable(var);
    if (v.kind != VarKind::X)
      throw std::invalid_argument(std::string(to_string(v.kind)) + std::to_string(var) + " is not expandable");
    SymbolicExpr e;
    const double rn = g_->r_total(var);
    for (int s = 0; s < v.states; ++s) {
      if (state != kUnknownState && s != state) continue;
      for (auto li : g_->in_links(var)) {
        const auto& link = g_->links()[li];
        const auto& p = g_->variable(link.parent);
        const double w = link.r / rn;
        for (int j = 0; j < p.states; ++j) {
          Term t;
          const double a = link.matrix(s, j);
          if (opts_.fold_functional) {
            t.coef = w * a;
            if (!(t.coef > 0.0)) continue;
          } else {
            t.coef = w;
            t.lits.push_back(Literal::a(var, s, link.parent, j, w));
          }
          switch (p.kind) {
            case VarKind::B: t.lits.push_back(Literal::b(p.id, j)); break;
            case VarKind::D: t.lits.push_back(Literal::d(p.id)); break;
            case VarKind::X: t.lits.push_back(Literal::x(p.id, j)); break;
          }
          e.add(std::move(t));
        }
      }
    }
    return cache_.emplace(key, std::move(e)).first->second;
  }

  // Largest layer among a term's X-literals, or -1 if it has none.
  int max_x_layer(const Term& t) const {
    int best = -1;
    for (const auto& l : t.lits)
      if (l.kind == LitKind::X) best = std::max(best, layer(l.var));
    return best;
  }

  // Replaces the X-literals at layer `at` of `t` by their expansions and adds
  // the resulting terms to `out`. Same-layer variables are never ancestors of
  // one another, so no variable is expanded twice within a term.
  void expand_term_at(const Term& t, int at, SymbolicExpr& out, ExpansionBudget* budget = nullptr) const {
    Term rest{t.coef, {}};
    std::vector<const SymbolicExpr*> factors;
    for (const auto& l : t.lits) {
      if (l.kind == LitKind::X && layer(l.var) == at) {
        factors.push_back(&expand_event(l.var, l.state));
      } else {
        rest.lits.push_back(l);
      }
    }
    expand_product(rest, factors, 0, out, budget);
  }

  // One step: every term has its deepest-layer X-literals expanded. Terms
  // without X-literals pass through unchanged.
  SymbolicExpr expand_layer(const SymbolicExpr& e) const {
    SymbolicExpr out;
    for (const auto& t : e.terms()) {
      const int at = max_x_layer(t);
      if (at < 0) {
        out.add_normalized(t);
      } else {
        expand_term_at(t, at, out);
      }
    }
    return out;
  }

  // Expands every term at layer `at` only (terms whose literals all sit below
  // are kept). Throws InfeasibleError when the budget runs out.
  SymbolicExpr expand_at_layer(const SymbolicExpr& e, int at, ExpansionBudget* budget = nullptr) const {
    SymbolicExpr out;
    for (const auto& t : e.terms()) expand_term_at(t, at, out, budget);
    return out;
  }

  SymbolicExpr expand_fully(SymbolicExpr e, ExpansionBudget* budget = nullptr) const {
    for (;;) {
      SymbolicExpr out;
      bool any = false;
      for (const auto& t : e.terms()) {
        const int at = max_x_layer(t);
        if (at < 0) {
          out.add_normalized(t);
        } else {
          any = true;
          expand_term_at(t, at, out, budget);
        }
      }
      if (!any) return e;
      e = std::move(out);
    }
  }

 private:
  void expand_product(const Term& acc, const std::vector<const SymbolicExpr*>& factors, std::size_t i,
                      SymbolicExpr& out, ExpansionBudget* budget) const {
    if (i == factors.size()) {
      out.add_normalized(acc);
      if (budget && budget->max_terms && out.size() > budget->max_terms)
        throw InfeasibleError("expansion exceeded " + std::to_string(budget->max_terms) + " terms");
      return;
    }
    for (const auto& f : factors[i]->terms()) {
      if (budget && budget->max_work && ++budget->work > budget->max_work)
        throw InfeasibleError("expansion exceeded " + std::to_string(budget->max_work) + " term products");
      if (auto t = multiply_terms(acc, f)) expand_product(*t, factors, i + 1, out, budget);
    }
  }

  const Graph* g_;
  ExpandOptions opts_;
  std::unordered_map<VarId, int> layer_;
  mutable std::map<std::pair<VarId, int>, SymbolicExpr> cache_;
};

inline SymbolicExpr expand_event(const Graph& g, VarId var, int state) {
  return Expander(g).expand_event(var, state);
}

inline SymbolicExpr expand_layer(const Graph& g, const SymbolicExpr& e) { return Expander(g).expand_layer(e); }

// Product of X(e, k) over the evidence.
inline SymbolicExpr evidence_product(const Evidence& evidence) {
  Term t;
  for (const auto& [id, s] : evidence) t.lits.push_back(Literal::x(id, s));
  SymbolicExpr e;
  e.add(std::move(t));
  return e;
}

inline int f_order(const Term& t) {
  return static_cast<int>(std::count_if(t.lits.begin(), t.lits.end(),
                                        [](const Literal& l) { return l.kind == LitKind::A; }));
}

inline int distinct_x_count(const Term& t) {
  int n = 0;
  for (std::size_t i = 0; i < t.lits.size(); ++i)
    if (t.lits[i].kind == LitKind::X && (i == 0 || t.lits[i - 1].var != t.lits[i].var)) ++n;
  return n;
}

// Histogram of terms by number of distinct X variables. `by_x_count` counts
// term shapes (which links and which X variables occur, states ignored), the
// granularity at which expansion growth is usually tallied; `resolved_by_x_count`
// counts the state-resolved terms actually stored.
struct TermCensus {
  std::map<int, std::size_t> by_x_count;
  std::map<int, std::size_t> resolved_by_x_count;
  std::size_t shapes = 0;
  std::size_t terms = 0;
  int max_f_order = 0;

  std::size_t count(int x) const {
    const auto it = by_x_count.find(x);
    return it == by_x_count.end() ? 0 : it->second;
  }
  std::size_t one_x() const { return count(1); }
  std::size_t two_x() const { return count(2); }
  std::size_t three_x() const { return count(3); }
};

inline TermCensus census(const SymbolicExpr& e) {
  TermCensus c;
  std::set<std::vector<std::tuple<int, VarId, VarId>>> shapes;
  for (const auto& t : e.terms()) {
    const int x = distinct_x_count(t);
    ++c.resolved_by_x_count[x];
    ++c.terms;
    c.max_f_order = std::max(c.max_f_order, f_order(t));
    std::vector<std::tuple<int, VarId, VarId>> shape;
    for (const auto& l : t.lits) shape.emplace_back(static_cast<int>(l.kind), l.var, l.parent);
    shape.erase(std::unique(shape.begin(), shape.end()), shape.end());
    if (shapes.insert(std::move(shape)).second) ++c.by_x_count[x];
  }
  c.shapes = shapes.size();
  return c;
}

// Probabilities bound to X-literals, keyed by (variable, state).
using XValues = std::map<std::pair<VarId, int>, double>;

// Numeric value: coefficient times matrix entries, priors and X bindings;
// D-literals and X(n,?) contribute 1. With a hypothesis, its B variable is
// pinned to the hypothesised state instead of using the prior.
inline double evaluate(const SymbolicExpr& e, const Graph& g, const XValues& x_values = {},
                       const std::optional<Hypothesis>& hypothesis = std::nullopt) {
  double sum = 0.0;
  for (const auto& t : e.terms()) {
    double v = t.coef;
    for (const auto& l : t.lits) {
      switch (l.kind) {
        case LitKind::B:
          if (hypothesis && hypothesis->var == l.var) {
            v *= hypothesis->state == l.state ? 1.0 : 0.0;
          } else {
            const auto& prior = g.variable(l.var).prior;
            if (l.state >= static_cast<int>(prior.size()))
              throw std::invalid_argument("B" + std::to_string(l.var) + " has no prior for state " +
                                          std::to_string(l.state));
            v *= prior[l.state];
          }
          break;
        case LitKind::D: break;
        case LitKind::A: {
          const auto* link = g.find_link(l.var, l.parent);
          if (!link) throw std::invalid_argument("no link for " + to_string(l));
          v *= (*link).matrix(l.state, l.parent_state);
          break;
        }
        case LitKind::X: {
          if (l.state == kUnknownState) break;
          const auto it = x_values.find({l.var, l.state});
          if (it == x_values.end()) throw std::invalid_argument("unbound X-literal " + to_string(l));
          v *= it->second;
          break;
        }
      }
    }
    sum += v;
  }
  return sum;
}

inline int count_a_literals(const SymbolicExpr& e) {
  int n = 0;
  for (const auto& t : e.terms()) n += f_order(t);
  return n;
}

// One line per term, canonically sorted: "<coef> <lit> <lit> ...".
inline std::string dump(const SymbolicExpr& e) {
  std::vector<const Term*> order;
  for (const auto& t : e.terms()) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Term* a, const Term* b) {
    if (a->lits != b->lits) return std::lexicographical_compare(a->lits.begin(), a->lits.end(), b->lits.begin(), b->lits.end());
    return a->coef < b->coef;
  });
  std::string out;
  char buf[40];
  for (const Term* t : order) {
    std::snprintf(buf, sizeof buf, "%.9g", t->coef);
    out += buf;
    for (const auto& l : t->lits) out += " " + to_string(l);
    out += "\n";
  }
  return out;
}

}  // namespace ducg
