#pragma once

// Graph data model: variables, weighted causal links, validation, hypothesis
// sub-graph extraction and longest-path layering.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ducg/errors.hpp"

namespace ducg {

using VarId = int;

inline constexpr double kColumnTolerance = 1e-9;

// Dense row-major matrix. For a causal link, rows index child states and
// columns index parent states, so column j is the child distribution caused
// by parent state j.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows_; ++r) {
      if (static_cast<int>(rows[r].size()) != m.cols_)
        throw std::invalid_argument("ragged matrix rows");
      std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(r) * m.cols_);
    }
    return m;
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double column_sum(int c) const {
    double s = 0.0;
    for (int r = 0; r < rows_; ++r) s += (*this)(r, c);
    return s;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

enum class VarKind { B, X, D };

inline const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::B: return "B";
    case VarKind::X: return "X";
    case VarKind::D: return "D";
  }
  return "?";
}

struct Variable {
  VarId id = 0;
  VarKind kind = VarKind::X;
  int states = 2;
  std::vector<double> prior;  // B only
  std::optional<int> observed;

  friend bool operator==(const Variable&, const Variable&) = default;
};

struct CausalLink {
  VarId child = 0;
  VarId parent = 0;
  double r = 1.0;
  Matrix matrix;

  friend bool operator==(const CausalLink&, const CausalLink&) = default;
};

// Observed states keyed by variable id.
using Evidence = std::map<VarId, int>;

// One root-cause candidate B_kj.
struct Hypothesis {
  VarId var = 0;
  int state = 0;

  friend auto operator<=>(const Hypothesis&, const Hypothesis&) = default;
};

inline std::string to_string(const Hypothesis& h) {
  return "B" + std::to_string(h.var) + "=" + std::to_string(h.state);
}

// Immutable after construction. Structural indices are built eagerly; the
// constructor never throws on invariant violations, `validate` reports them.
class Graph {
 public:
  Graph() = default;

  Graph(std::vector<Variable> variables, std::vector<CausalLink> links)
      : variables_(std::move(variables)), links_(std::move(links)) {
    std::stable_sort(variables_.begin(), variables_.end(),
                     [](const Variable& a, const Variable& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < variables_.size(); ++i) index_.try_emplace(variables_[i].id, i);
    in_.resize(variables_.size());
    out_.resize(variables_.size());
    r_total_.assign(variables_.size(), 0.0);
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const auto c = index_.find(links_[l].child);
      const auto p = index_.find(links_[l].parent);
      if (c == index_.end() || p == index_.end()) continue;
      in_[c->second].push_back(l);
      out_[p->second].push_back(l);
      r_total_[c->second] += links_[l].r;
      link_index_.try_emplace(pair_key(links_[l].child, links_[l].parent), l);
    }
    build_topological_order();
  }

  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const std::vector<CausalLink>& links() const noexcept { return links_; }
  std::size_t size() const noexcept { return variables_.size(); }

  bool contains(VarId id) const { return index_.contains(id); }

  std::size_t index_of(VarId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown variable id " + std::to_string(id));
    return it->second;
  }

  const Variable& variable(VarId id) const { return variables_[index_of(id)]; }

  // Indices into links() of the links whose child (in_links) or parent
  // (out_links) is `id`, in document order.
  std::span<const std::size_t> in_links(VarId id) const { return in_[index_of(id)]; }
  std::span<const std::size_t> out_links(VarId id) const { return out_[index_of(id)]; }

  // r_n: sum of r over the incoming links of `id`.
  double r_total(VarId id) const { return r_total_[index_of(id)]; }

  const CausalLink* find_link(VarId child, VarId parent) const {
    const auto it = link_index_.find(pair_key(child, parent));
    return it == link_index_.end() ? nullptr : &links_[it->second];
  }

  std::vector<VarId> parents(VarId id) const {
    std::vector<VarId> out;
    for (auto l : in_links(id)) out.push_back(links_[l].parent);
    return out;
  }

  std::vector<VarId> children(VarId id) const {
    std::vector<VarId> out;
    for (auto l : out_links(id)) out.push_back(links_[l].child);
    return out;
  }

  bool is_acyclic() const noexcept { return topo_.has_value(); }

  // Parents before children; ties broken by ascending id.
  const std::vector<VarId>& topological_order() const {
    if (!topo_) throw std::logic_error("graph contains a cycle");
    return *topo_;
  }

  // Observed states declared on the variables themselves.
  Evidence observed() const {
    Evidence e;
    for (const auto& v : variables_)
      if (v.observed) e.emplace(v.id, *v.observed);
    return e;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.variables_ == b.variables_ && a.links_ == b.links_;
  }

 private:
  static std::uint64_t pair_key(VarId child, VarId parent) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(child)) << 32) |
           static_cast<std::uint32_t>(parent);
  }

  void build_topological_order() {
    std::vector<std::size_t> pending(variables_.size(), 0);
    for (std::size_t i = 0; i < variables_.size(); ++i) pending[i] = in_[i].size();
    std::priority_queue<VarId, std::vector<VarId>, std::greater<>> ready;
    for (std::size_t i = 0; i < variables_.size(); ++i)
      if (pending[i] == 0) ready.push(variables_[i].id);
    std::vector<VarId> order;
    while (!ready.empty()) {
      const VarId v = ready.top();
      ready.pop();
      order.push_back(v);
      for (auto l : out_[index_.at(v)]) {
        const auto c = index_.at(links_[l].child);
        if (--pending[c] == 0) ready.push(links_[l].child);
      }
    }
    if (order.size() == variables_.size()) topo_ = std::move(order);
  }

  std::vector<Variable> variables_;
  std::vector<CausalLink> links_;
  std::unordered_map<VarId, std::size_t> index_;
  std::unordered_map<std::uint64_t, std::size_t> link_index_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<double> r_total_;
  std::optional<std::vector<VarId>> topo_;
};

struct ValidationOptions {
  double column_tolerance = kColumnTolerance;
};

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const noexcept { return issues.empty(); }
};

inline ValidationReport validate(const Graph& g, const ValidationOptions& opts = {}) {
  ValidationReport report;
  auto issue = [&](std::string s) { report.issues.push_back(std::move(s)); };

  std::set<VarId> seen;
  for (const auto& v : g.variables()) {
    const std::string name = std::string(to_string(v.kind)) + std::to_string(v.id);
    if (v.id < 0) issue(name + ": negative id");
    if (!seen.insert(v.id).second) issue("duplicate variable id " + std::to_string(v.id));
    if (v.kind == VarKind::D) {
      if (v.states != 1) issue(name + ": D variable must have exactly 1 state");
    } else if (v.states < 2) {
      issue(name + ": state count must be at least 2");
    }
    if (v.kind == VarKind::B) {
      if (static_cast<int>(v.prior.size()) != v.states) {
        issue(name + ": prior length " + std::to_string(v.prior.size()) + " does not match " +
              std::to_string(v.states) + " states");
      } else {
        double sum = 0.0;
        for (double p : v.prior) {
          if (!(p >= 0.0 && p <= 1.0)) issue(name + ": prior entry outside [0,1]");
          sum += p;
        }
        if (sum > 1.0 + opts.column_tolerance) issue(name + ": prior sums to more than 1");
      }
    } else if (!v.prior.empty()) {
      issue(name + ": prior is only allowed on B variables");
    }
    if (v.observed) {
      if (v.kind != VarKind::X) issue(name + ": only X variables can be observed");
      if (*v.observed < 0 || *v.observed >= v.states) issue(name + ": observed state out of range");
    }
  }

  std::set<std::pair<VarId, VarId>> pairs;
  for (std::size_t l = 0; l < g.links().size(); ++l) {
    const auto& link = g.links()[l];
    const std::string name = "link " + std::to_string(link.parent) + "->" + std::to_string(link.child);
    if (!pairs.emplace(link.child, link.parent).second) issue(name + ": duplicate link");
    if (!(link.r > 0.0) || !std::isfinite(link.r)) issue(name + ": r must be positive");
    const bool has_child = g.contains(link.child);
    const bool has_parent = g.contains(link.parent);
    if (!has_child) issue(name + ": unknown child " + std::to_string(link.child));
    if (!has_parent) issue(name + ": unknown parent " + std::to_string(link.parent));
    if (!has_child || !has_parent) continue;
    const auto& child = g.variable(link.child);
    const auto& parent = g.variable(link.parent);
    if (child.kind != VarKind::X) issue(name + ": child must be an X variable");
    if (link.matrix.rows() != child.states || link.matrix.cols() != parent.states) {
      issue(name + ": matrix shape " + std::to_string(link.matrix.rows()) + "x" +
            std::to_string(link.matrix.cols()) + " does not match " + std::to_string(child.states) +
            "x" + std::to_string(parent.states));
      continue;
    }
    bool range_ok = true;
    for (int r = 0; r < link.matrix.rows(); ++r)
      for (int c = 0; c < link.matrix.cols(); ++c) {
        const double a = link.matrix(r, c);
        if (!(a >= 0.0 && a <= 1.0)) range_ok = false;
      }
    if (!range_ok) issue(name + ": matrix entry outside [0,1]");
    for (int c = 0; c < link.matrix.cols(); ++c) {
      const double s = link.matrix.column_sum(c);
      if (std::abs(s - 1.0) > opts.column_tolerance)
        issue(name + ": column " + std::to_string(c) + " sums to " + std::to_string(s) + ", expected 1");
    }
  }

  for (const auto& v : g.variables())
    if (v.kind == VarKind::X && g.in_links(v.id).empty())
      issue("X" + std::to_string(v.id) + ": has no incoming link");

  if (!g.is_acyclic()) issue("cycle detected");
  return report;
}

inline void validate_or_throw(const Graph& g, const ValidationOptions& opts = {}) {
  auto report = validate(g, opts);
  if (!report.ok()) throw ValidationError(std::move(report.issues));
}

// Evidence must reference X variables with valid states, consistent with any
// observation declared on the variable.
inline ValidationReport check_evidence(const Graph& g, const Evidence& e) {
  ValidationReport report;
  for (const auto& [id, state] : e) {
    if (!g.contains(id)) {
      report.issues.push_back("evidence references unknown variable " + std::to_string(id));
      continue;
    }
    const auto& v = g.variable(id);
    if (v.kind != VarKind::X) report.issues.push_back("evidence variable " + std::to_string(id) + " is not X-kind");
    if (state < 0 || state >= v.states)
      report.issues.push_back("evidence state " + std::to_string(state) + " out of range for X" + std::to_string(id));
    if (v.observed && *v.observed != state)
      report.issues.push_back("evidence for X" + std::to_string(id) + " contradicts its declared observation");
  }
  return report;
}

// Graph evidence merged with explicit evidence (explicit wins only when
// consistent; check_evidence flags contradictions).
inline Evidence merged_evidence(const Graph& g, const Evidence& extra) {
  Evidence e = g.observed();
  for (const auto& [id, s] : extra) e[id] = s;
  return e;
}

namespace detail {

inline std::set<VarId> reach(const Graph& g, const std::vector<VarId>& seeds, bool forward,
                             const std::set<VarId>* within = nullptr) {
  std::set<VarId> seen(seeds.begin(), seeds.end());
  std::vector<VarId> stack(seeds.begin(), seeds.end());
  while (!stack.empty()) {
    const VarId v = stack.back();
    stack.pop_back();
    const auto next = forward ? g.children(v) : g.parents(v);
    for (VarId w : next) {
      if (within && !within->contains(w)) continue;
      if (seen.insert(w).second) stack.push_back(w);
    }
  }
  return seen;
}

}  // namespace detail

// Induced sub-graph on the hypothesis, the evidence, and every node lying on
// a directed path from the hypothesis (or a D node) to an evidence node.
// r_n of a child is re-derived from the links that survive.
inline Graph restrict_to_hypothesis(const Graph& g, const Evidence& evidence, VarId hypothesis) {
  if (!g.contains(hypothesis) || g.variable(hypothesis).kind != VarKind::B)
    throw std::invalid_argument("hypothesis " + std::to_string(hypothesis) + " is not a B variable");

  std::vector<VarId> sources{hypothesis};
  for (const auto& v : g.variables())
    if (v.kind == VarKind::D) sources.push_back(v.id);
  std::vector<VarId> targets;
  for (const auto& [id, s] : evidence) targets.push_back(id);

  const auto from_hyp = detail::reach(g, {hypothesis}, true);
  const bool explains_any = std::any_of(targets.begin(), targets.end(),
                                        [&](VarId e) { return from_hyp.contains(e); });
  if (!explains_any)
    throw HypothesisError("disconnected hypothesis: B" + std::to_string(hypothesis) +
                          " has no directed path to any evidence node");

  const auto down = detail::reach(g, sources, true);
  const auto up = detail::reach(g, targets, false);
  std::set<VarId> keep;
  for (VarId v : down)
    if (up.contains(v)) keep.insert(v);
  keep.insert(hypothesis);
  keep.insert(targets.begin(), targets.end());

  std::vector<Variable> vars;
  for (const auto& v : g.variables())
    if (keep.contains(v.id)) vars.push_back(v);
  std::vector<CausalLink> links;
  for (const auto& l : g.links())
    if (keep.contains(l.child) && keep.contains(l.parent)) links.push_back(l);
  Graph sub(std::move(vars), std::move(links));

  for (VarId e : targets)
    if (sub.in_links(e).empty())
      throw HypothesisError("evidence X" + std::to_string(e) + " cannot be caused under hypothesis B" +
                            std::to_string(hypothesis));
  return sub;
}

// Longest directed path (in arcs) from any source (B or D node) to each
// variable. Sources sit at layer 0.
inline std::map<VarId, int> layer_assignment(const Graph& g) {
  std::map<VarId, int> layer;
  for (VarId v : g.topological_order()) {
    int best = 0;
    for (VarId p : g.parents(v)) best = std::max(best, layer.at(p) + 1);
    layer[v] = best;
  }
  return layer;
}

inline std::map<VarId, int> layer_assignment(const Graph& g, VarId hypothesis) {
  if (!g.contains(hypothesis) || g.variable(hypothesis).kind != VarKind::B)
    throw std::invalid_argument("hypothesis " + std::to_string(hypothesis) + " is not a B variable");
  return layer_assignment(g);
}

// B variables for which restrict_to_hypothesis succeeds, expanded to every
// (variable, state) pair.
inline std::vector<Hypothesis> hypothesis_space(const Graph& g, const Evidence& evidence) {
  std::vector<Hypothesis> out;
  for (const auto& v : g.variables()) {
    if (v.kind != VarKind::B) continue;
    try {
      (void)restrict_to_hypothesis(g, evidence, v.id);
    } catch (const HypothesisError&) {
      continue;
    }
    for (int s = 0; s < v.states; ++s) out.push_back({v.id, s});
  }
  return out;
}

}  // namespace ducg
