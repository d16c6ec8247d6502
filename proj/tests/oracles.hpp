#pragma once

// Reference computations written independently of the library engines: a
// brute-force sum over every joint assignment of every free variable, using
// the weighted-OR conditional read straight off the link list.

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "ducg/graph.hpp"

namespace oracle {

using namespace ducg;

// Probability of `var` being in `state` given a full assignment.
inline double weighted_or(const Graph& g, VarId var, int state, const std::map<VarId, int>& at) {
  double rn = 0.0, p = 0.0;
  for (const auto& l : g.links()) {
    if (l.child != var) continue;
    rn += l.r;
    const int ps = g.variable(l.parent).kind == VarKind::D ? 0 : at.at(l.parent);
    p += l.r * l.matrix(state, ps);
  }
  return p / rn;
}

// Calls f(assignment, weight) for every joint assignment of all X and B
// variables consistent with `fixed`, where weight is the full joint
// probability (B priors for non-fixed B, weighted-OR for every X).
template <class F>
void for_each_world(const Graph& g, const std::map<VarId, int>& fixed, F&& f) {
  std::vector<VarId> free;
  std::map<VarId, int> at = fixed;
  double space = 1.0;
  for (const auto& v : g.variables()) {
    if (v.kind == VarKind::D || fixed.contains(v.id)) continue;
    free.push_back(v.id);
    at[v.id] = 0;
    space *= v.states;
  }
  if (space > 5e6) throw std::runtime_error("oracle: world space too large");
  for (;;) {
    double w = 1.0;
    for (const auto& v : g.variables()) {
      if (v.kind == VarKind::X) w *= weighted_or(g, v.id, at.at(v.id), at);
      else if (v.kind == VarKind::B && !fixed.contains(v.id)) w *= v.prior[at.at(v.id)];
    }
    f(at, w);
    std::size_t i = 0;
    for (; i < free.size(); ++i) {
      if (++at[free[i]] < g.variable(free[i]).states) break;
      at[free[i]] = 0;
    }
    if (i == free.size()) return;
  }
}

inline double likelihood(const Graph& g, const Evidence& e, const Hypothesis& h) {
  std::map<VarId, int> fixed(e.begin(), e.end());
  fixed[h.var] = h.state;
  double sum = 0.0;
  for_each_world(g, fixed, [&](const auto&, double w) { sum += w; });
  return sum;
}

inline std::vector<double> marginal(const Graph& g, const Hypothesis& h, VarId var) {
  std::vector<double> out(g.variable(var).states, 0.0);
  for_each_world(g, {{h.var, h.state}}, [&](const auto& at, double w) { out[at.at(var)] += w; });
  return out;
}

// Pr{var = s | hypothesis} when the variables in `clamp` are forced (not
// conditioned): their states are fixed and their own factors dropped.
inline std::vector<double> clamped_marginal(const Graph& g, const Hypothesis& h, const Evidence& clamp, VarId var) {
  std::vector<double> out(g.variable(var).states, 0.0);
  std::map<VarId, int> fixed(clamp.begin(), clamp.end());
  fixed[h.var] = h.state;
  for_each_world(g, fixed, [&](const auto& at, double w) {
    for (const auto& [id, s] : clamp) w /= weighted_or(g, id, s, at);
    out[at.at(var)] += w;
  });
  return out;
}

}  // namespace oracle
