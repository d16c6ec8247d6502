#pragma once

// Deterministic model families and fixtures.

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "ducg/graph.hpp"
#include "ducg/sampling.hpp"

namespace ducg {

struct Model {
  Graph graph;  // evidence is also recorded in the variables' `observed`
  Evidence evidence;
  Hypothesis hypothesis;
};

namespace detail {

inline Matrix random_stochastic(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) {
      // strictly positive so no column degenerates
      m(r, c) = (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;
      s += m(r, c);
    }
    for (int r = 0; r < rows; ++r) m(r, c) /= s;
  }
  return m;
}

inline Variable b_var(VarId id, int k) {
  return Variable{id, VarKind::B, k, std::vector<double>(k, 1.0 / k), std::nullopt};
}

inline Variable x_var(VarId id, int k) { return Variable{id, VarKind::X, k, {}, std::nullopt}; }

inline Model finish(std::vector<Variable> vars, std::vector<CausalLink> links, Evidence ev, Hypothesis h) {
  for (auto& v : vars)
    if (const auto it = ev.find(v.id); it != ev.end()) v.observed = it->second;
  return Model{Graph(std::move(vars), std::move(links)), std::move(ev), h};
}

}  // namespace detail

// B0 (k states) feeding n layers of n X variables, each layer fully linked to
// the previous one, and one evidence node (id n*n+1) under the last layer,
// observed in state 1. All r = 1; matrices uniform then column-normalized.
inline Model full_joined(int n, int k = 3, std::uint64_t seed = 1) {
  if (n < 1 || k < 2) throw std::invalid_argument("full_joined needs n >= 1 and k >= 2");
  Rng rng(seed, 0xF011);
  std::vector<Variable> vars{detail::b_var(0, k)};
  std::vector<CausalLink> links;
  auto id_of = [n](int layer, int i) { return (layer - 1) * n + i + 1; };
  for (int layer = 1; layer <= n; ++layer) {
    for (int i = 0; i < n; ++i) {
      const VarId id = id_of(layer, i);
      vars.push_back(detail::x_var(id, k));
      if (layer == 1) {
        links.push_back({id, 0, 1.0, detail::random_stochastic(rng, k, k)});
      } else {
        for (int j = 0; j < n; ++j) links.push_back({id, id_of(layer - 1, j), 1.0, detail::random_stochastic(rng, k, k)});
      }
    }
  }
  const VarId e = n * n + 1;
  vars.push_back(detail::x_var(e, k));
  for (int j = 0; j < n; ++j) links.push_back({e, id_of(n, j), 1.0, detail::random_stochastic(rng, k, k)});
  return detail::finish(std::move(vars), std::move(links), {{e, 1}}, {0, 1});
}

// B0 feeding n_layers layers of three X variables (ids 3l-2..3l), adjacent
// layers fully linked; the bottom three are observed in state 1.
inline Model three_wide(int n_layers, std::uint64_t seed = 1, int k = 2) {
  if (n_layers < 2 || k < 2) throw std::invalid_argument("three_wide needs n_layers >= 2 and k >= 2");
  Rng rng(seed, 0x3A1DE);
  std::vector<Variable> vars{detail::b_var(0, k)};
  std::vector<CausalLink> links;
  for (int layer = 1; layer <= n_layers; ++layer) {
    for (int i = 0; i < 3; ++i) {
      const VarId id = 3 * layer - 2 + i;
      vars.push_back(detail::x_var(id, k));
      if (layer == 1) {
        links.push_back({id, 0, 1.0, detail::random_stochastic(rng, k, k)});
      } else {
        for (int j = 0; j < 3; ++j) links.push_back({id, 3 * (layer - 1) - 2 + j, 1.0, detail::random_stochastic(rng, k, k)});
      }
    }
  }
  Evidence ev;
  for (int i = 0; i < 3; ++i) ev.emplace(3 * n_layers - 2 + i, 1);
  return detail::finish(std::move(vars), std::move(links), std::move(ev), {0, 1});
}

// B1 -> X2, X3 -> X4, X5, X6 -> X7, X8, X9 with published parameters; X2 and
// X9 have three states. Evidence X7 = X8 = X9 = 1, hypothesis B1 = 1. The
// prior of B1 is not part of the published data; a uniform prior is used.
inline Model compact_fixture() {
  using R = std::vector<std::vector<double>>;
  auto M = [](const R& rows) { return Matrix::from_rows(rows); };
  std::vector<Variable> vars{detail::b_var(1, 2), detail::x_var(2, 3), detail::x_var(3, 2), detail::x_var(4, 2),
                             detail::x_var(5, 2), detail::x_var(6, 2), detail::x_var(7, 2), detail::x_var(8, 2),
                             detail::x_var(9, 3)};
  std::vector<CausalLink> links{
      {2, 1, 1.0, M({{0.189, 0.249}, {0.344, 0.42}, {0.467, 0.331}})},
      {3, 1, 1.0, M({{0.785, 0.639}, {0.215, 0.361}})},
      {4, 2, 1.0, M({{0.908, 0.773, 0.444}, {0.092, 0.227, 0.556}})},
      {4, 3, 1.0, M({{0.597, 0.177}, {0.403, 0.823}})},
      {5, 2, 1.0, M({{0.181, 0.203, 0.518}, {0.819, 0.797, 0.482}})},
      {5, 3, 1.0, M({{0.091, 0.211}, {0.909, 0.789}})},
      {6, 2, 1.0, M({{0.564, 0.239, 0.56}, {0.436, 0.761, 0.44}})},
      {6, 3, 1.0, M({{0.476, 0.642}, {0.524, 0.358}})},
      {7, 4, 1.0, M({{0.01, 0.303}, {0.99, 0.697}})},
      {7, 5, 1.0, M({{0.466, 0.952}, {0.534, 0.048}})},
      {7, 6, 1.0, M({{0.499, 0.707}, {0.501, 0.293}})},
      {8, 4, 1.0, M({{0.517, 0.475}, {0.483, 0.525}})},
      {8, 5, 1.0, M({{0.749, 0.119}, {0.251, 0.881}})},
      {8, 6, 1.0, M({{0.502, 0.51}, {0.498, 0.49}})},
      {9, 4, 1.0, M({{0.43, 0.448}, {0.143, 0.004}, {0.427, 0.548}})},
      {9, 5, 1.0, M({{0.357, 0.153}, {0.488, 0.443}, {0.154, 0.404}})},
      {9, 6, 1.0, M({{0.526, 0.424}, {0.236, 0.475}, {0.238, 0.101}})},
  };
  return detail::finish(std::move(vars), std::move(links), {{7, 1}, {8, 1}, {9, 1}}, {1, 1});
}

// Link list of the recursion example: B1 -> X2, X3; X2, X3 -> X4, X5;
// X4, X5 -> X6. Evidence X2 = X4 = X6 = 1.
inline const std::vector<std::pair<VarId, VarId>>& recursion_links() {
  static const std::vector<std::pair<VarId, VarId>> links{{2, 1}, {3, 1}, {4, 2}, {4, 3},
                                                          {5, 2}, {5, 3}, {6, 4}, {6, 5}};
  return links;
}

// Caller-supplied matrices keyed by (child, parent); state counts are read
// off the matrix shapes.
inline Model recursion_fixture(const std::map<std::pair<VarId, VarId>, Matrix>& matrices) {
  std::map<VarId, int> states;
  std::vector<CausalLink> links;
  for (const auto& [child, parent] : recursion_links()) {
    const auto& m = matrices.at({child, parent});
    states[child] = m.rows();
    states[parent] = m.cols();
    links.push_back({child, parent, 1.0, m});
  }
  std::vector<Variable> vars{detail::b_var(1, states.at(1))};
  for (VarId id = 2; id <= 6; ++id) vars.push_back(detail::x_var(id, states.at(id)));
  return detail::finish(std::move(vars), std::move(links), {{2, 1}, {4, 1}, {6, 1}}, {1, 1});
}

inline Model recursion_fixture(std::uint64_t seed = 18, int k = 2) {
  Rng rng(seed, 0xF18);
  std::map<std::pair<VarId, VarId>, Matrix> m;
  for (const auto& link : recursion_links()) m.emplace(link, detail::random_stochastic(rng, k, k));
  return recursion_fixture(m);
}

// Two roots B20, B21 over five fully linked groups: X1..X4, X5..X8,
// X9..X12, X13..X16, X17..X19. Evidence X17 = X18 = X19 = 1.
inline Model five_layer_fixture(std::uint64_t seed = 4) {
  Rng rng(seed, 0xF4);
  std::vector<Variable> vars{detail::b_var(20, 2), detail::b_var(21, 2)};
  std::vector<CausalLink> links;
  const std::vector<std::vector<VarId>> groups{{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}, {13, 14, 15, 16}, {17, 18, 19}};
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (VarId id : groups[gi]) {
      vars.push_back(detail::x_var(id, 2));
      const std::vector<VarId> parents = gi == 0 ? std::vector<VarId>{20, 21} : groups[gi - 1];
      for (VarId p : parents) links.push_back({id, p, 1.0, detail::random_stochastic(rng, 2, 2)});
    }
  }
  return detail::finish(std::move(vars), std::move(links), {{17, 1}, {18, 1}, {19, 1}}, {20, 1});
}

struct RandomDagOptions {
  int x_count = 6;
  int b_count = 1;
  int max_parents = 3;
  int max_states = 3;
  int evidence_count = 2;
  bool with_d = false;   // add one D node feeding some X variables
  bool random_r = true;  // r drawn from (0.5, 3) instead of 1
};

// Random DAG over B roots and X variables (ids ascending in topological
// order), every X with at least one parent. Evidence is drawn among the last
// X variables; the hypothesis is the first B root at a random state.
inline Model random_dag(std::uint64_t seed, const RandomDagOptions& o = {}) {
  if (o.x_count < 1 || o.b_count < 1) throw std::invalid_argument("random_dag needs at least one B and one X");
  Rng rng(seed, 0xDA6);
  std::vector<Variable> vars;
  std::vector<CausalLink> links;
  std::vector<VarId> pool;
  VarId next = 0;
  for (int i = 0; i < o.b_count; ++i) {
    auto v = detail::b_var(next, 2 + rng.uniform_int(o.max_states - 1));
    std::vector<double> prior(v.states);
    double s = 0.0;
    for (auto& p : prior) s += (p = 0.1 + rng.uniform());
    for (auto& p : prior) p /= s;
    v.prior = prior;
    vars.push_back(v);
    pool.push_back(next++);
  }
  VarId d_id = -1;
  if (o.with_d) {
    d_id = next++;
    vars.push_back(Variable{d_id, VarKind::D, 1, {}, std::nullopt});
  }
  auto states_of = [&](VarId id) {
    for (const auto& v : vars)
      if (v.id == id) return v.states;
    return 0;
  };
  std::vector<VarId> xs;
  for (int i = 0; i < o.x_count; ++i) {
    const VarId id = next++;
    const int k = 2 + rng.uniform_int(o.max_states - 1);
    vars.push_back(detail::x_var(id, k));
    std::vector<VarId> cand = pool;
    const int np = 1 + rng.uniform_int(std::min<int>(o.max_parents, static_cast<int>(cand.size())));
    // partial Fisher-Yates for the parent set
    for (int j = 0; j < np; ++j) {
      const int pick = j + rng.uniform_int(static_cast<int>(cand.size()) - j);
      std::swap(cand[j], cand[pick]);
      const double r = o.random_r ? 0.5 + 2.5 * rng.uniform() : 1.0;
      links.push_back({id, cand[j], r, detail::random_stochastic(rng, k, states_of(cand[j]))});
    }
    if (d_id >= 0 && rng.uniform() < 0.3) links.push_back({id, d_id, 0.5, detail::random_stochastic(rng, k, 1)});
    pool.push_back(id);
    xs.push_back(id);
  }
  Evidence ev;
  const int ne = std::min<int>(o.evidence_count, static_cast<int>(xs.size()));
  for (int i = 0; i < ne; ++i) {
    const VarId id = xs[xs.size() - 1 - i];
    ev.emplace(id, rng.uniform_int(states_of(id)));
  }
  const Hypothesis h{0, rng.uniform_int(states_of(0))};
  return detail::finish(std::move(vars), std::move(links), std::move(ev), h);
}

}  // namespace ducg
