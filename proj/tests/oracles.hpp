#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Nothing here calls into the library's solvers.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "vgflow/flow.hpp"
#include "vgflow/graph.hpp"

namespace oracle {

using namespace vgflow;

inline double conductance(double r_u_mm, double r_v_mm, double length_mm, double mu) {
  const double d = (r_u_mm + r_v_mm) * 1e-3;  // mean diameter in m
  return std::numbers::pi * d * d * d * d / (128.0 * mu * length_mm * 1e-3);
}

// Gaussian elimination with partial pivoting on a dense copy.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    if (A[piv][c] == 0.0) throw std::runtime_error("singular");
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= A[i][k] * x[k];
    x[i] = acc / A[i][i];
  }
  return x;
}

// Full nodal analysis: pressures of all nodes, flows u -> v.
inline FlowState solve(const VascularGraph& g, const BoundaryConditions& bc) {
  std::map<NodeId, double> fixed;
  for (auto& [id, p] : bc.inlet_pressures) fixed[id] = p;
  for (auto& [id, p] : bc.outlet_pressures) fixed[id] = p;
  std::map<NodeId, std::size_t> unknown;
  for (const auto& n : g.nodes)
    if (!fixed.contains(n.id)) unknown.emplace(n.id, unknown.size());
  std::map<NodeId, const Node*> by_id;
  for (const auto& n : g.nodes) by_id[n.id] = &n;

  const std::size_t m = unknown.size();
  std::vector<std::vector<double>> A(m, std::vector<double>(m, 0.0));
  std::vector<double> b(m, 0.0);
  for (const auto& e : g.edges) {
    if (e.u == e.v) continue;
    const double G = conductance(by_id[e.u]->radius, by_id[e.v]->radius, e.length, bc.viscosity);
    for (auto [a, o] : {std::pair{e.u, e.v}, std::pair{e.v, e.u}}) {
      if (!unknown.contains(a)) continue;
      const std::size_t ia = unknown[a];
      A[ia][ia] += G;
      if (unknown.contains(o))
        A[ia][unknown[o]] -= G;
      else
        b[ia] += G * fixed.at(o);
    }
  }
  const auto x = m ? dense_solve(A, b) : std::vector<double>{};
  FlowState s;
  for (const auto& n : g.nodes)
    s.node_pressure[n.id] = fixed.contains(n.id) ? fixed[n.id] : x[unknown[n.id]];
  for (const auto& e : g.edges) {
    const double G = e.u == e.v ? 0.0 : conductance(by_id[e.u]->radius, by_id[e.v]->radius, e.length, bc.viscosity);
    s.edge_flow[e.id] = G * (s.node_pressure[e.u] - s.node_pressure[e.v]);
  }
  return s;
}

// Connected random graph: random tree over n nodes plus `extra` chords.
// Node 0 is the inlet, every other leaf is an outlet.
inline VascularGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t extra) {
  std::uniform_real_distribution<double> pos(0.0, 50.0), rad(0.3, 2.5);
  VascularGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    Node node;
    node.id = static_cast<NodeId>(i);
    node.position = {pos(rng), pos(rng), pos(rng)};
    node.radius = rad(rng);
    g.nodes.push_back(node);
  }
  std::vector<int> degree(n, 0);
  auto add_edge = [&](std::size_t a, std::size_t b) {
    Edge e;
    e.id = static_cast<EdgeId>(g.edges.size());
    e.u = static_cast<NodeId>(a);
    e.v = static_cast<NodeId>(b);
    e.length = std::max(distance(g.nodes[a].position, g.nodes[b].position), 0.5);
    e.axis = unit_axis(g.nodes[a].position, g.nodes[b].position);
    g.edges.push_back(e);
    ++degree[a];
    ++degree[b];
  };
  for (std::size_t i = 1; i < n; ++i) add_edge(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i);
  std::vector<int> tree_degree = degree;
  for (std::size_t k = 0; k < extra; ++k) {
    std::uniform_int_distribution<std::size_t> pick(1, n - 1);
    const std::size_t a = pick(rng), b = pick(rng);
    if (a == b || tree_degree[a] == 1 || tree_degree[b] == 1) continue;
    add_edge(a, b);
  }
  g.inlet_ids = {0};
  for (std::size_t i = 1; i < n; ++i)
    if (degree[i] == 1) g.outlet_ids.push_back(static_cast<NodeId>(i));
  for (auto& node : g.nodes)
    node.kind = degree[static_cast<std::size_t>(node.id)] == 1 ? NodeKind::Endpoint : NodeKind::Branch;
  return g;
}

}  // namespace oracle
