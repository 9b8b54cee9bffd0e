#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "vgflow/errors.hpp"
#include "vgflow/flow.hpp"

using namespace vgflow;

namespace {

Node node(NodeId id, double x, double r, NodeKind kind = NodeKind::Branch) {
  Node n;
  n.id = id;
  n.position = {x, 0.0, 0.0};
  n.radius = r;
  n.kind = kind;
  return n;
}

Edge edge(EdgeId id, NodeId u, NodeId v, double length) {
  Edge e;
  e.id = id;
  e.u = u;
  e.v = v;
  e.length = length;
  e.axis = {1.0, 0.0, 0.0};
  return e;
}

// inlet 0 -> 1 -> 2 -> outlet 3, identical segments
VascularGraph chain() {
  VascularGraph g;
  for (NodeId i = 0; i < 4; ++i)
    g.nodes.push_back(node(i, 10.0 * static_cast<double>(i), 0.5, i == 0 || i == 3 ? NodeKind::Endpoint : NodeKind::Branch));
  for (EdgeId e = 0; e < 3; ++e) g.edges.push_back(edge(e, e, e + 1, 10.0));
  g.inlet_ids = {0};
  g.outlet_ids = {3};
  return g;
}

VascularGraph symmetric_y() {
  VascularGraph g;
  g.nodes = {node(0, 0, 1.0, NodeKind::Endpoint), node(1, 10, 1.0), node(2, 20, 0.8, NodeKind::Endpoint),
             node(3, 20, 0.8, NodeKind::Endpoint)};
  g.nodes[2].position[1] = 5.0;
  g.nodes[3].position[1] = -5.0;
  g.edges = {edge(0, 0, 1, 10.0), edge(1, 1, 2, 12.0), edge(2, 1, 3, 12.0)};
  g.inlet_ids = {0};
  g.outlet_ids = {2, 3};
  return g;
}

}  // namespace

TEST_CASE("Poiseuille conductance of a 1 mm vessel, 10 mm long") {
  const Node u = node(0, 0, 0.5), v = node(1, 10, 0.5);
  const double G = edge_conductance(edge(0, 0, 1, 10.0), u, v, 3.5e-3);
  const double expected = std::numbers::pi * 1e-12 / (128.0 * 3.5e-3 * 1e-2);
  CHECK(G == doctest::Approx(expected).epsilon(1e-14));
  CHECK(G == doctest::Approx(7.0124e-10).epsilon(1e-4));
  // diameter is the mean of both endpoint diameters
  const double G2 = edge_conductance(edge(0, 0, 1, 10.0), node(0, 0, 0.25), node(1, 10, 0.75), 3.5e-3);
  CHECK(G2 == doctest::Approx(G).epsilon(1e-14));
  CHECK_THROWS_AS(edge_conductance(edge(0, 0, 1, 0.0), u, v, 3.5e-3), InvalidGeometry);
  CHECK_THROWS_AS(edge_conductance(edge(0, 0, 1, 1.0), node(0, 0, 0.0), v, 3.5e-3), InvalidGeometry);
  CHECK_THROWS_AS(edge_conductance(edge(0, 0, 1, 1.0), u, v, 0.0), InvalidParameter);
}

TEST_CASE("three equal segments in series split the pressure drop evenly") {
  const VascularGraph g = chain();
  const FlowState s = solve_flow(g, uniform_boundary(g, 12000.0));
  CHECK(s.node_pressure.at(1) == doctest::Approx(8000.0).epsilon(1e-12));
  CHECK(s.node_pressure.at(2) == doctest::Approx(4000.0).epsilon(1e-12));
  const double G = oracle::conductance(0.5, 0.5, 10.0, kDefaultViscosity);
  for (EdgeId e = 0; e < 3; ++e) CHECK(s.edge_flow.at(e) == doctest::Approx(G * 4000.0).epsilon(1e-12));
}

TEST_CASE("a symmetric Y splits flow equally") {
  const VascularGraph g = symmetric_y();
  const FlowState s = solve_flow(g, uniform_boundary(g, 15000.0));
  CHECK(s.edge_flow.at(1) == doctest::Approx(s.edge_flow.at(2)).epsilon(1e-13));
  CHECK(s.edge_flow.at(0) == doctest::Approx(s.edge_flow.at(1) + s.edge_flow.at(2)).epsilon(1e-13));
  CHECK(s.node_pressure.at(0) == 15000.0);
  CHECK(s.node_pressure.at(2) == 0.0);
}

TEST_CASE("random graphs agree with dense nodal analysis") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = 2 + static_cast<std::size_t>(trial) * 2;
    const VascularGraph g = oracle::random_graph(rng, n, trial % 4);
    const BoundaryConditions bc = uniform_boundary(g, 13000.0 + 100.0 * trial, 50.0);
    const FlowState s = solve_flow(g, bc);
    const FlowState o = oracle::solve(g, bc);
    double pmax = 0.0, qmax = 0.0;
    for (auto& [id, p] : o.node_pressure) pmax = std::max(pmax, std::fabs(p));
    for (auto& [id, q] : o.edge_flow) qmax = std::max(qmax, std::fabs(q));
    for (auto& [id, p] : o.node_pressure) CHECK(std::fabs(s.node_pressure.at(id) - p) <= 1e-10 * pmax);
    for (auto& [id, q] : o.edge_flow) CHECK(std::fabs(s.edge_flow.at(id) - q) <= 1e-10 * qmax);
    CHECK(relative_conservation_error(g, s) <= 1e-10);
  }
}

TEST_CASE("solver errors") {
  VascularGraph g = chain();
  BoundaryConditions bc = uniform_boundary(g, 12000.0);
  bc.outlet_pressures.clear();
  CHECK_THROWS_AS(solve_flow(g, bc), Underdetermined);

  VascularGraph island = chain();
  island.nodes.push_back(node(4, 50, 0.5));
  island.nodes.push_back(node(5, 60, 0.5));
  island.edges.push_back(edge(3, 4, 5, 10.0));
  CHECK_THROWS_AS(solve_flow(island, uniform_boundary(island, 12000.0)), SingularSystem);

  VascularGraph bad = chain();
  bad.edges[1].length = 0.0;
  CHECK_THROWS_AS(solve_flow(bad, uniform_boundary(bad, 12000.0)), InvalidGeometry);
  bad = chain();
  bad.nodes[1].radius = -1.0;
  CHECK_THROWS_AS(solve_flow(bad, uniform_boundary(bad, 12000.0)), InvalidGeometry);

  BoundaryConditions stray = uniform_boundary(g, 12000.0);
  stray.inlet_pressures[1] = 5.0;
  CHECK_THROWS_AS(solve_flow(g, stray), InvalidParameter);
}

TEST_CASE("conservation residual reports the imbalance") {
  const VascularGraph g = chain();
  FlowState s = solve_flow(g, uniform_boundary(g, 12000.0));
  const auto r = conservation_residual(g, s);
  CHECK(r.size() == 2);
  for (auto& [id, v] : r) CHECK(std::fabs(v) <= 1e-12 * s.edge_flow.at(0));
  const double delta = 1e-9;
  s.edge_flow[1] += delta;
  const auto r2 = conservation_residual(g, s);
  CHECK(r2.at(1) == doctest::Approx(-delta).epsilon(1e-6));
  CHECK(r2.at(2) == doctest::Approx(delta).epsilon(1e-6));

  FlowState zero;
  for (const auto& n : g.nodes) zero.node_pressure[n.id] = 0.0;
  for (const auto& e : g.edges) zero.edge_flow[e.id] = 0.0;
  CHECK(relative_conservation_error(g, zero) == 0.0);
}

TEST_CASE("flows follow from pressures") {
  const VascularGraph g = symmetric_y();
  const FlowState s = solve_flow(g, uniform_boundary(g, 14000.0));
  const FlowState f = flows_from_pressures(g, kDefaultViscosity, s.node_pressure);
  for (auto& [id, q] : s.edge_flow) CHECK(f.edge_flow.at(id) == doctest::Approx(q).epsilon(1e-14));
}

TEST_CASE("boundary conditions and flow state JSON round-trip exactly") {
  const VascularGraph g = symmetric_y();
  const BoundaryConditions bc = uniform_boundary(g, 12345.678901234, 0.1);
  const FlowState s = solve_flow(g, bc);
  const BoundaryConditions bc2 = boundary_from_json(nlohmann::json::parse(to_json(bc).dump()));
  CHECK(bc2.inlet_pressures == bc.inlet_pressures);
  CHECK(bc2.outlet_pressures == bc.outlet_pressures);
  CHECK(bc2.viscosity == bc.viscosity);
  const FlowState s2 = flow_state_from_json(nlohmann::json::parse(to_json(s).dump()));
  CHECK(s2.node_pressure == s.node_pressure);
  CHECK(s2.edge_flow == s.edge_flow);
  CHECK_THROWS_AS(flow_state_from_json(nlohmann::json::parse(R"({"nodes": 3})")), FormatError);
}
