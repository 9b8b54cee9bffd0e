#include "vgflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "vgflow/errors.hpp"

namespace vgflow {

using json = nlohmann::json;

namespace {
constexpr double kMmToM = 1e-3;
}

const double* BoundaryConditions::prescribed(NodeId id) const {
  if (auto it = inlet_pressures.find(id); it != inlet_pressures.end()) return &it->second;
  if (auto it = outlet_pressures.find(id); it != outlet_pressures.end()) return &it->second;
  return nullptr;
}

BoundaryConditions uniform_boundary(const VascularGraph& g, double inlet_pressure, double outlet_pressure,
                                    double viscosity) {
  BoundaryConditions bc;
  bc.viscosity = viscosity;
  for (NodeId id : g.inlet_ids) bc.inlet_pressures[id] = inlet_pressure;
  for (NodeId id : g.outlet_ids) bc.outlet_pressures[id] = outlet_pressure;
  return bc;
}

double edge_conductance(const Edge& edge, const Node& u, const Node& v, double viscosity) {
  if (!(edge.length > 0.0) || !std::isfinite(edge.length))
    throw InvalidGeometry("edge " + std::to_string(edge.id) + " length must be > 0");
  if (!(u.radius > 0.0) || !(v.radius > 0.0))
    throw InvalidGeometry("edge " + std::to_string(edge.id) + " endpoint radius must be > 0");
  if (!(viscosity > 0.0)) throw InvalidParameter("viscosity must be > 0");
  const double d = (2.0 * u.radius + 2.0 * v.radius) * 0.5 * kMmToM;
  const double length = edge.length * kMmToM;
  return std::numbers::pi * (d * d) * (d * d) / (128.0 * viscosity * length);
}

namespace {

void check_boundary(const VascularGraph& g, const BoundaryConditions& bc) {
  if (!(bc.viscosity > 0.0) || !std::isfinite(bc.viscosity)) throw InvalidParameter("viscosity must be > 0");
  if (g.inlet_ids.empty() || bc.inlet_pressures.empty()) throw Underdetermined("no inlet pressure prescribed");
  if (g.outlet_ids.empty() || bc.outlet_pressures.empty()) throw Underdetermined("no outlet pressure prescribed");
  for (NodeId id : g.inlet_ids)
    if (!bc.inlet_pressures.contains(id)) throw Underdetermined("inlet " + std::to_string(id) + " has no pressure");
  for (NodeId id : g.outlet_ids)
    if (!bc.outlet_pressures.contains(id)) throw Underdetermined("outlet " + std::to_string(id) + " has no pressure");
  for (const auto* m : {&bc.inlet_pressures, &bc.outlet_pressures})
    for (const auto& [id, p] : *m) {
      if (!std::isfinite(p)) throw InvalidParameter("non-finite boundary pressure at node " + std::to_string(id));
      if (!g.is_boundary(id)) throw InvalidParameter("pressure given for non-boundary node " + std::to_string(id));
    }
}

}  // namespace

FlowState flows_from_pressures(const VascularGraph& g, double viscosity, const std::map<NodeId, double>& pressure) {
  const auto idx = g.node_index();
  FlowState s;
  s.node_pressure = pressure;
  for (const auto& e : g.edges) {
    if (e.u == e.v) {
      s.edge_flow[e.id] = 0.0;
      continue;
    }
    const double G = edge_conductance(e, g.nodes[idx.at(e.u)], g.nodes[idx.at(e.v)], viscosity);
    s.edge_flow[e.id] = G * (pressure.at(e.u) - pressure.at(e.v));
  }
  return s;
}

FlowState solve_flow(const VascularGraph& g, const BoundaryConditions& bc) {
  check_boundary(g, bc);
  const auto idx = g.node_index();
  const std::size_t n = g.nodes.size();

  // Interior unknowns in node order.
  std::vector<std::ptrdiff_t> unknown(n, -1);
  std::ptrdiff_t n_unknown = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (bc.prescribed(g.nodes[i].id) == nullptr) unknown[i] = n_unknown++;

  std::vector<double> conductance(g.edges.size(), 0.0);
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    if (e.u == e.v) continue;
    const std::size_t a = idx.at(e.u), b = idx.at(e.v);
    conductance[k] = edge_conductance(e, g.nodes[a], g.nodes[b], bc.viscosity);
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }

  // Every interior node must reach a prescribed pressure.
  std::vector<std::uint8_t> reached(n, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i)
    if (unknown[i] < 0) {
      reached[i] = 1;
      queue.push_back(i);
    }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t j : adjacency[i])
      if (!reached[j]) {
        reached[j] = 1;
        queue.push_back(j);
      }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!reached[i])
      throw SingularSystem("node " + std::to_string(g.nodes[i].id) + " is not connected to any boundary node");

  std::map<NodeId, double> pressure;
  for (std::size_t i = 0; i < n; ++i)
    if (const double* p = bc.prescribed(g.nodes[i].id)) pressure[g.nodes[i].id] = *p;

  if (n_unknown > 0) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * g.edges.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      const auto& e = g.edges[k];
      if (e.u == e.v) continue;
      const std::size_t a = idx.at(e.u), b = idx.at(e.v);
      const double G = conductance[k];
      const auto ua = unknown[a], ub = unknown[b];
      if (ua >= 0) triplets.emplace_back(ua, ua, G);
      if (ub >= 0) triplets.emplace_back(ub, ub, G);
      if (ua >= 0 && ub >= 0) {
        triplets.emplace_back(ua, ub, -G);
        triplets.emplace_back(ub, ua, -G);
      } else if (ua >= 0) {
        rhs[ua] += G * pressure.at(g.nodes[b].id);
      } else if (ub >= 0) {
        rhs[ub] += G * pressure.at(g.nodes[a].id);
      }
    }
    Eigen::SparseMatrix<double> A(n_unknown, n_unknown);
    A.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw SingularSystem("conductance matrix factorization failed");
    const Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !x.allFinite()) throw SingularSystem("linear solve failed");
    for (std::size_t i = 0; i < n; ++i)
      if (unknown[i] >= 0) pressure[g.nodes[i].id] = x[unknown[i]];
  }
  return flows_from_pressures(g, bc.viscosity, pressure);
}

std::map<NodeId, double> conservation_residual(const VascularGraph& g, const BoundaryConditions& bc,
                                               const FlowState& state) {
  std::map<NodeId, double> residual;
  for (const auto& node : g.nodes)
    if (bc.prescribed(node.id) == nullptr && !g.is_boundary(node.id)) residual[node.id] = 0.0;
  for (const auto& e : g.edges) {
    const auto it = state.edge_flow.find(e.id);
    if (it == state.edge_flow.end()) throw InvalidParameter("state has no flow for edge " + std::to_string(e.id));
    const double q = it->second;
    if (auto r = residual.find(e.u); r != residual.end()) r->second -= q;
    if (auto r = residual.find(e.v); r != residual.end()) r->second += q;
  }
  return residual;
}

std::map<NodeId, double> conservation_residual(const VascularGraph& g, const FlowState& state) {
  return conservation_residual(g, BoundaryConditions{}, state);
}

double relative_conservation_error(const VascularGraph& g, const FlowState& state) {
  double qmax = 0.0;
  for (const auto& [id, q] : state.edge_flow) qmax = std::max(qmax, std::fabs(q));
  double rmax = 0.0;
  for (const auto& [id, r] : conservation_residual(g, state)) rmax = std::max(rmax, std::fabs(r));
  return qmax > 0.0 ? rmax / qmax : rmax;
}

namespace {

template <typename K>
json map_to_json(const std::map<K, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

template <typename K>
std::map<K, double> map_from_json(const json& j) {
  std::map<K, double> m;
  for (const auto& item : j.items()) m[static_cast<K>(std::stoll(item.key()))] = item.value().template get<double>();
  return m;
}

}  // namespace

json to_json(const BoundaryConditions& bc) {
  return json{{"inlet_pressures", map_to_json(bc.inlet_pressures)},
              {"outlet_pressures", map_to_json(bc.outlet_pressures)},
              {"viscosity", bc.viscosity}};
}

BoundaryConditions boundary_from_json(const json& j) {
  try {
    BoundaryConditions bc;
    bc.inlet_pressures = map_from_json<NodeId>(j.at("inlet_pressures"));
    bc.outlet_pressures = map_from_json<NodeId>(j.at("outlet_pressures"));
    bc.viscosity = j.value("viscosity", kDefaultViscosity);
    return bc;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed boundary conditions: ") + e.what());
  }
}

json to_json(const FlowState& s) {
  return json{{"pressure", map_to_json(s.node_pressure)}, {"flow", map_to_json(s.edge_flow)}};
}

FlowState flow_state_from_json(const json& j) {
  try {
    FlowState s;
    s.node_pressure = map_from_json<NodeId>(j.at("pressure"));
    s.edge_flow = map_from_json<EdgeId>(j.at("flow"));
    return s;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed flow state: ") + e.what());
  }
}

}  // namespace vgflow
