#pragma once

#include <filesystem>
#include <map>

#include <json.hpp>

#include "vgflow/graph.hpp"

namespace vgflow {

inline constexpr double kDefaultViscosity = 3.5e-3;  // Pa s

struct BoundaryConditions {
  std::map<NodeId, double> inlet_pressures;   // Pa
  std::map<NodeId, double> outlet_pressures;  // Pa
  double viscosity = kDefaultViscosity;       // Pa s

  // Prescribed pressure for a boundary node, or nullptr.
  const double* prescribed(NodeId id) const;
};

// Pressures in Pa, flows in m^3/s, positive from edge.u toward edge.v.
struct FlowState {
  std::map<NodeId, double> node_pressure;
  std::map<EdgeId, double> edge_flow;
};

// Every inlet at `inlet_pressure`, every outlet at `outlet_pressure`.
BoundaryConditions uniform_boundary(const VascularGraph& g, double inlet_pressure,
                                    double outlet_pressure = 0.0, double viscosity = kDefaultViscosity);

// Poiseuille conductance pi d^4 / (128 mu L) in m^3/(s Pa), d the mean of
// the two node diameters. Geometry is in mm and converted to SI.
double edge_conductance(const Edge& edge, const Node& u, const Node& v, double viscosity);

// Solves the weighted graph Laplacian over interior nodes with prescribed
// boundary pressures moved to the right-hand side.
FlowState solve_flow(const VascularGraph& g, const BoundaryConditions& bc);

// Net inflow (m^3/s) at every interior node.
std::map<NodeId, double> conservation_residual(const VascularGraph& g, const BoundaryConditions& bc,
                                               const FlowState& state);

// Same, treating inlet/outlet IDs of the graph as the boundary.
std::map<NodeId, double> conservation_residual(const VascularGraph& g, const FlowState& state);

// max |residual| / max |Q|; 0 for an all-zero state.
double relative_conservation_error(const VascularGraph& g, const FlowState& state);

// Flows recomputed from the state's pressures.
FlowState flows_from_pressures(const VascularGraph& g, double viscosity,
                               const std::map<NodeId, double>& pressure);

nlohmann::json to_json(const BoundaryConditions& bc);
BoundaryConditions boundary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FlowState& s);
FlowState flow_state_from_json(const nlohmann::json& j);

}  // namespace vgflow
