#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace vgflow {

using Vec3 = std::array<double, 3>;
using NodeId = std::int64_t;
using EdgeId = std::int64_t;

enum class NodeKind { Branch, Endpoint };

std::string to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& s);

struct Node {
  NodeId id = 0;
  Vec3 position{};  // mm
  double radius = 0.0;  // mm
  NodeKind kind = NodeKind::Branch;
  std::int32_t cluster_id = 1;
};

struct Edge {
  EdgeId id = 0;
  NodeId u = 0;
  NodeId v = 0;
  double length = 0.0;  // mm
  Vec3 axis{};          // unit vector from u toward v
  std::vector<Vec3> path;  // voxel centers in mm; in-memory only
};

struct VascularGraph {
  bool directed = false;
  bool multigraph = true;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<NodeId> inlet_ids;
  std::vector<NodeId> outlet_ids;

  // Dense position of a node/edge ID inside `nodes`/`edges`.
  std::unordered_map<NodeId, std::size_t> node_index() const;
  std::unordered_map<EdgeId, std::size_t> edge_index() const;

  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  bool is_inlet(NodeId id) const;
  bool is_outlet(NodeId id) const;
  bool is_boundary(NodeId id) const { return is_inlet(id) || is_outlet(id); }
};

// Checks ID uniqueness, endpoint references, radius/length/axis invariants,
// inlet/outlet disjointness and the multigraph flag. Throws InvalidGeometry.
void validate(const VascularGraph& g);

double distance(const Vec3& a, const Vec3& b);
Vec3 unit_axis(const Vec3& from, const Vec3& to);

// Number of connected components (undirected view).
std::size_t component_count(const VascularGraph& g);

// |E| - |V| + components.
std::int64_t cycle_rank(const VascularGraph& g);

// JSON with the exchange schema:
// {"directed", "multigraph", "nodes": [{"id","pos","radius","kind","cluster"}],
//  "edges": [{"id","u","v","length","axis"}], "inlets", "outlets"}
nlohmann::json to_json(const VascularGraph& g);
VascularGraph graph_from_json(const nlohmann::json& j);

void write_graph(const std::filesystem::path& path, const VascularGraph& g);
VascularGraph read_graph(const std::filesystem::path& path);

}  // namespace vgflow
