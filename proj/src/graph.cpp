#include "vgflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "vgflow/errors.hpp"
#include "vgflow/json_io.hpp"

namespace vgflow {

using json = nlohmann::json;

std::string to_string(NodeKind kind) { return kind == NodeKind::Branch ? "branch" : "endpoint"; }

NodeKind node_kind_from_string(const std::string& s) {
  if (s == "branch") return NodeKind::Branch;
  if (s == "endpoint") return NodeKind::Endpoint;
  throw FormatError("unknown node kind '" + s + "'");
}

std::unordered_map<NodeId, std::size_t> VascularGraph::node_index() const {
  std::unordered_map<NodeId, std::size_t> idx;
  idx.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) idx.emplace(nodes[i].id, i);
  return idx;
}

std::unordered_map<EdgeId, std::size_t> VascularGraph::edge_index() const {
  std::unordered_map<EdgeId, std::size_t> idx;
  idx.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) idx.emplace(edges[i].id, i);
  return idx;
}

const Node& VascularGraph::node(NodeId id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  throw InvalidGeometry("no node with id " + std::to_string(id));
}

Node& VascularGraph::node(NodeId id) {
  return const_cast<Node&>(static_cast<const VascularGraph&>(*this).node(id));
}

bool VascularGraph::is_inlet(NodeId id) const {
  return std::find(inlet_ids.begin(), inlet_ids.end(), id) != inlet_ids.end();
}

bool VascularGraph::is_outlet(NodeId id) const {
  return std::find(outlet_ids.begin(), outlet_ids.end(), id) != outlet_ids.end();
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Vec3 unit_axis(const Vec3& from, const Vec3& to) {
  const double n = distance(from, to);
  if (!(n > 0.0)) return {1.0, 0.0, 0.0};
  return {(to[0] - from[0]) / n, (to[1] - from[1]) / n, (to[2] - from[2]) / n};
}

void validate(const VascularGraph& g) {
  const auto idx = g.node_index();
  if (idx.size() != g.nodes.size()) throw InvalidGeometry("duplicate node IDs");
  for (const auto& n : g.nodes) {
    if (!(n.radius > 0.0) || !std::isfinite(n.radius))
      throw InvalidGeometry("node " + std::to_string(n.id) + " has non-positive radius");
  }
  std::set<EdgeId> edge_ids;
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (const auto& e : g.edges) {
    if (!edge_ids.insert(e.id).second) throw InvalidGeometry("duplicate edge IDs");
    if (!idx.contains(e.u) || !idx.contains(e.v))
      throw InvalidGeometry("edge " + std::to_string(e.id) + " references a missing node");
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      throw InvalidGeometry("edge " + std::to_string(e.id) + " has non-positive length");
    const double an = std::sqrt(e.axis[0] * e.axis[0] + e.axis[1] * e.axis[1] + e.axis[2] * e.axis[2]);
    if (std::fabs(an - 1.0) > 1e-9) throw InvalidGeometry("edge " + std::to_string(e.id) + " axis not unit");
    if (!g.multigraph) {
      const auto key = g.directed ? std::pair{e.u, e.v} : std::pair{std::min(e.u, e.v), std::max(e.u, e.v)};
      if (!pairs.insert(key).second) throw InvalidGeometry("parallel edges in a simple graph");
    }
  }
  for (NodeId id : g.inlet_ids) {
    if (!idx.contains(id)) throw InvalidGeometry("inlet " + std::to_string(id) + " is not a node");
    if (g.is_outlet(id)) throw InvalidGeometry("node " + std::to_string(id) + " is both inlet and outlet");
  }
  for (NodeId id : g.outlet_ids)
    if (!idx.contains(id)) throw InvalidGeometry("outlet " + std::to_string(id) + " is not a node");
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::size_t component_count(const VascularGraph& g) {
  const auto idx = g.node_index();
  std::vector<std::size_t> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::size_t comps = g.nodes.size();
  for (const auto& e : g.edges) {
    const auto a = find_root(parent, idx.at(e.u));
    const auto b = find_root(parent, idx.at(e.v));
    if (a != b) {
      parent[a] = b;
      --comps;
    }
  }
  return comps;
}

std::int64_t cycle_rank(const VascularGraph& g) {
  return static_cast<std::int64_t>(g.edges.size()) - static_cast<std::int64_t>(g.nodes.size()) +
         static_cast<std::int64_t>(component_count(g));
}

json to_json(const VascularGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"id", n.id}, {"pos", n.position}, {"radius", n.radius}, {"kind", to_string(n.kind)},
                     {"cluster", n.cluster_id}});
  json edges = json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"id", e.id}, {"u", e.u}, {"v", e.v}, {"length", e.length}, {"axis", e.axis}});
  return json{{"directed", g.directed}, {"multigraph", g.multigraph}, {"nodes", nodes},
              {"edges", edges},         {"inlets", g.inlet_ids},      {"outlets", g.outlet_ids}};
}

VascularGraph graph_from_json(const json& j) {
  VascularGraph g;
  try {
    g.directed = j.at("directed").get<bool>();
    g.multigraph = j.at("multigraph").get<bool>();
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<NodeId>();
      n.position = jn.at("pos").get<Vec3>();
      n.radius = jn.at("radius").get<double>();
      n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
      n.cluster_id = jn.value("cluster", 1);
      g.nodes.push_back(n);
    }
    for (const auto& je : j.at("edges")) {
      Edge e;
      e.id = je.at("id").get<EdgeId>();
      e.u = je.at("u").get<NodeId>();
      e.v = je.at("v").get<NodeId>();
      e.length = je.at("length").get<double>();
      e.axis = je.at("axis").get<Vec3>();
      g.edges.push_back(std::move(e));
    }
    g.inlet_ids = j.at("inlets").get<std::vector<NodeId>>();
    g.outlet_ids = j.at("outlets").get<std::vector<NodeId>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
  validate(g);
  return g;
}

void write_graph(const std::filesystem::path& path, const VascularGraph& g) {
  write_json_file(path, to_json(g));
}

VascularGraph read_graph(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  return graph_from_json(j.contains("graph") ? j.at("graph") : j);
}

}  // namespace vgflow
