#include "vgflow/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "vgflow/errors.hpp"

namespace vgflow {

// --- simple-point test -------------------------------------------------------

namespace {

struct CubeTopology {
  std::array<std::vector<int>, 27> adj26;
  std::array<std::vector<int>, 27> adj6;
  std::array<bool, 27> in_n18{};
  std::array<bool, 27> is_face{};

  CubeTopology() {
    for (int i = 0; i < 27; ++i) {
      const int x = i % 3, y = (i / 3) % 3, z = i / 9;
      const int nz = (x != 1) + (y != 1) + (z != 1);
      in_n18[i] = nz >= 1 && nz <= 2;
      is_face[i] = nz == 1;
      for (int j = 0; j < 27; ++j) {
        if (j == i) continue;
        const int dx = std::abs(x - j % 3), dy = std::abs(y - (j / 3) % 3), dz = std::abs(z - j / 9);
        if (std::max({dx, dy, dz}) <= 1) adj26[i].push_back(j);
        if (dx + dy + dz == 1) adj6[i].push_back(j);
      }
    }
  }
};

const CubeTopology& cube_topology() {
  static const CubeTopology t;
  return t;
}

}  // namespace

bool is_simple_point(const std::array<bool, 27>& cube) {
  const auto& topo = cube_topology();
  constexpr int kCenter = 13;

  // Exactly one 26-component of foreground in the punctured neighborhood.
  std::array<bool, 27> seen{};
  int fg_components = 0;
  for (int s = 0; s < 27; ++s) {
    if (s == kCenter || !cube[s] || seen[s]) continue;
    if (++fg_components > 1) return false;
    int stack[27];
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top > 0) {
      const int i = stack[--top];
      for (int j : topo.adj26[i])
        if (j != kCenter && cube[j] && !seen[j]) {
          seen[j] = true;
          stack[top++] = j;
        }
    }
  }
  if (fg_components != 1) return false;

  // Exactly one 6-component of background in N18 that touches a face.
  seen.fill(false);
  int bg_components = 0;
  for (int s = 0; s < 27; ++s) {
    if (!topo.is_face[s] || cube[s] || seen[s]) continue;
    if (++bg_components > 1) return false;
    int stack[27];
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top > 0) {
      const int i = stack[--top];
      for (int j : topo.adj6[i])
        if (topo.in_n18[j] && !cube[j] && !seen[j]) {
          seen[j] = true;
          stack[top++] = j;
        }
    }
  }
  return bg_components == 1;
}

// --- thinning ----------------------------------------------------------------

namespace {

class Volume8 {
 public:
  explicit Volume8(const VesselMask& m) : dims_(m.dims), v_(m.mask) {}

  bool get(std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t z) const {
    if (!in_bounds(dims_, {x, y, z})) return false;
    return v_[linear_index(dims_, static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                           static_cast<std::size_t>(z))] != 0;
  }
  void set(std::size_t i, bool on) { v_[i] = on ? 1 : 0; }
  bool get(std::size_t i) const { return v_[i] != 0; }

  std::array<bool, 27> cube(const Index3& p) const {
    std::array<bool, 27> c{};
    for (int dz = 0; dz < 3; ++dz)
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx)
          c[dx + 3 * dy + 9 * dz] = get(p[0] + dx - 1, p[1] + dy - 1, p[2] + dz - 1);
    return c;
  }

  int neighbor_count(const Index3& p) const {
    int n = 0;
    for (const auto& o : neighbors26()) n += get(p[0] + o[0], p[1] + o[1], p[2] + o[2]) ? 1 : 0;
    return n;
  }

  const std::vector<std::uint8_t>& data() const { return v_; }

 private:
  Dims dims_;
  std::vector<std::uint8_t> v_;
};

}  // namespace

VesselMask skeletonize(const VesselMask& mask) {
  validate(mask);
  Volume8 vol(mask);
  const Dims& d = mask.dims;
  static constexpr std::array<Index3, 6> kBorders{{{0, -1, 0}, {0, 1, 0}, {-1, 0, 0}, {1, 0, 0}, {0, 0, -1}, {0, 0, 1}}};

  std::vector<std::size_t> candidates;
  int unchanged = 0;
  while (unchanged < 6) {
    unchanged = 0;
    for (const auto& b : kBorders) {
      candidates.clear();
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!vol.get(i)) continue;
        const Index3 p = unravel(d, i);
        if (vol.get(p[0] + b[0], p[1] + b[1], p[2] + b[2])) continue;
        if (vol.neighbor_count(p) <= 1) continue;
        if (!is_simple_point(vol.cube(p))) continue;
        candidates.push_back(i);
      }
      bool changed = false;
      for (std::size_t i : candidates) {
        const Index3 p = unravel(d, i);
        if (vol.neighbor_count(p) <= 1) continue;
        if (!is_simple_point(vol.cube(p))) continue;
        vol.set(i, false);
        changed = true;
      }
      if (!changed) ++unchanged;
    }
  }

  VesselMask out(d, mask.spacing);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (vol.get(i)) {
      out.mask[i] = 1;
      out.cluster_id[i] = mask.cluster_id[i] > 0 ? mask.cluster_id[i] : 1;
    }
  }
  return out;
}

std::vector<VoxelClass> classify_voxels(const VesselMask& skeleton) {
  validate(skeleton);
  std::vector<VoxelClass> cls(skeleton.size(), VoxelClass::Background);
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    if (!skeleton.on(i)) continue;
    const Index3 p = unravel(skeleton.dims, i);
    int n = 0;
    for (const auto& o : neighbors26()) {
      const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
      if (!skeleton.on(q)) continue;
      const std::size_t j = linear_index(skeleton.dims, static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]),
                                         static_cast<std::size_t>(q[2]));
      if (skeleton.cluster_id[j] == skeleton.cluster_id[i]) ++n;
    }
    cls[i] = n == 0 ? VoxelClass::Isolated : n == 1 ? VoxelClass::Endpoint : n == 2 ? VoxelClass::Path : VoxelClass::Branch;
  }
  return cls;
}

// --- distance transform ---------------------------------------------------------

namespace {

// Squared distance transform of one sampled line (Felzenszwalb & Huttenlocher)
// with sample pitch `h`.
void edt_1d(const double* f, double* out, std::size_t n, double h, std::vector<std::size_t>& v,
            std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  std::size_t first = n;
  for (std::size_t q = 0; q < n; ++q)
    if (std::isfinite(f[q])) {
      first = q;
      break;
    }
  if (first == n) {
    std::fill(out, out + n, kInf);
    return;
  }
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  auto pos = [h](std::size_t q) { return static_cast<double>(q) * h; };
  for (std::size_t q = first + 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s;
    while (true) {
      const std::size_t p = v[k];
      s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < pos(q)) ++k;
    const double dq = pos(q) - pos(v[k]);
    out[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const VesselMask& mask) {
  validate(mask);
  const Dims& d = mask.dims;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> f(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask.on(i) ? kInf : 0.0;

  std::vector<double> line, res;
  std::vector<std::size_t> v;
  std::vector<double> z;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = d[axis];
    line.resize(n);
    res.resize(n);
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d[0] : d[0] * d[1];
    const std::size_t other1 = axis == 0 ? d[1] : d[0];
    const std::size_t other2 = axis == 2 ? d[1] : d[2];
    for (std::size_t b = 0; b < other2; ++b) {
      for (std::size_t a = 0; a < other1; ++a) {
        std::size_t base;
        if (axis == 0) base = linear_index(d, 0, a, b);
        else if (axis == 1) base = linear_index(d, a, 0, b);
        else base = linear_index(d, a, b, 0);
        for (std::size_t q = 0; q < n; ++q) line[q] = f[base + q * stride];
        edt_1d(line.data(), res.data(), n, mask.spacing[axis], v, z);
        for (std::size_t q = 0; q < n; ++q) f[base + q * stride] = res[q];
      }
    }
  }
  for (double& x : f) x = std::sqrt(x);
  return f;
}

// --- graph construction -----------------------------------------------------------

namespace {

Vec3 voxel_center(const VesselMask& m, std::size_t i) {
  const Index3 p = unravel(m.dims, i);
  return {static_cast<double>(p[0]) * m.spacing[0], static_cast<double>(p[1]) * m.spacing[1],
          static_cast<double>(p[2]) * m.spacing[2]};
}

double polyline_length(const std::vector<Vec3>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += distance(path[i - 1], path[i]);
  return len;
}

struct WorkGraph {
  struct WNode {
    Node node;
    bool alive = true;
  };
  struct WEdge {
    std::size_t a, b;  // indices into nodes
    std::vector<Vec3> path;  // includes both node positions
    bool alive = true;
  };
  std::vector<WNode> nodes;
  std::vector<WEdge> edges;

  std::size_t degree(std::size_t n) const {
    std::size_t deg = 0;
    for (const auto& e : edges)
      if (e.alive) deg += (e.a == n) + (e.b == n);
    return deg;
  }

  std::vector<std::size_t> incident(std::size_t n) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (edges[i].alive && (edges[i].a == n || edges[i].b == n)) out.push_back(i);
    return out;
  }

  // Joins the two edges at a degree-2 node into one.
  void splice(std::size_t n) {
    const auto inc = incident(n);
    if (inc.size() != 2 || inc[0] == inc[1]) return;
    WEdge& e1 = edges[inc[0]];
    WEdge& e2 = edges[inc[1]];
    std::vector<Vec3> p1 = e1.path;
    std::size_t end1 = e1.a;
    if (e1.a == n) {
      std::reverse(p1.begin(), p1.end());
      end1 = e1.b;
    }
    std::vector<Vec3> p2 = e2.path;
    std::size_t end2 = e2.b;
    if (e2.b == n) {
      std::reverse(p2.begin(), p2.end());
      end2 = e2.a;
    }
    if (end1 == end2) return;  // would close a self-loop and lose the cycle
    p1.insert(p1.end(), p2.begin() + 1, p2.end());
    e1.a = end1;
    e1.b = end2;
    e1.path = std::move(p1);
    e2.alive = false;
    nodes[n].alive = false;
    if (e1.a == e1.b) e1.alive = false;
  }
};

}  // namespace

VascularGraph build_graph(const VesselMask& skeleton, const std::vector<double>& distance_field,
                          const GraphBuildOptions& opts) {
  validate(skeleton);
  if (distance_field.size() != skeleton.size())
    throw InvalidParameter("distance field size does not match skeleton");
  const Dims& d = skeleton.dims;
  const auto cls = classify_voxels(skeleton);

  auto index_of = [&](const Index3& q) {
    return linear_index(d, static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]), static_cast<std::size_t>(q[2]));
  };
  auto skel_neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    const Index3 p = unravel(d, i);
    for (const auto& o : neighbors26()) {
      const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
      if (!in_bounds(d, q)) continue;
      const std::size_t j = index_of(q);
      if (skeleton.on(j) && skeleton.cluster_id[j] == skeleton.cluster_id[i]) out.push_back(j);
    }
    return out;
  };

  // Group node voxels: each endpoint alone, 26-adjacent branch voxels merged.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> group(skeleton.size(), kNone);
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    if (group[i] != kNone) continue;
    if (cls[i] != VoxelClass::Endpoint && cls[i] != VoxelClass::Branch) continue;
    const std::size_t g = members.size();
    members.emplace_back();
    group[i] = g;
    std::deque<std::size_t> q{i};
    while (!q.empty()) {
      const std::size_t j = q.front();
      q.pop_front();
      members[g].push_back(j);
      if (cls[j] != VoxelClass::Branch) continue;
      for (std::size_t k : skel_neighbors(j))
        if (group[k] == kNone && cls[k] == VoxelClass::Branch) {
          group[k] = g;
          q.push_back(k);
        }
    }
  }
  if (members.empty())
    throw DegenerateGraph("skeleton has no branch or endpoint voxels");

  WorkGraph wg;
  for (std::size_t g = 0; g < members.size(); ++g) {
    Vec3 c{0.0, 0.0, 0.0};
    for (std::size_t i : members[g]) {
      const Vec3 p = voxel_center(skeleton, i);
      for (int a = 0; a < 3; ++a) c[a] += p[a];
    }
    for (int a = 0; a < 3; ++a) c[a] /= static_cast<double>(members[g].size());
    std::size_t nearest = members[g].front();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : members[g]) {
      const double dist = distance(voxel_center(skeleton, i), c);
      if (dist < best) {
        best = dist;
        nearest = i;
      }
    }
    Node n;
    n.position = c;
    n.radius = std::max(distance_field[nearest], 0.5 * *std::min_element(skeleton.spacing.begin(), skeleton.spacing.end()));
    n.kind = cls[members[g].front()] == VoxelClass::Branch ? NodeKind::Branch : NodeKind::Endpoint;
    n.cluster_id = skeleton.cluster_id[members[g].front()];
    wg.nodes.push_back({n, true});
  }

  // Centerline voxels walked from an endpoint tip inward, for radius
  // estimation away from the tapered tip.
  constexpr std::size_t kTipWindow = 5;
  std::vector<std::vector<std::size_t>> tip_chain(members.size());
  auto collect_chain = [&](std::size_t tip, std::size_t next) {
    std::vector<std::size_t> chain{tip};
    std::size_t prev = tip, cur = next;
    while (chain.size() < kTipWindow && group[cur] == kNone) {
      chain.push_back(cur);
      std::size_t step = kNone;
      for (std::size_t k : skel_neighbors(cur))
        if (k != prev && group[k] == kNone) {
          step = k;
          break;
        }
      if (step == kNone) break;
      prev = cur;
      cur = step;
    }
    return chain;
  };

  // Trace edges.
  std::vector<std::uint8_t> visited(skeleton.size(), 0);
  std::set<std::pair<std::size_t, std::size_t>> direct_pairs;
  for (std::size_t g = 0; g < members.size(); ++g) {
    for (std::size_t start : members[g]) {
      for (std::size_t first : skel_neighbors(start)) {
        if (group[first] == g) continue;
        if (group[first] != kNone) {
          const auto key = std::minmax(g, group[first]);
          if (direct_pairs.insert(key).second)
            wg.edges.push_back({g, group[first], {wg.nodes[g].node.position, wg.nodes[group[first]].node.position}, true});
          continue;
        }
        if (visited[first]) continue;
        std::vector<Vec3> path{wg.nodes[g].node.position, voxel_center(skeleton, first)};
        visited[first] = 1;
        std::size_t prev = start;
        std::size_t cur = first;
        std::size_t end_group = kNone;
        while (end_group == kNone) {
          std::size_t next = kNone;
          for (std::size_t k : skel_neighbors(cur)) {
            if (k == prev) continue;
            if (group[k] != kNone && !(group[k] == g && prev == start && k == start)) {
              end_group = group[k];
              break;
            }
            if (group[k] == kNone && !visited[k] && next == kNone) next = k;
          }
          if (end_group != kNone) break;
          if (next == kNone) break;  // dead end in a path-only fragment
          visited[next] = 1;
          path.push_back(voxel_center(skeleton, next));
          prev = cur;
          cur = next;
        }
        if (end_group == kNone || end_group == g) continue;
        path.push_back(wg.nodes[end_group].node.position);
        wg.edges.push_back({g, end_group, std::move(path), true});
        if (wg.nodes[g].node.kind == NodeKind::Endpoint) tip_chain[g] = collect_chain(start, first);
        if (wg.nodes[end_group].node.kind == NodeKind::Endpoint) {
          std::size_t end_voxel = members[end_group].front();
          tip_chain[end_group] = collect_chain(end_voxel, cur);
        }
      }
    }
  }

  for (std::size_t g = 0; g < members.size(); ++g) {
    if (tip_chain[g].empty()) continue;
    std::vector<double> samples;
    for (std::size_t v : tip_chain[g]) samples.push_back(distance_field[v]);
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2), samples.end());
    wg.nodes[g].node.radius = std::max(wg.nodes[g].node.radius, samples[samples.size() / 2]);
  }

  auto local_radius = [&](const WorkGraph::WEdge& e) {
    return std::max(wg.nodes[e.a].node.radius, wg.nodes[e.b].node.radius);
  };

  // Prune short spurs hanging off junctions, then splice degree-2 nodes.
  if (opts.spur_radius_factor > 0.0) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto& e : wg.edges) {
        if (!e.alive) continue;
        const bool a_end = wg.nodes[e.a].node.kind == NodeKind::Endpoint;
        const bool b_end = wg.nodes[e.b].node.kind == NodeKind::Endpoint;
        if (a_end == b_end) continue;
        const std::size_t tip = a_end ? e.a : e.b;
        const std::size_t hub = a_end ? e.b : e.a;
        if (wg.degree(hub) < 3) continue;
        if (polyline_length(e.path) >= opts.spur_radius_factor * local_radius(e)) continue;
        e.alive = false;
        wg.nodes[tip].alive = false;
        if (wg.degree(hub) == 2) wg.splice(hub);
        changed = true;
      }
    }
  }

  if (opts.merge_radius_factor > 0.0) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t ei = 0; ei < wg.edges.size(); ++ei) {
        auto& e = wg.edges[ei];
        if (!e.alive) continue;
        if (wg.nodes[e.a].node.kind != NodeKind::Branch || wg.nodes[e.b].node.kind != NodeKind::Branch) continue;
        if (polyline_length(e.path) >= opts.merge_radius_factor * local_radius(e)) continue;
        bool parallel = false;
        for (std::size_t oi = 0; oi < wg.edges.size(); ++oi) {
          const auto& o = wg.edges[oi];
          if (oi != ei && o.alive && std::minmax(o.a, o.b) == std::minmax(e.a, e.b)) parallel = true;
        }
        if (parallel) continue;
        // Collapse b into a at the midpoint.
        const std::size_t keep = e.a, drop = e.b;
        Node& nk = wg.nodes[keep].node;
        const Node& nd = wg.nodes[drop].node;
        for (int a = 0; a < 3; ++a) nk.position[a] = 0.5 * (nk.position[a] + nd.position[a]);
        nk.radius = std::max(nk.radius, nd.radius);
        e.alive = false;
        wg.nodes[drop].alive = false;
        for (auto& o : wg.edges) {
          if (!o.alive) continue;
          if (o.a == drop) o.a = keep;
          if (o.b == drop) o.b = keep;
          if (o.a == keep) o.path.front() = nk.position;
          if (o.b == keep) o.path.back() = nk.position;
          if (o.a == o.b) o.alive = false;
        }
        changed = true;
      }
    }
  }

  for (std::size_t n = 0; n < wg.nodes.size(); ++n)
    if (wg.nodes[n].alive && wg.nodes[n].node.kind == NodeKind::Branch && wg.degree(n) == 2) wg.splice(n);
  for (std::size_t n = 0; n < wg.nodes.size(); ++n)
    if (wg.nodes[n].alive && wg.degree(n) == 0) wg.nodes[n].alive = false;

  VascularGraph g;
  g.directed = false;
  g.multigraph = true;
  std::vector<NodeId> new_id(wg.nodes.size(), -1);
  for (std::size_t n = 0; n < wg.nodes.size(); ++n) {
    if (!wg.nodes[n].alive) continue;
    Node node = wg.nodes[n].node;
    node.id = static_cast<NodeId>(g.nodes.size());
    new_id[n] = node.id;
    g.nodes.push_back(node);
  }
  if (g.nodes.empty()) throw DegenerateGraph("no graph nodes survived construction");
  for (auto& e : wg.edges) {
    if (!e.alive) continue;
    Edge edge;
    edge.id = static_cast<EdgeId>(g.edges.size());
    edge.u = new_id[e.a];
    edge.v = new_id[e.b];
    edge.path = std::move(e.path);
    const Vec3& pu = g.nodes[static_cast<std::size_t>(edge.u)].position;
    const Vec3& pv = g.nodes[static_cast<std::size_t>(edge.v)].position;
    edge.path.front() = pu;
    edge.path.back() = pv;
    edge.length = std::max(polyline_length(edge.path), distance(pu, pv));
    if (!(edge.length > 0.0)) edge.length = *std::min_element(skeleton.spacing.begin(), skeleton.spacing.end());
    edge.axis = unit_axis(pu, pv);
    g.edges.push_back(std::move(edge));
  }
  return g;
}

VascularGraph assign_boundary_nodes(const VascularGraph& graph, const BoundaryRule& rule) {
  VascularGraph g = graph;
  std::vector<const Node*> endpoints;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Endpoint) endpoints.push_back(&n);

  const auto idx = g.node_index();
  auto check_ids = [&](const std::vector<NodeId>& ids, const char* what) {
    for (NodeId id : ids)
      if (!idx.contains(id)) throw InvalidParameter(std::string(what) + " " + std::to_string(id) + " is not a node");
  };

  if (rule.inlets) {
    check_ids(*rule.inlets, "inlet");
    g.inlet_ids = *rule.inlets;
  } else {
    if (endpoints.size() < 2)
      throw DegenerateGraph("graph has " + std::to_string(endpoints.size()) + " endpoint(s); need at least 2");
    const Node* best = endpoints.front();
    for (const Node* n : endpoints)
      if (n->radius > best->radius) best = n;
    g.inlet_ids = {best->id};
  }
  if (rule.outlets) {
    check_ids(*rule.outlets, "outlet");
    g.outlet_ids = *rule.outlets;
  } else {
    if (endpoints.size() < 2 && !rule.inlets)
      throw DegenerateGraph("graph needs at least 2 endpoints");
    g.outlet_ids.clear();
    for (const Node* n : endpoints)
      if (!g.is_inlet(n->id)) g.outlet_ids.push_back(n->id);
  }
  for (NodeId id : g.inlet_ids)
    if (g.is_outlet(id)) throw InvalidParameter("node " + std::to_string(id) + " is both inlet and outlet");
  if (g.inlet_ids.empty() || g.outlet_ids.empty())
    throw DegenerateGraph("boundary assignment left no inlet or no outlet");
  return g;
}

VascularGraph extract_graph(const VesselMask& mask, const ExtractionConfig& cfg) {
  const auto dist = distance_transform(mask);
  const auto skel = skeletonize(mask);
  return assign_boundary_nodes(build_graph(skel, dist, cfg.build), cfg.boundary);
}

std::int64_t voxel_cycle_rank(const VesselMask& mask) {
  const Dims& d = mask.dims;
  std::int64_t v = 0, e = 0, c = 0;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.on(i)) continue;
    ++v;
    const Index3 p = unravel(d, i);
    for (const auto& o : neighbors26())
      if (mask.on(Index3{p[0] + o[0], p[1] + o[1], p[2] + o[2]})) ++e;
    if (seen[i]) continue;
    ++c;
    std::deque<std::size_t> q{i};
    seen[i] = 1;
    while (!q.empty()) {
      const Index3 r = unravel(d, q.front());
      q.pop_front();
      for (const auto& o : neighbors26()) {
        const Index3 s{r[0] + o[0], r[1] + o[1], r[2] + o[2]};
        if (!mask.on(s)) continue;
        const std::size_t j = linear_index(d, static_cast<std::size_t>(s[0]), static_cast<std::size_t>(s[1]),
                                           static_cast<std::size_t>(s[2]));
        if (!seen[j]) {
          seen[j] = 1;
          q.push_back(j);
        }
      }
    }
  }
  return e / 2 - v + c;
}

}  // namespace vgflow
