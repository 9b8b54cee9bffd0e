#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <vector>

#include "vgflow/errors.hpp"
#include "vgflow/extraction.hpp"
#include "vgflow/phantom.hpp"

using namespace vgflow;

namespace {

void set(VesselMask& m, std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t z, std::int32_t cluster = 1) {
  const std::size_t i = linear_index(m.dims, static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                     static_cast<std::size_t>(z));
  m.mask[i] = 1;
  m.cluster_id[i] = cluster;
}

std::size_t neighbor_count(const VesselMask& m, std::size_t i) {
  const Index3 p = unravel(m.dims, i);
  std::size_t n = 0;
  for (const auto& o : neighbors26())
    if (m.on(Index3{p[0] + o[0], p[1] + o[1], p[2] + o[2]})) ++n;
  return n;
}

std::size_t components26(const VesselMask& m) {
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::size_t count = 0;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (!m.mask[s] || seen[s]) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const Index3 p = unravel(m.dims, q.front());
      q.pop();
      for (const auto& o : neighbors26()) {
        const Index3 r{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
        if (!m.on(r)) continue;
        const auto j = linear_index(m.dims, static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[1]),
                                    static_cast<std::size_t>(r[2]));
        if (!seen[j]) {
          seen[j] = 1;
          q.push(j);
        }
      }
    }
  }
  return count;
}

// Y skeleton: a +x limb and two diagonal limbs meeting at (15, 15, 15).
VesselMask y_skeleton() {
  VesselMask m({31, 31, 31}, {1, 1, 1});
  set(m, 15, 15, 15);
  for (int k = 1; k <= 10; ++k) {
    set(m, 15 + k, 15, 15);
    set(m, 15 - k, 15 + k, 15);
    set(m, 15 - k, 15 - k, 15);
  }
  return m;
}

std::vector<double> constant_field(const VesselMask& m, double v) {
  std::vector<double> f(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.mask[i]) f[i] = v;
  return f;
}

}  // namespace

TEST_CASE("simple point spot checks") {
  std::array<bool, 27> c{};
  c[13] = true;
  CHECK_FALSE(is_simple_point(c));  // isolated
  c[12] = true;
  CHECK(is_simple_point(c));  // line end
  c[14] = true;
  CHECK_FALSE(is_simple_point(c));  // line interior
  std::array<bool, 27> full;
  full.fill(true);
  CHECK_FALSE(is_simple_point(full));  // would open a cavity
  std::array<bool, 27> floor{};
  for (int i = 0; i < 9; ++i) floor[static_cast<std::size_t>(i)] = true;
  floor[13] = true;
  CHECK(is_simple_point(floor));
}

TEST_CASE("a 3-voxel-thick tube thins to a connected one-voxel chain") {
  VesselMask m({24, 7, 7}, {1, 1, 1});
  for (int x = 2; x < 22; ++x)
    for (int y = 2; y <= 4; ++y)
      for (int z = 2; z <= 4; ++z) set(m, x, y, z);
  const VesselMask s = skeletonize(m);
  CHECK(components26(s) == 1);
  CHECK(s.foreground_count() >= 14);
  CHECK(s.foreground_count() <= 22);
  std::size_t ends = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.mask[i]) continue;
    CHECK(m.mask[i] == 1);
    const auto n = neighbor_count(s, i);
    CHECK(n >= 1);
    CHECK(n <= 2);
    if (n == 1) ++ends;
  }
  CHECK(ends == 2);
}

TEST_CASE("a thin chain is already a skeleton") {
  VesselMask m({25, 3, 3}, {1, 1, 1});
  for (int x = 2; x < 23; ++x) set(m, x, 1, 1);
  const VesselMask s = skeletonize(m);
  CHECK(s.mask == m.mask);
}

TEST_CASE("a torus keeps its loop under thinning") {
  const VesselMask t = make_torus_mask({31, 31, 9}, 9.0, 2.5);
  REQUIRE(t.foreground_count() > 0);
  const VesselMask s = skeletonize(t);
  CHECK(components26(s) == 1);
  CHECK(s.foreground_count() < t.foreground_count() / 5);
  const auto dist = distance_transform(t);
  CHECK(cycle_rank(build_graph(s, dist)) == 1);
  const VascularGraph pruned = build_graph(s, dist, {1.5, 1.0});
  CHECK(cycle_rank(pruned) == 1);
  CHECK(component_count(pruned) == 1);
}

TEST_CASE("voxel classes follow the neighbor count") {
  const VesselMask y = y_skeleton();
  const auto cls = classify_voxels(y);
  CHECK(cls[linear_index(y.dims, 15, 15, 15)] == VoxelClass::Branch);
  CHECK(cls[linear_index(y.dims, 25, 15, 15)] == VoxelClass::Endpoint);
  CHECK(cls[linear_index(y.dims, 20, 15, 15)] == VoxelClass::Path);
  CHECK(cls[linear_index(y.dims, 0, 0, 0)] == VoxelClass::Background);
  VesselMask lone({3, 3, 3}, {1, 1, 1});
  set(lone, 1, 1, 1);
  CHECK(classify_voxels(lone)[13] == VoxelClass::Isolated);
}

TEST_CASE("a Y skeleton gives one branch node and three limbs") {
  const VesselMask y = y_skeleton();
  const VascularGraph g = build_graph(y, constant_field(y, 2.0));
  REQUIRE(g.nodes.size() == 4);
  REQUIRE(g.edges.size() == 3);
  int branch = 0, ends = 0;
  for (const auto& n : g.nodes) (n.kind == NodeKind::Branch ? branch : ends)++;
  CHECK(branch == 1);
  CHECK(ends == 3);
  for (const auto& e : g.edges) {
    CHECK(e.length >= 10.0 - 1e-12);
    CHECK(e.length <= 10.0 * std::sqrt(3.0) + 1e-12);
    const auto& pu = g.node(e.u).position;
    const auto& pv = g.node(e.v).position;
    const double norm = std::sqrt(e.axis[0] * e.axis[0] + e.axis[1] * e.axis[1] + e.axis[2] * e.axis[2]);
    CHECK(norm == doctest::Approx(1.0));
    CHECK(e.axis[0] * (pv[0] - pu[0]) + e.axis[1] * (pv[1] - pu[1]) + e.axis[2] * (pv[2] - pu[2]) > 0.0);
  }
  CHECK_NOTHROW(validate(g));
}

TEST_CASE("a 21-voxel chain becomes a single edge of length 20") {
  VesselMask m({25, 3, 3}, {1, 1, 1});
  for (int x = 2; x <= 22; ++x) set(m, x, 1, 1);
  const VascularGraph g = build_graph(m, constant_field(m, 1.0));
  REQUIRE(g.nodes.size() == 2);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].length == doctest::Approx(20.0).epsilon(1e-12));

  VesselMask a({25, 3, 3}, {0.5, 1, 1});
  for (int x = 2; x <= 22; ++x) set(a, x, 1, 1);
  CHECK(build_graph(a, constant_field(a, 1.0)).edges[0].length == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("edges never cross cluster labels") {
  VesselMask m({30, 5, 3}, {1, 1, 1});
  for (int x = 0; x <= 10; ++x) set(m, x, 1, 1, 1);
  for (int x = 11; x <= 25; ++x) set(m, x, 2, 1, 2);  // touches the first chain diagonally
  const VascularGraph g = build_graph(m, constant_field(m, 1.0));
  CHECK(g.nodes.size() == 4);
  CHECK(g.edges.size() == 2);
  for (const auto& e : g.edges) CHECK(g.node(e.u).cluster_id == g.node(e.v).cluster_id);
  CHECK(component_count(g) == 2);
}

TEST_CASE("empty or loop-only skeletons are degenerate") {
  VesselMask m({5, 5, 5}, {1, 1, 1});
  CHECK_THROWS_AS(build_graph(m, constant_field(m, 1.0)), DegenerateGraph);
  CHECK_THROWS_AS(build_graph(m, std::vector<double>(3, 0.0)), InvalidParameter);
}

TEST_CASE("boundary assignment picks the widest endpoint as inlet") {
  VascularGraph g;
  for (NodeId i = 0; i < 4; ++i) {
    Node n;
    n.id = i;
    n.position = {static_cast<double>(i), 0, 0};
    n.radius = i == 2 ? 3.0 : 1.0;
    n.kind = i == 0 ? NodeKind::Branch : NodeKind::Endpoint;
    g.nodes.push_back(n);
  }
  for (EdgeId e = 0; e < 3; ++e) g.edges.push_back({e, 0, e + 1, 1.0 + static_cast<double>(e), {1, 0, 0}, {}});
  const VascularGraph a = assign_boundary_nodes(g);
  CHECK(a.inlet_ids == std::vector<NodeId>{2});
  CHECK(a.outlet_ids == std::vector<NodeId>{1, 3});

  // ties go to the lowest ID
  g.nodes[3].radius = 3.0;
  CHECK(assign_boundary_nodes(g).inlet_ids == std::vector<NodeId>{2});

  BoundaryRule rule;
  rule.inlets = std::vector<NodeId>{1};
  const VascularGraph b = assign_boundary_nodes(g, rule);
  CHECK(b.inlet_ids == std::vector<NodeId>{1});
  CHECK(b.outlet_ids == std::vector<NodeId>{2, 3});

  rule.inlets = std::vector<NodeId>{9};
  CHECK_THROWS_AS(assign_boundary_nodes(g, rule), InvalidParameter);
  rule.inlets = std::vector<NodeId>{1};
  rule.outlets = std::vector<NodeId>{1, 2};
  CHECK_THROWS_AS(assign_boundary_nodes(g, rule), InvalidParameter);

  VascularGraph one = g;
  for (auto& n : one.nodes)
    if (n.id != 1) n.kind = NodeKind::Branch;
  CHECK_THROWS_AS(assign_boundary_nodes(one), DegenerateGraph);
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.7);
  for (int trial = 0; trial < 6; ++trial) {
    const Spacing sp{1.0, 0.5 + 0.25 * trial, 1.5};
    VesselMask m({9, 8, 7}, sp);
    for (std::size_t i = 0; i < m.size(); ++i) m.mask[i] = coin(rng) ? 1 : 0;
    m.mask[0] = 0;
    const auto dt = distance_transform(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m.mask[i]) {
        CHECK(dt[i] == 0.0);
        continue;
      }
      const Index3 p = unravel(m.dims, i);
      double best = INFINITY;
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (m.mask[j]) continue;
        const Index3 q = unravel(m.dims, j);
        double acc = 0.0;
        for (int a = 0; a < 3; ++a) acc += std::pow(static_cast<double>(p[a] - q[a]) * sp[a], 2);
        best = std::min(best, std::sqrt(acc));
      }
      CHECK(dt[i] == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("extract_graph on a rasterized Y") {
  const std::vector<Capsule> caps{{{10, 20, 6}, {30, 20, 6}, 3.0},
                                  {{30, 20, 6}, {45, 8, 6}, 2.0},
                                  {{30, 20, 6}, {45, 32, 6}, 2.0}};
  const VesselMask m = rasterize_capsules({55, 41, 13}, {1, 1, 1}, caps);
  const VascularGraph g = extract_graph(m);
  CHECK(g.edges.size() == 3);
  CHECK(g.inlet_ids.size() == 1);
  CHECK(g.outlet_ids.size() == 2);
  CHECK(g.node(g.inlet_ids[0]).position[0] < 20.0);
  CHECK(cycle_rank(g) == 0);
}
