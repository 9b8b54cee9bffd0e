#include "vgflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "vgflow/errors.hpp"
#include "vgflow/json_io.hpp"
#include "vgflow/rng.hpp"

namespace vgflow {

using json = nlohmann::json;

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  return {a[0] / n, a[1] / n, a[2] / n};
}

Vec3 along(const Vec3& p, const Vec3& dir, double len) {
  return {p[0] + dir[0] * len, p[1] + dir[1] * len, p[2] + dir[2] * len};
}

constexpr double kLengthPerRadius = 8.0;

}  // namespace

VascularGraph generate_network(std::uint64_t seed, const NetworkSpec& spec) {
  if (spec.depth < 2) throw InvalidParameter("network depth must be >= 2");
  if (spec.depth > 12) throw InvalidParameter("network depth must be <= 12");
  if (spec.loop_count < 0 || spec.stenosis_count < 0) throw InvalidParameter("negative loop/stenosis count");

  CounterRng rng(derive_key(seed, {0x6e6574ULL}));
  VascularGraph g;
  g.directed = false;
  g.multigraph = false;

  struct Pending {
    NodeId node;
    Vec3 dir;
    int level;
  };

  const double r0 = rng.uniform(1.5, 2.5);
  Node inlet;
  inlet.id = 0;
  inlet.position = {0.0, 0.0, 0.0};
  inlet.radius = r0;
  inlet.kind = NodeKind::Endpoint;
  g.nodes.push_back(inlet);

  auto add_edge = [&g](NodeId u, NodeId v, double length) {
    Edge e;
    e.id = static_cast<EdgeId>(g.edges.size());
    e.u = u;
    e.v = v;
    const Vec3& pu = g.nodes[static_cast<std::size_t>(u)].position;
    const Vec3& pv = g.nodes[static_cast<std::size_t>(v)].position;
    e.length = std::max(length, distance(pu, pv));
    e.axis = unit_axis(pu, pv);
    e.path = {pu, pv};
    g.edges.push_back(std::move(e));
  };

  auto add_child = [&](NodeId parent, const Vec3& dir, double radius, NodeKind kind) {
    Node n;
    n.id = static_cast<NodeId>(g.nodes.size());
    const double len = kLengthPerRadius * radius * rng.uniform(0.75, 1.25);
    n.position = along(g.nodes[static_cast<std::size_t>(parent)].position, dir, len);
    n.radius = radius;
    n.kind = kind;
    g.nodes.push_back(n);
    add_edge(parent, n.id, len);
    return n.id;
  };

  const Vec3 trunk_dir{0.0, 0.0, 1.0};
  const NodeId first = add_child(0, trunk_dir, r0, NodeKind::Branch);
  std::vector<Pending> frontier{{first, trunk_dir, 1}};
  // Breadth-first so IDs grow level by level.
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const Pending p = frontier[head];
    const double r = g.nodes[static_cast<std::size_t>(p.node)].radius;
    const double split = rng.uniform(0.3, 0.7);
    const double ra = r * std::cbrt(split);
    const double rb = r * std::cbrt(1.0 - split);
    Vec3 helper = std::fabs(p.dir[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    const Vec3 perp0 = normalized(cross(p.dir, helper));
    const Vec3 perp1 = cross(p.dir, perp0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Vec3 perp{};
    for (int a = 0; a < 3; ++a) perp[a] = std::cos(phi) * perp0[a] + std::sin(phi) * perp1[a];
    const double theta_a = rng.uniform(25.0, 45.0) * std::numbers::pi / 180.0;
    const double theta_b = rng.uniform(25.0, 45.0) * std::numbers::pi / 180.0;
    Vec3 da{}, db{};
    for (int a = 0; a < 3; ++a) {
      da[a] = std::cos(theta_a) * p.dir[a] + std::sin(theta_a) * perp[a];
      db[a] = std::cos(theta_b) * p.dir[a] - std::sin(theta_b) * perp[a];
    }
    da = normalized(da);
    db = normalized(db);
    const bool leaf = p.level + 1 >= spec.depth;
    const NodeKind kind = leaf ? NodeKind::Endpoint : NodeKind::Branch;
    const NodeId ca = add_child(p.node, da, ra, kind);
    const NodeId cb = add_child(p.node, db, rb, kind);
    if (!leaf) {
      frontier.push_back({ca, da, p.level + 1});
      frontier.push_back({cb, db, p.level + 1});
    }
  }

  // Cross-edges between non-adjacent junctions.
  if (spec.loop_count > 0) {
    std::set<std::pair<NodeId, NodeId>> adjacent;
    for (const auto& e : g.edges) adjacent.insert(std::minmax(e.u, e.v));
    std::vector<std::pair<NodeId, NodeId>> candidates;
    for (const auto& a : g.nodes)
      for (const auto& b : g.nodes)
        if (a.id < b.id && a.kind == NodeKind::Branch && b.kind == NodeKind::Branch &&
            !adjacent.contains({a.id, b.id}))
          candidates.emplace_back(a.id, b.id);
    if (candidates.size() < static_cast<std::size_t>(spec.loop_count))
      throw InvalidParameter("cannot place " + std::to_string(spec.loop_count) + " loop(s) on a depth-" +
                             std::to_string(spec.depth) + " tree");
    rng.shuffle(candidates);
    for (int k = 0; k < spec.loop_count; ++k) {
      const auto [u, v] = candidates[static_cast<std::size_t>(k)];
      const double chord = distance(g.nodes[static_cast<std::size_t>(u)].position,
                                    g.nodes[static_cast<std::size_t>(v)].position);
      add_edge(u, v, chord * rng.uniform(1.0, 1.3));
    }
  }

  // Stenoses: split a tree segment at its midpoint with a narrowed node.
  if (spec.stenosis_count > 0) {
    const std::size_t tree_edges = g.nodes.size() - 1;
    if (static_cast<std::size_t>(spec.stenosis_count) > tree_edges)
      throw InvalidParameter("more stenoses than segments");
    std::vector<std::size_t> picks(tree_edges);
    for (std::size_t i = 0; i < tree_edges; ++i) picks[i] = i;
    rng.shuffle(picks);
    picks.resize(static_cast<std::size_t>(spec.stenosis_count));
    std::sort(picks.begin(), picks.end());
    for (std::size_t k : picks) {
      Edge& e = g.edges[k];
      const Node& nu = g.nodes[static_cast<std::size_t>(e.u)];
      const Node& nv = g.nodes[static_cast<std::size_t>(e.v)];
      Node mid;
      mid.id = static_cast<NodeId>(g.nodes.size());
      for (int a = 0; a < 3; ++a) mid.position[a] = 0.5 * (nu.position[a] + nv.position[a]);
      mid.radius = 0.5 * (nu.radius + nv.radius) * rng.uniform(0.3, 0.7);
      mid.kind = NodeKind::Branch;
      const NodeId old_v = e.v;
      const double half = 0.5 * e.length;
      g.nodes.push_back(mid);
      Edge& e2 = g.edges[k];  // re-fetch: nodes vector only
      e2.v = mid.id;
      e2.length = std::max(half, distance(g.nodes[static_cast<std::size_t>(e2.u)].position, mid.position));
      e2.axis = unit_axis(g.nodes[static_cast<std::size_t>(e2.u)].position, mid.position);
      e2.path = {g.nodes[static_cast<std::size_t>(e2.u)].position, mid.position};
      add_edge(mid.id, old_v, half);
    }
  }

  g.inlet_ids = {0};
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Endpoint && n.id != 0) g.outlet_ids.push_back(n.id);
  validate(g);
  return g;
}

std::vector<Sample> augment(const VascularGraph& graph, std::uint64_t rng_seed, const AugmentConfig& cfg,
                            std::int64_t network_id) {
  if (cfg.count < 0) throw InvalidParameter("augmentation count must be >= 0");
  if (cfg.inlet_min > cfg.inlet_max || cfg.radius_factor_min > cfg.radius_factor_max ||
      !(cfg.radius_factor_min > 0.0))
    throw InvalidParameter("augmentation ranges are invalid");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    bool done = false;
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries && !done; ++attempt) {
      CounterRng rng(derive_key(rng_seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt)}));
      Sample s;
      s.graph = graph;
      const double p_in = rng.uniform(cfg.inlet_min, cfg.inlet_max);
      for (auto& n : s.graph.nodes) n.radius *= rng.uniform(cfg.radius_factor_min, cfg.radius_factor_max);
      s.bc = uniform_boundary(s.graph, p_in, cfg.outlet_pressure, cfg.viscosity);
      try {
        s.truth = solve_flow(s.graph, s.bc);
      } catch (const Error& e) {
        last_error = e.what();
        continue;
      }
      s.source_network_id = network_id;
      s.augmentation_index = i;
      out.push_back(std::move(s));
      done = true;
    }
    if (!done)
      throw Error("augmentation " + std::to_string(i) + " failed after " + std::to_string(cfg.max_retries) +
                  " retries: " + last_error);
  }
  return out;
}

SplitPlan make_splits(const std::vector<std::int64_t>& network_ids, int fold_count, std::uint64_t rng_seed) {
  if (fold_count < 2) throw InvalidParameter("fold count must be >= 2");
  if (network_ids.size() < static_cast<std::size_t>(fold_count))
    throw InvalidParameter("need at least " + std::to_string(fold_count) + " networks for " +
                           std::to_string(fold_count) + " folds, got " + std::to_string(network_ids.size()));
  std::vector<std::int64_t> ids = network_ids;
  CounterRng rng(derive_key(rng_seed, {0x73706c6974ULL}));
  rng.shuffle(ids);
  SplitPlan plan;
  plan.fold_count = fold_count;
  plan.seed = rng_seed;
  const std::size_t n = ids.size();
  const auto k = static_cast<std::size_t>(fold_count);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
    Fold fold;
    for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? fold.test : fold.train).push_back(ids[i]);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

json to_json(const Sample& s) {
  return json{{"network_id", s.source_network_id},
              {"aug_index", s.augmentation_index},
              {"graph", to_json(s.graph)},
              {"bc", to_json(s.bc)},
              {"truth", to_json(s.truth)}};
}

Sample sample_from_json(const json& j) {
  Sample s;
  try {
    s.source_network_id = j.at("network_id").get<std::int64_t>();
    s.augmentation_index = j.at("aug_index").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed sample: ") + e.what());
  }
  s.graph = graph_from_json(j.at("graph"));
  s.bc = boundary_from_json(j.at("bc"));
  s.truth = flow_state_from_json(j.at("truth"));
  return s;
}

json to_json(const SplitPlan& p) {
  json folds = json::array();
  for (const auto& f : p.folds) folds.push_back({{"train", f.train}, {"test", f.test}});
  return json{{"fold_count", p.fold_count}, {"seed", p.seed}, {"folds", folds}};
}

SplitPlan split_plan_from_json(const json& j) {
  SplitPlan p;
  try {
    p.fold_count = j.at("fold_count").get<int>();
    p.seed = j.value("seed", std::uint64_t{0});
    for (const auto& jf : j.at("folds"))
      p.folds.push_back({jf.at("train").get<std::vector<std::int64_t>>(), jf.at("test").get<std::vector<std::int64_t>>()});
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed split plan: ") + e.what());
  }
  return p;
}

void verify_sample(const Sample& s, double tolerance) {
  if (s.augmentation_index < 0) throw FormatError("negative augmentation index");
  for (const auto* m : {&s.bc.inlet_pressures, &s.bc.outlet_pressures})
    for (const auto& [id, p] : *m) {
      const auto it = s.truth.node_pressure.find(id);
      if (it == s.truth.node_pressure.end() || it->second != p)
        throw FormatError("sample truth does not honour boundary pressure at node " + std::to_string(id));
    }
  if (s.truth.edge_flow.size() != s.graph.edges.size() || s.truth.node_pressure.size() != s.graph.nodes.size())
    throw FormatError("sample truth does not cover the graph");
  const double err = relative_conservation_error(s.graph, s.truth);
  if (!(err <= tolerance))
    throw FormatError("sample truth violates flow conservation (relative residual " + std::to_string(err) + ")");
}

NetworkSpec network_spec_for(const SynthConfig& cfg, std::int64_t network_id) {
  if (cfg.depth_min < 2 || cfg.depth_max < cfg.depth_min) throw InvalidParameter("bad depth range");
  CounterRng rng(derive_key(cfg.seed, {0x73706563ULL, static_cast<std::uint64_t>(network_id)}));
  NetworkSpec spec;
  spec.depth = cfg.depth_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.depth_max - cfg.depth_min + 1)));
  const int max_loops = spec.depth >= 3 ? cfg.max_loops : 0;
  spec.loop_count = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(max_loops, 0) + 1)));
  spec.stenosis_count = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(cfg.max_stenoses, 0) + 1)));
  // Depth-3 trees have a single junction pair.
  if (spec.depth == 3) spec.loop_count = std::min(spec.loop_count, 1);
  return spec;
}

namespace {

std::string numbered(const char* prefix, std::int64_t id, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*lld", prefix, width, static_cast<long long>(id));
  return buf;
}

}  // namespace

Manifest build_dataset(const std::filesystem::path& dir, const SynthConfig& cfg, const json& provenance) {
  if (cfg.networks < 1) throw InvalidParameter("need at least one network");
  std::filesystem::create_directories(dir / "networks");
  std::filesystem::create_directories(dir / "samples");
  Manifest m;
  m.provenance = provenance;
  for (std::int64_t id = 0; id < cfg.networks; ++id) {
    const NetworkSpec spec = network_spec_for(cfg, id);
    const VascularGraph g = generate_network(derive_key(cfg.seed, {0x67726170ULL, static_cast<std::uint64_t>(id)}), spec);
    write_json_file(dir / "networks" / (numbered("net_", id, 3) + ".json"),
                    json{{"network_id", id},
                         {"spec", {{"depth", spec.depth}, {"loop_count", spec.loop_count}, {"stenosis_count", spec.stenosis_count}}},
                         {"graph", to_json(g)}});
    m.networks.push_back(id);
    const auto samples = augment(g, derive_key(cfg.seed, {0x61756721ULL, static_cast<std::uint64_t>(id)}), cfg.augment, id);
    for (const auto& s : samples) {
      const std::string rel = "samples/" + numbered("net_", id, 3) + numbered("_aug_", s.augmentation_index, 2) + ".json";
      write_json_file(dir / rel, to_json(s));
      m.samples.push_back({rel, id, s.augmentation_index});
    }
  }
  if (cfg.networks >= cfg.folds && cfg.folds >= 2) m.split_plan = make_splits(m.networks, cfg.folds, cfg.seed);
  else m.split_plan.fold_count = 0;
  write_json_file(dir / "manifest.json", to_json(m));
  return m;
}

json to_json(const Manifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) samples.push_back({{"path", s.path}, {"network_id", s.network_id}, {"aug_index", s.aug_index}});
  json j{{"networks", m.networks}, {"samples", samples}, {"split_plan", to_json(m.split_plan)}};
  if (!m.provenance.is_null()) j["provenance"] = m.provenance;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  try {
    m.networks = j.at("networks").get<std::vector<std::int64_t>>();
    for (const auto& js : j.at("samples"))
      m.samples.push_back({js.at("path").get<std::string>(), js.at("network_id").get<std::int64_t>(), js.at("aug_index").get<int>()});
    if (j.contains("split_plan")) m.split_plan = split_plan_from_json(j.at("split_plan"));
    if (j.contains("provenance")) m.provenance = j.at("provenance");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

Manifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(read_json_file(path)); }

std::vector<Sample> load_samples(const std::filesystem::path& manifest_path, const Manifest& m) {
  const auto base = manifest_path.parent_path();
  std::vector<Sample> out;
  out.reserve(m.samples.size());
  for (const auto& entry : m.samples) {
    Sample s = sample_from_json(read_json_file(base / entry.path));
    verify_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vgflow
