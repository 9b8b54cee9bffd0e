#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vgflow/graph.hpp"
#include "vgflow/volume.hpp"

namespace vgflow {

// Topology-preserving 3D thinning (26-connected foreground, 6-connected
// background) down to a one-voxel-wide centerline. Curve ends are kept, so
// open tubes keep their length. cluster_id labels carry over.
VesselMask skeletonize(const VesselMask& mask);

// True when deleting the center of the 3x3x3 block leaves foreground and
// background topology unchanged. `cube` is indexed dx + 3*dy + 9*dz with
// offsets in {0,1,2}; the center (13) is ignored.
bool is_simple_point(const std::array<bool, 27>& cube);

enum class VoxelClass : std::uint8_t { Background, Isolated, Endpoint, Path, Branch };

// Per-voxel class from the count of same-cluster 26-neighbors in the skeleton:
// 0 isolated, 1 endpoint, 2 path, 3+ branch.
std::vector<VoxelClass> classify_voxels(const VesselMask& skeleton);

// Euclidean distance (mm) from every foreground voxel center to the nearest
// background voxel center; 0 on background. Space outside the grid does not
// count as background.
std::vector<double> distance_transform(const VesselMask& mask);

struct GraphBuildOptions {
  // Terminal edges shorter than this many local radii are pruned as spurs.
  double spur_radius_factor = 0.0;
  // Branch-to-branch edges shorter than this many local radii are collapsed.
  double merge_radius_factor = 0.0;
};

// Builds the centerline graph from a skeleton and the distance field of the
// pre-skeleton mask. Throws DegenerateGraph when no endpoint/branch voxel
// exists. Self-loops are dropped since they carry no flow.
VascularGraph build_graph(const VesselMask& skeleton, const std::vector<double>& distance_field,
                          const GraphBuildOptions& opts = {});

struct BoundaryRule {
  std::optional<std::vector<NodeId>> inlets;
  std::optional<std::vector<NodeId>> outlets;
};

// Default: endpoint with the largest radius (lowest ID on ties) is the inlet,
// all other endpoints are outlets. Explicit lists override.
VascularGraph assign_boundary_nodes(const VascularGraph& graph, const BoundaryRule& rule = {});

struct ExtractionConfig {
  GraphBuildOptions build{1.5, 1.0};
  BoundaryRule boundary;
};

// distance_transform + skeletonize + build_graph + assign_boundary_nodes.
VascularGraph extract_graph(const VesselMask& mask, const ExtractionConfig& cfg = {});

// Loop count (|E| - |V| + components) of the 26-adjacency voxel graph.
std::int64_t voxel_cycle_rank(const VesselMask& mask);

}  // namespace vgflow
