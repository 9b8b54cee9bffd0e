#pragma once

#include <cstdint>
#include <vector>

#include "vgflow/graph.hpp"
#include "vgflow/volume.hpp"

namespace vgflow {

// Solid capsule (segment swept by a sphere), coordinates in voxel units.
struct Capsule {
  Vec3 a{};
  Vec3 b{};
  double radius = 1.0;
};

// 1 inside any capsule, 0 elsewhere.
VesselMask rasterize_capsules(const Dims& dims, const Spacing& spacing, const std::vector<Capsule>& capsules);

struct YPhantom {
  VoxelGrid grid;            // intensities: 1 inside, 0 outside, plus noise
  Vec3 junction{};           // mm
  std::vector<Vec3> ends;    // mm, trunk first
  std::vector<double> radii; // mm, per limb
};

struct YPhantomSpec {
  Dims dims{57, 57, 25};
  double trunk_radius = 3.5;     // voxels
  double daughter_radius = 3.0;  // voxels
  double limb_length = 34.0;     // voxels; limbs leave the grid like vessels leaving the field of view
  double noise_sigma = 0.15;
  double speckle_fraction = 0.002;  // isolated bright voxels
  std::uint64_t seed = 7;
};

// Planar Y with limbs 120 degrees apart, isotropic 1 mm spacing. `ends` are
// where the limbs leave the grid.
YPhantom make_y_phantom(const YPhantomSpec& spec = {});

// Torus in the xy-plane centered in the grid.
VesselMask make_torus_mask(const Dims& dims, double major_radius, double minor_radius);

}  // namespace vgflow
