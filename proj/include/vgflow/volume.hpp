#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

namespace vgflow {

using Dims = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;
using Index3 = std::array<std::ptrdiff_t, 3>;

// x fastest, then y, then z (NIfTI order).
inline std::size_t linear_index(const Dims& d, std::size_t x, std::size_t y, std::size_t z) {
  return x + d[0] * (y + d[1] * z);
}

inline std::size_t voxel_count(const Dims& d) { return d[0] * d[1] * d[2]; }

inline Index3 unravel(const Dims& d, std::size_t i) {
  return {static_cast<std::ptrdiff_t>(i % d[0]), static_cast<std::ptrdiff_t>((i / d[0]) % d[1]),
          static_cast<std::ptrdiff_t>(i / (d[0] * d[1]))};
}

inline bool in_bounds(const Dims& d, const Index3& p) {
  return p[0] >= 0 && p[1] >= 0 && p[2] >= 0 && p[0] < static_cast<std::ptrdiff_t>(d[0]) &&
         p[1] < static_cast<std::ptrdiff_t>(d[1]) && p[2] < static_cast<std::ptrdiff_t>(d[2]);
}

struct VoxelGrid {
  Dims dims{};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<double> data;

  VoxelGrid() = default;
  VoxelGrid(Dims d, Spacing s, double fill = 0.0);
  VoxelGrid(Dims d, Spacing s, std::vector<double> values);

  double& at(std::size_t x, std::size_t y, std::size_t z) { return data[linear_index(dims, x, y, z)]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const {
    return data[linear_index(dims, x, y, z)];
  }
  std::size_t size() const { return data.size(); }
};

// Binary vessel mask plus per-voxel cluster label (0 = background/removed).
struct VesselMask {
  Dims dims{};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> mask;
  std::vector<std::int32_t> cluster_id;

  VesselMask() = default;
  VesselMask(Dims d, Spacing s);

  bool on(std::size_t i) const { return mask[i] != 0; }
  bool on(const Index3& p) const {
    return in_bounds(dims, p) &&
           mask[linear_index(dims, static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1]),
                             static_cast<std::size_t>(p[2]))] != 0;
  }
  std::size_t size() const { return mask.size(); }
  std::size_t foreground_count() const;
};

// Throws InvalidParameter when dims/spacing/data length disagree.
void validate(const VoxelGrid& grid);
void validate(const VesselMask& mask);

// The 26 neighbor offsets in (dz, dy, dx) lexicographic order.
const std::array<Index3, 26>& neighbors26();

// --- File formats -----------------------------------------------------------

// Minimal single-file NIfTI-1 (.nii): little-endian, magic "n+1\0",
// datatypes uint8 (2), int16 (4), float32 (16). scl_slope/scl_inter applied
// when slope is nonzero.
VoxelGrid read_nifti(const std::filesystem::path& path);
void write_nifti_float32(const std::filesystem::path& path, const VoxelGrid& grid);

// Raw format: JSON sidecar {"dims", "spacing", "dtype"[, "data"]} next to a
// flat little-endian voxel file. Without a "data" entry the voxel file is the
// sidecar path with extension ".raw".
// dtypes: uint8, int16, int32, float32, float64.
VoxelGrid read_raw(const std::filesystem::path& sidecar);
void write_raw(const std::filesystem::path& sidecar, const VoxelGrid& grid,
               const char* dtype = "float32");

// Reads .nii or raw sidecar by extension.
VoxelGrid read_volume(const std::filesystem::path& path);

// Masks are stored in the raw format with dtype int32 holding cluster_id
// (0 = background) and "kind": "vessel_mask" in the sidecar.
void write_mask(const std::filesystem::path& sidecar, const VesselMask& mask,
                const nlohmann::json& provenance = nullptr);
VesselMask read_mask(const std::filesystem::path& sidecar);

}  // namespace vgflow
