#pragma once

#include <cstddef>
#include <vector>

#include "vgflow/volume.hpp"

namespace vgflow {

struct SegmentationConfig {
  double sigma = 1.0;         // voxels
  double low = 0.35;          // hysteresis thresholds, intensity units
  double high = 0.6;
  double eps_factor = 1.8;    // DBSCAN eps = eps_factor * max(spacing)
  std::size_t min_samples = 4;
  std::size_t min_cluster_size = 50;
};

// Normalized 1D Gaussian taps, radius ceil(4 sigma).
std::vector<double> gaussian_kernel_1d(double sigma);

// Separable 3D Gaussian with edge replication. sigma in voxels, > 0.
VoxelGrid gaussian_smooth(const VoxelGrid& grid, double sigma);

// Seeds are voxels >= high; voxels >= low that are 26-connected to a seed
// join the foreground. Every foreground voxel gets provisional cluster 1.
VesselMask hysteresis_threshold(const VoxelGrid& grid, double low, double high);

// DBSCAN over foreground voxel centers in millimetres. Noise and clusters
// with fewer than min_cluster_size voxels are dropped; survivors are
// relabelled 1..k in order of their lowest voxel index.
VesselMask dbscan_filter(const VesselMask& mask, double eps, std::size_t min_samples,
                         std::size_t min_cluster_size);

// gaussian_smooth -> hysteresis_threshold -> dbscan_filter.
VesselMask segment(const VoxelGrid& grid, const SegmentationConfig& cfg);

}  // namespace vgflow
