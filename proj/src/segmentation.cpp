#include "vgflow/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <string>

#include "vgflow/errors.hpp"
#include "vgflow/simd.hpp"

namespace vgflow {

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw InvalidParameter("gaussian sigma must be > 0, got " + std::to_string(sigma));
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * static_cast<double>(t * t) / (sigma * sigma));
    taps[static_cast<std::size_t>(t + radius)] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

namespace {

// Convolves every line along `axis` with edge replication. Lines along y and
// z are processed as whole x-rows so the kernel vectorizes over x.
void convolve_axis(const VoxelGrid& in, VoxelGrid& out, int axis, const std::vector<double>& taps) {
  const auto& k = simd::active();
  const Dims& d = in.dims;
  const std::size_t ntaps = taps.size();
  const auto radius = static_cast<std::ptrdiff_t>(ntaps / 2);
  std::vector<const double*> lines(ntaps);

  if (axis == 0) {
    std::vector<double> padded(d[0] + 2 * static_cast<std::size_t>(radius));
    for (std::size_t z = 0; z < d[2]; ++z) {
      for (std::size_t y = 0; y < d[1]; ++y) {
        const double* row = in.data.data() + linear_index(d, 0, y, z);
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(padded.size()); ++i) {
          const auto src = std::clamp<std::ptrdiff_t>(i - radius, 0, static_cast<std::ptrdiff_t>(d[0]) - 1);
          padded[static_cast<std::size_t>(i)] = row[src];
        }
        for (std::size_t t = 0; t < ntaps; ++t) lines[t] = padded.data() + t;
        k.weighted_line_sum(lines.data(), taps.data(), ntaps, out.data.data() + linear_index(d, 0, y, z), d[0]);
      }
    }
    return;
  }

  const auto extent = static_cast<std::ptrdiff_t>(d[axis]);
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      const auto pos = static_cast<std::ptrdiff_t>(axis == 1 ? y : z);
      for (std::size_t t = 0; t < ntaps; ++t) {
        const auto src = std::clamp<std::ptrdiff_t>(pos + static_cast<std::ptrdiff_t>(t) - radius, 0, extent - 1);
        const auto s = static_cast<std::size_t>(src);
        lines[t] = in.data.data() + (axis == 1 ? linear_index(d, 0, s, z) : linear_index(d, 0, y, s));
      }
      k.weighted_line_sum(lines.data(), taps.data(), ntaps, out.data.data() + linear_index(d, 0, y, z), d[0]);
    }
  }
}

}  // namespace

VoxelGrid gaussian_smooth(const VoxelGrid& grid, double sigma) {
  validate(grid);
  const auto taps = gaussian_kernel_1d(sigma);
  VoxelGrid a = grid;
  VoxelGrid b(grid.dims, grid.spacing);
  convolve_axis(a, b, 0, taps);
  convolve_axis(b, a, 1, taps);
  convolve_axis(a, b, 2, taps);
  return b;
}

VesselMask hysteresis_threshold(const VoxelGrid& grid, double low, double high) {
  validate(grid);
  if (low > high)
    throw InvalidParameter("hysteresis low (" + std::to_string(low) + ") exceeds high (" +
                           std::to_string(high) + ")");
  VesselMask out(grid.dims, grid.spacing);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.data[i] >= high) {
      out.mask[i] = 1;
      queue.push_back(i);
    }
  }
  const auto& offsets = neighbors26();
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const Index3 p = unravel(grid.dims, i);
    for (const auto& o : offsets) {
      const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
      if (!in_bounds(grid.dims, q)) continue;
      const std::size_t j = linear_index(grid.dims, static_cast<std::size_t>(q[0]),
                                         static_cast<std::size_t>(q[1]), static_cast<std::size_t>(q[2]));
      if (out.mask[j] == 0 && grid.data[j] >= low) {
        out.mask[j] = 1;
        queue.push_back(j);
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out.cluster_id[i] = out.mask[i] ? 1 : 0;
  return out;
}

VesselMask dbscan_filter(const VesselMask& mask, double eps, std::size_t min_samples,
                         std::size_t min_cluster_size) {
  validate(mask);
  if (!(eps > 0.0)) throw InvalidParameter("dbscan eps must be > 0");
  if (min_samples == 0) throw InvalidParameter("dbscan min_samples must be >= 1");
  if (min_cluster_size == 0) throw InvalidParameter("dbscan min_cluster_size must be >= 1");

  const Dims& d = mask.dims;
  const Spacing& s = mask.spacing;

  // Voxel centers sit on a lattice, so the eps-ball is a fixed index stencil.
  std::vector<Index3> stencil;
  Index3 reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<std::ptrdiff_t>(std::floor(eps / s[a]));
  for (std::ptrdiff_t dz = -reach[2]; dz <= reach[2]; ++dz)
    for (std::ptrdiff_t dy = -reach[1]; dy <= reach[1]; ++dy)
      for (std::ptrdiff_t dx = -reach[0]; dx <= reach[0]; ++dx) {
        const double px = static_cast<double>(dx) * s[0];
        const double py = static_cast<double>(dy) * s[1];
        const double pz = static_cast<double>(dz) * s[2];
        if (px * px + py * py + pz * pz <= eps * eps) stencil.push_back({dx, dy, dz});
      }

  constexpr std::int32_t kUnvisited = -1;
  constexpr std::int32_t kNoise = 0;
  std::vector<std::int32_t> label(mask.size(), kUnvisited);

  auto neighbors_of = [&](std::size_t i, std::vector<std::size_t>& out) {
    out.clear();
    const Index3 p = unravel(d, i);
    for (const auto& o : stencil) {
      const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
      if (!in_bounds(d, q)) continue;
      const std::size_t j = linear_index(d, static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]),
                                         static_cast<std::size_t>(q[2]));
      if (mask.mask[j]) out.push_back(j);
    }
  };

  std::int32_t next_cluster = 0;
  std::vector<std::size_t> nbrs;
  std::vector<std::size_t> nbrs2;
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.mask[i] || label[i] != kUnvisited) continue;
    neighbors_of(i, nbrs);
    if (nbrs.size() < min_samples) {
      label[i] = kNoise;
      continue;
    }
    const std::int32_t c = ++next_cluster;
    label[i] = c;
    frontier.assign(nbrs.begin(), nbrs.end());
    while (!frontier.empty()) {
      const std::size_t j = frontier.front();
      frontier.pop_front();
      if (label[j] == kNoise) label[j] = c;  // border point
      if (label[j] != kUnvisited) continue;
      label[j] = c;
      neighbors_of(j, nbrs2);
      if (nbrs2.size() >= min_samples)
        for (std::size_t q : nbrs2)
          if (label[q] == kUnvisited || label[q] == kNoise) frontier.push_back(q);
    }
  }

  std::vector<std::size_t> sizes(static_cast<std::size_t>(next_cluster) + 1, 0);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.mask[i] && label[i] > 0) ++sizes[static_cast<std::size_t>(label[i])];

  std::vector<std::int32_t> remap(sizes.size(), 0);
  std::int32_t kept = 0;
  VesselMask out(d, s);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.mask[i] || label[i] <= 0) continue;
    const auto c = static_cast<std::size_t>(label[i]);
    if (sizes[c] < min_cluster_size) continue;
    if (remap[c] == 0) remap[c] = ++kept;
    out.mask[i] = 1;
    out.cluster_id[i] = remap[c];
  }
  return out;
}

VesselMask segment(const VoxelGrid& grid, const SegmentationConfig& cfg) {
  const VoxelGrid smooth = gaussian_smooth(grid, cfg.sigma);
  const VesselMask raw = hysteresis_threshold(smooth, cfg.low, cfg.high);
  const double max_spacing = *std::max_element(grid.spacing.begin(), grid.spacing.end());
  return dbscan_filter(raw, cfg.eps_factor * max_spacing, cfg.min_samples, cfg.min_cluster_size);
}

}  // namespace vgflow
