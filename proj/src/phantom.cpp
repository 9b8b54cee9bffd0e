#include "vgflow/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vgflow/rng.hpp"

namespace vgflow {

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  Vec3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = len2 > 0.0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 q{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
  return distance(p, q);
}

}  // namespace

VesselMask rasterize_capsules(const Dims& dims, const Spacing& spacing, const std::vector<Capsule>& capsules) {
  VesselMask m(dims, spacing);
  for (std::size_t z = 0; z < dims[2]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[0]; ++x) {
        const Vec3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        for (const auto& c : capsules) {
          if (segment_distance(p, c.a, c.b) <= c.radius) {
            const std::size_t i = linear_index(dims, x, y, z);
            m.mask[i] = 1;
            m.cluster_id[i] = 1;
            break;
          }
        }
      }
  return m;
}

YPhantom make_y_phantom(const YPhantomSpec& spec) {
  const Spacing spacing{1.0, 1.0, 1.0};
  const Vec3 center{0.5 * static_cast<double>(spec.dims[0] - 1), 0.5 * static_cast<double>(spec.dims[1] - 1),
                    0.5 * static_cast<double>(spec.dims[2] - 1)};
  YPhantom ph;
  ph.junction = center;
  std::vector<Capsule> caps;
  for (int limb = 0; limb < 3; ++limb) {
    const double angle = std::numbers::pi / 2.0 + limb * 2.0 * std::numbers::pi / 3.0;
    const Vec3 end{center[0] + spec.limb_length * std::cos(angle), center[1] + spec.limb_length * std::sin(angle),
                   center[2]};
    const double r = limb == 0 ? spec.trunk_radius : spec.daughter_radius;
    caps.push_back({center, end, r});
    // Clip the limb end to the grid box for reporting.
    double t = 1.0;
    for (int a = 0; a < 2; ++a) {
      const double delta = end[a] - center[a];
      const double hi = static_cast<double>(spec.dims[a] - 1);
      if (center[a] + t * delta > hi) t = (hi - center[a]) / delta;
      if (center[a] + t * delta < 0.0) t = -center[a] / delta;
    }
    ph.ends.push_back({center[0] + t * (end[0] - center[0]), center[1] + t * (end[1] - center[1]), center[2]});
    ph.radii.push_back(r);
  }
  const VesselMask solid = rasterize_capsules(spec.dims, spacing, caps);
  ph.grid = VoxelGrid(spec.dims, spacing);
  CounterRng rng(derive_key(spec.seed, {0x7068616eULL}));
  for (std::size_t i = 0; i < solid.size(); ++i) {
    double v = solid.mask[i] ? 1.0 : 0.0;
    v += spec.noise_sigma * rng.normal();
    if (rng.uniform() < spec.speckle_fraction) v = 1.0 + rng.uniform(0.0, 0.5);
    ph.grid.data[i] = v;
  }
  return ph;
}

VesselMask make_torus_mask(const Dims& dims, double major_radius, double minor_radius) {
  VesselMask m(dims, {1.0, 1.0, 1.0});
  const double cx = 0.5 * static_cast<double>(dims[0] - 1);
  const double cy = 0.5 * static_cast<double>(dims[1] - 1);
  const double cz = 0.5 * static_cast<double>(dims[2] - 1);
  for (std::size_t z = 0; z < dims[2]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[0]; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy, dz = static_cast<double>(z) - cz;
        const double ring = std::sqrt(dx * dx + dy * dy) - major_radius;
        if (ring * ring + dz * dz <= minor_radius * minor_radius) {
          const std::size_t i = linear_index(dims, x, y, z);
          m.mask[i] = 1;
          m.cluster_id[i] = 1;
        }
      }
  return m;
}

}  // namespace vgflow
