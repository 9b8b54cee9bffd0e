#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "vgflow/errors.hpp"
#include "vgflow/segmentation.hpp"

using namespace vgflow;

namespace {

std::size_t clampi(std::ptrdiff_t v, std::size_t n) {
  if (v < 0) return 0;
  if (v >= static_cast<std::ptrdiff_t>(n)) return n - 1;
  return static_cast<std::size_t>(v);
}

// Direct 3D convolution with an isotropic Gaussian, replicated edges.
VoxelGrid brute_smooth(const VoxelGrid& g, double sigma) {
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> w;
  double total = 0.0;
  for (std::ptrdiff_t c = -r; c <= r; ++c)
    for (std::ptrdiff_t b = -r; b <= r; ++b)
      for (std::ptrdiff_t a = -r; a <= r; ++a) {
        w.push_back(std::exp(-static_cast<double>(a * a + b * b + c * c) / (2.0 * sigma * sigma)));
        total += w.back();
      }
  VoxelGrid out(g.dims, g.spacing);
  for (std::size_t z = 0; z < g.dims[2]; ++z)
    for (std::size_t y = 0; y < g.dims[1]; ++y)
      for (std::size_t x = 0; x < g.dims[0]; ++x) {
        double acc = 0.0;
        std::size_t k = 0;
        for (std::ptrdiff_t c = -r; c <= r; ++c)
          for (std::ptrdiff_t b = -r; b <= r; ++b)
            for (std::ptrdiff_t a = -r; a <= r; ++a, ++k)
              acc += w[k] / total *
                     g.at(clampi(static_cast<std::ptrdiff_t>(x) + a, g.dims[0]),
                          clampi(static_cast<std::ptrdiff_t>(y) + b, g.dims[1]),
                          clampi(static_cast<std::ptrdiff_t>(z) + c, g.dims[2]));
        out.at(x, y, z) = acc;
      }
  return out;
}

bool adjacent26(const Index3& p, const Index3& q) {
  return std::abs(p[0] - q[0]) <= 1 && std::abs(p[1] - q[1]) <= 1 && std::abs(p[2] - q[2]) <= 1;
}

// BFS from seeds over every candidate voxel.
std::vector<std::uint8_t> brute_hysteresis(const VoxelGrid& g, double low, double high) {
  std::vector<std::uint8_t> out(g.size(), 0);
  std::queue<std::size_t> q;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.data[i] >= high) {
      out[i] = 1;
      q.push(i);
    }
  while (!q.empty()) {
    const std::size_t i = q.front();
    q.pop();
    for (std::size_t j = 0; j < g.size(); ++j)
      if (!out[j] && g.data[j] >= low && adjacent26(unravel(g.dims, i), unravel(g.dims, j))) {
        out[j] = 1;
        q.push(j);
      }
  }
  return out;
}

double dist_mm(const Dims& d, const Spacing& s, std::size_t i, std::size_t j) {
  const Index3 p = unravel(d, i), q = unravel(d, j);
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = static_cast<double>(p[a] - q[a]) * s[a];
    acc += t * t;
  }
  return std::sqrt(acc);
}

VesselMask mask_from(Dims d, const std::vector<std::size_t>& on) {
  VesselMask m(d, {1, 1, 1});
  for (auto i : on) {
    m.mask[i] = 1;
    m.cluster_id[i] = 1;
  }
  return m;
}

}  // namespace

TEST_CASE("gaussian kernel is normalized and symmetric") {
  const auto k = gaussian_kernel_1d(1.5);
  REQUIRE(k.size() == 2 * 6 + 1);
  double sum = 0.0;
  for (double v : k) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == k[k.size() - 1 - i]);
  CHECK_THROWS_AS(gaussian_kernel_1d(0.0), InvalidParameter);
  CHECK_THROWS_AS(gaussian_kernel_1d(-1.0), InvalidParameter);
}

TEST_CASE("smoothing a constant grid leaves it constant") {
  VoxelGrid g({6, 5, 4}, {1, 1, 1}, 7.0);
  const VoxelGrid s = gaussian_smooth(g, 1.3);
  for (double v : s.data) CHECK(v == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("separable smoothing equals direct 3D convolution") {
  VoxelGrid impulse({9, 9, 9}, {1, 1, 1}, 0.0);
  impulse.at(4, 4, 4) = 1.0;
  const VoxelGrid a = gaussian_smooth(impulse, 1.0);
  const VoxelGrid b = brute_smooth(impulse, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a.data[i] - b.data[i]) <= 1e-12);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VoxelGrid r({7, 5, 6}, {1, 1, 1});
  for (double& v : r.data) v = u(rng);
  const VoxelGrid c = gaussian_smooth(r, 0.8);
  const VoxelGrid e = brute_smooth(r, 0.8);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::fabs(c.data[i] - e.data[i]) <= 1e-12);
}

TEST_CASE("hysteresis keeps only weak voxels connected to a seed") {
  VoxelGrid g({7, 1, 1}, {1, 1, 1});
  g.data = {0.9, 0.5, 0.5, 0.1, 0.5, 0.5, 0.2};
  const VesselMask m = hysteresis_threshold(g, 0.4, 0.8);
  CHECK(m.mask == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0, 0});
  // diagonal adjacency counts
  VoxelGrid d({2, 2, 2}, {1, 1, 1}, 0.0);
  d.at(0, 0, 0) = 1.0;
  d.at(1, 1, 1) = 0.5;
  const VesselMask md = hysteresis_threshold(d, 0.4, 0.8);
  CHECK(md.foreground_count() == 2);
  CHECK_THROWS_AS(hysteresis_threshold(g, 0.9, 0.5), InvalidParameter);
}

TEST_CASE("hysteresis matches a breadth-first oracle on random grids") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    VoxelGrid g({6, 6, 5}, {1, 1, 1});
    for (double& v : g.data) v = u(rng);
    const VesselMask m = hysteresis_threshold(g, 0.55, 0.97);
    CHECK(m.mask == brute_hysteresis(g, 0.55, 0.97));
  }
}

TEST_CASE("dbscan keeps a solid block and drops an isolated voxel") {
  const Dims d{9, 9, 9};
  std::vector<std::size_t> on;
  for (std::size_t z = 0; z < 5; ++z)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 5; ++x) on.push_back(linear_index(d, x, y, z));
  const VesselMask block = dbscan_filter(mask_from(d, on), 1.8, 4, 50);
  CHECK(block.foreground_count() == 125);
  for (auto i : on) CHECK(block.cluster_id[i] == 1);

  on.push_back(linear_index(d, 8, 8, 8));
  const VesselMask with = dbscan_filter(mask_from(d, on), 1.8, 4, 50);
  CHECK(with.foreground_count() == 125);
  CHECK(with.mask[linear_index(d, 8, 8, 8)] == 0);

  // block too small for the size filter
  CHECK(dbscan_filter(mask_from(d, on), 1.8, 4, 126).foreground_count() == 0);
  CHECK(dbscan_filter(mask_from(d, {}), 1.8, 4, 1).foreground_count() == 0);
  CHECK_THROWS_AS(dbscan_filter(mask_from(d, on), 0.0, 4, 1), InvalidParameter);
}

TEST_CASE("dbscan matches a brute-force oracle") {
  std::mt19937_64 rng(17);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 8; ++trial) {
    const Dims d{7, 6, 5};
    const Spacing sp{1.0, 1.0, 1.0 + 0.25 * (trial % 3)};
    const double eps = 1.5 + 0.1 * trial;
    const std::size_t min_samples = 3 + static_cast<std::size_t>(trial % 4);
    VesselMask m(d, sp);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (coin(rng)) {
        m.mask[i] = 1;
        m.cluster_id[i] = 1;
      }

    std::vector<std::size_t> fg;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.mask[i]) fg.push_back(i);
    std::set<std::size_t> core;
    for (auto i : fg) {
      std::size_t n = 0;
      for (auto j : fg)
        if (dist_mm(d, sp, i, j) <= eps + 1e-12) ++n;
      if (n >= min_samples) core.insert(i);
    }
    std::set<std::size_t> kept;
    for (auto i : fg)
      for (auto c : core)
        if (dist_mm(d, sp, i, c) <= eps + 1e-12) {
          kept.insert(i);
          break;
        }
    // core components
    std::map<std::size_t, int> comp;
    int nc = 0;
    for (auto c : core) {
      if (comp.contains(c)) continue;
      comp[c] = ++nc;
      std::queue<std::size_t> q;
      q.push(c);
      while (!q.empty()) {
        const auto a = q.front();
        q.pop();
        for (auto b : core)
          if (!comp.contains(b) && dist_mm(d, sp, a, b) <= eps + 1e-12) {
            comp[b] = nc;
            q.push(b);
          }
      }
    }

    const VesselMask out = dbscan_filter(m, eps, min_samples, 1);
    std::set<std::size_t> got;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out.mask[i]) got.insert(i);
    CHECK(got == kept);
    for (auto a : core)
      for (auto b : core) CHECK((comp[a] == comp[b]) == (out.cluster_id[a] == out.cluster_id[b]));
  }
}

TEST_CASE("cluster labels follow the lowest voxel index") {
  const Dims d{12, 3, 3};
  std::vector<std::size_t> on;
  for (std::size_t z = 0; z < 3; ++z)
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 3; ++x) on.push_back(linear_index(d, x, y, z));
      for (std::size_t x = 8; x < 12; ++x) on.push_back(linear_index(d, x, y, z));
    }
  const VesselMask out = dbscan_filter(mask_from(d, on), 1.8, 4, 1);
  CHECK(out.cluster_id[linear_index(d, 0, 0, 0)] == 1);
  CHECK(out.cluster_id[linear_index(d, 8, 0, 0)] == 2);
  CHECK(out.foreground_count() == on.size());
}
