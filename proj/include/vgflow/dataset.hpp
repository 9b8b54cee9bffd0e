#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgflow/flow.hpp"
#include "vgflow/graph.hpp"

namespace vgflow {

struct NetworkSpec {
  int depth = 4;
  int loop_count = 0;
  int stenosis_count = 0;
};

// Random bifurcating tree: node 0 is the inlet, leaves are outlets, child
// radii follow Murray's law (r_parent^3 = sum r_child^3), segment length is
// proportional to radius with jitter. loop_count cross-edges join junction
// pairs; each stenosis inserts a mid-segment node narrowed to 30-70 % of the
// nominal radius. Throws InvalidParameter on infeasible specs.
VascularGraph generate_network(std::uint64_t seed, const NetworkSpec& spec);

struct Sample {
  VascularGraph graph;
  BoundaryConditions bc;
  FlowState truth;
  std::int64_t source_network_id = 0;
  int augmentation_index = 0;
};

struct AugmentConfig {
  int count = 25;
  double inlet_min = 12000.0;  // Pa
  double inlet_max = 18000.0;
  double radius_factor_min = 0.8;
  double radius_factor_max = 1.2;
  double outlet_pressure = 0.0;
  double viscosity = kDefaultViscosity;
  int max_retries = 10;
};

// Per sample: inlet pressure ~ U[inlet_min, inlet_max], every node radius
// times an independent U[radius_factor_min, radius_factor_max], ground truth
// from solve_flow. Draws are keyed by (rng_seed, augmentation index).
std::vector<Sample> augment(const VascularGraph& graph, std::uint64_t rng_seed, const AugmentConfig& cfg = {},
                            std::int64_t network_id = 0);

struct Fold {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> test;
};

struct SplitPlan {
  int fold_count = 5;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Shuffles network IDs and deals them into fold_count contiguous test groups
// of near-equal size; every ID is tested exactly once.
SplitPlan make_splits(const std::vector<std::int64_t>& network_ids, int fold_count, std::uint64_t rng_seed);

nlohmann::json to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitPlan& p);
SplitPlan split_plan_from_json(const nlohmann::json& j);

// Re-verifies a sample's ground truth against mass conservation and
// its boundary pressures. Throws FormatError on failure.
void verify_sample(const Sample& s, double tolerance = 1e-8);

struct SynthConfig {
  int networks = 35;
  int depth_min = 3;
  int depth_max = 5;
  int max_loops = 2;
  int max_stenoses = 2;
  std::uint64_t seed = 1;
  int folds = 5;
  AugmentConfig augment;
};

NetworkSpec network_spec_for(const SynthConfig& cfg, std::int64_t network_id);

struct ManifestEntry {
  std::string path;
  std::int64_t network_id = 0;
  int aug_index = 0;
};

struct Manifest {
  std::vector<std::int64_t> networks;
  std::vector<ManifestEntry> samples;
  SplitPlan split_plan;
  nlohmann::json provenance;  // run config + tool version
};

// Writes networks/, samples/ and manifest.json under `dir`.
Manifest build_dataset(const std::filesystem::path& dir, const SynthConfig& cfg, const nlohmann::json& provenance);

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
Manifest read_manifest(const std::filesystem::path& path);

// Loads every sample listed in the manifest (paths relative to the manifest
// directory) and re-verifies its ground truth.
std::vector<Sample> load_samples(const std::filesystem::path& manifest_path, const Manifest& m);

}  // namespace vgflow
