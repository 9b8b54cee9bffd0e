#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgflow/dataset.hpp"
#include "vgflow/gnn.hpp"

namespace vgflow::eval {

// Percentage of entries with |pred - truth| / max(truth) strictly below
// `threshold`. Throws InvalidParameter on empty or mismatched input or when
// max(truth) <= 0.
double accuracy(std::span<const double> pred, std::span<const double> truth, double threshold = 0.1);

// Same, with a caller-supplied scale per entry (entries from several graphs).
double accuracy_scaled(std::span<const double> pred, std::span<const double> truth, std::span<const double> scale,
                       double threshold = 0.1);

// Pearson correlation. Throws InvalidParameter when either side is constant
// or fewer than two entries are given.
double pearson(std::span<const double> a, std::span<const double> b);

struct QuantityMetrics {
  double accuracy = 0.0;           // pooled over entities, percent
  double accuracy_per_graph = 0.0; // mean of per-graph accuracies, percent
  double pearson = 0.0;            // pooled
  std::size_t count = 0;
};

struct Metrics {
  QuantityMetrics pressure;            // interior nodes
  QuantityMetrics pressure_all_nodes;  // boundary nodes included
  QuantityMetrics flow;                // |Q| on every edge
  std::size_t samples = 0;
};

struct ScatterPoint {
  std::string quantity;  // "pressure" or "flow"
  std::size_t sample = 0;
  std::int64_t entity = 0;
  double truth = 0.0;
  double pred = 0.0;
};

struct Evaluation {
  Metrics metrics;
  std::vector<ScatterPoint> points;  // every evaluated entity
};

// Errors are scaled by the max truth of the evaluated entities of each graph
// (interior pressures, or all pressures, or |Q|).
Evaluation evaluate(std::span<const Sample> samples, std::span<const FlowState> predictions, double threshold = 0.1);

Evaluation evaluate_model(const gnn::Model& model, const gnn::NormStats& stats, std::span<const Sample> samples,
                          double threshold = 0.1);

nlohmann::json to_json(const Metrics& m);

// Fixed-seed subsample of at most `per_quantity` points of each quantity.
std::vector<ScatterPoint> subsample(const std::vector<ScatterPoint>& points, std::size_t per_quantity,
                                    std::uint64_t seed);

void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterPoint>& points);
std::vector<ScatterPoint> read_scatter_csv(const std::filesystem::path& path);

// Truth-vs-prediction scatter of one quantity with the y = x diagonal.
void write_scatter_svg(const std::filesystem::path& path, const std::vector<ScatterPoint>& points,
                       const std::string& quantity);

}  // namespace vgflow::eval
