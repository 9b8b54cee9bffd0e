#pragma once
// Encoder-processor-decoder message-passing surrogate for steady network
// flow. Everything is double precision with a hand-written reverse pass.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgflow/dataset.hpp"
#include "vgflow/flow.hpp"
#include "vgflow/graph.hpp"

namespace vgflow::gnn {

// z-score statistics, computed from training samples only.
struct NormStats {
  double radius_mean = 0.0, radius_std = 1.0;
  double length_mean = 0.0, length_std = 1.0;
  double diameter_mean = 0.0, diameter_std = 1.0;
  double pressure_mean = 0.0, pressure_std = 1.0;
  double flow_mean = 0.0, flow_std = 1.0;
  bool valid = false;
};

NormStats compute_stats(std::span<const Sample> train);

nlohmann::json to_json(const NormStats& s);
NormStats norm_stats_from_json(const nlohmann::json& j);

inline constexpr std::size_t kNodeFeatures = 5;  // inlet, outlet, interior, radius, boundary pressure
inline constexpr std::size_t kEdgeFeatures = 5;  // length, mean diameter, axis xyz

// Encoded graph (possibly a disjoint union of several graphs). Node rows
// follow graph.nodes order and edge rows follow graph.edges order.
struct GraphFeatures {
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  std::vector<double> node;           // n_nodes x kNodeFeatures
  std::vector<double> edge;           // n_edges x kEdgeFeatures
  std::vector<std::uint32_t> src;     // edge.u row
  std::vector<std::uint32_t> dst;     // edge.v row
  std::vector<std::uint8_t> clamped;  // boundary node with prescribed pressure
  std::vector<double> clamp_value;    // normalized prescribed pressure (0 elsewhere)
  std::vector<double> clamp_pressure; // prescribed pressure in Pa (0 elsewhere)
  std::vector<NodeId> node_ids;
  std::vector<EdgeId> edge_ids;
};

// Throws InvalidParameter when stats are missing.
GraphFeatures encode(const VascularGraph& g, const BoundaryConditions& bc, const NormStats& stats);

// Normalized targets aligned with the feature rows.
struct Targets {
  std::vector<double> pressure;
  std::vector<double> flow;
};

Targets encode_targets(const GraphFeatures& f, const FlowState& truth, const NormStats& stats);

// Concatenates graphs; per-entity weights make the batch loss the mean of
// the per-graph losses.
struct Batch {
  GraphFeatures features;
  Targets targets;
  std::vector<double> node_weight;
  std::vector<double> edge_weight;
};

Batch make_batch(std::span<const GraphFeatures* const> graphs, std::span<const Targets* const> targets);

struct ModelConfig {
  std::size_t hidden = 32;
  std::size_t layers = 4;
  std::size_t passes = 2;
  std::uint64_t seed = 0;
};

// Parameter layout. All weights live in one flat vector so the optimizer,
// checkpointing and gradient checks see a single array.
struct LinearRef {
  std::size_t weight = 0;  // in x out, row-major
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

struct MlpRef {
  LinearRef layers[3];
  bool layer_norm = false;
  std::size_t gamma = 0;
  std::size_t beta = 0;
};

struct ParamTensor {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

class Model {
 public:
  Model() = default;
  // Glorot-uniform weights, zero biases, unit layer-norm gains.
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }
  const ParamTensor& tensor(const std::string& name) const;

  const MlpRef& node_encoder() const { return node_encoder_; }
  const MlpRef& edge_encoder() const { return edge_encoder_; }
  const MlpRef& edge_processor(std::size_t l) const { return edge_processor_[l]; }
  const MlpRef& node_processor(std::size_t l) const { return node_processor_[l]; }
  const MlpRef& node_decoder() const { return node_decoder_; }
  const MlpRef& edge_decoder() const { return edge_decoder_; }

 private:
  MlpRef add_mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, bool norm);
  std::size_t add_tensor(const std::string& name, std::size_t rows, std::size_t cols);

  ModelConfig cfg_;
  std::vector<double> params_;
  std::vector<ParamTensor> tensors_;
  MlpRef node_encoder_, edge_encoder_, node_decoder_, edge_decoder_;
  std::vector<MlpRef> edge_processor_, node_processor_;
};

// Normalized predictions for every refinement pass; back() is final.
struct Prediction {
  std::vector<std::vector<double>> pressure;
  std::vector<std::vector<double>> flow;
  const std::vector<double>& final_pressure() const { return pressure.back(); }
  const std::vector<double>& final_flow() const { return flow.back(); }
};

// Throws TrainingDivergence on a non-finite activation.
Prediction forward(const Model& model, const GraphFeatures& f);

// De-normalized final prediction keyed by node/edge ID. Clamped nodes get
// their prescribed pressure verbatim.
FlowState to_flow_state(const Prediction& p, const GraphFeatures& f, const NormStats& stats);

// Mean |dp| over nodes plus mean |dq| over edges, both z-normalized.
double loss(const FlowState& pred, const FlowState& truth, const NormStats& stats);

struct LossOptions {
  double aux_weight = 0.0;  // MAE weight on the first-pass (intermediate) outputs
};

// Weighted MAE of the batch and its gradient w.r.t. every parameter
// (`grad` is overwritten, sized like model.params()).
double loss_and_gradient(const Model& model, const Batch& batch, const LossOptions& opts, std::vector<double>& grad);

// Weighted MAE only.
double batch_loss(const Model& model, const Batch& batch, const LossOptions& opts);

// Central finite differences against the analytic gradient for every
// parameter; returns the max relative error |a - n| / max(|a|, |n|, floor).
// Truth entries closer than `kink_margin` to the prediction are pushed away
// first; parameters whose stencil still flips the sign of a residual sit on
// an MAE kink and are skipped.
struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
};

GradCheckResult check_gradients(const Model& model, const Sample& sample, const NormStats& stats, double epsilon,
                                const LossOptions& opts = {}, double kink_margin = 1e-3, double floor = 1e-6);

}  // namespace vgflow::gnn
