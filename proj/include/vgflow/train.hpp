#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "vgflow/dataset.hpp"
#include "vgflow/gnn.hpp"

namespace vgflow::gnn {

// lr(t) = lr_min + 0.5 (lr0 - lr_min) (1 + cos(pi t / T)); T = 0 gives lr0.
double cosine_lr(double t, double T, double lr0, double lr_min);

class Adam {
 public:
  Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_min = 1e-6;
  int epochs = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int eval_every = 100;
  std::size_t batch_size = 8;
  double aux_weight = 0.0;
  std::uint64_t seed = 0;  // mini-batch order
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  Model best;
  NormStats stats;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam with a per-epoch cosine learning rate. Validation loss is
// measured every eval_every epochs and after the last one; the returned
// model is the snapshot with the lowest validation loss. Normalization
// statistics come from `train` only.
TrainResult train(const ModelConfig& model_cfg, std::span<const Sample> train, std::span<const Sample> val,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Mean per-sample loss of `samples` under `model`.
double mean_loss(const Model& model, const NormStats& stats, std::span<const Sample> samples, const LossOptions& opts = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

struct Checkpoint {
  Model model;
  NormStats stats;
  nlohmann::json provenance;
};

nlohmann::json checkpoint_to_json(const Model& model, const NormStats& stats, const nlohmann::json& provenance);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void write_checkpoint(const std::filesystem::path& path, const Model& model, const NormStats& stats,
                      const nlohmann::json& provenance);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Predicts with de-normalized outputs keyed by node/edge ID.
FlowState predict(const Model& model, const NormStats& stats, const VascularGraph& g, const BoundaryConditions& bc);

}  // namespace vgflow::gnn
