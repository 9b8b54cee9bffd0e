#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "vgflow/dataset.hpp"
#include "vgflow/metrics.hpp"
#include "vgflow/train.hpp"

namespace vgflow {

struct FoldData {
  std::vector<std::int64_t> train_networks;
  std::vector<std::int64_t> val_networks;  // held out of the fold's training networks
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

// Partitions samples by source network. `val_networks` of the fold's
// training networks (chosen by a seeded shuffle) become the validation set.
FoldData fold_data(const std::vector<Sample>& samples, const SplitPlan& plan, int fold, std::size_t val_networks,
                   std::uint64_t seed);

struct FoldOutcome {
  gnn::TrainResult training;
  eval::Evaluation test;
  std::vector<Sample> test_samples;
  std::vector<FlowState> predictions;  // de-normalized, one per test sample
  std::vector<std::int64_t> val_networks;
  double seconds = 0.0;
};

FoldOutcome run_fold(const std::vector<Sample>& samples, const SplitPlan& plan, int fold,
                     const gnn::ModelConfig& model_cfg, const gnn::TrainConfig& train_cfg, std::size_t val_networks,
                     const gnn::EpochCallback& on_epoch = {});

// Pooled metrics over the test predictions of every fold.
eval::Metrics pool_folds(const std::vector<FoldOutcome>& folds);

}  // namespace vgflow
