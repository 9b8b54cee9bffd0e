#include "vgflow/crossval.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "vgflow/errors.hpp"
#include "vgflow/rng.hpp"

namespace vgflow {

FoldData fold_data(const std::vector<Sample>& samples, const SplitPlan& plan, int fold, std::size_t val_networks,
                   std::uint64_t seed) {
  if (fold < 0 || static_cast<std::size_t>(fold) >= plan.folds.size())
    throw InvalidParameter("fold " + std::to_string(fold) + " out of range (plan has " +
                           std::to_string(plan.folds.size()) + " folds)");
  const Fold& f = plan.folds[static_cast<std::size_t>(fold)];
  if (val_networks >= f.train.size())
    throw InvalidParameter("validation needs fewer networks than the " + std::to_string(f.train.size()) +
                           " training networks of the fold");
  FoldData d;
  std::vector<std::int64_t> pool = f.train;
  CounterRng rng(derive_key(seed, {0x76616cULL, static_cast<std::uint64_t>(fold)}));
  rng.shuffle(pool);
  d.val_networks.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(val_networks));
  d.train_networks.assign(pool.begin() + static_cast<std::ptrdiff_t>(val_networks), pool.end());
  std::sort(d.val_networks.begin(), d.val_networks.end());
  std::sort(d.train_networks.begin(), d.train_networks.end());
  auto has = [](const std::vector<std::int64_t>& v, std::int64_t id) { return std::find(v.begin(), v.end(), id) != v.end(); };
  for (const auto& s : samples) {
    if (has(f.test, s.source_network_id)) d.test.push_back(s);
    else if (has(d.val_networks, s.source_network_id)) d.val.push_back(s);
    else if (has(d.train_networks, s.source_network_id)) d.train.push_back(s);
  }
  if (d.train.empty() || d.test.empty()) throw InvalidParameter("fold " + std::to_string(fold) + " has no samples");
  if (val_networks > 0 && d.val.empty()) throw InvalidParameter("fold " + std::to_string(fold) + " has no validation samples");
  return d;
}

FoldOutcome run_fold(const std::vector<Sample>& samples, const SplitPlan& plan, int fold,
                     const gnn::ModelConfig& model_cfg, const gnn::TrainConfig& train_cfg, std::size_t val_networks,
                     const gnn::EpochCallback& on_epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  FoldData d = fold_data(samples, plan, fold, val_networks, train_cfg.seed);
  FoldOutcome out;
  out.val_networks = d.val_networks;
  out.training = gnn::train(model_cfg, d.train, d.val, train_cfg, on_epoch);
  for (const auto& s : d.test)
    out.predictions.push_back(gnn::predict(out.training.best, out.training.stats, s.graph, s.bc));
  out.test = eval::evaluate(d.test, out.predictions);
  out.test_samples = std::move(d.test);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

eval::Metrics pool_folds(const std::vector<FoldOutcome>& folds) {
  std::vector<Sample> samples;
  std::vector<FlowState> preds;
  for (const auto& f : folds) {
    samples.insert(samples.end(), f.test_samples.begin(), f.test_samples.end());
    preds.insert(preds.end(), f.predictions.begin(), f.predictions.end());
  }
  return eval::evaluate(samples, preds).metrics;
}

}  // namespace vgflow
