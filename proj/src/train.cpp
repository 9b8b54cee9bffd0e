#include "vgflow/train.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "vgflow/errors.hpp"
#include "vgflow/json_io.hpp"
#include "vgflow/rng.hpp"
#include "vgflow/simd.hpp"

namespace vgflow::gnn {

using json = nlohmann::json;

double cosine_lr(double t, double T, double lr0, double lr_min) {
  if (!(T > 0.0)) return lr0;
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * t / T));
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw InvalidParameter("Adam size mismatch");
  ++t_;
  const simd::AdamStep s{lr, beta1_, beta2_, eps_, 1.0 - std::pow(beta1_, static_cast<double>(t_)),
                         1.0 - std::pow(beta2_, static_cast<double>(t_))};
  simd::active().adam_update(params.data(), grads.data(), m_.data(), v_.data(), params.size(), s);
}

json to_json(const TrainConfig& c) {
  return json{{"lr0", c.lr0},           {"lr_min", c.lr_min},         {"epochs", c.epochs},
              {"beta1", c.beta1},       {"beta2", c.beta2},           {"adam_eps", c.adam_eps},
              {"eval_every", c.eval_every}, {"batch_size", c.batch_size}, {"aux_weight", c.aux_weight},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  try {
    c.lr0 = j.value("lr0", c.lr0);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.epochs = j.value("epochs", c.epochs);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.aux_weight = j.value("aux_weight", c.aux_weight);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

json to_json(const ModelConfig& c) {
  return json{{"hidden", c.hidden}, {"layers", c.layers}, {"passes", c.passes}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  try {
    c.hidden = j.value("hidden", c.hidden);
    c.layers = j.value("layers", c.layers);
    c.passes = j.value("passes", c.passes);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

namespace {

void check_config(const TrainConfig& c) {
  if (c.epochs < 1) throw InvalidParameter("epochs must be >= 1");
  if (!(c.lr0 > 0.0) || !(c.lr_min >= 0.0) || c.lr_min > c.lr0) throw InvalidParameter("need 0 <= lr_min <= lr0, lr0 > 0");
  if (c.eval_every < 1) throw InvalidParameter("eval_every must be >= 1");
  if (c.batch_size < 1) throw InvalidParameter("batch_size must be >= 1");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0)) throw InvalidParameter("Adam betas must be in [0, 1)");
  if (!(c.aux_weight >= 0.0)) throw InvalidParameter("aux_weight must be >= 0");
}

struct Encoded {
  std::vector<GraphFeatures> features;
  std::vector<Targets> targets;
};

Encoded encode_all(std::span<const Sample> samples, const NormStats& stats) {
  Encoded out;
  out.features.reserve(samples.size());
  out.targets.reserve(samples.size());
  for (const auto& s : samples) {
    out.features.push_back(encode(s.graph, s.bc, stats));
    out.targets.push_back(encode_targets(out.features.back(), s.truth, stats));
  }
  return out;
}

Batch batch_of(const Encoded& data, std::span<const std::size_t> order) {
  std::vector<const GraphFeatures*> g;
  std::vector<const Targets*> t;
  for (std::size_t i : order) {
    g.push_back(&data.features[i]);
    t.push_back(&data.targets[i]);
  }
  return make_batch(g, t);
}

double mean_encoded_loss(const Model& model, const Encoded& data, const LossOptions& opts) {
  std::vector<std::size_t> all(data.features.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return batch_loss(model, batch_of(data, all), opts);
}

}  // namespace

double mean_loss(const Model& model, const NormStats& stats, std::span<const Sample> samples, const LossOptions& opts) {
  if (samples.empty()) throw InvalidParameter("no samples to evaluate");
  return mean_encoded_loss(model, encode_all(samples, stats), opts);
}

TrainResult train(const ModelConfig& model_cfg, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  check_config(cfg);
  if (train_set.empty()) throw InvalidParameter("training set is empty");
  if (val_set.empty()) throw InvalidParameter("validation set is empty");

  TrainResult result;
  result.stats = compute_stats(train_set);
  const Encoded train_data = encode_all(train_set, result.stats);
  const Encoded val_data = encode_all(val_set, result.stats);

  Model model(model_cfg);
  Adam adam(model.params().size(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  const LossOptions opts{cfg.aux_weight};
  const LossOptions eval_opts{};
  std::vector<double> grad;
  std::vector<std::size_t> order(train_set.size());
  const double T = static_cast<double>(cfg.epochs - 1);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, T, cfg.lr0, cfg.lr_min);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng rng(derive_key(cfg.seed, {0x65706f6368ULL, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const Batch b = batch_of(train_data, std::span<const std::size_t>(order).subspan(start, end - start));
      double value;
      try {
        value = loss_and_gradient(model, b, opts, grad);
      } catch (const TrainingDivergence&) {
        throw TrainingDivergence("epoch " + std::to_string(epoch));
      }
      if (!std::isfinite(value)) throw TrainingDivergence("non-finite loss at epoch " + std::to_string(epoch));
      for (double gi : grad)
        if (!std::isfinite(gi)) throw TrainingDivergence("non-finite gradient at epoch " + std::to_string(epoch));
      adam.step(model.params(), grad, lr);
      loss_sum += value;
      ++batches;
    }

    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(batches), std::nullopt};
    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      double val;
      try {
        val = mean_encoded_loss(model, val_data, eval_opts);
      } catch (const TrainingDivergence&) {
        throw TrainingDivergence("validation at epoch " + std::to_string(epoch));
      }
      rec.val_loss = val;
      if (result.best_epoch < 0 || val < result.best_val_loss) {
        result.best_epoch = epoch;
        result.best_val_loss = val;
        result.best = model;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string(), false);
  out.precision(17);
  out << "epoch,lr,train_loss,val_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',';
    if (r.val_loss) out << *r.val_loss;
    out << '\n';
  }
}

json checkpoint_to_json(const Model& model, const NormStats& stats, const json& provenance) {
  json tensors = json::array();
  const auto& p = model.params();
  for (const auto& t : model.tensors()) {
    json values = json::array();
    for (std::size_t i = 0; i < t.rows * t.cols; ++i) values.push_back(p[t.offset + i]);
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"values", std::move(values)}});
  }
  json j{{"kind", "gnn_checkpoint"},
         {"format_version", 1},
         {"model", to_json(model.config())},
         {"stats", to_json(stats)},
         {"tensors", std::move(tensors)}};
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.value("kind", std::string()) != "gnn_checkpoint") throw FormatError("not a GNN checkpoint");
    Checkpoint c;
    c.model = Model(model_config_from_json(j.at("model")));
    c.stats = norm_stats_from_json(j.at("stats"));
    if (j.contains("provenance")) c.provenance = j.at("provenance");
    const auto& tensors = j.at("tensors");
    if (tensors.size() != c.model.tensors().size()) throw FormatError("checkpoint tensor count does not match its model");
    for (const auto& t : tensors) {
      const ParamTensor& dst = c.model.tensor(t.at("name").get<std::string>());
      const auto& shape = t.at("shape");
      if (shape.at(0).get<std::size_t>() != dst.rows || shape.at(1).get<std::size_t>() != dst.cols)
        throw FormatError("shape mismatch for tensor " + dst.name);
      const auto& values = t.at("values");
      if (values.size() != dst.rows * dst.cols) throw FormatError("wrong value count for tensor " + dst.name);
      for (std::size_t i = 0; i < values.size(); ++i) c.model.params()[dst.offset + i] = values[i].get<double>();
    }
    return c;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Model& model, const NormStats& stats,
                      const json& provenance) {
  write_json_file(path, checkpoint_to_json(model, stats, provenance));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

FlowState predict(const Model& model, const NormStats& stats, const VascularGraph& g, const BoundaryConditions& bc) {
  const GraphFeatures f = encode(g, bc, stats);
  return to_flow_state(forward(model, f), f, stats);
}

}  // namespace vgflow::gnn
