// vgflow command-line driver. Every parameter can come from a flag, from the
// JSON file given with --config (section named after the subcommand), or
// from the built-in default, in that order of precedence.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vgflow/crossval.hpp"
#include "vgflow/dataset.hpp"
#include "vgflow/errors.hpp"
#include "vgflow/extraction.hpp"
#include "vgflow/flow.hpp"
#include "vgflow/json_io.hpp"
#include "vgflow/metrics.hpp"
#include "vgflow/phantom.hpp"
#include "vgflow/segmentation.hpp"
#include "vgflow/train.hpp"
#include "vgflow/volume.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vgflow;

namespace {

// Options of one subcommand, mirrored into the config file and the echoed
// run configuration.
class Params {
 public:
  explicit Params(CLI::App* app) : app_(app) {}

  template <typename T>
  void add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    entries_.push_back({opt, key(name), [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }});
  }

  template <typename T>
  void add_optional(const std::string& name, std::optional<T>& var, const std::string& help) {
    auto* holder = &var;
    CLI::Option* opt = app_->add_option_function<T>("--" + name, [holder](const T& v) { *holder = v; }, help);
    entries_.push_back({opt, key(name), [holder](const json& j) { *holder = j.get<T>(); },
                        [holder] { return *holder ? json(**holder) : json(nullptr); }});
  }

  void apply_config(const json& section) {
    for (auto& e : entries_) {
      if (e.opt->count() > 0 || !section.contains(e.key) || section.at(e.key).is_null()) continue;
      try {
        e.set(section.at(e.key));
      } catch (const json::exception& ex) {
        throw InvalidParameter("config value '" + e.key + "': " + ex.what());
      }
    }
  }

  json echo() const {
    json j = json::object();
    for (const auto& e : entries_) j[e.key] = e.get();
    return j;
  }

 private:
  static std::string key(const std::string& name) {
    std::string k = name;
    for (auto& c : k)
      if (c == '-') c = '_';
    return k;
  }
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const json&)> set;
    std::function<json()> get;
  };
  CLI::App* app_;
  std::vector<Entry> entries_;
};

json provenance(const std::string& subcommand, const json& params) {
  return json{{"tool", "vgflow"}, {"version", VGFLOW_VERSION}, {"run_config", {{"subcommand", subcommand}, {"params", params}}}};
}

void require(const std::string& value, const std::string& name) {
  if (value.empty()) throw InvalidParameter("--" + name + " is required");
}

void note(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

struct AugmentFlags {
  double inlet_min = 12000.0, inlet_max = 18000.0;
  double radius_min = 0.8, radius_max = 1.2;
  double outlet_pressure = 0.0;
  double viscosity = kDefaultViscosity;

  void add(Params& p) {
    p.add("inlet-min", inlet_min, "lower bound of the inlet pressure draw (Pa)");
    p.add("inlet-max", inlet_max, "upper bound of the inlet pressure draw (Pa)");
    p.add("radius-min", radius_min, "lower bound of the per-node radius factor");
    p.add("radius-max", radius_max, "upper bound of the per-node radius factor");
    p.add("outlet-pressure", outlet_pressure, "outlet pressure (Pa)");
    p.add("viscosity", viscosity, "dynamic viscosity (Pa s)");
  }
  void apply(AugmentConfig& c) const {
    c.inlet_min = inlet_min;
    c.inlet_max = inlet_max;
    c.radius_factor_min = radius_min;
    c.radius_factor_max = radius_max;
    c.outlet_pressure = outlet_pressure;
    c.viscosity = viscosity;
  }
};

struct ModelFlags {
  gnn::ModelConfig model;
  gnn::TrainConfig train;
  std::size_t val_networks = 4;

  void add(Params& p) {
    p.add("hidden", model.hidden, "latent width h");
    p.add("layers", model.layers, "message-passing layers L");
    p.add("passes", model.passes, "refinement passes K");
    p.add("init-seed", model.seed, "weight initialization seed");
    p.add("epochs", train.epochs, "training epochs");
    p.add("lr0", train.lr0, "initial learning rate");
    p.add("lr-min", train.lr_min, "final learning rate of the cosine schedule");
    p.add("batch-size", train.batch_size, "graphs per mini-batch");
    p.add("eval-every", train.eval_every, "validation interval in epochs");
    p.add("aux-weight", train.aux_weight, "MAE weight on the first-pass outputs (0 = off)");
    p.add("val-networks", val_networks, "training networks held out for validation");
  }
};

std::vector<Sample> load_manifest_samples(const std::string& path, Manifest& m) {
  m = read_manifest(path);
  return load_samples(path, m);
}

void write_metrics(const fs::path& path, const eval::Metrics& m, const json& prov, const json& extra = nullptr) {
  json j = eval::to_json(m);
  if (!extra.is_null()) j.update(extra);
  j["provenance"] = prov;
  write_json_file(path, j);
}

void write_plots(const fs::path& prefix, const std::vector<eval::ScatterPoint>& points, std::size_t count,
                 std::uint64_t seed) {
  const auto sub = eval::subsample(points, count, seed);
  eval::write_scatter_csv(prefix.string() + "_subsample.csv", sub);
  for (const char* q : {"pressure", "flow"}) eval::write_scatter_svg(prefix.string() + "_" + q + ".svg", sub, q);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vgflow: vascular graphs, Poiseuille flow and a GNN surrogate"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; section per subcommand")->check(CLI::ExistingFile);
  app.set_version_flag("--version", std::string("vgflow ") + VGFLOW_VERSION);

  std::map<std::string, std::unique_ptr<Params>> params;
  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    params[name] = std::make_unique<Params>(s);
    return std::pair<CLI::App*, Params*>{s, params[name].get()};
  };

  // segment
  std::string seg_in, seg_out;
  SegmentationConfig seg;
  {
    auto [s, p] = sub("segment", "Gaussian smoothing, hysteresis threshold and DBSCAN cleanup of a volume");
    p->add("input", seg_in, "input volume (.nii or raw .json sidecar)");
    p->add("output", seg_out, "output mask sidecar (.json)");
    p->add("sigma", seg.sigma, "Gaussian sigma in voxels");
    p->add("low", seg.low, "hysteresis low threshold");
    p->add("high", seg.high, "hysteresis high threshold");
    p->add("eps-factor", seg.eps_factor, "DBSCAN eps as a multiple of the largest voxel spacing");
    p->add("min-samples", seg.min_samples, "DBSCAN core-point neighbor count");
    p->add("min-cluster-size", seg.min_cluster_size, "smallest kept cluster in voxels");
  }

  // graph
  std::string graph_mask, graph_out;
  double spur_factor = 1.5, merge_factor = 1.0;
  std::optional<std::vector<NodeId>> inlets, outlets;
  {
    auto [s, p] = sub("graph", "skeletonize a mask and extract the vessel graph");
    p->add("mask", graph_mask, "mask sidecar written by segment");
    p->add("output", graph_out, "output graph JSON");
    p->add("spur-factor", spur_factor, "prune endpoint edges shorter than this times the junction radius (0 = off)");
    p->add("merge-factor", merge_factor, "merge junctions closer than this times their radius sum (0 = off)");
    p->add_optional("inlet", inlets, "inlet node IDs (default: largest-radius endpoint)");
    p->add_optional("outlet", outlets, "outlet node IDs (default: the other endpoints)");
  }

  // synth
  std::string synth_out;
  SynthConfig synth;
  AugmentFlags synth_aug;
  {
    auto [s, p] = sub("synth", "generate synthetic networks, augmented samples and a split plan");
    p->add("out", synth_out, "output directory");
    p->add("networks", synth.networks, "number of networks");
    p->add("augment-count", synth.augment.count, "augmented samples per network");
    p->add("seed", synth.seed, "global seed");
    p->add("folds", synth.folds, "cross-validation folds");
    p->add("depth-min", synth.depth_min, "smallest tree depth");
    p->add("depth-max", synth.depth_max, "largest tree depth");
    p->add("max-loops", synth.max_loops, "most loop edges per network");
    p->add("max-stenoses", synth.max_stenoses, "most stenoses per network");
    synth_aug.add(*p);
  }

  // solve
  std::string solve_graph, solve_bc, solve_out;
  double inlet_pressure = 15000.0, outlet_pressure = 0.0, viscosity = kDefaultViscosity;
  {
    auto [s, p] = sub("solve", "Poiseuille network solve");
    p->add("graph", solve_graph, "graph JSON");
    p->add("bc", solve_bc, "boundary conditions JSON (overrides the uniform pressures)");
    p->add("output", solve_out, "output flow state JSON");
    p->add("inlet-pressure", inlet_pressure, "pressure at every inlet (Pa)");
    p->add("outlet-pressure", outlet_pressure, "pressure at every outlet (Pa)");
    p->add("viscosity", viscosity, "dynamic viscosity (Pa s)");
  }

  // augment
  std::string aug_graph, aug_out;
  int aug_count = 25;
  std::uint64_t aug_seed = 1;
  std::int64_t aug_network = 0;
  AugmentFlags aug_flags;
  {
    auto [s, p] = sub("augment", "perturb one graph into solved training samples");
    p->add("graph", aug_graph, "graph JSON");
    p->add("out", aug_out, "output directory");
    p->add("count", aug_count, "number of samples");
    p->add("seed", aug_seed, "seed");
    p->add("network-id", aug_network, "network ID recorded in the samples");
    aug_flags.add(*p);
  }

  // split
  std::string split_manifest, split_out;
  int split_folds = 5;
  std::uint64_t split_seed = 1;
  {
    auto [s, p] = sub("split", "k-fold split of a manifest's networks");
    p->add("manifest", split_manifest, "manifest.json");
    p->add("output", split_out, "output split plan JSON");
    p->add("folds", split_folds, "number of folds");
    p->add("seed", split_seed, "shuffle seed");
  }

  // train
  std::string train_manifest, train_out;
  int train_fold = 0;
  ModelFlags train_flags;
  std::uint64_t train_seed = 1;
  {
    auto [s, p] = sub("train", "train the surrogate on one fold");
    p->add("manifest", train_manifest, "manifest.json");
    p->add("out", train_out, "output directory (checkpoint.json, history.csv)");
    p->add("fold", train_fold, "fold index");
    p->add("seed", train_seed, "mini-batch and validation-split seed");
    train_flags.add(*p);
  }

  // eval
  std::string eval_manifest, eval_ckpt, eval_out, eval_scatter;
  int eval_fold = 0;
  double threshold = 0.1;
  {
    auto [s, p] = sub("eval", "metrics of a checkpoint on its fold's test networks");
    p->add("manifest", eval_manifest, "manifest.json");
    p->add("checkpoint", eval_ckpt, "checkpoint JSON from train");
    p->add("fold", eval_fold, "fold index");
    p->add("output", eval_out, "metrics JSON");
    p->add("scatter", eval_scatter, "optional CSV of every (truth, prediction) pair");
    p->add("threshold", threshold, "accuracy threshold on the normalized error");
  }

  // plot
  std::string plot_in, plot_out;
  std::size_t plot_count = 100;
  std::uint64_t plot_seed = 1;
  {
    auto [s, p] = sub("plot", "subsample a scatter CSV and draw truth-vs-prediction SVGs");
    p->add("scatter", plot_in, "scatter CSV from eval");
    p->add("out", plot_out, "output prefix");
    p->add("count", plot_count, "points per quantity");
    p->add("seed", plot_seed, "subsample seed");
  }

  // phantom
  std::string phantom_out;
  YPhantomSpec phantom;
  {
    auto [s, p] = sub("phantom", "write the synthetic Y-bifurcation test volume as NIfTI");
    p->add("output", phantom_out, "output .nii");
    p->add("noise", phantom.noise_sigma, "Gaussian noise sigma");
    p->add("seed", phantom.seed, "noise seed");
  }

  // pipeline
  std::string pipe_out;
  SynthConfig pipe_synth;
  ModelFlags pipe_flags;
  {
    auto [s, p] = sub("pipeline", "synth, then train and eval every fold, then plot");
    p->add("out", pipe_out, "output directory");
    p->add("networks", pipe_synth.networks, "number of networks");
    p->add("augment-count", pipe_synth.augment.count, "augmented samples per network");
    p->add("seed", pipe_synth.seed, "global seed");
    p->add("folds", pipe_synth.folds, "cross-validation folds");
    pipe_flags.add(*p);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();
  const std::string name = active->get_name();
  Params& p = *params.at(name);

  try {
    if (!config_path.empty()) {
      const json cfg = read_json_file(config_path);
      if (!cfg.is_object()) throw FormatError("config must be a JSON object");
      if (cfg.contains(name)) p.apply_config(cfg.at(name));
    }
    const json prov = provenance(name, p.echo());

    if (name == "segment") {
      require(seg_in, "input");
      require(seg_out, "output");
      const VoxelGrid grid = read_volume(seg_in);
      const VesselMask mask = segment(grid, seg);
      write_mask(seg_out, mask, prov);
      std::size_t n = 0;
      for (auto m : mask.mask) n += m;
      note("segment: " + std::to_string(n) + " vessel voxels");
    } else if (name == "graph") {
      require(graph_mask, "mask");
      require(graph_out, "output");
      ExtractionConfig cfg;
      cfg.build.spur_radius_factor = spur_factor;
      cfg.build.merge_radius_factor = merge_factor;
      cfg.boundary.inlets = inlets;
      cfg.boundary.outlets = outlets;
      const VascularGraph g = extract_graph(read_mask(graph_mask), cfg);
      json j = to_json(g);
      j["provenance"] = prov;
      write_json_file(graph_out, j);
      note("graph: " + std::to_string(g.nodes.size()) + " nodes, " + std::to_string(g.edges.size()) + " edges");
    } else if (name == "synth") {
      require(synth_out, "out");
      synth_aug.apply(synth.augment);
      const Manifest m = build_dataset(synth_out, synth, prov);
      note("synth: " + std::to_string(m.networks.size()) + " networks, " + std::to_string(m.samples.size()) + " samples");
    } else if (name == "solve") {
      require(solve_graph, "graph");
      require(solve_out, "output");
      const VascularGraph g = read_graph(solve_graph);
      BoundaryConditions bc = solve_bc.empty() ? uniform_boundary(g, inlet_pressure, outlet_pressure, viscosity)
                                               : boundary_from_json(read_json_file(solve_bc));
      const FlowState state = solve_flow(g, bc);
      double rmax = 0.0;
      for (const auto& [id, r] : conservation_residual(g, bc, state)) rmax = std::max(rmax, std::fabs(r));
      json j = to_json(state);
      j["residual"] = {{"max_abs", rmax}, {"relative", relative_conservation_error(g, state)}};
      j["bc"] = to_json(bc);
      j["provenance"] = prov;
      write_json_file(solve_out, j);
      note("solve: max residual " + std::to_string(rmax) + " m3/s");
    } else if (name == "augment") {
      require(aug_graph, "graph");
      require(aug_out, "out");
      AugmentConfig cfg;
      aug_flags.apply(cfg);
      cfg.count = aug_count;
      const auto samples = augment(read_graph(aug_graph), aug_seed, cfg, aug_network);
      for (const auto& s : samples) {
        json j = to_json(s);
        j["provenance"] = prov;
        char file[64];
        std::snprintf(file, sizeof file, "net_%03lld_aug_%02d.json", static_cast<long long>(s.source_network_id),
                      s.augmentation_index);
        write_json_file(fs::path(aug_out) / file, j);
      }
      note("augment: " + std::to_string(samples.size()) + " samples");
    } else if (name == "split") {
      require(split_manifest, "manifest");
      require(split_out, "output");
      const Manifest m = read_manifest(split_manifest);
      json j = to_json(make_splits(m.networks, split_folds, split_seed));
      j["provenance"] = prov;
      write_json_file(split_out, j);
    } else if (name == "train") {
      require(train_manifest, "manifest");
      require(train_out, "out");
      Manifest m;
      const auto samples = load_manifest_samples(train_manifest, m);
      auto cfg = train_flags.train;
      cfg.seed = train_seed;
      const FoldData d = fold_data(samples, m.split_plan, train_fold, train_flags.val_networks, cfg.seed);
      auto result = gnn::train(train_flags.model, d.train, d.val, cfg, [](const gnn::EpochRecord& r) {
        if (r.val_loss)
          std::fprintf(stderr, "epoch %d lr %.3e train %.6f val %.6f\n", r.epoch, r.lr, r.train_loss, *r.val_loss);
      });
      json ck_prov = prov;
      ck_prov["fold"] = train_fold;
      ck_prov["val_networks"] = d.val_networks;
      ck_prov["best_epoch"] = result.best_epoch;
      gnn::write_checkpoint(fs::path(train_out) / "checkpoint.json", result.best, result.stats, ck_prov);
      gnn::write_history_csv(fs::path(train_out) / "history.csv", result.history);
      note("train: best validation loss " + std::to_string(result.best_val_loss) + " at epoch " +
           std::to_string(result.best_epoch));
    } else if (name == "eval") {
      require(eval_manifest, "manifest");
      require(eval_ckpt, "checkpoint");
      require(eval_out, "output");
      if (!fs::exists(eval_ckpt)) throw InvalidParameter("checkpoint not found: " + eval_ckpt);
      const gnn::Checkpoint ck = gnn::read_checkpoint(eval_ckpt);
      Manifest m;
      const auto samples = load_manifest_samples(eval_manifest, m);
      const FoldData d = fold_data(samples, m.split_plan, eval_fold, 0, 0);
      const auto ev = eval::evaluate_model(ck.model, ck.stats, d.test, threshold);
      write_metrics(eval_out, ev.metrics, prov, {{"fold", eval_fold}});
      if (!eval_scatter.empty()) eval::write_scatter_csv(eval_scatter, ev.points);
      std::printf("accuracy_pressure %.4f accuracy_flow %.4f pearson_pressure %.6f pearson_flow %.6f\n",
                  ev.metrics.pressure.accuracy, ev.metrics.flow.accuracy, ev.metrics.pressure.pearson,
                  ev.metrics.flow.pearson);
    } else if (name == "plot") {
      require(plot_in, "scatter");
      require(plot_out, "out");
      write_plots(plot_out, eval::read_scatter_csv(plot_in), plot_count, plot_seed);
    } else if (name == "phantom") {
      require(phantom_out, "output");
      write_nifti_float32(phantom_out, make_y_phantom(phantom).grid);
    } else if (name == "pipeline") {
      require(pipe_out, "out");
      const fs::path root = pipe_out;
      const Manifest m = build_dataset(root / "data", pipe_synth, prov);
      if (m.split_plan.folds.empty()) throw InvalidParameter("need at least as many networks as folds");
      const auto samples = load_samples(root / "data" / "manifest.json", m);
      auto cfg = pipe_flags.train;
      cfg.seed = pipe_synth.seed;
      std::vector<FoldOutcome> outcomes;
      json folds = json::array();
      std::vector<eval::ScatterPoint> points;
      for (int f = 0; f < static_cast<int>(m.split_plan.folds.size()); ++f) {
        std::string stage = "fold " + std::to_string(f);
        note("pipeline: " + stage);
        FoldOutcome o;
        try {
          o = run_fold(samples, m.split_plan, f, pipe_flags.model, cfg, pipe_flags.val_networks);
        } catch (const Error& e) {
          throw Error("stage '" + stage + "' failed: " + e.what(), e.user_error());
        }
        const fs::path dir = root / ("fold_" + std::to_string(f));
        json ck_prov = prov;
        ck_prov["fold"] = f;
        ck_prov["val_networks"] = o.val_networks;
        gnn::write_checkpoint(dir / "checkpoint.json", o.training.best, o.training.stats, ck_prov);
        gnn::write_history_csv(dir / "history.csv", o.training.history);
        write_metrics(dir / "metrics.json", o.test.metrics, prov, {{"fold", f}, {"best_epoch", o.training.best_epoch}});
        json fj = eval::to_json(o.test.metrics);
        fj["fold"] = f;
        folds.push_back(fj);
        for (auto pt : o.test.points) points.push_back(pt);
        outcomes.push_back(std::move(o));
      }
      write_metrics(root / "metrics.json", pool_folds(outcomes), prov, {{"folds", folds}});
      eval::write_scatter_csv(root / "scatter.csv", points);
      write_plots(root / "scatter", points, 100, pipe_synth.seed);
      const auto pooled = pool_folds(outcomes);
      std::printf("accuracy_pressure %.4f accuracy_flow %.4f pearson_pressure %.6f pearson_flow %.6f\n",
                  pooled.pressure.accuracy, pooled.flow.accuracy, pooled.pressure.pearson, pooled.flow.pearson);
    }
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "vgflow %s: %s\n", name.c_str(), e.what());
    return e.user_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "vgflow %s: internal error: %s\n", name.c_str(), e.what());
    return 1;
  }
}
