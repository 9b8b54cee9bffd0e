#include "vgflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vgflow/errors.hpp"
#include "vgflow/rng.hpp"
#include "vgflow/train.hpp"

namespace vgflow::eval {

using json = nlohmann::json;

double accuracy_scaled(std::span<const double> pred, std::span<const double> truth, std::span<const double> scale,
                       double threshold) {
  if (pred.size() != truth.size() || scale.size() != truth.size())
    throw InvalidParameter("accuracy inputs must have equal length");
  if (truth.empty()) throw InvalidParameter("accuracy of an empty set");
  if (!(threshold > 0.0)) throw InvalidParameter("threshold must be > 0");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(scale[i] > 0.0)) throw InvalidParameter("accuracy scale must be > 0");
    if (std::fabs(pred[i] - truth[i]) / scale[i] < threshold) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

double accuracy(std::span<const double> pred, std::span<const double> truth, double threshold) {
  if (truth.empty()) throw InvalidParameter("accuracy of an empty set");
  const double mx = *std::max_element(truth.begin(), truth.end());
  if (!(mx > 0.0)) throw InvalidParameter("max(truth) must be > 0");
  const std::vector<double> scale(truth.size(), mx);
  return accuracy_scaled(pred, truth, scale, threshold);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidParameter("pearson inputs must have equal length");
  if (a.size() < 2) throw InvalidParameter("pearson needs at least two points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw InvalidParameter("pearson of a constant vector is undefined");
  return sab / std::sqrt(saa * sbb);
}

namespace {

struct Pool {
  std::vector<double> pred, truth, scale;
  std::vector<double> per_graph;
  void add_graph(const std::vector<double>& p, const std::vector<double>& t, double threshold) {
    if (t.empty()) return;
    const double s = *std::max_element(t.begin(), t.end());
    if (!(s > 0.0)) throw InvalidParameter("max(truth) of a graph must be > 0");
    const std::vector<double> sc(t.size(), s);
    per_graph.push_back(accuracy_scaled(p, t, sc, threshold));
    pred.insert(pred.end(), p.begin(), p.end());
    truth.insert(truth.end(), t.begin(), t.end());
    scale.insert(scale.end(), sc.begin(), sc.end());
  }
  QuantityMetrics finish(double threshold) const {
    QuantityMetrics q;
    if (truth.empty()) return q;
    q.count = truth.size();
    q.accuracy = accuracy_scaled(pred, truth, scale, threshold);
    double s = 0.0;
    for (double a : per_graph) s += a;
    q.accuracy_per_graph = s / static_cast<double>(per_graph.size());
    q.pearson = truth.size() >= 2 ? pearson(pred, truth) : 0.0;
    return q;
  }
};

}  // namespace

Evaluation evaluate(std::span<const Sample> samples, std::span<const FlowState> predictions, double threshold) {
  if (samples.size() != predictions.size()) throw InvalidParameter("one prediction per sample required");
  if (samples.empty()) throw InvalidParameter("no samples to evaluate");
  Evaluation ev;
  Pool interior, all_nodes, flow;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Sample& smp = samples[s];
    const FlowState& pr = predictions[s];
    std::vector<double> pi, ti, pa, ta, pq, tq;
    for (const auto& node : smp.graph.nodes) {
      const double t = smp.truth.node_pressure.at(node.id);
      const auto it = pr.node_pressure.find(node.id);
      if (it == pr.node_pressure.end()) throw InvalidParameter("prediction lacks node " + std::to_string(node.id));
      pa.push_back(it->second);
      ta.push_back(t);
      if (!smp.graph.is_boundary(node.id)) {
        pi.push_back(it->second);
        ti.push_back(t);
        ev.points.push_back({"pressure", s, node.id, t, it->second});
      }
    }
    for (const auto& e : smp.graph.edges) {
      const double t = std::fabs(smp.truth.edge_flow.at(e.id));
      const auto it = pr.edge_flow.find(e.id);
      if (it == pr.edge_flow.end()) throw InvalidParameter("prediction lacks edge " + std::to_string(e.id));
      pq.push_back(std::fabs(it->second));
      tq.push_back(t);
      ev.points.push_back({"flow", s, e.id, t, std::fabs(it->second)});
    }
    interior.add_graph(pi, ti, threshold);
    all_nodes.add_graph(pa, ta, threshold);
    flow.add_graph(pq, tq, threshold);
  }
  ev.metrics.pressure = interior.finish(threshold);
  ev.metrics.pressure_all_nodes = all_nodes.finish(threshold);
  ev.metrics.flow = flow.finish(threshold);
  ev.metrics.samples = samples.size();
  return ev;
}

Evaluation evaluate_model(const gnn::Model& model, const gnn::NormStats& stats, std::span<const Sample> samples,
                          double threshold) {
  std::vector<FlowState> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) preds.push_back(gnn::predict(model, stats, s.graph, s.bc));
  return evaluate(samples, preds, threshold);
}

namespace {
json to_json(const QuantityMetrics& q) {
  return json{{"accuracy_percent", q.accuracy},
              {"accuracy_per_graph_percent", q.accuracy_per_graph},
              {"pearson", q.pearson},
              {"count", q.count}};
}
}  // namespace

json to_json(const Metrics& m) {
  return json{{"accuracy_pressure", m.pressure.accuracy},
              {"accuracy_flow", m.flow.accuracy},
              {"pearson_pressure", m.pressure.pearson},
              {"pearson_flow", m.flow.pearson},
              {"n_entities", m.pressure.count + m.flow.count},
              {"samples", m.samples},
              {"detail",
               {{"pressure", to_json(m.pressure)},
                {"pressure_all_nodes", to_json(m.pressure_all_nodes)},
                {"flow", to_json(m.flow)}}}};
}

std::vector<ScatterPoint> subsample(const std::vector<ScatterPoint>& points, std::size_t per_quantity,
                                    std::uint64_t seed) {
  std::vector<ScatterPoint> out;
  for (const char* q : {"pressure", "flow"}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i].quantity == q) idx.push_back(i);
    CounterRng rng(derive_key(seed, {q[0] == 'p' ? 0ULL : 1ULL}));
    rng.shuffle(idx);
    if (idx.size() > per_quantity) idx.resize(per_quantity);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.push_back(points[i]);
  }
  return out;
}

void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterPoint>& points) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string(), false);
  out.precision(17);
  out << "quantity,sample,entity,true,pred\n";
  for (const auto& p : points)
    out << p.quantity << ',' << p.sample << ',' << p.entity << ',' << p.truth << ',' << p.pred << '\n';
}

std::vector<ScatterPoint> read_scatter_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("quantity,", 0) != 0) throw FormatError(path.string() + ": missing CSV header");
  std::vector<ScatterPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ScatterPoint p;
    std::string field;
    try {
      std::getline(ss, p.quantity, ',');
      std::getline(ss, field, ',');
      p.sample = std::stoull(field);
      std::getline(ss, field, ',');
      p.entity = std::stoll(field);
      std::getline(ss, field, ',');
      p.truth = std::stod(field);
      std::getline(ss, field, ',');
      p.pred = std::stod(field);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
    out.push_back(p);
  }
  return out;
}

void write_scatter_svg(const std::filesystem::path& path, const std::vector<ScatterPoint>& points,
                       const std::string& quantity) {
  std::vector<const ScatterPoint*> sel;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& p : points)
    if (p.quantity == quantity) {
      sel.push_back(&p);
      lo = std::min({lo, p.truth, p.pred});
      hi = std::max({hi, p.truth, p.pred});
    }
  if (sel.empty()) throw InvalidParameter("no " + quantity + " points to plot");
  if (!(hi > lo)) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  constexpr double size = 400.0, margin = 50.0;
  auto sx = [&](double v) { return margin + (v - lo) / (hi - lo) * size; };
  auto sy = [&](double v) { return margin + size - (v - lo) / (hi - lo) * size; };
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string(), false);
  out.precision(6);
  const double W = size + 2 * margin;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << W << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << sx(lo) << "\" y1=\"" << sy(lo) << "\" x2=\"" << sx(hi) << "\" y2=\"" << sy(hi)
      << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  for (const auto* p : sel)
    out << "<circle cx=\"" << sx(p->truth) << "\" cy=\"" << sy(p->pred) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << W - 12 << "\" text-anchor=\"middle\">true " << quantity << "</text>\n";
  out << "<text x=\"14\" y=\"" << W / 2 << "\" transform=\"rotate(-90 14 " << W / 2
      << ")\" text-anchor=\"middle\">predicted " << quantity << "</text>\n";
  out << "<text x=\"" << margin << "\" y=\"" << margin - 8 << "\">[" << lo << ", " << hi << "]</text>\n";
  out << "</svg>\n";
}

}  // namespace vgflow::eval
