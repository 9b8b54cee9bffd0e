#include "vgflow/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "vgflow/errors.hpp"
#include "vgflow/rng.hpp"
#include "vgflow/simd.hpp"

namespace vgflow::gnn {

using json = nlohmann::json;

namespace {

constexpr double kLayerNormEps = 1e-5;

struct Stat {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
};

void finish(const Stat& s, double& mean, double& stdev) {
  if (s.n == 0) {
    mean = 0.0;
    stdev = 1.0;
    return;
  }
  mean = s.sum / static_cast<double>(s.n);
  const double var = std::max(0.0, s.sum2 / static_cast<double>(s.n) - mean * mean);
  stdev = std::sqrt(var);
  if (!(stdev > 1e-12 * std::max(1.0, std::fabs(mean)))) stdev = 1.0;
}

}  // namespace

NormStats compute_stats(std::span<const Sample> train) {
  if (train.empty()) throw InvalidParameter("normalization statistics need at least one training sample");
  Stat radius, length, diameter, pressure, flow;
  for (const auto& s : train) {
    const auto idx = s.graph.node_index();
    for (const auto& n : s.graph.nodes) radius.add(n.radius);
    for (const auto& e : s.graph.edges) {
      length.add(e.length);
      diameter.add(s.graph.nodes[idx.at(e.u)].radius + s.graph.nodes[idx.at(e.v)].radius);
    }
    for (const auto& [id, p] : s.truth.node_pressure) pressure.add(p);
    for (const auto& [id, q] : s.truth.edge_flow) flow.add(q);
  }
  NormStats st;
  finish(radius, st.radius_mean, st.radius_std);
  finish(length, st.length_mean, st.length_std);
  finish(diameter, st.diameter_mean, st.diameter_std);
  finish(pressure, st.pressure_mean, st.pressure_std);
  finish(flow, st.flow_mean, st.flow_std);
  st.valid = true;
  return st;
}

json to_json(const NormStats& s) {
  return json{{"radius", {s.radius_mean, s.radius_std}},       {"length", {s.length_mean, s.length_std}},
              {"diameter", {s.diameter_mean, s.diameter_std}}, {"pressure", {s.pressure_mean, s.pressure_std}},
              {"flow", {s.flow_mean, s.flow_std}}};
}

NormStats norm_stats_from_json(const json& j) {
  try {
    NormStats s;
    auto pair = [&](const char* key, double& m, double& sd) {
      m = j.at(key).at(0).get<double>();
      sd = j.at(key).at(1).get<double>();
      if (!(sd > 0.0)) throw FormatError(std::string("non-positive std for ") + key);
    };
    pair("radius", s.radius_mean, s.radius_std);
    pair("length", s.length_mean, s.length_std);
    pair("diameter", s.diameter_mean, s.diameter_std);
    pair("pressure", s.pressure_mean, s.pressure_std);
    pair("flow", s.flow_mean, s.flow_std);
    s.valid = true;
    return s;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed normalization stats: ") + e.what());
  }
}

GraphFeatures encode(const VascularGraph& g, const BoundaryConditions& bc, const NormStats& stats) {
  if (!stats.valid) throw InvalidParameter("normalization statistics are not initialized");
  const auto idx = g.node_index();
  GraphFeatures f;
  f.n_nodes = g.nodes.size();
  f.n_edges = g.edges.size();
  f.node.assign(f.n_nodes * kNodeFeatures, 0.0);
  f.edge.assign(f.n_edges * kEdgeFeatures, 0.0);
  f.clamped.assign(f.n_nodes, 0);
  f.clamp_value.assign(f.n_nodes, 0.0);
  f.clamp_pressure.assign(f.n_nodes, 0.0);
  for (std::size_t i = 0; i < f.n_nodes; ++i) {
    const Node& n = g.nodes[i];
    double* row = &f.node[i * kNodeFeatures];
    const bool inlet = g.is_inlet(n.id), outlet = g.is_outlet(n.id);
    row[0] = inlet ? 1.0 : 0.0;
    row[1] = outlet ? 1.0 : 0.0;
    row[2] = inlet || outlet ? 0.0 : 1.0;
    row[3] = (n.radius - stats.radius_mean) / stats.radius_std;
    if (const double* p = bc.prescribed(n.id)) {
      const double z = (*p - stats.pressure_mean) / stats.pressure_std;
      row[4] = z;
      f.clamped[i] = 1;
      f.clamp_value[i] = z;
      f.clamp_pressure[i] = *p;
    }
    f.node_ids.push_back(n.id);
  }
  for (std::size_t k = 0; k < f.n_edges; ++k) {
    const Edge& e = g.edges[k];
    const std::size_t a = idx.at(e.u), b = idx.at(e.v);
    double* row = &f.edge[k * kEdgeFeatures];
    row[0] = (e.length - stats.length_mean) / stats.length_std;
    row[1] = (g.nodes[a].radius + g.nodes[b].radius - stats.diameter_mean) / stats.diameter_std;
    row[2] = e.axis[0];
    row[3] = e.axis[1];
    row[4] = e.axis[2];
    f.src.push_back(static_cast<std::uint32_t>(a));
    f.dst.push_back(static_cast<std::uint32_t>(b));
    f.edge_ids.push_back(e.id);
  }
  return f;
}

Targets encode_targets(const GraphFeatures& f, const FlowState& truth, const NormStats& stats) {
  Targets t;
  t.pressure.reserve(f.n_nodes);
  t.flow.reserve(f.n_edges);
  for (NodeId id : f.node_ids) {
    const auto it = truth.node_pressure.find(id);
    if (it == truth.node_pressure.end()) throw InvalidParameter("truth has no pressure for node " + std::to_string(id));
    t.pressure.push_back((it->second - stats.pressure_mean) / stats.pressure_std);
  }
  for (EdgeId id : f.edge_ids) {
    const auto it = truth.edge_flow.find(id);
    if (it == truth.edge_flow.end()) throw InvalidParameter("truth has no flow for edge " + std::to_string(id));
    t.flow.push_back((it->second - stats.flow_mean) / stats.flow_std);
  }
  return t;
}

Batch make_batch(std::span<const GraphFeatures* const> graphs, std::span<const Targets* const> targets) {
  if (graphs.empty() || graphs.size() != targets.size()) throw InvalidParameter("batch needs matching graphs and targets");
  Batch b;
  GraphFeatures& out = b.features;
  const double inv_b = 1.0 / static_cast<double>(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const GraphFeatures& f = *graphs[g];
    const Targets& t = *targets[g];
    const auto offset = static_cast<std::uint32_t>(out.n_nodes);
    out.node.insert(out.node.end(), f.node.begin(), f.node.end());
    out.edge.insert(out.edge.end(), f.edge.begin(), f.edge.end());
    for (auto s : f.src) out.src.push_back(s + offset);
    for (auto d : f.dst) out.dst.push_back(d + offset);
    out.clamped.insert(out.clamped.end(), f.clamped.begin(), f.clamped.end());
    out.clamp_value.insert(out.clamp_value.end(), f.clamp_value.begin(), f.clamp_value.end());
    out.clamp_pressure.insert(out.clamp_pressure.end(), f.clamp_pressure.begin(), f.clamp_pressure.end());
    out.node_ids.insert(out.node_ids.end(), f.node_ids.begin(), f.node_ids.end());
    out.edge_ids.insert(out.edge_ids.end(), f.edge_ids.begin(), f.edge_ids.end());
    out.n_nodes += f.n_nodes;
    out.n_edges += f.n_edges;
    b.targets.pressure.insert(b.targets.pressure.end(), t.pressure.begin(), t.pressure.end());
    b.targets.flow.insert(b.targets.flow.end(), t.flow.begin(), t.flow.end());
    b.node_weight.insert(b.node_weight.end(), f.n_nodes, f.n_nodes ? inv_b / static_cast<double>(f.n_nodes) : 0.0);
    b.edge_weight.insert(b.edge_weight.end(), f.n_edges, f.n_edges ? inv_b / static_cast<double>(f.n_edges) : 0.0);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Model layout

std::size_t Model::add_tensor(const std::string& name, std::size_t rows, std::size_t cols) {
  const std::size_t offset = params_.size();
  tensors_.push_back({name, offset, rows, cols});
  params_.resize(offset + rows * cols, 0.0);
  return offset;
}

MlpRef Model::add_mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, bool norm) {
  MlpRef m;
  const std::size_t widths[4] = {in, hidden, hidden, out};
  for (int l = 0; l < 3; ++l) {
    LinearRef& lin = m.layers[l];
    lin.in = widths[l];
    lin.out = widths[l + 1];
    const std::size_t t = tensors_.size();
    lin.weight = add_tensor(name + "." + std::to_string(l) + ".weight", lin.in, lin.out);
    lin.bias = add_tensor(name + "." + std::to_string(l) + ".bias", 1, lin.out);
    CounterRng rng(derive_key(cfg_.seed, {t}));
    const double a = std::sqrt(6.0 / static_cast<double>(lin.in + lin.out));
    for (std::size_t i = 0; i < lin.in * lin.out; ++i) params_[lin.weight + i] = rng.uniform(-a, a);
  }
  m.layer_norm = norm;
  if (norm) {
    m.gamma = add_tensor(name + ".norm.gamma", 1, out);
    m.beta = add_tensor(name + ".norm.beta", 1, out);
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(m.gamma), out, 1.0);
  }
  return m;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg.hidden == 0) throw InvalidParameter("hidden width must be >= 1");
  if (cfg.layers == 0) throw InvalidParameter("message-passing layers must be >= 1");
  if (cfg.passes == 0) throw InvalidParameter("refinement passes must be >= 1");
  const std::size_t h = cfg.hidden;
  node_encoder_ = add_mlp("node_encoder", kNodeFeatures + 1, h, h, true);
  edge_encoder_ = add_mlp("edge_encoder", kEdgeFeatures + 1, h, h, true);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    edge_processor_.push_back(add_mlp("processor." + std::to_string(l) + ".edge", 3 * h, h, h, true));
    node_processor_.push_back(add_mlp("processor." + std::to_string(l) + ".node", 3 * h, h, h, true));
  }
  node_decoder_ = add_mlp("node_decoder", h, h, 1, false);
  edge_decoder_ = add_mlp("edge_decoder", h, h, 1, false);
}

const ParamTensor& Model::tensor(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw InvalidParameter("no parameter tensor named " + name);
}

// ---------------------------------------------------------------------------
// Dense building blocks

namespace {

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;
  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double* row(std::size_t i) { return v.data() + i * cols; }
  const double* row(std::size_t i) const { return v.data() + i * cols; }
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct MlpCache {
  Mat x, z1, s1, a1, z2, s2, a2, z3, xhat;  // s: sigmoid of z
  std::vector<double> rstd;
};

Mat linear_forward(const double* p, const LinearRef& l, const Mat& x) {
  Mat y(x.rows, l.out);
  for (std::size_t i = 0; i < x.rows; ++i) std::copy_n(p + l.bias, l.out, y.row(i));
  simd::active().gemm_nn(x.v.data(), p + l.weight, y.v.data(), x.rows, l.in, l.out);
  return y;
}

// Accumulates weight/bias gradients and returns dx.
Mat linear_backward(const double* p, const LinearRef& l, const Mat& x, const Mat& dy, double* grad) {
  const auto& k = simd::active();
  k.gemm_tn(x.v.data(), dy.v.data(), grad + l.weight, x.rows, l.in, l.out);
  double* gb = grad + l.bias;
  for (std::size_t i = 0; i < dy.rows; ++i) {
    const double* r = dy.row(i);
    for (std::size_t j = 0; j < l.out; ++j) gb[j] += r[j];
  }
  std::vector<double> wt(l.out * l.in);
  const double* w = p + l.weight;
  for (std::size_t a = 0; a < l.in; ++a)
    for (std::size_t b = 0; b < l.out; ++b) wt[b * l.in + a] = w[a * l.out + b];
  Mat dx(x.rows, l.in);
  k.gemm_nn(dy.v.data(), wt.data(), dx.v.data(), dy.rows, l.out, l.in);
  return dx;
}

Mat silu(const Mat& z, Mat& sig) {
  Mat a(z.rows, z.cols);
  sig = Mat(z.rows, z.cols);
  for (std::size_t i = 0; i < z.v.size(); ++i) {
    sig.v[i] = sigmoid(z.v[i]);
    a.v[i] = z.v[i] * sig.v[i];
  }
  return a;
}

Mat silu_backward(const Mat& z, const Mat& sig, const Mat& da) {
  Mat dz(z.rows, z.cols);
  for (std::size_t i = 0; i < z.v.size(); ++i) {
    const double s = sig.v[i];
    dz.v[i] = da.v[i] * (s + z.v[i] * s * (1.0 - s));
  }
  return dz;
}

Mat mlp_forward(const double* p, const MlpRef& m, Mat x, MlpCache* cache) {
  Mat s1, s2;
  Mat z1 = linear_forward(p, m.layers[0], x);
  Mat a1 = silu(z1, s1);
  Mat z2 = linear_forward(p, m.layers[1], a1);
  Mat a2 = silu(z2, s2);
  Mat z3 = linear_forward(p, m.layers[2], a2);
  Mat out;
  Mat xhat;
  std::vector<double> rstd;
  if (m.layer_norm) {
    const std::size_t w = z3.cols;
    out = Mat(z3.rows, w);
    xhat = Mat(z3.rows, w);
    rstd.resize(z3.rows);
    const double* gamma = p + m.gamma;
    const double* beta = p + m.beta;
    for (std::size_t i = 0; i < z3.rows; ++i) {
      const double* z = z3.row(i);
      double mean = 0.0;
      for (std::size_t j = 0; j < w; ++j) mean += z[j];
      mean /= static_cast<double>(w);
      double var = 0.0;
      for (std::size_t j = 0; j < w; ++j) var += (z[j] - mean) * (z[j] - mean);
      var /= static_cast<double>(w);
      const double r = 1.0 / std::sqrt(var + kLayerNormEps);
      rstd[i] = r;
      double* xh = xhat.row(i);
      double* o = out.row(i);
      for (std::size_t j = 0; j < w; ++j) {
        xh[j] = (z[j] - mean) * r;
        o[j] = gamma[j] * xh[j] + beta[j];
      }
    }
  } else {
    out = z3;
  }
  if (cache) {
    cache->x = std::move(x);
    cache->z1 = std::move(z1);
    cache->s1 = std::move(s1);
    cache->s2 = std::move(s2);
    cache->a1 = std::move(a1);
    cache->z2 = std::move(z2);
    cache->a2 = std::move(a2);
    cache->z3 = std::move(z3);
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return out;
}

Mat mlp_backward(const double* p, const MlpRef& m, const MlpCache& c, const Mat& dout, double* grad) {
  Mat dz3;
  if (m.layer_norm) {
    const std::size_t w = dout.cols;
    dz3 = Mat(dout.rows, w);
    const double* gamma = p + m.gamma;
    double* gg = grad + m.gamma;
    double* gbeta = grad + m.beta;
    std::vector<double> dxh(w);
    for (std::size_t i = 0; i < dout.rows; ++i) {
      const double* dy = dout.row(i);
      const double* xh = c.xhat.row(i);
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        gg[j] += dy[j] * xh[j];
        gbeta[j] += dy[j];
        dxh[j] = dy[j] * gamma[j];
        mean_d += dxh[j];
        mean_dx += dxh[j] * xh[j];
      }
      mean_d /= static_cast<double>(w);
      mean_dx /= static_cast<double>(w);
      double* dz = dz3.row(i);
      for (std::size_t j = 0; j < w; ++j) dz[j] = c.rstd[i] * (dxh[j] - mean_d - xh[j] * mean_dx);
    }
  } else {
    dz3 = dout;
  }
  Mat da2 = linear_backward(p, m.layers[2], c.a2, dz3, grad);
  Mat dz2 = silu_backward(c.z2, c.s2, da2);
  Mat da1 = linear_backward(p, m.layers[1], c.a1, dz2, grad);
  Mat dz1 = silu_backward(c.z1, c.s1, da1);
  return linear_backward(p, m.layers[0], c.x, dz1, grad);
}

struct PassCache {
  MlpCache node_enc, edge_enc, node_dec, edge_dec;
  std::vector<MlpCache> edge_proc, node_proc;
};

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw TrainingDivergence(std::string("non-finite ") + what + " prediction");
}

Prediction run(const Model& model, const GraphFeatures& f, std::vector<PassCache>* caches) {
  const double* p = model.params().data();
  const auto& cfg = model.config();
  const std::size_t h = cfg.hidden, N = f.n_nodes, E = f.n_edges;
  if (f.node.size() != N * kNodeFeatures || f.edge.size() != E * kEdgeFeatures || f.src.size() != E ||
      f.dst.size() != E || f.clamped.size() != N)
    throw InvalidParameter("inconsistent graph features");
  Prediction pred;
  std::vector<double> prev_p(N, 0.0), prev_f(E, 0.0);
  if (caches) caches->assign(cfg.passes, PassCache{});
  for (std::size_t k = 0; k < cfg.passes; ++k) {
    PassCache* pc = caches ? &(*caches)[k] : nullptr;
    if (pc) {
      pc->edge_proc.resize(cfg.layers);
      pc->node_proc.resize(cfg.layers);
    }
    Mat node_in(N, kNodeFeatures + 1), edge_in(E, kEdgeFeatures + 1);
    for (std::size_t i = 0; i < N; ++i) {
      std::copy_n(&f.node[i * kNodeFeatures], kNodeFeatures, node_in.row(i));
      node_in.row(i)[kNodeFeatures] = prev_p[i];
    }
    for (std::size_t e = 0; e < E; ++e) {
      std::copy_n(&f.edge[e * kEdgeFeatures], kEdgeFeatures, edge_in.row(e));
      edge_in.row(e)[kEdgeFeatures] = prev_f[e];
    }
    Mat hn = mlp_forward(p, model.node_encoder(), std::move(node_in), pc ? &pc->node_enc : nullptr);
    Mat he = mlp_forward(p, model.edge_encoder(), std::move(edge_in), pc ? &pc->edge_enc : nullptr);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      Mat xe(E, 3 * h);
      for (std::size_t e = 0; e < E; ++e) {
        double* r = xe.row(e);
        std::copy_n(he.row(e), h, r);
        std::copy_n(hn.row(f.src[e]), h, r + h);
        std::copy_n(hn.row(f.dst[e]), h, r + 2 * h);
      }
      const Mat msg = mlp_forward(p, model.edge_processor(l), std::move(xe), pc ? &pc->edge_proc[l] : nullptr);
      Mat xn(N, 3 * h);
      for (std::size_t i = 0; i < N; ++i) std::copy_n(hn.row(i), h, xn.row(i));
      for (std::size_t e = 0; e < E; ++e) {
        const double* m = msg.row(e);
        double* he_r = he.row(e);
        double* in_r = xn.row(f.dst[e]) + h;
        double* out_r = xn.row(f.src[e]) + 2 * h;
        for (std::size_t j = 0; j < h; ++j) {
          he_r[j] += m[j];
          in_r[j] += m[j];
          out_r[j] += m[j];
        }
      }
      const Mat dn = mlp_forward(p, model.node_processor(l), std::move(xn), pc ? &pc->node_proc[l] : nullptr);
      for (std::size_t i = 0; i < hn.v.size(); ++i) hn.v[i] += dn.v[i];
    }
    Mat pn = mlp_forward(p, model.node_decoder(), std::move(hn), pc ? &pc->node_dec : nullptr);
    Mat fe = mlp_forward(p, model.edge_decoder(), std::move(he), pc ? &pc->edge_dec : nullptr);
    for (std::size_t i = 0; i < N; ++i)
      if (f.clamped[i]) pn.v[i] = f.clamp_value[i];
    require_finite(pn.v, "pressure");
    require_finite(fe.v, "flow");
    prev_p = pn.v;
    prev_f = fe.v;
    pred.pressure.push_back(std::move(pn.v));
    pred.flow.push_back(std::move(fe.v));
  }
  return pred;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Loss weight of each pass: 1 on the final pass, aux_weight on the first
// when there is more than one.
std::vector<double> pass_weights(std::size_t passes, const LossOptions& opts) {
  std::vector<double> w(passes, 0.0);
  w.back() = 1.0;
  if (passes > 1) w.front() += opts.aux_weight;
  return w;
}

double weighted_mae(const Prediction& pred, const Batch& b, const LossOptions& opts) {
  const auto w = pass_weights(pred.pressure.size(), opts);
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < pred.pressure[k].size(); ++i)
      s += b.node_weight[i] * std::fabs(pred.pressure[k][i] - b.targets.pressure[i]);
    for (std::size_t e = 0; e < pred.flow[k].size(); ++e)
      s += b.edge_weight[e] * std::fabs(pred.flow[k][e] - b.targets.flow[e]);
    total += w[k] * s;
  }
  return total;
}

void check_batch(const Model& model, const Batch& b) {
  const auto& f = b.features;
  if (b.targets.pressure.size() != f.n_nodes || b.targets.flow.size() != f.n_edges ||
      b.node_weight.size() != f.n_nodes || b.edge_weight.size() != f.n_edges)
    throw InvalidParameter("batch targets do not match its features");
  (void)model;
}

}  // namespace

Prediction forward(const Model& model, const GraphFeatures& f) { return run(model, f, nullptr); }

FlowState to_flow_state(const Prediction& p, const GraphFeatures& f, const NormStats& stats) {
  FlowState s;
  const auto& pp = p.final_pressure();
  const auto& ff = p.final_flow();
  for (std::size_t i = 0; i < f.n_nodes; ++i)
    s.node_pressure[f.node_ids[i]] = f.clamped[i] ? f.clamp_pressure[i] : pp[i] * stats.pressure_std + stats.pressure_mean;
  for (std::size_t e = 0; e < f.n_edges; ++e) s.edge_flow[f.edge_ids[e]] = ff[e] * stats.flow_std + stats.flow_mean;
  return s;
}

double loss(const FlowState& pred, const FlowState& truth, const NormStats& stats) {
  if (truth.node_pressure.empty() && truth.edge_flow.empty()) throw InvalidParameter("empty truth");
  double lp = 0.0, lq = 0.0;
  for (const auto& [id, t] : truth.node_pressure) {
    const auto it = pred.node_pressure.find(id);
    if (it == pred.node_pressure.end()) throw InvalidParameter("prediction has no pressure for node " + std::to_string(id));
    lp += std::fabs(it->second - t) / stats.pressure_std;
  }
  for (const auto& [id, t] : truth.edge_flow) {
    const auto it = pred.edge_flow.find(id);
    if (it == pred.edge_flow.end()) throw InvalidParameter("prediction has no flow for edge " + std::to_string(id));
    lq += std::fabs(it->second - t) / stats.flow_std;
  }
  if (!truth.node_pressure.empty()) lp /= static_cast<double>(truth.node_pressure.size());
  if (!truth.edge_flow.empty()) lq /= static_cast<double>(truth.edge_flow.size());
  return lp + lq;
}

double batch_loss(const Model& model, const Batch& batch, const LossOptions& opts) {
  check_batch(model, batch);
  return weighted_mae(run(model, batch.features, nullptr), batch, opts);
}

double loss_and_gradient(const Model& model, const Batch& batch, const LossOptions& opts, std::vector<double>& grad) {
  check_batch(model, batch);
  const auto& f = batch.features;
  const auto& cfg = model.config();
  const double* p = model.params().data();
  const std::size_t h = cfg.hidden, N = f.n_nodes, E = f.n_edges;
  std::vector<PassCache> caches;
  const Prediction pred = run(model, f, &caches);
  const double value = weighted_mae(pred, batch, opts);

  grad.assign(model.params().size(), 0.0);
  double* g = grad.data();
  const auto w = pass_weights(cfg.passes, opts);
  std::vector<double> carry_p(N, 0.0), carry_f(E, 0.0);
  for (std::size_t k = cfg.passes; k-- > 0;) {
    PassCache& pc = caches[k];
    Mat dp(N, 1), df(E, 1);
    for (std::size_t i = 0; i < N; ++i) {
      double d = carry_p[i] + w[k] * batch.node_weight[i] * sign(pred.pressure[k][i] - batch.targets.pressure[i]);
      dp.v[i] = f.clamped[i] ? 0.0 : d;
    }
    for (std::size_t e = 0; e < E; ++e)
      df.v[e] = carry_f[e] + w[k] * batch.edge_weight[e] * sign(pred.flow[k][e] - batch.targets.flow[e]);

    Mat dhn = mlp_backward(p, model.node_decoder(), pc.node_dec, dp, g);
    Mat dhe = mlp_backward(p, model.edge_decoder(), pc.edge_dec, df, g);
    for (std::size_t l = cfg.layers; l-- > 0;) {
      const Mat dxn = mlp_backward(p, model.node_processor(l), pc.node_proc[l], dhn, g);
      Mat dmsg = dhe;
      for (std::size_t i = 0; i < N; ++i) {
        const double* r = dxn.row(i);
        double* d = dhn.row(i);
        for (std::size_t j = 0; j < h; ++j) d[j] += r[j];
      }
      for (std::size_t e = 0; e < E; ++e) {
        const double* din = dxn.row(f.dst[e]) + h;
        const double* dout = dxn.row(f.src[e]) + 2 * h;
        double* dm = dmsg.row(e);
        for (std::size_t j = 0; j < h; ++j) dm[j] += din[j] + dout[j];
      }
      const Mat dxe = mlp_backward(p, model.edge_processor(l), pc.edge_proc[l], dmsg, g);
      for (std::size_t e = 0; e < E; ++e) {
        const double* r = dxe.row(e);
        double* de = dhe.row(e);
        double* du = dhn.row(f.src[e]);
        double* dv = dhn.row(f.dst[e]);
        for (std::size_t j = 0; j < h; ++j) {
          de[j] += r[j];
          du[j] += r[h + j];
          dv[j] += r[2 * h + j];
        }
      }
    }
    const Mat dnode_in = mlp_backward(p, model.node_encoder(), pc.node_enc, dhn, g);
    const Mat dedge_in = mlp_backward(p, model.edge_encoder(), pc.edge_enc, dhe, g);
    for (std::size_t i = 0; i < N; ++i) carry_p[i] = dnode_in.row(i)[kNodeFeatures];
    for (std::size_t e = 0; e < E; ++e) carry_f[e] = dedge_in.row(e)[kEdgeFeatures];
  }
  return value;
}

GradCheckResult check_gradients(const Model& model, const Sample& sample, const NormStats& stats, double epsilon,
                                const LossOptions& opts, double kink_margin, double floor) {
  if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be > 0");
  const GraphFeatures f = encode(sample.graph, sample.bc, stats);
  Targets t = encode_targets(f, sample.truth, stats);
  const Prediction pred = forward(model, f);
  const auto w = pass_weights(model.config().passes, opts);
  auto nudge = [&](double& target, auto get) {
    double hi = -INFINITY;
    bool close = false;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] == 0.0) continue;
      const double v = get(k);
      hi = std::max(hi, v);
      if (std::fabs(v - target) < kink_margin) close = true;
    }
    if (close) target = hi + kink_margin;
  };
  for (std::size_t i = 0; i < f.n_nodes; ++i)
    if (!f.clamped[i]) nudge(t.pressure[i], [&](std::size_t k) { return pred.pressure[k][i]; });
  for (std::size_t e = 0; e < f.n_edges; ++e) nudge(t.flow[e], [&](std::size_t k) { return pred.flow[k][e]; });

  const GraphFeatures* gp[1] = {&f};
  const Targets* tp[1] = {&t};
  const Batch batch = make_batch(gp, tp);
  std::vector<double> analytic;
  loss_and_gradient(model, batch, opts, analytic);

  // A residual that changes sign inside the stencil puts an MAE kink
  // between the probes; such parameters are skipped.
  auto crosses = [&](const Prediction& q) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] == 0.0) continue;
      for (std::size_t i = 0; i < f.n_nodes; ++i)
        if (sign(q.pressure[k][i] - t.pressure[i]) != sign(pred.pressure[k][i] - t.pressure[i])) return true;
      for (std::size_t e = 0; e < f.n_edges; ++e)
        if (sign(q.flow[k][e] - t.flow[e]) != sign(pred.flow[k][e] - t.flow[e])) return true;
    }
    return false;
  };

  Model probe = model;
  GradCheckResult r;
  for (std::size_t i = 0; i < probe.params().size(); ++i) {
    const double orig = probe.params()[i];
    probe.params()[i] = orig + epsilon;
    const Prediction pu = forward(probe, f);
    probe.params()[i] = orig - epsilon;
    const Prediction pd = forward(probe, f);
    probe.params()[i] = orig;
    if (crosses(pu) || crosses(pd)) {
      ++r.kinks_skipped;
      continue;
    }
    const double numeric = (weighted_mae(pu, batch, opts) - weighted_mae(pd, batch, opts)) / (2.0 * epsilon);
    const double err =
        std::fabs(analytic[i] - numeric) / std::max({std::fabs(analytic[i]), std::fabs(numeric), floor});
    if (err > r.max_relative_error || r.checked == 0) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.analytic = analytic[i];
      r.numeric = numeric;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace vgflow::gnn
