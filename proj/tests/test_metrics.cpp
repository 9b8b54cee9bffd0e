#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "vgflow/dataset.hpp"
#include "vgflow/errors.hpp"
#include "vgflow/metrics.hpp"

using namespace vgflow;
using namespace vgflow::eval;

namespace {

// Textbook sum-of-products formula.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

std::vector<Sample> samples(int count) {
  std::vector<Sample> out;
  AugmentConfig cfg;
  cfg.count = 2;
  for (int n = 0; n < count; ++n)
    for (auto& s : augment(generate_network(static_cast<std::uint64_t>(n), {3 + n % 2, 0, 0}), 5, cfg, n))
      out.push_back(std::move(s));
  return out;
}

FlowState perturb(const FlowState& t, std::mt19937_64& rng, double rel) {
  std::normal_distribution<double> noise(0.0, rel);
  FlowState p = t;
  for (auto& [id, v] : p.node_pressure) v *= 1.0 + noise(rng);
  for (auto& [id, v] : p.edge_flow) v *= 1.0 + noise(rng);
  return p;
}

}  // namespace

TEST_CASE("accuracy counts errors below a tenth of the max truth") {
  const std::vector<double> truth{10, 20, 30}, pred{10, 25, 30};
  CHECK(accuracy(pred, truth) == doctest::Approx(200.0 / 3.0));
  // exactly at the threshold does not count
  CHECK(accuracy(std::vector<double>{11, 5}, std::vector<double>{10, 5}) == 50.0);
  CHECK(accuracy(truth, truth) == 100.0);
  CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<double>{}), InvalidParameter);
  CHECK_THROWS_AS(accuracy(std::vector<double>{1, 2}, std::vector<double>{1}), InvalidParameter);
  CHECK_THROWS_AS(accuracy(std::vector<double>{1}, std::vector<double>{0}), InvalidParameter);
}

TEST_CASE("pearson correlation") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3, 10};
  CHECK(pearson(a, b) == doctest::Approx(14.0 / std::sqrt(250.0)).epsilon(1e-14));
  CHECK(pearson(a, b) == doctest::Approx(pearson_oracle(a, b)).epsilon(1e-12));
  CHECK(pearson(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(a, std::vector<double>{-1, -2, -3, -4}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(pearson(a, std::vector<double>{2, 2, 2, 2}), InvalidParameter);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), InvalidParameter);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<double> x(50), y(50), y2(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x[i] = u(rng);
    y[i] = x[i] + u(rng);
    y2[i] = 3.5 * y[i] - 7.0;
  }
  CHECK(pearson(x, y) == doctest::Approx(pearson_oracle(x, y)).epsilon(1e-12));
  CHECK(pearson(x, y2) == doctest::Approx(pearson(x, y)).epsilon(1e-12));
  // accuracy is scale invariant
  std::vector<double> xs(50), ys(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x[i] = std::fabs(x[i]);
    y[i] = x[i] * (1.0 + 0.1 * u(rng) / 5.0);
    xs[i] = 8.0 * x[i];
    ys[i] = 8.0 * y[i];
  }
  CHECK(accuracy(ys, xs) == accuracy(y, x));
}

TEST_CASE("perfect predictions score 100 percent and unit correlation") {
  const auto s = samples(3);
  std::vector<FlowState> truth;
  for (const auto& x : s) truth.push_back(x.truth);
  const Evaluation ev = evaluate(s, truth);
  CHECK(ev.metrics.pressure.accuracy == 100.0);
  CHECK(ev.metrics.flow.accuracy == 100.0);
  CHECK(ev.metrics.pressure.pearson == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ev.metrics.flow.pearson == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ev.metrics.samples == 6);
  const auto j = to_json(ev.metrics);
  for (const char* key : {"accuracy_pressure", "accuracy_flow", "pearson_pressure", "pearson_flow", "n_entities", "samples"})
    CHECK(j.contains(key));
}

TEST_CASE("pooled accuracy weights graphs by entity count") {
  const auto s = samples(4);
  std::mt19937_64 rng(3);
  std::vector<FlowState> preds;
  for (const auto& x : s) preds.push_back(perturb(x.truth, rng, 0.15));
  const Evaluation ev = evaluate(s, preds);

  std::size_t hits = 0, total = 0, flow_hits = 0, flow_total = 0;
  double per_graph = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    double mx = 0.0, qmx = 0.0;
    for (const auto& n : s[k].graph.nodes)
      if (!s[k].graph.is_boundary(n.id)) mx = std::max(mx, s[k].truth.node_pressure.at(n.id));
    for (auto& [id, q] : s[k].truth.edge_flow) qmx = std::max(qmx, std::fabs(q));
    std::size_t h = 0, t = 0;
    for (const auto& n : s[k].graph.nodes) {
      if (s[k].graph.is_boundary(n.id)) continue;
      ++t;
      if (std::fabs(preds[k].node_pressure.at(n.id) - s[k].truth.node_pressure.at(n.id)) / mx < 0.1) ++h;
    }
    for (auto& [id, q] : s[k].truth.edge_flow) {
      ++flow_total;
      if (std::fabs(std::fabs(preds[k].edge_flow.at(id)) - std::fabs(q)) / qmx < 0.1) ++flow_hits;
    }
    hits += h;
    total += t;
    per_graph += 100.0 * static_cast<double>(h) / static_cast<double>(t);
  }
  CHECK(ev.metrics.pressure.count == total);
  CHECK(ev.metrics.pressure.accuracy == doctest::Approx(100.0 * static_cast<double>(hits) / static_cast<double>(total)));
  CHECK(ev.metrics.pressure.accuracy_per_graph == doctest::Approx(per_graph / static_cast<double>(s.size())));
  CHECK(ev.metrics.flow.accuracy == doctest::Approx(100.0 * static_cast<double>(flow_hits) / static_cast<double>(flow_total)));
  CHECK(ev.metrics.pressure.accuracy < 100.0);
}

TEST_CASE("subsampling is deterministic and leaves metrics alone") {
  const auto s = samples(4);
  std::mt19937_64 rng(4);
  std::vector<FlowState> preds;
  for (const auto& x : s) preds.push_back(perturb(x.truth, rng, 0.05));
  const Evaluation ev = evaluate(s, preds);
  const auto a = subsample(ev.points, 10, 9);
  const auto b = subsample(ev.points, 10, 9);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].entity == b[i].entity);
    CHECK(a[i].sample == b[i].sample);
  }
  const Evaluation again = evaluate(s, preds);
  CHECK(to_json(again.metrics) == to_json(ev.metrics));

  const auto path = std::filesystem::temp_directory_path() / "vgflow_test_scatter.csv";
  write_scatter_csv(path, a);
  const auto back = read_scatter_csv(path);
  REQUIRE(back.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(back[i].quantity == a[i].quantity);
    CHECK(back[i].truth == a[i].truth);
    CHECK(back[i].pred == a[i].pred);
  }
  const auto svg = std::filesystem::temp_directory_path() / "vgflow_test_scatter.svg";
  write_scatter_svg(svg, a, "flow");
  CHECK(std::filesystem::file_size(svg) > 100);
  CHECK_THROWS_AS(write_scatter_svg(svg, a, "velocity"), InvalidParameter);
}
