#include <doctest.h>

#include <random>
#include <sstream>

#include "canids/detect_eval.hpp"
#include "canids/error.hpp"

using namespace canids;

namespace {

// Per-class figures straight from the counts, 0/0 read as 0.
struct Expected {
  double accuracy, precision, recall, f1;
};

double ratio(double a, double b) { return b == 0 ? 0.0 : a / b; }

Expected closed_form(double tp, double fp, double tn, double fn) {
  const double p1 = ratio(tp, tp + fp), r1 = ratio(tp, tp + fn), f1 = ratio(2 * p1 * r1, p1 + r1);
  const double p0 = ratio(tn, tn + fn), r0 = ratio(tn, tn + fp), f0 = ratio(2 * p0 * r0, p0 + r0);
  return {(tp + tn) / (tp + fp + tn + fn), (p0 + p1) / 2, (r0 + r1) / 2, (f0 + f1) / 2};
}

}  // namespace

TEST_CASE("worked confusion example") {
  const auto r = metrics(Confusion{40, 10, 45, 5});
  CHECK(r.accuracy == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(std::abs(r.per_class[1].precision - 0.8) < 1e-12);
  CHECK(std::abs(r.per_class[1].recall - 8.0 / 9.0) < 1e-12);
  CHECK(std::abs(r.per_class[0].precision - 45.0 / 50.0) < 1e-12);
  CHECK(std::abs(r.per_class[0].recall - 45.0 / 55.0) < 1e-12);
  const auto e = closed_form(40, 10, 45, 5);
  CHECK(std::abs(r.precision - e.precision) < 1e-12);
  CHECK(std::abs(r.recall - e.recall) < 1e-12);
  CHECK(std::abs(r.f1 - e.f1) < 1e-12);
  CHECK(r.evaluated == 100);
}

TEST_CASE("all benign predictions on benign truth") {
  const auto r = metrics(Confusion{0, 0, 20, 0});
  CHECK(r.accuracy == 1.0);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == 0.5);
}

TEST_CASE("perfect predictions") {
  const auto r = metrics(Confusion{7, 0, 13, 0});
  CHECK(r.accuracy == 1.0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
}

TEST_CASE("random confusions follow the closed forms") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const Confusion c{rng() % 50, rng() % 50, rng() % 50, rng() % 50};
    if (c.total() == 0) continue;
    const auto r = metrics(c);
    const auto e = closed_form(c.tp, c.fp, c.tn, c.fn);
    CHECK(std::abs(r.accuracy - e.accuracy) < 1e-12);
    CHECK(std::abs(r.precision - e.precision) < 1e-12);
    CHECK(std::abs(r.recall - e.recall) < 1e-12);
    CHECK(std::abs(r.f1 - e.f1) < 1e-12);
    for (double v : {r.accuracy, r.precision, r.recall, r.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // Swapping the class roles leaves macro values unchanged.
    const auto s = metrics(Confusion{c.tn, c.fn, c.tp, c.fp});
    CHECK(std::abs(s.precision - r.precision) < 1e-15);
    CHECK(std::abs(s.recall - r.recall) < 1e-15);
    CHECK(std::abs(s.f1 - r.f1) < 1e-15);
    // Accuracy is the support-weighted (micro) recall.
    const double micro = (r.per_class[1].recall * static_cast<double>(c.tp + c.fn) +
                          r.per_class[0].recall * static_cast<double>(c.tn + c.fp)) /
                         static_cast<double>(c.total());
    CHECK(std::abs(micro - r.accuracy) < 1e-12);
  }
}

TEST_CASE("decisions and empty inputs") {
  CHECK(decide(0.3, 0.3) == 0);
  CHECK(decide(0.3, 0.30000000000000004) == 1);
  CHECK(decide(1.0, -1.0) == 0);
  CHECK_THROWS_AS(metrics(Confusion{}), DataError);
  CHECK_THROWS_AS(metrics(std::vector<std::uint8_t>{}, std::vector<std::uint8_t>{}), DataError);
  CHECK_THROWS_AS(metrics(std::vector<std::uint8_t>{1}, std::vector<std::uint8_t>{1, 0}), DataError);

  const auto p = init_params(ModelKind::sage, 2, HyperParams{});
  CHECK(detect(p, {}).empty());
}

TEST_CASE("detect follows the argmax of the scores") {
  auto p = init_params(ModelKind::sage, 2, HyperParams{});
  const auto b = make_batch(4, {0x10, 0x20}, Matrix{{0.1, 0.2}, {0.9, 0.4}}, {{{0x10, 0x20}, 0.01}}, {0, 1});
  const auto scores = forward(p, b);
  const std::vector<GraphBatch> batches{b};
  const auto out = detect(p, batches);
  REQUIRE(out.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out[i].window == 4);
    CHECK(out[i].can_id == b.node_ids[i]);
    CHECK(out[i].label == decide(scores(i, 0), scores(i, 1)));
  }
  const auto truth = truth_labels(batches);
  CHECK(truth[1] == NodeLabel{4, 0x20, 1});
}

TEST_CASE("keyed metrics need identical key sets") {
  const std::vector<NodeLabel> truth{{0, 0x10, 0}, {0, 0x20, 1}, {1, 0x10, 1}};
  std::vector<NodeLabel> pred{{1, 0x10, 1}, {0, 0x20, 0}, {0, 0x10, 0}};
  const auto r = metrics(pred, truth);
  CHECK(r.confusion == Confusion{1, 0, 1, 1});

  auto missing = pred;
  missing.pop_back();
  try {
    metrics(missing, truth);
    FAIL("expected a mismatch");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("10") != std::string::npos);
    CHECK(std::string(e.what()).find("window 0") != std::string::npos);
  }
  auto extra = pred;
  extra.push_back({7, 0xABC, 0});
  try {
    metrics(extra, truth);
    FAIL("expected a mismatch");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ABC") != std::string::npos);
  }
  auto dup = pred;
  dup.push_back(pred[0]);
  CHECK_THROWS_AS(metrics(dup, truth), DataError);
}

TEST_CASE("prediction csv round trip") {
  const std::vector<NodeLabel> pred{{0, 0x1FFFFFFF, 1}, {3, 0x10E2001, 0}};
  std::ostringstream out;
  write_predictions_csv(pred, out);
  CHECK(out.str() == "window,can_id_hex,predicted\n0,1FFFFFFF,1\n3,10E2001,0\n");
  std::istringstream in(out.str());
  CHECK(read_predictions_csv(in) == pred);
  std::istringstream bad("window,can_id_hex,predicted\n0,10,2\n");
  CHECK_THROWS_AS(read_predictions_csv(bad), MalformedLine);
}

TEST_CASE("report csv and table") {
  std::vector<DetectionReport> reports;
  for (int s = 1; s <= 10; ++s) {
    for (const char* m : {"gcn", "gat", "sage", "transformer"}) {
      auto r = metrics(Confusion{static_cast<std::size_t>(s), 2, 30, 1});
      r.scenario = s;
      r.model = m;
      reports.push_back(r);
    }
  }
  const auto csv = format_report_csv(reports);
  std::istringstream in(csv);
  const auto back = parse_report_csv(in);
  REQUIRE(back.size() == 40);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].scenario == static_cast<int>(i / 4 + 1));
    CHECK(back[i].model == reports[i].model);
    CHECK(back[i].confusion == reports[i].confusion);
    CHECK(std::abs(back[i].accuracy - reports[i].accuracy) <= 0.0005);
    CHECK(std::abs(back[i].f1 - reports[i].f1) <= 0.0005);
  }
  CHECK(csv.substr(0, csv.find('\n')) == kReportCsvHeader);
  CHECK(csv.find("\n1,gcn,0.912,") != std::string::npos);  // 31/34

  const auto table = format_report_table(reports);
  CHECK(table.find("Accuracy (%)") != std::string::npos);
  CHECK(table.find("91.2") != std::string::npos);
}
