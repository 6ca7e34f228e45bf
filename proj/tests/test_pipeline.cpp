#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "canids/error.hpp"
#include "canids/pipeline.hpp"
#include "canids/traffic_synth.hpp"

using namespace canids;

TEST_CASE("a scenario log becomes aligned windows, features and batches") {
  const auto log = build_scenario(table_scenario(2, 5, 12.0));
  const auto data = process_log(log);
  REQUIRE(!data.windows.empty());
  CHECK(data.windows.size() == (log.frames.size() + 99) / 100);
  REQUIRE(data.batches.size() == data.windows.size());
  std::size_t nodes = 0;
  std::size_t attack_nodes = 0;
  for (std::size_t w = 0; w < data.windows.size(); ++w) {
    CHECK(data.batches[w].window == w);
    CHECK(data.batches[w].node_ids == data.windows[w].nodes);
    nodes += data.batches[w].num_nodes();
    for (auto y : data.batches[w].labels) attack_nodes += y;
  }
  CHECK(nodes == data.features.rows.size());
  CHECK(attack_nodes > 0);
  CHECK(data.windows.back().partial == (log.frames.size() % 100 != 0));
}

TEST_CASE("rebuilding batches from the text tables") {
  const auto data = process_log(build_scenario(table_scenario(9, 4, 10.0)));
  std::ostringstream fcsv, gdump;
  write_feature_csv(data.features, fcsv);
  write_graph_dump(data.windows, gdump);
  std::istringstream fin(fcsv.str()), gin(gdump.str());
  const auto features = read_feature_csv(fin);
  const auto graphs = read_graph_dump(gin);
  const auto batches = batches_from_tables(features, graphs);
  REQUIRE(batches.size() == data.batches.size());
  for (std::size_t w = 0; w < batches.size(); ++w) {
    const auto& a = batches[w];
    const auto& b = data.batches[w];
    CHECK(a.node_ids == b.node_ids);
    CHECK(a.labels == b.labels);
    CHECK(a.adjacency == b.adjacency);
    CHECK(max_abs_diff(a.features, b.features) < 1e-8);
    CHECK(max_abs_diff(a.norm_adjacency, b.norm_adjacency) == 0.0);
  }

  std::vector<GraphDumpRecord> short_dump(graphs.begin(), graphs.end() - 1);
  CHECK_THROWS_AS(batches_from_tables(features, short_dump), DataError);
}

TEST_CASE("chronological split sizes") {
  CHECK(train_count(100) == 70);
  CHECK(train_count(10) == 7);
  CHECK(train_count(3) == 2);
  CHECK(train_count(1) == 0);
  CHECK(train_count(37, 0.5) == 18);
  CHECK(train_count(20, 1.0) == 20);
  CHECK_THROWS_AS(train_count(10, 1.5), ConfigError);
  CHECK(describe_split(100, 70) == "train 0-69 test 70-99");
  CHECK(describe_split(5, 0) == "train none test 0-4");
}

TEST_CASE("decoded dump columns") {
  const auto decoded = decode_log(build_scenario(table_scenario(1, 2, 3.0)));
  std::ostringstream out;
  write_decoded_dump(decoded, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "timestamp,can_id_hex,priority,type_id,service,source,sot,eot,toggle,transfer_id,app_payload_hex,label,warnings");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 12);
  }
  CHECK(rows == decoded.messages.size());
}

TEST_CASE("small bench sweep") {
  BenchConfig cfg;
  cfg.scenarios = {1, 4};
  cfg.models = {ModelKind::sage, ModelKind::gcn};
  cfg.horizon = 8.0;
  cfg.hyper.epochs = 5;
  const auto r = run_bench(cfg);
  REQUIRE(r.reports.size() == 4);
  CHECK(r.reports[0].scenario == 1);
  CHECK(r.reports[0].model == "sage");
  CHECK(r.reports[1].model == "gcn");
  CHECK(r.reports[2].scenario == 4);
  REQUIRE(r.training.size() == 2);
  CHECK(r.training[0].epoch_loss.size() == 5);
  CHECK(r.training[0].split.find("scenario 1 train 0-") != std::string::npos);
  CHECK(r.csv.rfind(kReportCsvHeader, 0) == 0);
  CHECK(std::count(r.csv.begin(), r.csv.end(), '\n') == 5);
  CHECK(run_bench(cfg).csv == r.csv);

  auto tiny = cfg;
  tiny.horizon = 0.05;
  CHECK_THROWS_AS(run_bench(tiny), ConfigError);
  auto none = cfg;
  none.models.clear();
  CHECK_THROWS_AS(run_bench(none), ConfigError);
}
