#include "canids/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <map>

#include "canids/rng.hpp"
#include "canids/traffic_synth.hpp"

namespace canids {

DecodedLog decode_log(const CanLog& log) {
  DecodedLog out;
  out.messages.reserve(log.frames.size());
  TransferTracker tracker;
  for (const auto& f : log.frames) {
    out.messages.push_back(decode_message(f, tracker));
    if (out.messages.back().warnings != CodecWarning::none) ++out.warnings;
  }
  return out;
}

void write_decoded_dump(const DecodedLog& decoded, std::ostream& out) {
  out << "timestamp,can_id_hex,priority,type_id,service,source,sot,eot,toggle,transfer_id,app_payload_hex,label,"
         "warnings\n";
  char buf[160];
  for (const auto& m : decoded.messages) {
    std::snprintf(buf, sizeof buf, "%.6f,%X,%u,%u,%d,%u,%d,%d,%d,%u,", m.frame.timestamp, m.frame.can_id,
                  static_cast<unsigned>(m.id.priority), static_cast<unsigned>(m.id.message_type_id),
                  m.id.service_flag ? 1 : 0, static_cast<unsigned>(m.id.source_node_id),
                  m.tail.start_of_transfer ? 1 : 0, m.tail.end_of_transfer ? 1 : 0, m.tail.toggle ? 1 : 0,
                  static_cast<unsigned>(m.tail.transfer_id));
    out << buf;
    for (auto b : m.app_payload) {
      std::snprintf(buf, sizeof buf, "%02X", static_cast<unsigned>(b));
      out << buf;
    }
    out << ',' << static_cast<unsigned>(m.frame.label) << ',' << static_cast<unsigned>(m.warnings) << '\n';
  }
  if (!out) throw IoError("failed writing decoded dump");
}

WindowData process_log(const CanLog& log, const PipelineOptions& options) {
  WindowData data;
  FeatureExtractor extractor(options.features);
  TransferTracker tracker;
  WindowBuilder builder(
      [&](WindowGraph&& g) {
        auto rows = extractor.process(g);
        data.batches.push_back(make_batch(g, rows));
        data.features.rows.insert(data.features.rows.end(), rows.begin(), rows.end());
        data.windows.push_back(std::move(g));
      },
      options.window_size);
  for (const auto& f : log.frames) {
    const auto msg = decode_message(f, tracker);
    if (msg.warnings != CodecWarning::none) ++data.codec_warnings;
    builder.push(to_window_frame(msg));
  }
  builder.finish();
  data.features.unconverged_windows = extractor.unconverged_windows();
  return data;
}

std::vector<GraphBatch> batches_from_tables(const FeatureTable& features, std::span<const GraphDumpRecord> graphs) {
  std::map<std::size_t, const GraphDumpRecord*> by_window;
  for (const auto& g : graphs) by_window[g.window_index] = &g;

  std::vector<GraphBatch> out;
  std::size_t i = 0;
  const auto& rows = features.rows;
  while (i < rows.size()) {
    const std::size_t window = rows[i].window;
    std::vector<std::uint32_t> ids;
    std::vector<std::uint8_t> labels;
    std::size_t j = i;
    for (; j < rows.size() && rows[j].window == window; ++j) {
      ids.push_back(rows[j].can_id);
      labels.push_back(rows[j].label);
    }
    Matrix x(j - i, kFeatureDim);
    for (std::size_t r = i; r < j; ++r) {
      x(r - i, 0) = rows[r].pagerank;
      x(r - i, 1) = rows[r].density;
    }
    const auto g = by_window.find(window);
    if (g == by_window.end()) throw DataError("graph dump has no window " + std::to_string(window));
    out.push_back(make_batch(window, std::move(ids), std::move(x), g->second->edges, std::move(labels)));
    i = j;
  }
  return out;
}

std::size_t train_count(std::size_t windows, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("train fraction must be in [0, 1]");
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(windows) + 1e-9));
}

std::string describe_split(std::size_t windows, std::size_t train) {
  auto range = [](std::size_t a, std::size_t b) {
    return a >= b ? std::string("none") : std::to_string(a) + "-" + std::to_string(b - 1);
  };
  return "train " + range(0, train) + " test " + range(train, windows);
}

BenchResult run_bench(const BenchConfig& config) {
  if (config.scenarios.empty() || config.models.empty()) throw ConfigError("bench needs scenarios and models");

  struct ScenarioData {
    int index;
    std::vector<GraphBatch> batches;
    std::size_t train;
  };
  std::vector<ScenarioData> scenarios;
  std::vector<GraphBatch> train_set;
  std::string split;
  for (int index : config.scenarios) {
    const auto spec = table_scenario(index, detail::derive_seed(config.seed, static_cast<std::uint64_t>(index)),
                                     config.horizon);
    auto data = process_log(build_scenario(spec), config.pipeline);
    const std::size_t train = train_count(data.batches.size(), config.train_fraction);
    if (train == 0 || train == data.batches.size()) {
      throw ConfigError("scenario " + std::to_string(index) + " has too few windows for a train/test split");
    }
    train_set.insert(train_set.end(), data.batches.begin(), data.batches.begin() + static_cast<long>(train));
    if (!split.empty()) split += "; ";
    split += "scenario " + std::to_string(index) + " " + describe_split(data.batches.size(), train);
    scenarios.push_back({index, std::move(data.batches), train});
  }

  BenchResult result;
  std::vector<ModelParams> trained;
  for (ModelKind kind : config.models) {
    HyperParams hp = config.hyper;
    hp.seed = config.seed;
    auto report = train(kind, train_set, hp);
    report.split = split;
    trained.push_back(report.params);
    result.training.push_back(std::move(report));
  }

  for (const auto& s : scenarios) {
    const std::span<const GraphBatch> test(s.batches.begin() + static_cast<long>(s.train), s.batches.end());
    const auto truth = truth_labels(test);
    for (std::size_t m = 0; m < config.models.size(); ++m) {
      auto r = metrics(detect(trained[m], test), truth);
      r.scenario = s.index;
      r.model = std::string(to_string(config.models[m]));
      result.reports.push_back(std::move(r));
    }
  }
  result.csv = format_report_csv(result.reports);
  result.table = format_report_table(result.reports);
  return result;
}

}  // namespace canids
