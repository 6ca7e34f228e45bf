#pragma once
// End-to-end glue: log -> decoded messages -> window graphs -> features ->
// model batches, the chronological train/test split, and the scenario sweep.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "canids/detect_eval.hpp"
#include "canids/features.hpp"
#include "canids/gnn.hpp"
#include "canids/graph_stream.hpp"
#include "canids/log_io.hpp"

namespace canids {

struct PipelineOptions {
  std::size_t window_size = kDefaultWindowSize;
  FeatureOptions features;
};

struct DecodedLog {
  std::vector<DecodedMessage> messages;
  std::size_t warnings = 0;  // frames with at least one codec warning
};

DecodedLog decode_log(const CanLog& log);

/// CSV `timestamp,can_id_hex,priority,type_id,service,source,sot,eot,toggle,transfer_id,app_payload_hex,label,warnings`.
void write_decoded_dump(const DecodedLog& decoded, std::ostream& out);

struct WindowData {
  std::vector<WindowGraph> windows;
  FeatureTable features;
  std::vector<GraphBatch> batches;  // one per window, same order
  std::size_t codec_warnings = 0;
};

WindowData process_log(const CanLog& log, const PipelineOptions& options = {});

/// Batches from a feature table and the matching graph dump.
std::vector<GraphBatch> batches_from_tables(const FeatureTable& features, std::span<const GraphDumpRecord> graphs);

inline constexpr double kDefaultTrainFraction = 0.7;

/// Number of leading windows in the training part: floor(fraction * n).
std::size_t train_count(std::size_t windows, double fraction = kDefaultTrainFraction);

/// Human-readable window ranges of a split, e.g. "train 0-69 test 70-99".
std::string describe_split(std::size_t windows, std::size_t train);

struct BenchConfig {
  std::vector<int> scenarios{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<ModelKind> models{kAllModels.begin(), kAllModels.end()};
  std::uint64_t seed = 7;
  double horizon = 60.0;
  double train_fraction = kDefaultTrainFraction;
  PipelineOptions pipeline;
  HyperParams hyper;
};

struct BenchResult {
  std::vector<DetectionReport> reports;  // scenario-major, models in config order
  std::vector<TrainReport> training;     // one per model
  std::string csv;
  std::string table;
};

/// Builds every scenario from the seed, trains one model per kind on the
/// union of the scenarios' training windows and evaluates each scenario's
/// held-out windows separately.
BenchResult run_bench(const BenchConfig& config);

}  // namespace canids
