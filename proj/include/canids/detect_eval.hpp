#pragma once
// Node-level detection and macro-averaged evaluation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "canids/gnn.hpp"

namespace canids {

/// One (window, node) decision or ground-truth label.
struct NodeLabel {
  std::size_t window = 0;
  std::uint32_t can_id = 0;
  std::uint8_t label = 0;

  bool operator==(const NodeLabel&) const = default;
};

/// Argmax of two class scores; ties go to benign.
constexpr std::uint8_t decide(double benign_score, double attack_score) {
  return attack_score > benign_score ? 1 : 0;
}

/// Predicted label for every node of every batch, in batch order.
std::vector<NodeLabel> detect(const ModelParams& params, std::span<const GraphBatch> batches);

/// Ground truth carried by the batches.
std::vector<NodeLabel> truth_labels(std::span<const GraphBatch> batches);

struct Confusion {
  std::size_t tp = 0;  // attack predicted as attack
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct DetectionReport {
  int scenario = 0;
  std::string model;
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;  // macro over both classes
  double recall = 0.0;
  double f1 = 0.0;
  std::array<ClassMetrics, 2> per_class{};  // [benign, attack]
  std::size_t evaluated = 0;
};

/// Metrics from confusion counts. Undefined ratios (0/0) count as 0 before
/// macro averaging. Throws DataError when the counts are all zero.
DetectionReport metrics(const Confusion& confusion);
DetectionReport metrics(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);
/// Matches predictions to truth by (window, can_id). Both key sets must be
/// identical; otherwise DataError names the first key missing from either side.
DetectionReport metrics(std::span<const NodeLabel> predicted, std::span<const NodeLabel> truth);

/// CSV `window,can_id_hex,predicted`.
void write_predictions_csv(std::span<const NodeLabel> predictions, std::ostream& out);
std::vector<NodeLabel> read_predictions_csv(std::istream& in);

inline constexpr const char* kReportCsvHeader = "scenario,model,accuracy,precision,recall,f1,tp,fp,tn,fn";

/// One CSV row per report, metrics at 3 decimals.
std::string format_report_csv(std::span<const DetectionReport> reports);
std::vector<DetectionReport> parse_report_csv(std::istream& in);
/// Aligned plain-text table, accuracy in percent.
std::string format_report_table(std::span<const DetectionReport> reports);

}  // namespace canids
