#include "canids/detect_eval.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>

#include "canids/error.hpp"

namespace canids {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::string key_string(std::size_t window, std::uint32_t can_id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "window %zu id %X", window, can_id);
  return buf;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no, const char* what, int base = 10) {
  T v{};
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(s.data(), s.data() + s.size(), v);
  } else {
    r = std::from_chars(s.data(), s.data() + s.size(), v, base);
  }
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw MalformedLine(line_no, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::vector<NodeLabel> detect(const ModelParams& params, std::span<const GraphBatch> batches) {
  std::vector<NodeLabel> out;
  for (const auto& b : batches) {
    const Matrix scores = forward(params, b);
    for (std::size_t i = 0; i < b.num_nodes(); ++i) {
      out.push_back({b.window, b.node_ids[i], decide(scores(i, 0), scores(i, 1))});
    }
  }
  return out;
}

std::vector<NodeLabel> truth_labels(std::span<const GraphBatch> batches) {
  std::vector<NodeLabel> out;
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.num_nodes(); ++i) out.push_back({b.window, b.node_ids[i], b.labels[i]});
  }
  return out;
}

DetectionReport metrics(const Confusion& c) {
  if (c.total() == 0) throw DataError("no predictions to evaluate");
  DetectionReport r;
  r.confusion = c;
  r.evaluated = c.total();
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.per_class[1] = class_metrics(c.tp, c.fp, c.fn);
  r.per_class[0] = class_metrics(c.tn, c.fn, c.fp);
  r.precision = 0.5 * (r.per_class[0].precision + r.per_class[1].precision);
  r.recall = 0.5 * (r.per_class[0].recall + r.per_class[1].recall);
  r.f1 = 0.5 * (r.per_class[0].f1 + r.per_class[1].f1);
  return r;
}

DetectionReport metrics(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw DataError("prediction and truth lengths differ");
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return metrics(c);
}

DetectionReport metrics(std::span<const NodeLabel> predicted, std::span<const NodeLabel> truth) {
  using Key = std::pair<std::size_t, std::uint32_t>;
  std::map<Key, std::uint8_t> pred;
  for (const auto& p : predicted) {
    if (!pred.emplace(Key{p.window, p.can_id}, p.label).second) {
      throw DataError("duplicate prediction for " + key_string(p.window, p.can_id));
    }
  }
  std::map<Key, std::uint8_t> gold;
  for (const auto& t : truth) {
    if (!gold.emplace(Key{t.window, t.can_id}, t.label).second) {
      throw DataError("duplicate truth label for " + key_string(t.window, t.can_id));
    }
  }
  // Walk both ordered maps together so the first missing key is reported.
  std::vector<std::uint8_t> p_vec;
  std::vector<std::uint8_t> t_vec;
  auto pi = pred.begin();
  auto ti = gold.begin();
  while (pi != pred.end() || ti != gold.end()) {
    if (ti == gold.end() || (pi != pred.end() && pi->first < ti->first)) {
      throw DataError("truth has no label for " + key_string(pi->first.first, pi->first.second));
    }
    if (pi == pred.end() || ti->first < pi->first) {
      throw DataError("predictions are missing " + key_string(ti->first.first, ti->first.second));
    }
    p_vec.push_back(pi->second);
    t_vec.push_back(ti->second);
    ++pi;
    ++ti;
  }
  return metrics(p_vec, t_vec);
}

void write_predictions_csv(std::span<const NodeLabel> predictions, std::ostream& out) {
  out << "window,can_id_hex,predicted\n";
  char buf[64];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof buf, "%zu,%X,%u\n", p.window, p.can_id, static_cast<unsigned>(p.label));
    out << buf;
  }
  if (!out) throw IoError("failed writing predictions");
}

std::vector<NodeLabel> read_predictions_csv(std::istream& in) {
  std::vector<NodeLabel> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("window,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw MalformedLine(line_no, "expected 3 fields");
    NodeLabel p;
    p.window = parse_number<std::size_t>(f[0], line_no, "window");
    p.can_id = parse_number<std::uint32_t>(f[1], line_no, "CAN ID", 16);
    const auto label = parse_number<unsigned>(f[2], line_no, "label");
    if (label > 1) throw MalformedLine(line_no, "label must be 0 or 1");
    p.label = static_cast<std::uint8_t>(label);
    out.push_back(p);
  }
  return out;
}

std::string format_report_csv(std::span<const DetectionReport> reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.3f,%.3f,%.3f,%.3f,%zu,%zu,%zu,%zu\n", r.scenario, r.model.c_str(),
                  r.accuracy, r.precision, r.recall, r.f1, r.confusion.tp, r.confusion.fp, r.confusion.tn,
                  r.confusion.fn);
    out += buf;
  }
  return out;
}

std::vector<DetectionReport> parse_report_csv(std::istream& in) {
  std::vector<DetectionReport> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line == kReportCsvHeader) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw MalformedLine(line_no, "expected 10 fields");
    DetectionReport r;
    r.scenario = parse_number<int>(f[0], line_no, "scenario");
    r.model = std::string(f[1]);
    r.accuracy = parse_number<double>(f[2], line_no, "accuracy");
    r.precision = parse_number<double>(f[3], line_no, "precision");
    r.recall = parse_number<double>(f[4], line_no, "recall");
    r.f1 = parse_number<double>(f[5], line_no, "f1");
    r.confusion.tp = parse_number<std::size_t>(f[6], line_no, "tp");
    r.confusion.fp = parse_number<std::size_t>(f[7], line_no, "fp");
    r.confusion.tn = parse_number<std::size_t>(f[8], line_no, "tn");
    r.confusion.fn = parse_number<std::size_t>(f[9], line_no, "fn");
    r.evaluated = r.confusion.total();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_report_table(std::span<const DetectionReport> reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s  %-11s  %12s  %9s  %6s  %8s  %8s\n", "Scenario", "Model", "Accuracy (%)",
                "Precision", "Recall", "F1-Score", "Nodes");
  out += buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-8d  %-11s  %12.1f  %9.3f  %6.3f  %8.3f  %8zu\n", r.scenario, r.model.c_str(),
                  100.0 * r.accuracy, r.precision, r.recall, r.f1, r.evaluated);
    out += buf;
  }
  return out;
}

}  // namespace canids
