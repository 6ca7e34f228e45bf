#include "canids/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "canids/error.hpp"

namespace canids {

PageRankResult pagerank(const WindowGraph& graph, const PageRankOptions& options) {
  const std::size_t n = graph.nodes.size();
  if (n == 0) throw DataError("pagerank of an empty graph");
  const double d = options.damping;
  if (!(d > 0.0 && d < 1.0)) throw ConfigError("damping factor must be in (0, 1)");
  if (!(options.weight_floor > 0.0)) throw ConfigError("edge weight floor must be > 0");

  std::map<std::uint32_t, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[graph.nodes[i]] = i;

  // Per-source totals over non-self edges.
  std::vector<double> out_degree(n, 0.0);
  std::vector<double> inverse_weight_sum(n, 0.0);
  for (const auto& [key, stat] : graph.edges) {
    if (key.first == key.second) continue;
    const auto s = index.at(key.first);
    out_degree[s] += 1.0;
    inverse_weight_sum[s] += 1.0 / std::max(stat.weight, options.weight_floor);
  }

  struct Link {
    std::size_t src;
    std::size_t dst;
    double factor;  // fraction of PR(src) that flows to dst before damping
  };
  std::vector<Link> links;
  links.reserve(graph.edges.size());
  // Iterating the ordered edge map fixes the summation order by identifier, so
  // results do not depend on node insertion order.
  for (const auto& [key, stat] : graph.edges) {
    if (key.first == key.second) continue;
    const auto s = index.at(key.first);
    const double w = std::max(stat.weight, options.weight_floor);
    double factor = 0.0;
    switch (options.mode) {
      case PageRankMode::inverse_weight_share: factor = (1.0 / w) / inverse_weight_sum[s]; break;
      case PageRankMode::literal_division: factor = 1.0 / out_degree[s] / w; break;
    }
    links.push_back({s, index.at(key.second), factor});
  }

  const double floor = (1.0 - d) / static_cast<double>(n);
  std::vector<double> rank(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  PageRankResult result;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const auto& l : links) next[l.dst] += rank[l.src] * l.factor;
    double change = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = floor + d * next[i];
      finite = finite && std::isfinite(next[i]);
      change += std::abs(next[i] - rank[i]);
    }
    rank.swap(next);
    result.iterations = it + 1;
    result.residuals.push_back(change);
    if (!finite) break;
    if (change < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) result.scores[graph.nodes[i]] = rank[i];
  return result;
}

std::map<std::uint32_t, double> density(const WindowGraph& window, std::span<const std::uint32_t> preceding,
                                        std::size_t lookback) {
  const auto history = preceding.last(std::min(lookback, preceding.size()));
  const double population = static_cast<double>(history.size() + window.frames.size());
  std::map<std::uint32_t, double> out;
  if (population == 0.0) return out;
  for (auto id : window.nodes) {
    const auto in_window = window.message_counts.count(id) ? window.message_counts.at(id) : 0;
    const auto in_history = static_cast<std::size_t>(std::count(history.begin(), history.end(), id));
    out[id] = static_cast<double>(in_window + in_history) / population;
  }
  return out;
}

FeatureExtractor::FeatureExtractor(FeatureOptions options) : options_(options) {}

std::vector<FeatureRow> FeatureExtractor::process(const WindowGraph& window) {
  std::vector<FeatureRow> rows;
  if (window.nodes.empty()) return rows;

  const auto pr = pagerank(window, options_.pagerank);
  if (!pr.converged) ++unconverged_;
  scratch_.assign(history_.begin(), history_.end());
  const auto dens = density(window, scratch_, options_.lookback);
  const auto labels = node_labels(window);

  rows.reserve(window.nodes.size());
  for (auto id : window.nodes) {
    rows.push_back({window.window_index, id, pr.scores.at(id), dens.at(id), labels.at(id)});
  }

  for (const auto& f : window.frames) {
    history_.push_back(f.can_id);
    if (history_.size() > options_.lookback) history_.pop_front();
  }
  return rows;
}

FeatureTable make_feature_table(const std::vector<WindowGraph>& windows, const FeatureOptions& options) {
  FeatureExtractor extractor(options);
  FeatureTable table;
  for (const auto& w : windows) {
    auto rows = extractor.process(w);
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  table.unconverged_windows = extractor.unconverged_windows();
  return table;
}

void write_feature_csv(const FeatureTable& table, std::ostream& out) {
  out << "window,can_id_hex,pagerank,density,label\n";
  char buf[128];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%X,%.9g,%.9g,%u\n", r.window, r.can_id, r.pagerank, r.density,
                  static_cast<unsigned>(r.label));
    out << buf;
  }
}

namespace {

template <typename T>
T parse_field(std::string_view s, std::size_t line_no, const char* what, int base = 10) {
  T v{};
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    res = std::from_chars(s.data(), s.data() + s.size(), v);
  } else {
    res = std::from_chars(s.data(), s.data() + s.size(), v, base);
  }
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw MalformedLine(line_no, std::string("bad ") + what);
  }
  return v;
}

}  // namespace

FeatureTable read_feature_csv(std::istream& in) {
  FeatureTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("window,", 0) == 0) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    while (true) {
      const auto c = rest.find(',');
      cols.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest = rest.substr(c + 1);
    }
    if (cols.size() != 5) throw MalformedLine(line_no, "feature row needs 5 columns");
    FeatureRow r;
    r.window = parse_field<std::size_t>(cols[0], line_no, "window index");
    r.can_id = parse_field<std::uint32_t>(cols[1], line_no, "CAN ID", 16);
    r.pagerank = parse_field<double>(cols[2], line_no, "pagerank");
    r.density = parse_field<double>(cols[3], line_no, "density");
    const auto label = parse_field<unsigned>(cols[4], line_no, "label");
    if (label > 1) throw MalformedLine(line_no, "label must be 0 or 1");
    r.label = static_cast<std::uint8_t>(label);
    table.rows.push_back(r);
  }
  return table;
}

}  // namespace canids
