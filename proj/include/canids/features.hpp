#pragma once
// Per-node structural features of a window graph: edge-weighted damped
// PageRank and occurrence density over the window plus a lookback of
// preceding frames.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "canids/graph_stream.hpp"

namespace canids {

enum class PageRankMode {
  // Each source hands its rank to its out-neighbours in proportion to the
  // inverse edge weight; with unit weights this is classic PageRank.
  inverse_weight_share,
  // Rank / out-degree divided directly by the raw edge weight. Not a
  // contraction for sub-second weights; kept for comparison.
  literal_division,
};

struct PageRankOptions {
  double damping = 0.85;
  double tolerance = 1e-9;  // L1 change between iterates
  std::size_t max_iter = 100;
  double weight_floor = 1e-9;  // seconds; zero gaps are raised to this
  PageRankMode mode = PageRankMode::inverse_weight_share;
};

struct PageRankResult {
  std::map<std::uint32_t, double> scores;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> residuals;  // L1 change per iteration
};

/// Power iteration from the uniform vector. Self-loops are ignored; nodes
/// without in-edges stay at (1 - d) / N. Throws DataError on an empty graph.
PageRankResult pagerank(const WindowGraph& graph, const PageRankOptions& options = {});

inline constexpr std::size_t kDefaultLookback = 150;

/// Occurrences of each window node among the window frames plus the last
/// `lookback` identifiers of `preceding`, divided by that population size.
std::map<std::uint32_t, double> density(const WindowGraph& window, std::span<const std::uint32_t> preceding,
                                        std::size_t lookback = kDefaultLookback);

struct FeatureRow {
  std::size_t window = 0;
  std::uint32_t can_id = 0;
  double pagerank = 0.0;
  double density = 0.0;
  std::uint8_t label = 0;

  bool operator==(const FeatureRow&) const = default;
};

struct FeatureTable {
  std::vector<FeatureRow> rows;
  std::size_t unconverged_windows = 0;
};

struct FeatureOptions {
  PageRankOptions pagerank;
  std::size_t lookback = kDefaultLookback;
};

/// Sequential feature pass. Windows must arrive in stream order; rows for a
/// window follow the window's node order.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureOptions options = {});

  std::vector<FeatureRow> process(const WindowGraph& window);
  std::size_t unconverged_windows() const { return unconverged_; }

 private:
  FeatureOptions options_;
  std::deque<std::uint32_t> history_;
  std::vector<std::uint32_t> scratch_;
  std::size_t unconverged_ = 0;
};

FeatureTable make_feature_table(const std::vector<WindowGraph>& windows, const FeatureOptions& options = {});

/// CSV `window,can_id_hex,pagerank,density,label`, 9 significant digits.
void write_feature_csv(const FeatureTable& table, std::ostream& out);
FeatureTable read_feature_csv(std::istream& in);

}  // namespace canids
