#pragma once
// Stream of directed weighted graphs, one per fixed-size message window.
//
// Inside a window every adjacent pair of messages (m_i, m_i+1) adds its
// timestamp gap to the edge id_i -> id_i+1. Equal identifiers only form a
// self-loop when the transfer ID changed; otherwise the pair is a multi-frame
// continuation and contributes nothing. Pairs straddling two windows are
// ignored.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "canids/frame_codec.hpp"

namespace canids {

inline constexpr std::size_t kDefaultWindowSize = 100;

/// The slice of a decoded message that graph construction uses.
struct WindowFrame {
  double timestamp = 0.0;
  std::uint32_t can_id = 0;
  std::uint8_t transfer_id = 0;
  std::uint8_t label = 0;

  bool operator==(const WindowFrame&) const = default;
};

WindowFrame to_window_frame(const DecodedMessage& msg);

struct EdgeStat {
  double weight = 0.0;      // accumulated timestamp differences, seconds
  std::size_t count = 0;    // contributing adjacent pairs

  bool operator==(const EdgeStat&) const = default;
};

using EdgeKey = std::pair<std::uint32_t, std::uint32_t>;  // (src, dst)

struct WindowGraph {
  std::size_t window_index = 0;
  bool partial = false;
  std::vector<std::uint32_t> nodes;  // first-appearance order
  std::map<EdgeKey, EdgeStat> edges;
  std::map<std::uint32_t, std::size_t> message_counts;
  std::vector<WindowFrame> frames;
  std::size_t suppressed_pairs = 0;  // continuation pairs that added no edge

  std::optional<std::size_t> node_position(std::uint32_t can_id) const;
};

/// Label 1 iff any frame of that identifier in the window is an attack frame.
std::map<std::uint32_t, std::uint8_t> node_labels(const WindowGraph& window);

/// Incremental builder. Feed frames in stream order; each completed window is
/// handed to the sink. `finish()` flushes a trailing partial window.
class WindowBuilder {
 public:
  using Sink = std::function<void(WindowGraph&&)>;

  explicit WindowBuilder(Sink sink, std::size_t window_size = kDefaultWindowSize);

  void push(const WindowFrame& frame);
  void finish();
  std::size_t windows_emitted() const { return next_index_; }

 private:
  void emit(bool partial);

  Sink sink_;
  std::size_t window_size_;
  std::size_t next_index_ = 0;
  std::vector<WindowFrame> pending_;
  std::optional<double> last_ts_;
};

/// Builds all windows of an in-memory frame sequence.
std::vector<WindowGraph> build_windows(const std::vector<WindowFrame>& frames,
                                       std::size_t window_size = kDefaultWindowSize);

/// Builds a single window graph from its frames (no size check).
WindowGraph build_window_graph(std::size_t index, std::vector<WindowFrame> frames, bool partial);

/// Debug dump: `window_index; src>dst:weight; ...` with hexadecimal IDs.
std::string format_graph_line(const WindowGraph& window);
void write_graph_dump(const std::vector<WindowGraph>& windows, std::ostream& out);

/// Parsed form of one dump line.
struct GraphDumpRecord {
  std::size_t window_index = 0;
  std::map<EdgeKey, double> edges;
};
std::vector<GraphDumpRecord> read_graph_dump(std::istream& in);

}  // namespace canids
