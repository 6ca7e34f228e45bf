#include "canids/graph_stream.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "canids/error.hpp"

namespace canids {

WindowFrame to_window_frame(const DecodedMessage& msg) {
  return {msg.frame.timestamp, msg.frame.can_id, msg.tail.transfer_id, msg.frame.label};
}

std::optional<std::size_t> WindowGraph::node_position(std::uint32_t can_id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == can_id) return i;
  }
  return std::nullopt;
}

std::map<std::uint32_t, std::uint8_t> node_labels(const WindowGraph& window) {
  std::map<std::uint32_t, std::uint8_t> out;
  for (auto id : window.nodes) out[id] = 0;
  for (const auto& f : window.frames) {
    if (f.label != 0) out[f.can_id] = 1;
  }
  return out;
}

WindowGraph build_window_graph(std::size_t index, std::vector<WindowFrame> frames, bool partial) {
  WindowGraph g;
  g.window_index = index;
  g.partial = partial;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& cur = frames[i];
    if (g.message_counts[cur.can_id]++ == 0) g.nodes.push_back(cur.can_id);
    if (i == 0) continue;
    const auto& prev = frames[i - 1];
    if (cur.timestamp < prev.timestamp) {
      std::ostringstream os;
      os << "timestamp regression in window " << index << " at position " << i << " (" << prev.timestamp
         << " -> " << cur.timestamp << ")";
      throw TimestampRegression(os.str());
    }
    if (prev.can_id == cur.can_id && prev.transfer_id == cur.transfer_id) {
      ++g.suppressed_pairs;
      continue;
    }
    auto& e = g.edges[{prev.can_id, cur.can_id}];
    e.weight += cur.timestamp - prev.timestamp;
    ++e.count;
  }
  g.frames = std::move(frames);
  return g;
}

WindowBuilder::WindowBuilder(Sink sink, std::size_t window_size) : sink_(std::move(sink)), window_size_(window_size) {
  if (window_size_ < 2) throw ConfigError("window size must be >= 2");
  pending_.reserve(window_size_);
}

void WindowBuilder::push(const WindowFrame& frame) {
  if (last_ts_ && frame.timestamp < *last_ts_) {
    std::ostringstream os;
    os << "timestamp regression at stream position " << next_index_ * window_size_ + pending_.size() << " ("
       << *last_ts_ << " -> " << frame.timestamp << ")";
    throw TimestampRegression(os.str());
  }
  last_ts_ = frame.timestamp;
  pending_.push_back(frame);
  if (pending_.size() == window_size_) emit(false);
}

void WindowBuilder::finish() {
  if (!pending_.empty()) emit(true);
}

void WindowBuilder::emit(bool partial) {
  std::vector<WindowFrame> frames;
  frames.swap(pending_);
  pending_.reserve(window_size_);
  sink_(build_window_graph(next_index_++, std::move(frames), partial));
}

std::vector<WindowGraph> build_windows(const std::vector<WindowFrame>& frames, std::size_t window_size) {
  std::vector<WindowGraph> out;
  WindowBuilder builder([&out](WindowGraph&& g) { out.push_back(std::move(g)); }, window_size);
  for (const auto& f : frames) builder.push(f);
  builder.finish();
  return out;
}

std::string format_graph_line(const WindowGraph& window) {
  std::string out = std::to_string(window.window_index);
  char buf[64];
  for (const auto& [key, stat] : window.edges) {
    std::snprintf(buf, sizeof buf, "; %X>%X:%.9g", key.first, key.second, stat.weight);
    out += buf;
  }
  return out;
}

void write_graph_dump(const std::vector<WindowGraph>& windows, std::ostream& out) {
  for (const auto& w : windows) out << format_graph_line(w) << '\n';
}

namespace {

std::uint32_t parse_hex_id(std::string_view s, std::size_t line_no) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || v >= kCanIdLimit) {
    throw MalformedLine(line_no, "bad CAN ID in graph dump");
  }
  return v;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<GraphDumpRecord> read_graph_dump(std::istream& in) {
  std::vector<GraphDumpRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = strip(line);
    if (rest.empty() || rest.front() == '#') continue;
    GraphDumpRecord rec;
    bool first = true;
    while (true) {
      const auto semi = rest.find(';');
      const auto item = strip(rest.substr(0, semi));
      if (first) {
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), rec.window_index);
        if (ec != std::errc{} || ptr != item.data() + item.size()) throw MalformedLine(line_no, "bad window index");
        first = false;
      } else if (!item.empty()) {
        const auto gt = item.find('>');
        const auto colon = item.find(':');
        if (gt == std::string_view::npos || colon == std::string_view::npos || colon < gt) {
          throw MalformedLine(line_no, "edge must look like src>dst:weight");
        }
        const auto src = parse_hex_id(item.substr(0, gt), line_no);
        const auto dst = parse_hex_id(item.substr(gt + 1, colon - gt - 1), line_no);
        const auto ws = item.substr(colon + 1);
        double w = 0.0;
        auto [ptr, ec] = std::from_chars(ws.data(), ws.data() + ws.size(), w);
        if (ec != std::errc{} || ptr != ws.data() + ws.size() || w < 0.0) throw MalformedLine(line_no, "bad edge weight");
        rec.edges[{src, dst}] = w;
      }
      if (semi == std::string_view::npos) break;
      rest = rest.substr(semi + 1);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace canids
