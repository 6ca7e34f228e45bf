#include "canids/log_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <system_error>

#include "canids/error.hpp"

namespace canids {
namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void LogHeader::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void LogHeader::add(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }

std::optional<std::string> LogHeader::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

double quantize_timestamp(double seconds) { return std::round(seconds * 1e6) / 1e6; }

RawFrame parse_frame_line(std::string_view line, std::size_t line_no) {
  const auto cols = split_commas(line);
  if (cols.size() != 6) {
    throw MalformedLine(line_no, "expected 6 columns, found " + std::to_string(cols.size()));
  }
  RawFrame f;

  if (cols[0] == "0") {
    f.label = 0;
  } else if (cols[0] == "1") {
    f.label = 1;
  } else {
    throw MalformedLine(line_no, "label must be 0 or 1");
  }

  {
    const auto s = cols[1];
    double ts = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), ts, std::chars_format::fixed);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(ts) || ts < 0.0) {
      throw MalformedLine(line_no, "bad timestamp '" + std::string(s) + "'");
    }
    f.timestamp = ts;
  }

  if (cols[2].empty()) throw MalformedLine(line_no, "empty interface");
  f.interface = std::string(cols[2]);

  {
    const auto s = cols[3];
    if (s.empty() || s.size() > 8) throw MalformedLine(line_no, "CAN ID must have 1-8 hex digits");
    std::uint32_t id = 0;
    for (char c : s) {
      const int d = hex_digit(c);
      if (d < 0) throw MalformedLine(line_no, "non-hex CAN ID '" + std::string(s) + "'");
      id = (id << 4) | static_cast<std::uint32_t>(d);
    }
    if (id >= kCanIdLimit) throw MalformedLine(line_no, "CAN ID exceeds 29 bits");
    f.can_id = id;
  }

  {
    const auto s = cols[4];
    unsigned dlc = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), dlc);
    if (ec != std::errc{} || ptr != s.data() + s.size() || dlc > kMaxDlc) {
      throw MalformedLine(line_no, "dlc must be an integer in 0..8");
    }
    f.dlc = static_cast<std::uint8_t>(dlc);
  }

  {
    const auto s = cols[5];
    if (s.size() != 2u * f.dlc) {
      throw MalformedLine(line_no, "payload has " + std::to_string(s.size() / 2) + " bytes but dlc is " +
                                       std::to_string(f.dlc));
    }
    for (std::size_t i = 0; i < f.dlc; ++i) {
      const int hi = hex_digit(s[2 * i]);
      const int lo = hex_digit(s[2 * i + 1]);
      if (hi < 0 || lo < 0) throw MalformedLine(line_no, "non-hex payload");
      f.data[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
  }
  return f;
}

std::string format_frame_line(const RawFrame& frame) {
  char head[64];
  std::snprintf(head, sizeof head, "%u,%.6f,", static_cast<unsigned>(frame.label), frame.timestamp);
  std::string out = head;
  out += frame.interface;
  std::snprintf(head, sizeof head, ",%X,%u,", frame.can_id, static_cast<unsigned>(frame.dlc));
  out += head;
  static constexpr char kHex[] = "0123456789ABCDEF";
  for (auto b : frame.payload()) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

LogReader::LogReader(const std::filesystem::path& path) : file_(path), in_(&file_) {
  if (!file_) throw IoError("cannot open log '" + path.string() + "'");
  read_header();
}

LogReader::LogReader(std::istream& in) : in_(&in) { read_header(); }

bool LogReader::fetch_line() {
  if (!std::getline(*in_, line_)) return false;
  ++line_no_;
  return true;
}

void LogReader::read_header() {
  while (fetch_line()) {
    const auto t = trim(line_);
    if (t.empty()) continue;
    if (t.front() != '#') {
      pending_ = true;
      return;
    }
    const auto body = trim(t.substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;  // plain comment
    header_.add(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
}

std::optional<RawFrame> LogReader::next() {
  while (true) {
    if (!pending_ && !fetch_line()) {
      if (in_->bad()) throw IoError("read failure at line " + std::to_string(line_no_));
      return std::nullopt;
    }
    pending_ = false;
    const auto t = trim(line_);
    if (t.empty()) continue;
    if (t.front() == '#') throw MalformedLine(line_no_, "header line after first frame");
    RawFrame f = parse_frame_line(t, line_no_);
    if (last_ts_ && f.timestamp < *last_ts_) {
      throw MalformedLine(line_no_, "timestamp regression");
    }
    last_ts_ = f.timestamp;
    return f;
  }
}

CanLog read_log(std::istream& in) {
  LogReader reader(in);
  CanLog log;
  log.header = reader.header();
  while (auto f = reader.next()) log.frames.push_back(std::move(*f));
  return log;
}

CanLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open log '" + path.string() + "'");
  return read_log(in);
}

void write_log(const CanLog& log, std::ostream& out) {
  for (const auto& [k, v] : log.header.entries()) out << "# " << k << '=' << v << '\n';
  for (const auto& f : log.frames) out << format_frame_line(f) << '\n';
}

void write_log(const CanLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write log '" + path.string() + "'");
  write_log(log, out);
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace canids
