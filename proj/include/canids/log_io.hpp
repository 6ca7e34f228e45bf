#pragma once
// Canonical labeled CAN log:
//
//   # key=value                       (header metadata, any number)
//   label,timestamp,interface,can_id_hex,dlc,payload_hex
//
// Timestamps carry six decimals; IDs are uppercase hex without prefix.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canids/frame_codec.hpp"

namespace canids {

/// Ordered key=value header. Keys may repeat; order is preserved on write.
class LogHeader {
 public:
  void set(std::string key, std::string value);
  void add(std::string key, std::string value);
  std::optional<std::string> get(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  bool operator==(const LogHeader&) const = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct CanLog {
  LogHeader header;
  std::vector<RawFrame> frames;

  bool operator==(const CanLog&) const = default;
};

/// Parses one data line. `line_no` is used in error messages only.
RawFrame parse_frame_line(std::string_view line, std::size_t line_no);
std::string format_frame_line(const RawFrame& frame);

/// Rounds a timestamp to the microsecond grid the text format can represent.
double quantize_timestamp(double seconds);

/// Incremental reader: holds one line at a time, so memory does not grow with
/// log length. Header lines are only accepted before the first frame.
class LogReader {
 public:
  explicit LogReader(const std::filesystem::path& path);
  explicit LogReader(std::istream& in);
  LogReader(const LogReader&) = delete;
  LogReader& operator=(const LogReader&) = delete;

  const LogHeader& header() const { return header_; }
  /// Next frame in file order, or nullopt at end of input.
  std::optional<RawFrame> next();
  std::size_t line_number() const { return line_no_; }

 private:
  void read_header();
  bool fetch_line();

  std::ifstream file_;
  std::istream* in_;
  LogHeader header_;
  std::string line_;
  bool pending_ = false;
  std::size_t line_no_ = 0;
  std::optional<double> last_ts_;
};

CanLog read_log(const std::filesystem::path& path);
CanLog read_log(std::istream& in);

void write_log(const CanLog& log, const std::filesystem::path& path);
void write_log(const CanLog& log, std::ostream& out);

}  // namespace canids
