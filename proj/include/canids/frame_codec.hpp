#pragma once
// UAVCAN v0 framing: 29-bit identifier fields and the per-frame tail byte.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace canids {

inline constexpr std::uint32_t kCanIdLimit = 1u << 29;
inline constexpr std::size_t kMaxDlc = 8;

/// One CAN 2.0B record as logged. Bytes of `data` past `dlc` are always zero.
struct RawFrame {
  std::uint8_t label = 0;  // 0 benign, 1 attack
  double timestamp = 0.0;  // seconds
  std::string interface = "can0";
  std::uint32_t can_id = 0;
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, kMaxDlc> data{};

  std::span<const std::uint8_t> payload() const { return {data.data(), dlc}; }

  /// Replaces the payload; throws MalformedFrame when longer than 8 bytes.
  void set_payload(std::span<const std::uint8_t> bytes);

  bool operator==(const RawFrame&) const = default;
};

struct UavcanId {
  std::uint8_t priority = 0;          // bits 28..24
  std::uint16_t message_type_id = 0;  // bits 23..8
  bool service_flag = false;          // bit 7
  std::uint8_t source_node_id = 0;    // bits 6..0

  bool operator==(const UavcanId&) const = default;
};

struct TailByte {
  bool start_of_transfer = false;  // bit 7
  bool end_of_transfer = false;    // bit 6
  bool toggle = false;             // bit 5
  std::uint8_t transfer_id = 0;    // bits 4..0

  bool single_frame() const { return start_of_transfer && end_of_transfer; }
  bool operator==(const TailByte&) const = default;
};

/// Slices a 29-bit identifier using the v0 message-frame layout. Service
/// frames are sliced the same way. Throws MalformedFrame for can_id >= 2^29.
UavcanId decode_can_id(std::uint32_t can_id);
std::uint32_t encode_can_id(const UavcanId& id);

TailByte decode_tail_byte(std::uint8_t b);
std::uint8_t encode_tail_byte(const TailByte& t);

enum class CodecWarning : std::uint8_t {
  none = 0,
  toggle_violation = 1,      // toggle bit out of sequence inside a transfer
  orphan_continuation = 2,   // non-first frame with no transfer in progress
  truncated_first_frame = 4, // first frame of a multi-frame transfer too short for its CRC
};

constexpr CodecWarning operator|(CodecWarning a, CodecWarning b) {
  return static_cast<CodecWarning>(static_cast<std::uint8_t>(a) | static_cast<std::uint8_t>(b));
}
constexpr bool has_warning(CodecWarning set, CodecWarning w) {
  return (static_cast<std::uint8_t>(set) & static_cast<std::uint8_t>(w)) != 0;
}

struct DecodedMessage {
  RawFrame frame;
  UavcanId id;
  TailByte tail;
  std::vector<std::uint8_t> app_payload;
  CodecWarning warnings = CodecWarning::none;
};

/// Per-identifier continuation state for one pass over a log. Toggle problems
/// are reported as warnings; the message is still produced.
class TransferTracker {
 public:
  CodecWarning observe(std::uint32_t can_id, const TailByte& tail);
  std::size_t warning_count() const { return warning_count_; }

 private:
  struct State {
    std::uint8_t transfer_id = 0;
    bool expected_toggle = false;
  };
  std::unordered_map<std::uint32_t, State> in_progress_;
  std::size_t warning_count_ = 0;
};

/// Splits a frame into tail byte and application payload. Throws
/// MalformedFrame when dlc == 0 or can_id is out of range.
DecodedMessage decode_message(const RawFrame& frame, TransferTracker& tracker);

}  // namespace canids
