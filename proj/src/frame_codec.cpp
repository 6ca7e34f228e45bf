#include "canids/frame_codec.hpp"

#include <algorithm>
#include <sstream>

#include "canids/error.hpp"

namespace canids {

void RawFrame::set_payload(std::span<const std::uint8_t> bytes) {
  if (bytes.size() > kMaxDlc) {
    throw MalformedFrame("payload longer than 8 bytes");
  }
  data.fill(0);
  std::copy(bytes.begin(), bytes.end(), data.begin());
  dlc = static_cast<std::uint8_t>(bytes.size());
}

UavcanId decode_can_id(std::uint32_t can_id) {
  if (can_id >= kCanIdLimit) {
    std::ostringstream os;
    os << "CAN ID 0x" << std::hex << std::uppercase << can_id << " exceeds 29 bits";
    throw MalformedFrame(os.str());
  }
  UavcanId id;
  id.priority = static_cast<std::uint8_t>((can_id >> 24) & 0x1F);
  id.message_type_id = static_cast<std::uint16_t>((can_id >> 8) & 0xFFFF);
  id.service_flag = ((can_id >> 7) & 1u) != 0;
  id.source_node_id = static_cast<std::uint8_t>(can_id & 0x7F);
  return id;
}

std::uint32_t encode_can_id(const UavcanId& id) {
  return (static_cast<std::uint32_t>(id.priority & 0x1F) << 24) |
         (static_cast<std::uint32_t>(id.message_type_id) << 8) |
         (id.service_flag ? 0x80u : 0u) | (id.source_node_id & 0x7Fu);
}

TailByte decode_tail_byte(std::uint8_t b) {
  TailByte t;
  t.start_of_transfer = (b & 0x80) != 0;
  t.end_of_transfer = (b & 0x40) != 0;
  t.toggle = (b & 0x20) != 0;
  t.transfer_id = static_cast<std::uint8_t>(b & 0x1F);
  return t;
}

std::uint8_t encode_tail_byte(const TailByte& t) {
  return static_cast<std::uint8_t>((t.start_of_transfer ? 0x80 : 0) | (t.end_of_transfer ? 0x40 : 0) |
                                   (t.toggle ? 0x20 : 0) | (t.transfer_id & 0x1F));
}

CodecWarning TransferTracker::observe(std::uint32_t can_id, const TailByte& tail) {
  CodecWarning w = CodecWarning::none;
  if (tail.start_of_transfer) {
    // First frame of any transfer carries toggle = 0.
    if (tail.toggle) w = w | CodecWarning::toggle_violation;
    if (tail.end_of_transfer) {
      in_progress_.erase(can_id);
    } else {
      in_progress_[can_id] = State{tail.transfer_id, true};
    }
  } else {
    auto it = in_progress_.find(can_id);
    if (it == in_progress_.end() || it->second.transfer_id != tail.transfer_id) {
      w = w | CodecWarning::orphan_continuation;
      if (it != in_progress_.end()) in_progress_.erase(it);
    } else {
      if (tail.toggle != it->second.expected_toggle) w = w | CodecWarning::toggle_violation;
      if (tail.end_of_transfer) {
        in_progress_.erase(it);
      } else {
        it->second.expected_toggle = !tail.toggle;
      }
    }
  }
  if (w != CodecWarning::none) ++warning_count_;
  return w;
}

DecodedMessage decode_message(const RawFrame& frame, TransferTracker& tracker) {
  if (frame.dlc == 0) throw MalformedFrame("frame without tail byte (dlc = 0)");
  if (frame.dlc > kMaxDlc) throw MalformedFrame("dlc exceeds 8");

  DecodedMessage msg;
  msg.frame = frame;
  msg.id = decode_can_id(frame.can_id);
  const auto payload = frame.payload();
  msg.tail = decode_tail_byte(payload.back());
  msg.warnings = tracker.observe(frame.can_id, msg.tail);

  auto body = payload.first(payload.size() - 1);
  if (msg.tail.start_of_transfer && !msg.tail.end_of_transfer) {
    // Leading transfer CRC on the first frame of a multi-frame transfer.
    if (body.size() < 2) {
      msg.warnings = msg.warnings | CodecWarning::truncated_first_frame;
      body = body.subspan(body.size());
    } else {
      body = body.subspan(2);
    }
  }
  msg.app_payload.assign(body.begin(), body.end());
  return msg;
}

}  // namespace canids
