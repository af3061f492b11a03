#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tspace/tuple.hpp"

/*
  Wire layout, little-endian throughout.

  frame:  u32 length | u8 msg_type | u64 request_id | body
          length counts msg_type + request_id + body, at most kMaxFrameLength.

  tuple:    u32 arity, then per field u8 tag + payload
  template: u32 arity, then per field either a value (tag 1..6 + payload),
            0x10 (any, no payload) or 0x10+k (type wildcard for value tag k)

  payloads: Int64/Float64 8 bytes; Str/Bytes u32 byte length + bytes;
            IntArray/FloatArray u32 element count + packed 8-byte elements.
*/

namespace tspace::wire {

inline constexpr std::uint32_t kMaxFrameLength = 64u * 1024u * 1024u;
inline constexpr std::size_t kFrameHeaderSize = 4 + 1 + 8;
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint8_t kAnyTag = 0x10;

enum class MsgType : std::uint8_t {
  Out = 1,
  Rdp = 2,
  Inp = 3,
  Rd = 4,
  In = 5,
  ReplyTuple = 6,
  ReplyNone = 7,
  ReplyErr = 8,
  Hello = 9,
  Cancel = 10,
  Count = 11,
  CountReply = 12,
};

bool is_known_msg_type(std::uint8_t raw);

enum class ErrorCode : std::uint16_t {
  Malformed = 1,
  Unsupported = 2,
  Timeout = 3,
  ShuttingDown = 4,
};

struct Frame {
  MsgType type = MsgType::ReplyNone;
  std::uint64_t request_id = 0;
  std::vector<std::uint8_t> body;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Append-only little-endian encoder.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void bytes(std::span<const std::uint8_t> b);
  void str(std::string_view s);  // u32 length + bytes
  void value(const Value& v);
  void tuple(const Tuple& t);
  void pattern(const Template& t);

  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked decoder over a byte span. Every failure throws
/// MalformedError.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::string str();  // validated UTF-8
  std::vector<std::uint8_t> blob();
  Value value(std::uint8_t tag);
  Tuple tuple();
  Template pattern();

  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_tuple(const Tuple& t);
Tuple decode_tuple(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_template(const Template& t);
Template decode_template(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_frame(const Frame& f);
/// Decodes exactly one complete frame occupying all of `bytes`.
Frame decode_frame(std::span<const std::uint8_t> bytes);
/// Validates a frame length prefix; throws MalformedError when out of range.
void check_frame_length(std::uint32_t length);

// Message bodies.
std::vector<std::uint8_t> encode_blocking_body(std::uint64_t timeout_ms, const Template& t);
struct BlockingBody {
  std::uint64_t timeout_ms;
  Template tmpl;
};
BlockingBody decode_blocking_body(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_error_body(ErrorCode code, std::string_view message);
struct ErrorBody {
  std::uint16_t code;
  std::string message;
};
ErrorBody decode_error_body(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_hello_body(std::uint16_t version, std::string_view name);
struct HelloBody {
  std::uint16_t version;
  std::string name;
};
HelloBody decode_hello_body(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_count_body(std::uint64_t n);
std::uint64_t decode_count_body(std::span<const std::uint8_t> bytes);

}  // namespace tspace::wire
