#include "tspace/codec.hpp"

#include <bit>
#include <string>

#include "tspace/errors.hpp"

namespace tspace::wire {

bool is_known_msg_type(std::uint8_t raw) { return raw >= 1 && raw <= 12; }

void Writer::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v));
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

void Writer::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void Writer::value(const Value& v) {
  u8(static_cast<std::uint8_t>(v.tag()));
  switch (v.tag()) {
    case ValueTag::Int64: u64(static_cast<std::uint64_t>(v.as_int())); break;
    case ValueTag::Float64: u64(std::bit_cast<std::uint64_t>(v.as_float())); break;
    case ValueTag::Str: str(v.as_str()); break;
    case ValueTag::Bytes:
      u32(static_cast<std::uint32_t>(v.as_bytes().data.size()));
      bytes(v.as_bytes().data);
      break;
    case ValueTag::IntArray: {
      const auto& a = v.as_int_array();
      u32(static_cast<std::uint32_t>(a.size()));
      buf_.reserve(buf_.size() + a.size() * 8);
      for (auto x : a) u64(static_cast<std::uint64_t>(x));
      break;
    }
    case ValueTag::FloatArray: {
      const auto& a = v.as_float_array();
      u32(static_cast<std::uint32_t>(a.size()));
      buf_.reserve(buf_.size() + a.size() * 8);
      for (auto x : a) u64(std::bit_cast<std::uint64_t>(x));
      break;
    }
  }
}

void Writer::tuple(const Tuple& t) {
  u32(static_cast<std::uint32_t>(t.arity()));
  for (const auto& v : t.fields()) value(v);
}

void Writer::pattern(const Template& t) {
  u32(static_cast<std::uint32_t>(t.arity()));
  for (const auto& f : t.fields()) {
    if (f.is_literal()) {
      value(f.literal());
    } else if (f.is_typed()) {
      u8(static_cast<std::uint8_t>(kAnyTag + static_cast<std::uint8_t>(f.wildcard_tag())));
    } else {
      u8(kAnyTag);
    }
  }
}

void Reader::need(std::size_t n) const {
  if (n > remaining()) throw MalformedError("truncated input");
}

std::uint8_t Reader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t Reader::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

std::vector<std::uint8_t> Reader::blob() {
  const std::uint32_t len = u32();
  need(len);
  std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + len);
  pos_ += len;
  return out;
}

std::string Reader::str() {
  const std::uint32_t len = u32();
  need(len);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
  pos_ += len;
  if (!is_valid_utf8(s)) throw MalformedError("Str is not valid UTF-8");
  return s;
}

Value Reader::value(std::uint8_t tag) {
  switch (tag) {
    case 1: return Value(static_cast<std::int64_t>(u64()));
    case 2: return Value(std::bit_cast<double>(u64()));
    case 3: return Value(str());
    case 4: return Value(Bytes{blob()});
    case 5: {
      const std::uint32_t n = u32();
      need(static_cast<std::size_t>(n) * 8);
      std::vector<std::int64_t> a(n);
      for (auto& x : a) x = static_cast<std::int64_t>(u64());
      return Value(std::move(a));
    }
    case 6: {
      const std::uint32_t n = u32();
      need(static_cast<std::size_t>(n) * 8);
      std::vector<double> a(n);
      for (auto& x : a) x = std::bit_cast<double>(u64());
      return Value(std::move(a));
    }
    default:
      throw MalformedError("unknown value tag " + std::to_string(tag));
  }
}

namespace {

std::uint32_t read_arity(Reader& r) {
  const std::uint32_t arity = r.u32();
  if (arity == 0) throw MalformedError("zero arity");
  // each field needs at least its tag byte
  if (arity > r.remaining()) throw MalformedError("arity exceeds input");
  return arity;
}

}  // namespace

Tuple Reader::tuple() {
  const std::uint32_t arity = read_arity(*this);
  std::vector<Value> fields;
  fields.reserve(arity);
  for (std::uint32_t i = 0; i < arity; ++i) fields.push_back(value(u8()));
  return Tuple(std::move(fields));
}

Template Reader::pattern() {
  const std::uint32_t arity = read_arity(*this);
  std::vector<PatternField> fields;
  fields.reserve(arity);
  for (std::uint32_t i = 0; i < arity; ++i) {
    const std::uint8_t tag = u8();
    if (tag == kAnyTag) {
      fields.emplace_back(Any{});
    } else if (tag > kAnyTag && is_valid_tag(static_cast<std::uint8_t>(tag - kAnyTag))) {
      fields.emplace_back(TypeOf{static_cast<ValueTag>(tag - kAnyTag)});
    } else {
      fields.emplace_back(value(tag));
    }
  }
  return Template(std::move(fields));
}

void Reader::expect_end() const {
  if (remaining() != 0) throw MalformedError("trailing bytes");
}

std::vector<std::uint8_t> encode_tuple(const Tuple& t) {
  Writer w;
  w.tuple(t);
  return w.take();
}

Tuple decode_tuple(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Tuple t = r.tuple();
  r.expect_end();
  return t;
}

std::vector<std::uint8_t> encode_template(const Template& t) {
  Writer w;
  w.pattern(t);
  return w.take();
}

Template decode_template(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Template t = r.pattern();
  r.expect_end();
  return t;
}

void check_frame_length(std::uint32_t length) {
  if (length < kFrameHeaderSize - 4) throw MalformedError("frame length too small");
  if (length > kMaxFrameLength) throw MalformedError("frame length exceeds 64 MiB");
}

std::vector<std::uint8_t> encode_frame(const Frame& f) {
  const std::size_t length = 1 + 8 + f.body.size();
  if (length > kMaxFrameLength) throw std::length_error("frame exceeds 64 MiB");
  Writer w;
  w.buffer().reserve(4 + length);
  w.u32(static_cast<std::uint32_t>(length));
  w.u8(static_cast<std::uint8_t>(f.type));
  w.u64(f.request_id);
  w.bytes(f.body);
  return w.take();
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint32_t length = r.u32();
  check_frame_length(length);
  if (length != r.remaining()) throw MalformedError("frame length mismatch");
  const std::uint8_t type = r.u8();
  if (!is_known_msg_type(type)) throw MalformedError("unknown message type");
  Frame f;
  f.type = static_cast<MsgType>(type);
  f.request_id = r.u64();
  f.body.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
  return f;
}

std::vector<std::uint8_t> encode_blocking_body(std::uint64_t timeout_ms, const Template& t) {
  Writer w;
  w.u64(timeout_ms);
  w.pattern(t);
  return w.take();
}

BlockingBody decode_blocking_body(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint64_t ms = r.u64();
  Template t = r.pattern();
  r.expect_end();
  return BlockingBody{ms, std::move(t)};
}

std::vector<std::uint8_t> encode_error_body(ErrorCode code, std::string_view message) {
  Writer w;
  w.u16(static_cast<std::uint16_t>(code));
  w.str(message);
  return w.take();
}

ErrorBody decode_error_body(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  ErrorBody e{r.u16(), r.str()};
  r.expect_end();
  return e;
}

std::vector<std::uint8_t> encode_hello_body(std::uint16_t version, std::string_view name) {
  Writer w;
  w.u16(version);
  w.str(name);
  return w.take();
}

HelloBody decode_hello_body(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  HelloBody h{r.u16(), r.str()};
  r.expect_end();
  return h;
}

std::vector<std::uint8_t> encode_count_body(std::uint64_t n) {
  Writer w;
  w.u64(n);
  return w.take();
}

std::uint64_t decode_count_body(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint64_t n = r.u64();
  r.expect_end();
  return n;
}

}  // namespace tspace::wire
