#include "tspace/tuple.hpp"

#include <bit>
#include <sstream>
#include <stdexcept>

namespace tspace {

std::string_view tag_name(ValueTag tag) {
  switch (tag) {
    case ValueTag::Int64: return "Int64";
    case ValueTag::Float64: return "Float64";
    case ValueTag::Str: return "Str";
    case ValueTag::Bytes: return "Bytes";
    case ValueTag::IntArray: return "IntArray";
    case ValueTag::FloatArray: return "FloatArray";
  }
  return "?";
}

bool is_valid_tag(std::uint8_t raw) { return raw >= 1 && raw <= 6; }

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

Value::Value(std::string s) : storage_(std::move(s)) {
  if (!is_valid_utf8(std::get<std::string>(storage_))) {
    throw std::invalid_argument("Str value is not valid UTF-8");
  }
}

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

bool operator==(const Value& a, const Value& b) {
  if (a.storage_.index() != b.storage_.index()) return false;
  switch (a.tag()) {
    case ValueTag::Float64:
      return same_bits(a.as_float(), b.as_float());
    case ValueTag::FloatArray: {
      const auto& x = a.as_float_array();
      const auto& y = b.as_float_array();
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!same_bits(x[i], y[i])) return false;
      }
      return true;
    }
    default:
      return a.storage_ == b.storage_;
  }
}

std::string to_string(const Value& v) {
  std::ostringstream os;
  switch (v.tag()) {
    case ValueTag::Int64: os << v.as_int(); break;
    case ValueTag::Float64: os << v.as_float(); break;
    case ValueTag::Str: os << '"' << v.as_str() << '"'; break;
    case ValueTag::Bytes: os << "bytes[" << v.as_bytes().data.size() << "]"; break;
    case ValueTag::IntArray: os << "int[" << v.as_int_array().size() << "]"; break;
    case ValueTag::FloatArray:
      os << "float[" << v.as_float_array().size() << "]";
      break;
  }
  return os.str();
}

Tuple::Tuple(std::initializer_list<Value> fields)
    : Tuple(std::vector<Value>(fields)) {}

Tuple::Tuple(std::vector<Value> fields)
    : fields_(std::make_shared<const std::vector<Value>>(std::move(fields))) {
  if (fields_->empty()) throw std::invalid_argument("tuple arity must be >= 1");
}

std::string to_string(const Tuple& t) {
  std::string out = "<";
  for (std::size_t i = 0; i < t.arity(); ++i) {
    if (i) out += ", ";
    out += to_string(t[i]);
  }
  return out + ">";
}

PatternField::PatternField(TypeOf t) : storage_(t) {
  if (!is_valid_tag(static_cast<std::uint8_t>(t.tag))) {
    throw std::invalid_argument("type wildcard carries an unknown tag");
  }
}

bool PatternField::matches(const Value& v) const {
  switch (storage_.index()) {
    case 0: return std::get<Value>(storage_) == v;
    case 1: return std::get<TypeOf>(storage_).tag == v.tag();
    default: return true;
  }
}

Template::Template(std::initializer_list<PatternField> fields)
    : Template(std::vector<PatternField>(fields)) {}

Template::Template(std::vector<PatternField> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw std::invalid_argument("template arity must be >= 1");
}

std::string to_string(const Template& t) {
  std::string out = "<";
  for (std::size_t i = 0; i < t.arity(); ++i) {
    if (i) out += ", ";
    const auto& f = t[i];
    if (f.is_literal()) {
      out += to_string(f.literal());
    } else if (f.is_typed()) {
      out += "?";
      out += tag_name(f.wildcard_tag());
    } else {
      out += "-";
    }
  }
  return out + ">";
}

bool match(const Template& tmpl, const Tuple& tuple) {
  if (tmpl.arity() != tuple.arity()) return false;
  for (std::size_t i = 0; i < tmpl.arity(); ++i) {
    if (!tmpl[i].matches(tuple[i])) return false;
  }
  return true;
}

Template template_of(const Tuple& tuple) {
  std::vector<PatternField> fields;
  fields.reserve(tuple.arity());
  for (const auto& v : tuple.fields()) fields.emplace_back(v);
  return Template(std::move(fields));
}

}  // namespace tspace
