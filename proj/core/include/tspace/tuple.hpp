#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace tspace {

/// Type tags of tuple fields. The numeric values are the wire tags.
enum class ValueTag : std::uint8_t {
  Int64 = 1,
  Float64 = 2,
  Str = 3,
  Bytes = 4,
  IntArray = 5,
  FloatArray = 6,
};

std::string_view tag_name(ValueTag tag);
bool is_valid_tag(std::uint8_t raw);

/// Opaque octets. Wrapped so that it stays distinct from Str inside Value.
struct Bytes {
  std::vector<std::uint8_t> data;
  friend bool operator==(const Bytes&, const Bytes&) = default;
};

bool is_valid_utf8(std::string_view text);

/// One typed field of a tuple.
///
/// Equality requires equal tags and equal payloads. Doubles compare by bit
/// pattern, so NaN equals NaN only when the bits are identical and 0.0 differs
/// from -0.0.
class Value {
 public:
  using Storage = std::variant<std::int64_t, double, std::string, Bytes,
                               std::vector<std::int64_t>, std::vector<double>>;

  template <typename T>
    requires(std::is_integral_v<T> && !std::is_same_v<T, bool> &&
             !std::is_same_v<T, char>)
  Value(T v) : storage_(static_cast<std::int64_t>(v)) {}  // NOLINT
  Value(double v) : storage_(v) {}                        // NOLINT
  Value(const char* s) : Value(std::string(s)) {}         // NOLINT
  Value(std::string_view s) : Value(std::string(s)) {}    // NOLINT
  Value(std::string s);                                   // NOLINT
  Value(Bytes b) : storage_(std::move(b)) {}              // NOLINT
  Value(std::vector<std::int64_t> v) : storage_(std::move(v)) {}  // NOLINT
  Value(std::vector<double> v) : storage_(std::move(v)) {}        // NOLINT

  ValueTag tag() const { return static_cast<ValueTag>(storage_.index() + 1); }

  const Storage& storage() const { return storage_; }

  std::int64_t as_int() const { return std::get<std::int64_t>(storage_); }
  double as_float() const { return std::get<double>(storage_); }
  const std::string& as_str() const { return std::get<std::string>(storage_); }
  const Bytes& as_bytes() const { return std::get<Bytes>(storage_); }
  const std::vector<std::int64_t>& as_int_array() const {
    return std::get<std::vector<std::int64_t>>(storage_);
  }
  const std::vector<double>& as_float_array() const {
    return std::get<std::vector<double>>(storage_);
  }

  friend bool operator==(const Value& a, const Value& b);

 private:
  Storage storage_;
};

std::string to_string(const Value& v);

/// An ordered, immutable sequence of values with arity >= 1.
///
/// Copies share the underlying field storage.
class Tuple {
 public:
  Tuple(std::initializer_list<Value> fields);
  explicit Tuple(std::vector<Value> fields);

  std::size_t arity() const { return fields_->size(); }
  const Value& operator[](std::size_t i) const { return (*fields_)[i]; }
  std::span<const Value> fields() const { return *fields_; }

  friend bool operator==(const Tuple& a, const Tuple& b) {
    return a.fields_ == b.fields_ || *a.fields_ == *b.fields_;
  }

 private:
  std::shared_ptr<const std::vector<Value>> fields_;
};

std::string to_string(const Tuple& t);

/// Matches any value of any type.
struct Any {
  friend bool operator==(Any, Any) = default;
};

/// Matches any value carrying the given tag.
struct TypeOf {
  ValueTag tag;
  friend bool operator==(TypeOf, TypeOf) = default;
};

/// One position of a template: a literal value or a wildcard.
class PatternField {
 public:
  using Storage = std::variant<Value, TypeOf, Any>;

  template <typename T>
    requires std::is_constructible_v<Value, T>
  PatternField(T&& literal) : storage_(Value(std::forward<T>(literal))) {}  // NOLINT
  PatternField(TypeOf t);  // NOLINT
  PatternField(Any a) : storage_(a) {}  // NOLINT

  bool is_literal() const { return std::holds_alternative<Value>(storage_); }
  bool is_any() const { return std::holds_alternative<Any>(storage_); }
  bool is_typed() const { return std::holds_alternative<TypeOf>(storage_); }
  const Value& literal() const { return std::get<Value>(storage_); }
  ValueTag wildcard_tag() const { return std::get<TypeOf>(storage_).tag; }
  const Storage& storage() const { return storage_; }

  bool matches(const Value& v) const;

  friend bool operator==(const PatternField&, const PatternField&) = default;

 private:
  Storage storage_;
};

/// A tuple-shaped query. Arity >= 1, immutable.
class Template {
 public:
  Template(std::initializer_list<PatternField> fields);
  explicit Template(std::vector<PatternField> fields);

  std::size_t arity() const { return fields_.size(); }
  const PatternField& operator[](std::size_t i) const { return fields_[i]; }
  std::span<const PatternField> fields() const { return fields_; }

  friend bool operator==(const Template&, const Template&) = default;

 private:
  std::vector<PatternField> fields_;
};

std::string to_string(const Template& t);

/// True iff arities agree and every position matches.
bool match(const Template& tmpl, const Tuple& tuple);

/// The all-literal template that matches exactly `tuple`.
Template template_of(const Tuple& tuple);

}  // namespace tspace
