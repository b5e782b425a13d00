#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"
#include "vlad/errors.hpp"

namespace vlad {

using Json = nlohmann::ordered_json;

namespace detail {

inline void append_double(std::string& out, double v) {
  if (!std::isfinite(v)) throw ValidationError("cannot serialize non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void dump_compact(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        dump_compact(it.value(), out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ',';
        first = false;
        dump_compact(e, out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float:
      append_double(out, j.get<double>());
      break;
    default:
      out += j.dump(-1, ' ', false, Json::error_handler_t::strict);
  }
}

}  // namespace detail

/// Compact JSON with insertion-ordered keys and `%.17g` floats. Two dumps of
/// equal values are byte-identical, and every double round-trips exactly.
inline std::string dump_deterministic(const Json& j) {
  std::string out;
  detail::dump_compact(j, out);
  return out;
}

/// Cursor used while decoding: remembers the JSON path and source line so
/// schema errors can name the offending field.
class JsonReader {
 public:
  JsonReader(const Json& node, std::size_t line, std::string path)
      : node_(node), line_(line), path_(std::move(path)) {}

  const Json& node() const noexcept { return node_; }
  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

  [[noreturn]] void fail(const std::string& what) const { throw SchemaError(line_, path_, what); }

  JsonReader at(const std::string& key) const {
    if (!node_.is_object()) fail("expected object");
    auto it = node_.find(key);
    const std::string child = path_.empty() ? key : path_ + "." + key;
    if (it == node_.end()) throw SchemaError(line_, child, "missing");
    return JsonReader(*it, line_, child);
  }

  bool has(const std::string& key) const { return node_.is_object() && node_.contains(key); }

  JsonReader at(std::size_t i) const {
    if (!node_.is_array() || i >= node_.size()) fail("index out of range");
    return JsonReader(node_[i], line_, path_ + "[" + std::to_string(i) + "]");
  }

  std::size_t array_size() const {
    if (!node_.is_array()) fail("expected array");
    return node_.size();
  }

  double number() const {
    if (!node_.is_number()) fail("expected number");
    const double v = node_.get<double>();
    if (!std::isfinite(v)) fail("non-finite number");
    return v;
  }

  long long integer() const {
    if (!node_.is_number_integer()) fail("expected integer");
    return node_.get<long long>();
  }

  unsigned long long unsigned_integer() const {
    if (!node_.is_number_unsigned() && !(node_.is_number_integer() && node_.get<long long>() >= 0))
      fail("expected unsigned integer");
    return node_.get<unsigned long long>();
  }

  std::string string() const {
    if (!node_.is_string()) fail("expected string");
    return node_.get<std::string>();
  }

 private:
  const Json& node_;
  std::size_t line_;
  std::string path_;
};

}  // namespace vlad
