#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace topk_uncert::canonical {

// Fixed float formatting for golden-file-stable output: 17 significant digits,
// enough to round-trip any double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string escape_string(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
  return out;
}

// Minimal streaming JSON writer. Emits no whitespace; callers are responsible
// for writing object keys in sorted order, which is what makes the output
// canonical.
class Writer {
 public:
  void begin_object() { separator(); out_.push_back('{'); fresh_ = true; }
  void end_object() { out_.push_back('}'); fresh_ = false; }
  void begin_array() { separator(); out_.push_back('['); fresh_ = true; }
  void end_array() { out_.push_back(']'); fresh_ = false; }

  void key(std::string_view k) {
    separator();
    out_ += escape_string(k);
    out_.push_back(':');
    fresh_ = true;
  }

  void value(std::string_view v) { separator(); out_ += escape_string(v); }
  void value(const char* v) { value(std::string_view(v)); }
  void value(double v) { separator(); out_ += format_double(v); }
  void value(std::uint64_t v) { separator(); out_ += std::to_string(v); }
  void value(std::int64_t v) { separator(); out_ += std::to_string(v); }
  void value(int v) { separator(); out_ += std::to_string(v); }
  void value(bool v) { separator(); out_ += v ? "true" : "false"; }
  void null() { separator(); out_ += "null"; }

  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  void separator() {
    if (!fresh_ && !out_.empty()) {
      const char back = out_.back();
      if (back != '{' && back != '[' && back != ':') out_.push_back(',');
    }
    fresh_ = false;
  }

  std::string out_;
  bool fresh_ = true;
};

}  // namespace topk_uncert::canonical
