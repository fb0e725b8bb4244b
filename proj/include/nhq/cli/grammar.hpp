#pragma once

// Config grammar: three sections of `key = value` lines.
//
//   # comment
//   [model]
//   name = gainloss
//   g = 1
//   gamma = 0.5
//   [run]
//   command = spectrum
//   [output]
//   format = csv
//
// Values are numbers, bare words, quoted strings, or bracketed lists
// `[a, b, ...]`. A complex number is a two-element list [re, im].

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nhq/error.hpp"
#include "nhq/numkernel.hpp"

namespace nhq::cli {

struct Value {
  std::string text;                // scalar text, or canonical "[a, b]" for lists
  std::vector<std::string> items;  // list elements
  bool is_list = false;
  std::size_t line = 0;
};

using Section = std::map<std::string, Value>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string where(const std::string& key, std::size_t line) {
  return key + " (line " + std::to_string(line) + ")";
}

inline std::optional<double> to_number(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return x;
}

inline std::string unquote(const std::string& s, std::size_t line) {
  if (s.size() >= 2 && s.front() == '"') {
    if (s.back() != '"') throw ParseError("unterminated string on line " + std::to_string(line));
    return s.substr(1, s.size() - 2);
  }
  return s;
}

}  // namespace detail

// Raw sections in file order of appearance; duplicate keys are rejected.
inline std::map<std::string, Section> parse_sections(const std::string& text) {
  static const std::set<std::string> known{"model", "run", "output"};
  std::map<std::string, Section> out;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s;
    bool quoted = false;
    for (char c : raw) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      s += c;
    }
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("malformed section header on line " + std::to_string(line));
      section = detail::trim(s.substr(1, s.size() - 2));
      if (!known.count(section))
        throw ValidationError("unknown section '" + section + "' on line " + std::to_string(line));
      if (out.count(section))
        throw ParseError("section '" + section + "' repeated on line " + std::to_string(line));
      out[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value' on line " + std::to_string(line));
    if (section.empty()) throw ParseError("key outside any section on line " + std::to_string(line));
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t[]\"") != std::string::npos)
      throw ParseError("invalid key on line " + std::to_string(line));
    if (val.empty()) throw ParseError("missing value for " + detail::where(section + "." + key, line));
    Value v;
    v.line = line;
    if (val.front() == '[') {
      if (val.back() != ']') throw ParseError("unterminated list on line " + std::to_string(line));
      v.is_list = true;
      const std::string body = val.substr(1, val.size() - 2);
      std::string item;
      std::istringstream items(body);
      while (std::getline(items, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) throw ParseError("empty list element on line " + std::to_string(line));
        v.items.push_back(detail::unquote(item, line));
      }
      if (detail::trim(body).empty()) v.items.clear();
      v.text = "[";
      for (std::size_t k = 0; k < v.items.size(); ++k) v.text += (k ? ", " : "") + v.items[k];
      v.text += "]";
    } else {
      v.text = detail::unquote(val, line);
    }
    auto& sec = out[section];
    if (sec.count(key)) throw ParseError("duplicate key " + detail::where(section + "." + key, line));
    sec[key] = std::move(v);
  }
  return out;
}

// Typed, consumed access to one section. Every key must be read by
// someone, otherwise finish() reports it as unknown.
class SectionReader {
 public:
  SectionReader(std::string name, Section sec) : name_(std::move(name)), sec_(std::move(sec)) {}

  bool has(const std::string& key) const { return sec_.count(key) != 0; }
  const Section& raw() const { return sec_; }
  const std::string& name() const { return name_; }

  const Value* find(const std::string& key) {
    auto it = sec_.find(key);
    if (it == sec_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

  std::string where(const std::string& key) const {
    auto it = sec_.find(key);
    return it == sec_.end() ? path(key) : detail::where(path(key), it->second.line);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError(where(key) + ": " + what);
  }

  std::optional<std::string> string(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    if (v->is_list) fail(key, "expected a scalar");
    return v->text;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    return string(key).value_or(fallback);
  }

  std::string require_string(const std::string& key) {
    auto s = string(key);
    if (!s) throw ValidationError("missing required key " + path(key));
    return *s;
  }

  std::optional<double> real(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    if (v->is_list) fail(key, "expected a real number");
    auto x = detail::to_number(v->text);
    if (!x || !std::isfinite(*x)) fail(key, "expected a finite real number, got '" + v->text + "'");
    return x;
  }

  double real(const std::string& key, double fallback) { return real(key).value_or(fallback); }

  double require_real(const std::string& key) {
    auto x = real(key);
    if (!x) throw ValidationError("missing required key " + path(key));
    return *x;
  }

  std::optional<std::uint64_t> count(const std::string& key) {
    auto x = real(key);
    if (!x) return std::nullopt;
    if (*x < 0 || std::floor(*x) != *x || *x > 9.007199254740992e15)
      fail(key, "expected a non-negative integer");
    return static_cast<std::uint64_t>(*x);
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    return count(key).value_or(fallback);
  }

  std::uint64_t require_count(const std::string& key) {
    auto x = count(key);
    if (!x) throw ValidationError("missing required key " + path(key));
    return *x;
  }

  // A real number or a [re, im] list.
  std::optional<cplx> complex(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_list) {
      auto x = detail::to_number(v->text);
      if (!x || !std::isfinite(*x)) fail(key, "expected a number or [re, im]");
      return cplx(*x);
    }
    if (v->items.size() != 2) fail(key, "complex values are written [re, im]");
    auto re = detail::to_number(v->items[0]);
    auto im = detail::to_number(v->items[1]);
    if (!re || !im || !std::isfinite(*re) || !std::isfinite(*im)) fail(key, "non-numeric complex value");
    return cplx(*re, *im);
  }

  std::optional<std::vector<double>> reals(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    std::vector<std::string> items = v->is_list ? v->items : std::vector<std::string>{v->text};
    std::vector<double> out;
    for (const auto& s : items) {
      auto x = detail::to_number(s);
      if (!x || !std::isfinite(*x)) fail(key, "expected a list of real numbers");
      out.push_back(*x);
    }
    return out;
  }

  std::optional<std::vector<std::string>> words(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    return v->is_list ? v->items : std::vector<std::string>{v->text};
  }

  std::optional<bool> boolean(const std::string& key) {
    auto s = string(key);
    if (!s) return std::nullopt;
    if (*s == "true") return true;
    if (*s == "false") return false;
    fail(key, "expected true or false");
  }

  // Rejects keys nobody consumed.
  void finish() const {
    for (const auto& [key, v] : sec_)
      if (!used_.count(key)) throw ValidationError("unknown key " + detail::where(path(key), v.line));
  }

 private:
  std::string name_;
  Section sec_;
  std::set<std::string> used_;
};

}  // namespace nhq::cli
