#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace playtest {

// Error hierarchy. Every rejection raised by the library derives from Error so
// callers (server, CLI) can turn it into a message without knowing the module.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class TerminalStateError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Rejected match command (wrong phase, insufficient AP, ...).
class RuleViolation : public Error {
 public:
  using Error::Error;
};

// SplitMix64. Small serializable state, so world states and round seeds can be
// written out as a single integer and replayed bit-exactly on any platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state = 0) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 rng(a ^ (b * 0x9E3779B97F4A7C15ULL));
  return rng.next();
}

// FNV-1a, used for script and state hashes written into files.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines = split(text, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::int64_t parse_int(std::string_view s, const char* what) {
  std::string t = trim(s);
  if (t.empty()) throw IntegrityError(std::string("expected integer for ") + what);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw IntegrityError(std::string("bad integer for ") + what + ": '" + t + "'");
  }
  if (used != t.size()) throw IntegrityError(std::string("bad integer for ") + what + ": '" + t + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, const char* what) {
  std::string t = trim(s);
  if (t.empty() || t[0] == '-') throw IntegrityError(std::string("expected unsigned integer for ") + what);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(t, &used);
  } catch (const std::exception&) {
    throw IntegrityError(std::string("bad integer for ") + what + ": '" + t + "'");
  }
  if (used != t.size()) throw IntegrityError(std::string("bad integer for ") + what + ": '" + t + "'");
  return v;
}

template <typename Range>
std::string join(const Range& items, std::string_view sep) {
  std::string out;
  bool first = true;
  for (const auto& item : items) {
    if (!first) out += sep;
    first = false;
    if constexpr (std::is_convertible_v<decltype(item), std::string_view>) {
      out += item;
    } else {
      out += std::to_string(item);
    }
  }
  return out;
}

}  // namespace playtest
