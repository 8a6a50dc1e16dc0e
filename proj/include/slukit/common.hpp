#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace slukit {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text (bad JSON, bad WAV header, ...). Carries position info
/// in the message when the underlying parser provides one.
struct ParseError : Error {
  using Error::Error;
};

/// Input parsed but does not match the expected schema (missing key, wrong
/// type, duplicate id, ...).
struct SchemaError : Error {
  using Error::Error;
};

struct ArgumentError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// Prediction and reference files disagree on the id set.
struct AlignmentError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Shared domain enums
// ---------------------------------------------------------------------------

enum class Source { superni, alpaca, downstream };

inline std::string to_string(Source s) {
  switch (s) {
    case Source::superni: return "superni";
    case Source::alpaca: return "alpaca";
    case Source::downstream: return "downstream";
  }
  throw ArgumentError("invalid Source value");
}

inline Source source_from_string(std::string_view s) {
  if (s == "superni") return Source::superni;
  if (s == "alpaca") return Source::alpaca;
  if (s == "downstream") return Source::downstream;
  throw SchemaError("unknown source: \"" + std::string(s) + "\"");
}

/// Reason an example was removed from the corpus. Closed set so audit files
/// stay machine-checkable.
enum class DropReason {
  irrelevant_task,
  url,
  code,
  special_chars,
  too_long,
  fill_in_blank,
  empty_output,
  empty_input,
  synthesis_failed,
};

inline std::string to_string(DropReason r) {
  switch (r) {
    case DropReason::irrelevant_task: return "irrelevant_task";
    case DropReason::url: return "url";
    case DropReason::code: return "code";
    case DropReason::special_chars: return "special_chars";
    case DropReason::too_long: return "too_long";
    case DropReason::fill_in_blank: return "fill_in_blank";
    case DropReason::empty_output: return "empty_output";
    case DropReason::empty_input: return "empty_input";
    case DropReason::synthesis_failed: return "synthesis_failed";
  }
  throw ArgumentError("invalid DropReason value");
}

inline DropReason drop_reason_from_string(std::string_view s) {
  if (s == "irrelevant_task") return DropReason::irrelevant_task;
  if (s == "url") return DropReason::url;
  if (s == "code") return DropReason::code;
  if (s == "special_chars") return DropReason::special_chars;
  if (s == "too_long") return DropReason::too_long;
  if (s == "fill_in_blank") return DropReason::fill_in_blank;
  if (s == "empty_output") return DropReason::empty_output;
  if (s == "empty_input") return DropReason::empty_input;
  if (s == "synthesis_failed") return DropReason::synthesis_failed;
  throw SchemaError("unknown drop reason: \"" + std::string(s) + "\"");
}

struct DropRecord {
  std::string example_id;
  DropReason reason = DropReason::empty_output;
  std::string detail;

  friend bool operator==(const DropRecord&, const DropRecord&) = default;
};

inline void to_json(json& j, const DropRecord& d) {
  j = json{{"example_id", d.example_id},
           {"reason", to_string(d.reason)},
           {"detail", d.detail}};
}

inline void from_json(const json& j, DropRecord& d) {
  d.example_id = j.at("example_id").get<std::string>();
  d.reason = drop_reason_from_string(j.at("reason").get<std::string>());
  d.detail = j.value("detail", std::string());
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a_byte(std::uint64_t h, unsigned char b) {
  h ^= b;
  h *= kFnvPrime;
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char b : s) h = fnv1a_byte(h, b);
  return h;
}

inline std::string fnv1a_hex(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a(s);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// UTF-8
// ---------------------------------------------------------------------------

/// Decodes one UTF-8 sequence starting at `i`. Invalid bytes decode to
/// U+FFFD and consume a single byte so decoding always terminates.
inline char32_t utf8_next(std::string_view s, size_t& i) {
  const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    unsigned char bk = byte(i + static_cast<size_t>(k));
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  // Overlong encodings and surrogate halves are invalid.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
      (len == 4 && cp < 0x10000) || (cp >= 0xD800 && cp <= 0xDFFF) ||
      cp > 0x10FFFF) {
    ++i;
    return 0xFFFD;
  }
  i += static_cast<size_t>(len);
  return cp;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) out.push_back(utf8_next(s, i));
  return out;
}

// ---------------------------------------------------------------------------
// Codepoint classes (approximate; covers the scripts seen in the corpora)
// ---------------------------------------------------------------------------

inline bool is_letter_cp(char32_t c) {
  if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z')) return true;
  if (c >= 0x00C0 && c <= 0x024F) return c != 0x00D7 && c != 0x00F7;  // Latin
  if (c >= 0x0386 && c <= 0x03FF) return true;                        // Greek
  if (c >= 0x0400 && c <= 0x04FF) return true;                        // Cyrillic
  if (c >= 0x3040 && c <= 0x30FF) return true;                        // Kana
  if (c >= 0x4E00 && c <= 0x9FFF) return true;                        // CJK
  if (c >= 0xAC00 && c <= 0xD7A3) return true;                        // Hangul
  return false;
}

inline bool is_digit_cp(char32_t c) { return c >= '0' && c <= '9'; }

inline bool is_space_cp(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v' || c == 0x00A0 || (c >= 0x2000 && c <= 0x200A) ||
         c == 0x202F || c == 0x3000;
}

// ---------------------------------------------------------------------------
// Text utilities
// ---------------------------------------------------------------------------

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

/// Composes an ASCII base letter with a combining diacritic into its
/// precomposed Latin codepoint. Returns 0 when no precomposed form is known.
inline char32_t compose_latin(char32_t base, char32_t mark) {
  struct Entry {
    char base;
    char32_t mark;
    char32_t composed;
  };
  // Common Latin-1 / Latin Extended-A diacritics; sufficient for the source
  // corpora, everything else passes through decomposed.
  static const Entry table[] = {
      {'A', 0x0300, 0x00C0}, {'A', 0x0301, 0x00C1}, {'A', 0x0302, 0x00C2},
      {'A', 0x0303, 0x00C3}, {'A', 0x0308, 0x00C4}, {'A', 0x030A, 0x00C5},
      {'C', 0x0327, 0x00C7}, {'E', 0x0300, 0x00C8}, {'E', 0x0301, 0x00C9},
      {'E', 0x0302, 0x00CA}, {'E', 0x0308, 0x00CB}, {'I', 0x0300, 0x00CC},
      {'I', 0x0301, 0x00CD}, {'I', 0x0302, 0x00CE}, {'I', 0x0308, 0x00CF},
      {'N', 0x0303, 0x00D1}, {'O', 0x0300, 0x00D2}, {'O', 0x0301, 0x00D3},
      {'O', 0x0302, 0x00D4}, {'O', 0x0303, 0x00D5}, {'O', 0x0308, 0x00D6},
      {'U', 0x0300, 0x00D9}, {'U', 0x0301, 0x00DA}, {'U', 0x0302, 0x00DB},
      {'U', 0x0308, 0x00DC}, {'Y', 0x0301, 0x00DD}, {'a', 0x0300, 0x00E0},
      {'a', 0x0301, 0x00E1}, {'a', 0x0302, 0x00E2}, {'a', 0x0303, 0x00E3},
      {'a', 0x0308, 0x00E4}, {'a', 0x030A, 0x00E5}, {'c', 0x0327, 0x00E7},
      {'e', 0x0300, 0x00E8}, {'e', 0x0301, 0x00E9}, {'e', 0x0302, 0x00EA},
      {'e', 0x0308, 0x00EB}, {'i', 0x0300, 0x00EC}, {'i', 0x0301, 0x00ED},
      {'i', 0x0302, 0x00EE}, {'i', 0x0308, 0x00EF}, {'n', 0x0303, 0x00F1},
      {'o', 0x0300, 0x00F2}, {'o', 0x0301, 0x00F3}, {'o', 0x0302, 0x00F4},
      {'o', 0x0303, 0x00F5}, {'o', 0x0308, 0x00F6}, {'u', 0x0300, 0x00F9},
      {'u', 0x0301, 0x00FA}, {'u', 0x0302, 0x00FB}, {'u', 0x0308, 0x00FC},
      {'y', 0x0301, 0x00FD}, {'y', 0x0308, 0x00FF}, {'S', 0x030C, 0x0160},
      {'s', 0x030C, 0x0161}, {'Z', 0x030C, 0x017D}, {'z', 0x030C, 0x017E},
      {'C', 0x030C, 0x010C}, {'c', 0x030C, 0x010D}, {'G', 0x0306, 0x011E},
      {'g', 0x0306, 0x011F}, {'S', 0x0327, 0x015E}, {'s', 0x0327, 0x015F},
  };
  if (base > 0x7F) return 0;
  for (const auto& e : table)
    if (e.base == static_cast<char>(base) && e.mark == mark) return e.composed;
  return 0;
}

/// Ingest-time canonical form: valid UTF-8 (bad bytes become U+FFFD),
/// newlines normalized to \n, control characters other than \n removed,
/// combining diacritics composed where a precomposed Latin form exists.
inline std::string canonicalize_text(std::string_view raw) {
  std::vector<char32_t> cps = utf8_decode(raw);
  std::vector<char32_t> out;
  out.reserve(cps.size());
  for (size_t i = 0; i < cps.size(); ++i) {
    char32_t c = cps[i];
    if (c == '\r') {
      if (i + 1 < cps.size() && cps[i + 1] == '\n') continue;  // CRLF -> LF
      c = '\n';
    }
    if (c != '\n' && (c < 0x20 || c == 0x7F || (c >= 0x80 && c <= 0x9F)))
      continue;
    if (!out.empty() && c >= 0x0300 && c <= 0x036F) {
      char32_t composed = compose_latin(out.back(), c);
      if (composed != 0) {
        out.back() = composed;
        continue;
      }
    }
    out.push_back(c);
  }
  std::string result;
  result.reserve(raw.size());
  for (char32_t c : out) utf8_append(result, c);
  return result;
}

// ---------------------------------------------------------------------------
// JSON / JSONL I/O
// ---------------------------------------------------------------------------

/// Parses a whole JSON document; rethrows nlohmann's error as ParseError
/// keeping the byte offset it reports.
inline json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << "malformed JSON at byte " << e.byte << ": " << e.what();
    throw ParseError(msg.str());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path,
                            std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Calls `fn(line_number, parsed_json)` for every non-empty line.
inline void for_each_jsonl(std::istream& in,
                           const std::function<void(size_t, const json&)>& fn) {
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      std::ostringstream msg;
      msg << "line " << line_no << ": malformed JSON at byte " << e.byte << ": "
          << e.what();
      throw ParseError(msg.str());
    }
    fn(line_no, j);
  }
}

inline void for_each_jsonl_file(
    const std::filesystem::path& path,
    const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  try {
    for_each_jsonl(in, fn);
  } catch (ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

template <typename T>
void write_jsonl_file(const std::filesystem::path& path,
                      const std::vector<T>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  for (const T& item : items) {
    json j = item;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace slukit
