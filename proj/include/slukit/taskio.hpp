#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slukit/common.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Escaped delimiter grammar
//
// Structured targets are rendered as delimiter-joined text so a generation
// model can emit them and the scorer can read them back exactly. Literal
// delimiter characters inside fields are escaped with a backslash; a
// backslash before anything else is ordinary content.
// ---------------------------------------------------------------------------

namespace grammar {

inline bool is_special(char c, std::string_view specials) {
  return specials.find(c) != std::string_view::npos;
}

inline std::string escape(std::string_view field, std::string_view specials) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    if (is_special(c, specials)) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

inline std::string unescape(std::string_view field, std::string_view specials) {
  std::string out;
  out.reserve(field.size());
  for (size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 1 < field.size() &&
        is_special(field[i + 1], specials)) {
      out.push_back(field[i + 1]);
      ++i;
    } else {
      out.push_back(field[i]);
    }
  }
  return out;
}

/// Splits on an unescaped delimiter character.
inline std::vector<std::string> split_unescaped(std::string_view text,
                                                char delimiter,
                                                std::string_view specials) {
  std::vector<std::string> parts;
  std::string current;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size() &&
        is_special(text[i + 1], specials)) {
      current.push_back(text[i]);
      current.push_back(text[i + 1]);
      ++i;
    } else if (text[i] == delimiter) {
      parts.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(text[i]);
    }
  }
  parts.push_back(std::move(current));
  return parts;
}

/// Splits "key<delim>value" at the first unescaped delimiter. Returns false
/// when the delimiter is absent.
inline bool split_pair(std::string_view text, char delimiter,
                       std::string_view specials, std::string& left,
                       std::string& right) {
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size() &&
        is_special(text[i + 1], specials)) {
      ++i;
    } else if (text[i] == delimiter) {
      left = std::string(text.substr(0, i));
      right = std::string(text.substr(i + 1));
      return true;
    }
  }
  return false;
}

inline constexpr std::string_view kNerSpecials = ";:";
inline constexpr std::string_view kSlotSpecials = ";:|=";

}  // namespace grammar

// ---------------------------------------------------------------------------
// NER
// ---------------------------------------------------------------------------

struct Entity {
  std::string tag;     // lowercase
  std::string phrase;  // trimmed

  friend bool operator==(const Entity&, const Entity&) = default;
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

/// Multiset of (tag, phrase) pairs; order carries no meaning.
struct NerPrediction {
  std::vector<Entity> entities;

  friend bool operator==(const NerPrediction&, const NerPrediction&) = default;
};

/// "tag: phrase" entries joined by " ; "; the empty set renders as "none".
inline std::string render_ner(const NerPrediction& pred) {
  if (pred.entities.empty()) return "none";
  std::string out;
  for (size_t i = 0; i < pred.entities.size(); ++i) {
    if (i > 0) out += " ; ";
    out += grammar::escape(pred.entities[i].tag, grammar::kNerSpecials);
    out += ": ";
    out += grammar::escape(pred.entities[i].phrase, grammar::kNerSpecials);
  }
  return out;
}

/// Inverts render_ner; lenient on whitespace. Fragments without a tag
/// separator are dropped and counted, never fatal.
inline NerPrediction parse_ner(std::string_view text,
                               int* dropped_fragments = nullptr) {
  NerPrediction pred;
  int dropped = 0;
  const std::string trimmed = trim(text);
  if (trimmed.empty() || to_lower_ascii(trimmed) == "none") {
    if (dropped_fragments) *dropped_fragments = 0;
    return pred;
  }
  for (const std::string& fragment :
       grammar::split_unescaped(trimmed, ';', grammar::kNerSpecials)) {
    std::string tag_part;
    std::string phrase_part;
    if (!grammar::split_pair(fragment, ':', grammar::kNerSpecials, tag_part,
                             phrase_part)) {
      if (!trim(fragment).empty()) ++dropped;
      continue;
    }
    Entity e;
    e.tag = to_lower_ascii(
        trim(grammar::unescape(trim(tag_part), grammar::kNerSpecials)));
    e.phrase = trim(grammar::unescape(trim(phrase_part), grammar::kNerSpecials));
    if (e.tag.empty()) {
      ++dropped;
      continue;
    }
    pred.entities.push_back(std::move(e));
  }
  if (dropped_fragments) *dropped_fragments = dropped;
  return pred;
}

// ---------------------------------------------------------------------------
// Sentiment
// ---------------------------------------------------------------------------

enum class SentimentLabel { negative, neutral, positive };

inline std::string to_string(SentimentLabel s) {
  switch (s) {
    case SentimentLabel::negative: return "negative";
    case SentimentLabel::neutral: return "neutral";
    case SentimentLabel::positive: return "positive";
  }
  throw ArgumentError("invalid SentimentLabel value");
}

inline std::optional<SentimentLabel> sentiment_from_string(std::string_view s) {
  if (s == "negative") return SentimentLabel::negative;
  if (s == "neutral") return SentimentLabel::neutral;
  if (s == "positive") return SentimentLabel::positive;
  return std::nullopt;
}

/// Accepts the bare label or free text containing exactly one label word.
/// Anything else is unparseable (scored as wrong by the caller).
inline std::optional<SentimentLabel> parse_sentiment(std::string_view text) {
  std::string cleaned;
  for (char c : to_lower_ascii(text)) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ')
      cleaned.push_back(c);
    else
      cleaned.push_back(' ');
  }
  std::vector<std::string> words;
  std::string word;
  for (char c : cleaned) {
    if (c == ' ') {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) words.push_back(std::move(word));

  if (words.size() == 1)
    if (auto label = sentiment_from_string(words[0])) return label;

  std::optional<SentimentLabel> found;
  for (const std::string& w : words) {
    if (auto label = sentiment_from_string(w)) {
      if (found && *found != *label) return std::nullopt;  // ambiguous
      found = label;
    }
  }
  return found;
}

// ---------------------------------------------------------------------------
// FSC dialogue action
// ---------------------------------------------------------------------------

struct DacPrediction {
  std::string action;
  std::string object;
  std::string location;

  friend bool operator==(const DacPrediction&, const DacPrediction&) = default;
};

inline std::string render_dac(const DacPrediction& p) {
  return "action: " + grammar::escape(p.action, grammar::kNerSpecials) +
         " ; object: " + grammar::escape(p.object, grammar::kNerSpecials) +
         " ; location: " + grammar::escape(p.location, grammar::kNerSpecials);
}

/// "action: X ; object: Y ; location: Z", order-insensitive; a missing field
/// stays empty and scores as wrong for that field.
inline DacPrediction parse_dac(std::string_view text) {
  DacPrediction out;
  for (const std::string& fragment :
       grammar::split_unescaped(trim(text), ';', grammar::kNerSpecials)) {
    std::string key;
    std::string value;
    if (!grammar::split_pair(fragment, ':', grammar::kNerSpecials, key, value))
      continue;
    const std::string k =
        to_lower_ascii(trim(grammar::unescape(trim(key), grammar::kNerSpecials)));
    const std::string v =
        trim(grammar::unescape(trim(value), grammar::kNerSpecials));
    if (k == "action") out.action = v;
    else if (k == "object") out.object = v;
    else if (k == "location") out.location = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SLURP intent + slots
// ---------------------------------------------------------------------------

struct SlotValue {
  std::string slot;
  std::string value;

  friend bool operator==(const SlotValue&, const SlotValue&) = default;
  friend auto operator<=>(const SlotValue&, const SlotValue&) = default;
};

/// Intent identity is the (scenario, action) pair; slots form a multiset.
struct IntentSlots {
  std::string scenario;
  std::string action;
  std::vector<SlotValue> slots;

  friend bool operator==(const IntentSlots&, const IntentSlots&) = default;
};

inline std::string render_intent_slots(const IntentSlots& p) {
  std::string out =
      "scenario: " + grammar::escape(p.scenario, grammar::kSlotSpecials) +
      " ; action: " + grammar::escape(p.action, grammar::kSlotSpecials);
  if (!p.slots.empty()) {
    out += " ; slots: ";
    for (size_t i = 0; i < p.slots.size(); ++i) {
      if (i > 0) out += " | ";
      out += grammar::escape(p.slots[i].slot, grammar::kSlotSpecials);
      out += "=";
      out += grammar::escape(p.slots[i].value, grammar::kSlotSpecials);
    }
  }
  return out;
}

/// "scenario: S ; action: A ; slots: s1=v1 | s2=v2". Malformed slot pairs
/// (no "=") are dropped and counted; an absent or empty slots section is an
/// empty multiset.
inline IntentSlots parse_intent_slots(std::string_view text,
                                      int* dropped_fragments = nullptr) {
  IntentSlots out;
  int dropped = 0;
  for (const std::string& fragment :
       grammar::split_unescaped(trim(text), ';', grammar::kSlotSpecials)) {
    std::string key;
    std::string value;
    if (!grammar::split_pair(fragment, ':', grammar::kSlotSpecials, key, value)) {
      if (!trim(fragment).empty()) ++dropped;
      continue;
    }
    const std::string k = to_lower_ascii(
        trim(grammar::unescape(trim(key), grammar::kSlotSpecials)));
    if (k == "scenario") {
      out.scenario = trim(grammar::unescape(trim(value), grammar::kSlotSpecials));
    } else if (k == "action") {
      out.action = trim(grammar::unescape(trim(value), grammar::kSlotSpecials));
    } else if (k == "slots") {
      const std::string body = trim(value);
      if (body.empty()) continue;
      for (const std::string& pair :
           grammar::split_unescaped(body, '|', grammar::kSlotSpecials)) {
        if (trim(pair).empty()) continue;
        std::string slot;
        std::string val;
        if (!grammar::split_pair(pair, '=', grammar::kSlotSpecials, slot, val)) {
          ++dropped;
          continue;
        }
        SlotValue sv;
        sv.slot = trim(grammar::unescape(trim(slot), grammar::kSlotSpecials));
        sv.value = trim(grammar::unescape(trim(val), grammar::kSlotSpecials));
        if (sv.slot.empty()) {
          ++dropped;
          continue;
        }
        out.slots.push_back(std::move(sv));
      }
    } else {
      ++dropped;
    }
  }
  if (dropped_fragments) *dropped_fragments = dropped;
  return out;
}

// ---------------------------------------------------------------------------
// QA answers
// ---------------------------------------------------------------------------

/// Match normalization: lowercase, ASCII punctuation removed, whitespace
/// collapsed, English articles stripped. Idempotent.
inline std::string normalize_answer(std::string_view text) {
  std::string lowered = to_lower_ascii(text);
  std::string no_punct;
  no_punct.reserve(lowered.size());
  for (char c : lowered) {
    const bool punct = (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
                       (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
    if (!punct) no_punct.push_back(c);
  }
  std::vector<std::string> words;
  std::string word;
  for (char c : no_punct) {
    if (is_ascii_space(c)) {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) words.push_back(std::move(word));

  std::string out;
  for (const std::string& w : words) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct QaAnswer {
  std::string text;
  std::string normalized;

  explicit QaAnswer(std::string t = "")
      : text(std::move(t)), normalized(normalize_answer(text)) {}

  friend bool operator==(const QaAnswer& a, const QaAnswer& b) {
    return a.normalized == b.normalized;
  }
};

}  // namespace slukit
