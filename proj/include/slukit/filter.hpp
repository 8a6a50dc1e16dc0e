#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slukit/common.hpp"
#include "slukit/ingest.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// Concrete thresholds behind the two-level filter. The category names are
/// fixed; every number here is an overridable default.
struct FilterRuleSet {
  std::vector<std::string> banned_task_keywords = {
      "spam",
      "spelling error",
      "fill in the blank",
      "fill-in-the-blank",
      "misspell",
      "typo",
  };
  bool url_detection = true;
  bool code_fence_marker_check = true;
  double code_symbol_density_threshold = 0.05;
  double special_char_ratio_max = 0.10;
  size_t max_input_chars = 1000;
  size_t blank_run_min = 3;

  void validate() const {
    if (banned_task_keywords.empty())
      throw ConfigError("banned_task_keywords must not be empty");
    if (code_symbol_density_threshold < 0 || code_symbol_density_threshold > 1)
      throw ConfigError("code_symbol_density_threshold must be in [0,1]");
    if (special_char_ratio_max < 0 || special_char_ratio_max > 1)
      throw ConfigError("special_char_ratio_max must be in [0,1]");
    if (max_input_chars == 0)
      throw ConfigError("max_input_chars must be positive");
    if (blank_run_min == 0) throw ConfigError("blank_run_min must be positive");
  }
};

inline void to_json(json& j, const FilterRuleSet& r) {
  j = json{{"banned_task_keywords", r.banned_task_keywords},
           {"url_detection", r.url_detection},
           {"code_detection",
            {{"fence_marker_check", r.code_fence_marker_check},
             {"symbol_density_threshold", r.code_symbol_density_threshold}}},
           {"special_char_ratio_max", r.special_char_ratio_max},
           {"max_input_chars", r.max_input_chars},
           {"blank_run_min", r.blank_run_min}};
}

inline void from_json(const json& j, FilterRuleSet& r) {
  static const std::vector<std::string> known = {
      "banned_task_keywords", "url_detection",   "code_detection",
      "special_char_ratio_max", "max_input_chars", "blank_run_min"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("filter rules: unknown key \"" + it.key() + "\"");
  }
  if (j.contains("banned_task_keywords")) {
    r.banned_task_keywords =
        j.at("banned_task_keywords").get<std::vector<std::string>>();
    for (std::string& k : r.banned_task_keywords) k = to_lower_ascii(k);
  }
  if (j.contains("url_detection"))
    r.url_detection = j.at("url_detection").get<bool>();
  if (j.contains("code_detection")) {
    const json& c = j.at("code_detection");
    for (auto it = c.begin(); it != c.end(); ++it) {
      if (it.key() != "fence_marker_check" &&
          it.key() != "symbol_density_threshold")
        throw ConfigError("filter rules: unknown key \"code_detection." +
                          it.key() + "\"");
    }
    if (c.contains("fence_marker_check"))
      r.code_fence_marker_check = c.at("fence_marker_check").get<bool>();
    if (c.contains("symbol_density_threshold"))
      r.code_symbol_density_threshold =
          c.at("symbol_density_threshold").get<double>();
  }
  if (j.contains("special_char_ratio_max"))
    r.special_char_ratio_max = j.at("special_char_ratio_max").get<double>();
  if (j.contains("max_input_chars"))
    r.max_input_chars = j.at("max_input_chars").get<size_t>();
  if (j.contains("blank_run_min"))
    r.blank_run_min = j.at("blank_run_min").get<size_t>();
  r.validate();
}

inline FilterRuleSet load_filter_rules(const std::filesystem::path& path) {
  return parse_json(read_text_file(path)).get<FilterRuleSet>();
}

// ---------------------------------------------------------------------------
// Task-level filtering
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : to_lower_ascii(text)) {
    if ((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9')) {
      current.push_back(ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// The trailing keyword word may carry a plain inflection suffix, so
/// "spelling error" still matches "spelling errors".
inline bool inflected_match(std::string_view word, std::string_view keyword) {
  if (!word.starts_with(keyword)) return false;
  std::string_view rest = word.substr(keyword.size());
  return rest.empty() || rest == "s" || rest == "es" || rest == "ed" ||
         rest == "ing";
}

inline bool keyword_in_text(const std::vector<std::string>& tokens,
                            const std::vector<std::string>& kw_tokens) {
  if (kw_tokens.empty() || tokens.size() < kw_tokens.size()) return false;
  for (size_t i = 0; i + kw_tokens.size() <= tokens.size(); ++i) {
    bool match = true;
    for (size_t k = 0; k < kw_tokens.size(); ++k) {
      const bool last = (k + 1 == kw_tokens.size());
      if (last ? !inflected_match(tokens[i + k], kw_tokens[k])
               : tokens[i + k] != kw_tokens[k]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace detail

/// Word-boundary keyword scan over the task name and instruction. Returns the
/// matched keyword when the task should be dropped.
inline std::optional<std::string> classify_task(std::string_view task_name,
                                                std::string_view instruction,
                                                const FilterRuleSet& rules) {
  std::vector<std::string> name_tokens = detail::word_tokens(task_name);
  std::vector<std::string> instr_tokens = detail::word_tokens(instruction);
  for (const std::string& kw : rules.banned_task_keywords) {
    std::vector<std::string> kw_tokens = detail::word_tokens(kw);
    if (detail::keyword_in_text(name_tokens, kw_tokens) ||
        detail::keyword_in_text(instr_tokens, kw_tokens))
      return kw;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Example-level speakability
// ---------------------------------------------------------------------------

struct SpeakabilityResult {
  bool ok = true;
  DropReason reason = DropReason::url;
  std::string detail;
};

/// Checks one input text against the speakability rules in fixed order
/// (url, code, special_chars, fill_in_blank, too_long); the first failing
/// rule determines the reason.
inline SpeakabilityResult is_speakable(std::string_view input_text,
                                       const FilterRuleSet& rules) {
  const std::string lower = to_lower_ascii(input_text);

  if (rules.url_detection) {
    for (std::string_view marker : {"http://", "https://", "www."}) {
      size_t pos = lower.find(marker);
      if (pos != std::string::npos)
        return {false, DropReason::url,
                "contains \"" + std::string(marker) + "\""};
    }
  }

  const std::vector<char32_t> cps = utf8_decode(input_text);
  const double total = static_cast<double>(cps.size());

  if (rules.code_fence_marker_check && lower.find("```") != std::string::npos)
    return {false, DropReason::code, "contains a code fence marker"};
  if (total > 0) {
    size_t symbols = 0;
    for (char32_t c : cps) {
      if (c == '{' || c == '}' || c == '[' || c == ']' || c == '<' ||
          c == '>' || c == ';' || c == '=' || c == '|' || c == '\\')
        ++symbols;
    }
    double density = static_cast<double>(symbols) / total;
    if (density > rules.code_symbol_density_threshold) {
      std::ostringstream d;
      d << "code symbol density " << density << " > "
        << rules.code_symbol_density_threshold;
      return {false, DropReason::code, d.str()};
    }
  }

  if (total > 0) {
    size_t special = 0;
    for (char32_t c : cps) {
      bool allowed = is_letter_cp(c) || is_digit_cp(c) || is_space_cp(c) ||
                     c == '.' || c == ',' || c == '!' || c == '?' ||
                     c == '\'' || c == '"' || c == ':' || c == ';' ||
                     c == '-' || c == '(' || c == ')';
      if (!allowed) ++special;
    }
    double ratio = static_cast<double>(special) / total;
    if (ratio > rules.special_char_ratio_max) {
      std::ostringstream d;
      d << "special char ratio " << ratio << " > " << rules.special_char_ratio_max;
      return {false, DropReason::special_chars, d.str()};
    }
  }

  size_t run = 0;
  for (char32_t c : cps) {
    run = (c == '_') ? run + 1 : 0;
    if (run >= rules.blank_run_min)
      return {false, DropReason::fill_in_blank,
              "run of " + std::to_string(run) + "+ underscores"};
  }

  if (cps.size() > rules.max_input_chars)
    return {false, DropReason::too_long,
            std::to_string(cps.size()) + " chars > " +
                std::to_string(rules.max_input_chars)};

  return {};
}

// ---------------------------------------------------------------------------
// Corpus filtering
// ---------------------------------------------------------------------------

struct FilterOutcome {
  std::vector<UnifiedExample> kept;
  std::vector<DropRecord> dropped;
};

/// Partitions a corpus: task-level keyword rules first, then per-example
/// speakability of the input. Order of kept examples matches the input.
inline FilterOutcome filter_corpus(const std::vector<UnifiedExample>& examples,
                                   const FilterRuleSet& rules) {
  rules.validate();
  FilterOutcome out;
  for (const UnifiedExample& e : examples) {
    if (auto kw = classify_task(e.id, e.instruction, rules)) {
      out.dropped.push_back(
          {e.id, DropReason::irrelevant_task, "matched keyword \"" + *kw + "\""});
      continue;
    }
    SpeakabilityResult s = is_speakable(e.input, rules);
    if (!s.ok) {
      out.dropped.push_back({e.id, s.reason, s.detail});
      continue;
    }
    out.kept.push_back(e);
  }
  return out;
}

inline void write_drops_jsonl(const std::filesystem::path& path,
                              const std::vector<DropRecord>& drops) {
  write_jsonl_file(path, drops);
}

inline std::vector<DropRecord> read_drops_jsonl(
    const std::filesystem::path& path) {
  std::vector<DropRecord> out;
  for_each_jsonl_file(path, [&](size_t line_no, const json& j) {
    try {
      out.push_back(j.get<DropRecord>());
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ": line " + std::to_string(line_no) +
                        ": " + e.what());
    }
  });
  return out;
}

}  // namespace slukit
