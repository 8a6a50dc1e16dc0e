#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slukit/audio.hpp"
#include "slukit/common.hpp"
#include "slukit/ingest.hpp"
#include "slukit/tts.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

enum class Split { train, dev, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  throw ArgumentError("invalid Split value");
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw SchemaError("unknown split: \"" + std::string(s) + "\"");
}

/// One instruction-speech training instance: synthesized audio (encoder
/// input), instruction text (decoder condition), target text (decoder
/// output). audio_path is relative to the manifest file so corpora relocate.
struct ManifestEntry {
  std::string id;
  std::string audio_path;
  std::string instruction;
  std::string target;
  double duration_s = 0;
  VoiceSpec voice;
  Source source = Source::superni;
  Split split = Split::train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline void to_json(json& j, const ManifestEntry& e) {
  j = json{{"id", e.id},
           {"audio_path", e.audio_path},
           {"instruction", e.instruction},
           {"target", e.target},
           {"duration_s", e.duration_s},
           {"voice", e.voice},
           {"source", to_string(e.source)},
           {"split", to_string(e.split)}};
}

inline void from_json(const json& j, ManifestEntry& e) {
  e.id = j.at("id").get<std::string>();
  e.audio_path = j.at("audio_path").get<std::string>();
  e.instruction = j.at("instruction").get<std::string>();
  e.target = j.at("target").get<std::string>();
  e.duration_s = j.at("duration_s").get<double>();
  e.voice = j.at("voice").get<VoiceSpec>();
  e.source = source_from_string(j.at("source").get<std::string>());
  e.split = split_from_string(j.at("split").get<std::string>());
}

inline void validate_manifest(const std::vector<ManifestEntry>& entries) {
  std::unordered_set<std::string_view> seen;
  for (const ManifestEntry& e : entries) {
    if (!seen.insert(e.id).second)
      throw SchemaError("duplicate manifest id: \"" + e.id + "\"");
    if (e.duration_s <= 0)
      throw SchemaError("manifest entry \"" + e.id +
                        "\": duration_s must be > 0");
  }
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<ManifestEntry>& entries) {
  validate_manifest(entries);
  write_jsonl_file(path, entries);
}

inline std::vector<ManifestEntry> read_manifest(
    const std::filesystem::path& path) {
  std::vector<ManifestEntry> out;
  for_each_jsonl_file(path, [&](size_t line_no, const json& j) {
    try {
      out.push_back(j.get<ManifestEntry>());
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ": line " + std::to_string(line_no) +
                        ": " + e.what());
    }
  });
  validate_manifest(out);
  return out;
}

/// Audio paths are stored relative to the manifest's directory.
inline std::filesystem::path resolve_audio_path(
    const std::filesystem::path& manifest_path, const ManifestEntry& entry) {
  return manifest_path.parent_path() / entry.audio_path;
}

// ---------------------------------------------------------------------------
// Instance construction
// ---------------------------------------------------------------------------

/// Derives a filesystem-safe WAV name from an example id. Ids that need
/// sanitizing get a hash suffix so distinct ids never collide on disk.
inline std::string wav_filename(std::string_view id) {
  std::string safe;
  safe.reserve(id.size());
  bool changed = false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
    safe.push_back(ok ? c : '_');
    if (!ok) changed = true;
  }
  if (safe.size() > 100) {
    safe.resize(100);
    changed = true;
  }
  if (changed) safe += "-" + fnv1a_hex(id);
  return safe + ".wav";
}

/// Synthesizes one example and writes its WAV under out_dir. The text spoken
/// is example.input unless `speak_override` substitutes it (the
/// speak-instruction-on-empty-input pipeline option).
inline ManifestEntry build_instance(
    const UnifiedExample& example, const VoiceSpec& voice,
    SynthesisBackend& backend, const std::filesystem::path& out_dir,
    std::optional<std::string> speak_override = std::nullopt,
    Split split = Split::train) {
  const std::string text = speak_override ? *speak_override : example.input;
  SynthesisResult result = backend.synthesize({text, voice});

  ManifestEntry entry;
  entry.id = example.id;
  entry.audio_path = wav_filename(example.id);
  entry.instruction = example.instruction;
  entry.target = example.output;
  entry.duration_s = result.clip.duration_s();
  entry.voice = voice;
  entry.source = example.source;
  entry.split = split;

  write_wav(result.clip, out_dir / entry.audio_path);
  return entry;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct CorpusStats {
  size_t total_instances = 0;
  std::map<std::string, size_t> per_source;
  std::map<std::string, size_t> per_locale;
  std::map<std::string, size_t> per_gender;
  double total_duration_s = 0;
  size_t distinct_instructions = 0;
  std::map<std::string, size_t> dropped_by_reason;
};

inline void to_json(json& j, const CorpusStats& s) {
  j = json{{"total_instances", s.total_instances},
           {"per_source", s.per_source},
           {"per_locale", s.per_locale},
           {"per_gender", s.per_gender},
           {"total_duration_s", s.total_duration_s},
           {"distinct_instructions", s.distinct_instructions},
           {"dropped_by_reason", s.dropped_by_reason}};
}

inline CorpusStats corpus_stats(const std::vector<ManifestEntry>& entries,
                                const std::vector<DropRecord>& drops = {}) {
  CorpusStats stats;
  stats.total_instances = entries.size();
  std::unordered_set<std::string_view> instructions;
  for (const ManifestEntry& e : entries) {
    stats.per_source[to_string(e.source)]++;
    stats.per_locale[e.voice.locale]++;
    stats.per_gender[to_string(e.voice.gender)]++;
    stats.total_duration_s += e.duration_s;
    instructions.insert(e.instruction);
  }
  stats.distinct_instructions = instructions.size();
  for (const DropRecord& d : drops) stats.dropped_by_reason[to_string(d.reason)]++;
  return stats;
}

// ---------------------------------------------------------------------------
// Subsampling
// ---------------------------------------------------------------------------

/// Uniform sample without replacement of max(1, round(fraction * n)) entries.
/// Seeded and deterministic; the survivors keep their original order.
/// Fraction 1.0 is the identity.
inline std::vector<ManifestEntry> subsample(
    const std::vector<ManifestEntry>& entries, double fraction,
    std::uint64_t seed) {
  if (entries.empty()) throw ArgumentError("subsample: empty manifest");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ArgumentError("subsample: fraction must be in (0, 1], got " +
                        std::to_string(fraction));
  if (fraction == 1.0) return entries;

  const size_t n = entries.size();
  const size_t k = std::max<size_t>(
      1, static_cast<size_t>(std::llround(fraction * static_cast<double>(n))));

  std::vector<size_t> indices(n);
  for (size_t i = 0; i < n; ++i) indices[i] = i;
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (size_t i = 0; i < k; ++i) {
    const size_t span = n - i;
    const auto bound = static_cast<std::uint32_t>(span);
    const std::uint32_t limit =
        std::numeric_limits<std::uint32_t>::max() -
        (std::numeric_limits<std::uint32_t>::max() % bound + 1) % bound;
    std::uint32_t r = rng();
    while (r > limit) r = rng();
    std::swap(indices[i], indices[i + r % bound]);
  }
  indices.resize(k);
  std::sort(indices.begin(), indices.end());

  std::vector<ManifestEntry> out;
  out.reserve(k);
  for (size_t i : indices) out.push_back(entries[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Instruction expansion
// ---------------------------------------------------------------------------

using ParaphraseMap = std::map<std::string, std::vector<std::string>>;

inline ParaphraseMap load_paraphrase_map(const std::filesystem::path& path) {
  json doc = parse_json(read_text_file(path));
  if (!doc.is_object())
    throw SchemaError("paraphrase file: top level must be a JSON object");
  ParaphraseMap map;
  for (auto it = doc.begin(); it != doc.end(); ++it)
    map[it.key()] = it.value().get<std::vector<std::string>>();
  return map;
}

/// Duplicates each entry once per paraphrase of its instruction. Audio is
/// reused (only the prompt text varies); ids get "#p<k>" suffixes. Entries
/// without paraphrases pass through unchanged.
inline std::vector<ManifestEntry> expand_instructions(
    const std::vector<ManifestEntry>& entries, const ParaphraseMap& map) {
  std::vector<ManifestEntry> out;
  out.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    out.push_back(e);
    auto it = map.find(e.instruction);
    if (it == map.end()) continue;
    size_t k = 1;
    for (const std::string& paraphrase : it->second) {
      ManifestEntry copy = e;
      copy.id = e.id + "#p" + std::to_string(k);
      copy.instruction = paraphrase;
      out.push_back(std::move(copy));
      ++k;
    }
  }
  return out;
}

}  // namespace slukit
