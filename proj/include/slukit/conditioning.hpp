#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slukit/common.hpp"
#include "slukit/corpus.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Tokenizer contract
// ---------------------------------------------------------------------------

/// Minimal tokenizer surface the sequence builder needs. The four special ids
/// are distinct and never produced by encode().
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const int> ids) const = 0;
  virtual int pad_id() const = 0;
  virtual int bos_id() const = 0;
  virtual int sep_id() const = 0;
  virtual int eos_id() const = 0;
};

/// Reference tokenizer: one token per UTF-8 byte, offset past the specials.
/// Round-trips any byte string exactly.
class ByteTokenizer final : public Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kSep = 2;
  static constexpr int kEos = 3;
  static constexpr int kByteOffset = 4;

  std::vector<int> encode(std::string_view text) const override {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char b : text) ids.push_back(kByteOffset + b);
    return ids;
  }

  std::string decode(std::span<const int> ids) const override {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
      if (id < kByteOffset) continue;  // specials decode to nothing
      if (id >= kByteOffset + 256)
        throw ArgumentError("byte tokenizer: id out of range: " +
                            std::to_string(id));
      out.push_back(static_cast<char>(id - kByteOffset));
    }
    return out;
  }

  int pad_id() const override { return kPad; }
  int bos_id() const override { return kBos; }
  int sep_id() const override { return kSep; }
  int eos_id() const override { return kEos; }
};

// ---------------------------------------------------------------------------
// Decoder sequences
// ---------------------------------------------------------------------------

struct Span {
  size_t begin = 0;
  size_t end = 0;  // half-open

  friend bool operator==(const Span&, const Span&) = default;
};

/// Token layout [BOS] I [SEP] Y [EOS] with the loss mask zeroed on BOS, the
/// instruction, and SEP, so only target tokens (and EOS) are trained.
struct DecoderSequence {
  std::vector<int> tokens;
  std::vector<int> loss_mask;
  Span instruction_span;
  Span target_span;

  friend bool operator==(const DecoderSequence&, const DecoderSequence&) =
      default;
};

inline DecoderSequence build_decoder_sequence(std::string_view instruction,
                                              std::string_view target,
                                              const Tokenizer& tok) {
  if (target.empty())
    throw ArgumentError("build_decoder_sequence: empty target");
  if (instruction.empty())
    throw ArgumentError("build_decoder_sequence: empty instruction");

  const std::vector<int> instr_ids = tok.encode(instruction);
  const std::vector<int> target_ids = tok.encode(target);

  DecoderSequence seq;
  seq.tokens.reserve(instr_ids.size() + target_ids.size() + 3);
  seq.tokens.push_back(tok.bos_id());
  seq.instruction_span = {1, 1 + instr_ids.size()};
  seq.tokens.insert(seq.tokens.end(), instr_ids.begin(), instr_ids.end());
  seq.tokens.push_back(tok.sep_id());
  seq.target_span = {seq.tokens.size(), seq.tokens.size() + target_ids.size()};
  seq.tokens.insert(seq.tokens.end(), target_ids.begin(), target_ids.end());
  seq.tokens.push_back(tok.eos_id());

  seq.loss_mask.assign(seq.tokens.size(), 0);
  for (size_t i = seq.target_span.begin; i < seq.tokens.size(); ++i)
    seq.loss_mask[i] = 1;  // target tokens and EOS
  return seq;
}

// ---------------------------------------------------------------------------
// Collation
// ---------------------------------------------------------------------------

/// Teacher-forcing batch: labels are the tokens shifted left by one, the
/// mask is shifted the same way so it applies to label positions, and every
/// row is padded to the batch max length.
struct CollatedBatch {
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<int>> loss_mask;
  std::vector<std::vector<int>> attention;
  std::vector<size_t> lengths;
  std::vector<std::string> audio_paths;
};

inline CollatedBatch collate(const std::vector<DecoderSequence>& sequences,
                             const Tokenizer& tok,
                             std::vector<std::string> audio_paths = {}) {
  if (sequences.empty()) throw ArgumentError("collate: empty batch");
  if (!audio_paths.empty() && audio_paths.size() != sequences.size())
    throw ArgumentError("collate: audio path count does not match batch size");

  size_t width = 0;
  for (const DecoderSequence& s : sequences)
    width = std::max(width, s.tokens.size());

  const int pad = tok.pad_id();
  CollatedBatch batch;
  batch.audio_paths = std::move(audio_paths);
  for (const DecoderSequence& s : sequences) {
    const size_t len = s.tokens.size();
    batch.lengths.push_back(len);

    std::vector<int> tokens(width, pad);
    std::vector<int> labels(width, pad);
    std::vector<int> mask(width, 0);
    std::vector<int> attention(width, 0);
    for (size_t j = 0; j < len; ++j) {
      tokens[j] = s.tokens[j];
      attention[j] = 1;
    }
    for (size_t j = 0; j + 1 < len; ++j) {
      labels[j] = s.tokens[j + 1];
      mask[j] = s.loss_mask[j + 1];
    }
    batch.tokens.push_back(std::move(tokens));
    batch.labels.push_back(std::move(labels));
    batch.loss_mask.push_back(std::move(mask));
    batch.attention.push_back(std::move(attention));
  }
  return batch;
}

inline void to_json(json& j, const CollatedBatch& b) {
  j = json{{"tokens", b.tokens},
           {"labels", b.labels},
           {"loss_mask", b.loss_mask},
           {"attention", b.attention},
           {"audio_paths", b.audio_paths}};
}

// ---------------------------------------------------------------------------
// Batch export
// ---------------------------------------------------------------------------

inline constexpr int kDefaultBatchSize = 16;

/// Trainer-facing dry-run export: manifest order, fixed batch size, one
/// collated batch per JSONL line. A sidecar <out>.meta.json records the
/// trainer configuration the corpus was built for.
inline size_t export_batches(const std::vector<ManifestEntry>& entries,
                             const Tokenizer& tok, int batch_size,
                             const std::filesystem::path& out_path) {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + out_path.string());

  size_t batches = 0;
  std::vector<DecoderSequence> group;
  std::vector<std::string> paths;
  auto flush = [&] {
    if (group.empty()) return;
    json j = collate(group, tok, paths);
    out << j.dump() << '\n';
    group.clear();
    paths.clear();
    ++batches;
  };
  for (const ManifestEntry& e : entries) {
    group.push_back(build_decoder_sequence(e.instruction, e.target, tok));
    paths.push_back(e.audio_path);
    if (group.size() == static_cast<size_t>(batch_size)) flush();
  }
  flush();
  if (!out) throw IoError("write failed: " + out_path.string());
  out.close();

  json meta = {
      {"batch_size", batch_size},
      {"learning_rate_search", {1e-5, 3e-5, 1e-4}},
  };
  write_text_file(out_path.string() + ".meta.json", meta.dump(2) + "\n");
  return batches;
}

}  // namespace slukit
