#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "slukit/conditioning.hpp"
#include "test_util.hpp"

using namespace slukit;

namespace {

ManifestEntry entry_for(const std::string& id, const std::string& instruction,
                        const std::string& target) {
  ManifestEntry e;
  e.id = id;
  e.audio_path = id + ".wav";
  e.instruction = instruction;
  e.target = target;
  e.duration_s = 1.0;
  e.voice = {Gender::female, "en-US", "en-US-JennyNeural"};
  e.source = Source::superni;
  e.split = Split::train;
  return e;
}

}  // namespace

TEST_CASE("byte tokenizer round-trips text") {
  ByteTokenizer tok;
  for (std::string s : {std::string("hello"), std::string(""),
                        std::string("caf\xC3\xA9"), std::string("a\nb\tc")}) {
    auto ids = tok.encode(s);
    CHECK(ids.size() == s.size());
    CHECK(tok.decode(ids) == s);
  }
  auto ids = tok.encode("A");
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == 4 + 'A');
}

TEST_CASE("byte tokenizer specials") {
  ByteTokenizer tok;
  CHECK(tok.pad_id() == 0);
  CHECK(tok.bos_id() == 1);
  CHECK(tok.sep_id() == 2);
  CHECK(tok.eos_id() == 3);
  std::vector<int> with_specials = {1, 4 + 'h', 4 + 'i', 2, 3, 0};
  CHECK(tok.decode(with_specials) == "hi");
  std::vector<int> bad = {260};
  CHECK_THROWS_AS(tok.decode(bad), ArgumentError);
}

TEST_CASE("decoder sequence layout") {
  ByteTokenizer tok;
  DecoderSequence seq =
      build_decoder_sequence("classify this", "positive", tok);

  const size_t instr_len = 13;
  const size_t target_len = 8;
  REQUIRE(seq.tokens.size() == 1 + instr_len + 1 + target_len + 1);
  CHECK(seq.tokens.front() == tok.bos_id());
  CHECK(seq.tokens[1 + instr_len] == tok.sep_id());
  CHECK(seq.tokens.back() == tok.eos_id());

  CHECK(seq.instruction_span.begin == 1);
  CHECK(seq.instruction_span.end == 1 + instr_len);
  CHECK(seq.target_span.begin == 1 + instr_len + 1);
  CHECK(seq.target_span.end == 1 + instr_len + 1 + target_len);

  REQUIRE(seq.loss_mask.size() == seq.tokens.size());
  size_t mask_sum = std::accumulate(seq.loss_mask.begin(),
                                    seq.loss_mask.end(), size_t(0));
  CHECK(mask_sum == target_len + 1);
  for (size_t i = 0; i < seq.target_span.begin; ++i)
    CHECK(seq.loss_mask[i] == 0);
  for (size_t i = seq.target_span.begin; i < seq.tokens.size(); ++i)
    CHECK(seq.loss_mask[i] == 1);

  std::vector<int> masked;
  for (size_t i = 0; i < seq.tokens.size(); ++i)
    if (seq.loss_mask[i]) masked.push_back(seq.tokens[i]);
  CHECK(tok.decode(masked) == "positive");
}

TEST_CASE("decoder sequence rejects empty parts") {
  ByteTokenizer tok;
  CHECK_THROWS_AS(build_decoder_sequence("", "y", tok), ArgumentError);
  CHECK_THROWS_AS(build_decoder_sequence("x", "", tok), ArgumentError);
}

TEST_CASE("masked positions decode to the target on random pairs") {
  ByteTokenizer tok;
  std::mt19937 rng(123);
  auto random_text = [&](size_t max_len) {
    std::uniform_int_distribution<size_t> len(1, max_len);
    std::uniform_int_distribution<int> ch(32, 126);
    std::string s;
    size_t n = len(rng);
    for (size_t i = 0; i < n; ++i)
      s.push_back(static_cast<char>(ch(rng)));
    return s;
  };
  for (int trial = 0; trial < 200; ++trial) {
    std::string instruction = random_text(40);
    std::string target = random_text(30);
    DecoderSequence seq = build_decoder_sequence(instruction, target, tok);
    size_t mask_sum = std::accumulate(seq.loss_mask.begin(),
                                      seq.loss_mask.end(), size_t(0));
    REQUIRE(mask_sum == tok.encode(target).size() + 1);
    std::vector<int> masked;
    for (size_t i = 0; i < seq.tokens.size(); ++i)
      if (seq.loss_mask[i]) masked.push_back(seq.tokens[i]);
    REQUIRE(tok.decode(masked) == target);
  }
}

TEST_CASE("collate pads and shifts labels for teacher forcing") {
  ByteTokenizer tok;
  DecoderSequence s1 = build_decoder_sequence("ab", "xyz", tok);   // 8 tokens
  DecoderSequence s2 = build_decoder_sequence("a", "x", tok);      // 5 tokens
  CollatedBatch batch = collate({s1, s2}, tok, {"a.wav", "b.wav"});

  REQUIRE(batch.tokens.size() == 2);
  const size_t width = s1.tokens.size();
  CHECK(batch.tokens[0].size() == width);
  CHECK(batch.tokens[1].size() == width);
  CHECK(batch.lengths == std::vector<size_t>{8, 5});
  CHECK(batch.audio_paths == std::vector<std::string>{"a.wav", "b.wav"});

  for (size_t j = 0; j + 1 < s1.tokens.size(); ++j) {
    CHECK(batch.labels[0][j] == s1.tokens[j + 1]);
    CHECK(batch.loss_mask[0][j] == s1.loss_mask[j + 1]);
  }
  // row 2: padding after its 5 real tokens
  for (size_t j = 5; j < width; ++j) {
    CHECK(batch.tokens[1][j] == tok.pad_id());
    CHECK(batch.attention[1][j] == 0);
    CHECK(batch.loss_mask[1][j] == 0);
  }
  for (size_t j = 0; j < 5; ++j) CHECK(batch.attention[1][j] == 1);
  // label rows end one early; the slot beyond the last real token is pad
  CHECK(batch.labels[1][4] == tok.pad_id());
  CHECK(batch.labels[1][3] == s2.tokens[4]);
}

TEST_CASE("collate argument checks") {
  ByteTokenizer tok;
  DecoderSequence s = build_decoder_sequence("a", "b", tok);
  CHECK_THROWS_AS(collate({}, tok), ArgumentError);
  CHECK_THROWS_AS(collate({s}, tok, {"a.wav", "extra.wav"}), ArgumentError);
  CHECK_NOTHROW(collate({s}, tok));
}

TEST_CASE("collated batch serializes the five arrays") {
  ByteTokenizer tok;
  DecoderSequence s = build_decoder_sequence("hi", "yo", tok);
  CollatedBatch batch = collate({s}, tok, {"x.wav"});
  json j = batch;
  CHECK(j.contains("tokens"));
  CHECK(j.contains("labels"));
  CHECK(j.contains("loss_mask"));
  CHECK(j.contains("attention"));
  CHECK(j.contains("audio_paths"));
  CHECK(j.at("tokens").at(0).size() == s.tokens.size());
}

TEST_CASE("export_batches writes jsonl plus meta sidecar") {
  auto dir = testutil::fresh_dir("cond");
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 10; ++i)
    entries.push_back(entry_for("e" + std::to_string(i),
                                "instruction " + std::to_string(i % 2),
                                "target " + std::to_string(i)));
  ByteTokenizer tok;
  auto out = dir / "batches.jsonl";
  size_t n = export_batches(entries, tok, 4, out);
  CHECK(n == 3);

  size_t lines = 0;
  std::vector<size_t> rows;
  for_each_jsonl_file(out, [&](size_t, const json& j) {
    ++lines;
    rows.push_back(j.at("tokens").size());
    CHECK(j.contains("labels"));
    CHECK(j.contains("loss_mask"));
    CHECK(j.contains("attention"));
    CHECK(j.contains("audio_paths"));
    CHECK(j.at("audio_paths").size() == j.at("tokens").size());
  });
  CHECK(lines == 3);
  CHECK(rows == std::vector<size_t>{4, 4, 2});

  json meta = parse_json(read_text_file(dir / "batches.jsonl.meta.json"));
  CHECK(meta.at("batch_size") == 4);
  REQUIRE(meta.at("learning_rate_search").size() == 3);
  CHECK(meta.at("learning_rate_search").at(0) == 1e-5);
  CHECK(meta.at("learning_rate_search").at(1) == 3e-5);
  CHECK(meta.at("learning_rate_search").at(2) == 1e-4);

  CHECK_THROWS_AS(export_batches(entries, tok, 0, out), ArgumentError);
  std::filesystem::remove_all(dir);
}
