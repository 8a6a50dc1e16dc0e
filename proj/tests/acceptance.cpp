// End-to-end gates for the corpus toolkit. Each check prints exactly one
// PASS/FAIL line; the binary exits nonzero if any gate fails.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <list>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include <httplib.h>

#include "slukit/audio.hpp"
#include "slukit/conditioning.hpp"
#include "slukit/corpus.hpp"
#include "slukit/filter.hpp"
#include "slukit/ingest.hpp"
#include "slukit/metrics.hpp"
#include "slukit/taskio.hpp"
#include "slukit/tts.hpp"

using namespace slukit;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const char* name, bool ok, const std::string& detail = "") {
  if (ok) {
    std::printf("PASS: %s\n", name);
  } else {
    ++g_failures;
    if (detail.empty())
      std::printf("FAIL: %s\n", name);
    else
      std::printf("FAIL: %s (%s)\n", name, detail.c_str());
  }
}

fs::path data_dir() { return fs::path(SLUKIT_TEST_DATA_DIR); }

fs::path fresh_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  fs::path dir;
  do {
    dir = fs::temp_directory_path() / (tag + "-" + std::to_string(rng()));
  } while (fs::exists(dir));
  fs::create_directories(dir);
  return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string random_print(std::mt19937& rng, size_t min_len, size_t max_len) {
  std::uniform_int_distribution<size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> ch(32, 126);
  std::string s;
  const size_t n = len(rng);
  for (size_t i = 0; i < n; ++i) s.push_back(static_cast<char>(ch(rng)));
  return s;
}

AudioClip sine_clip(size_t n, double freq = 440.0, double amp = 0.5) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    clip.samples[i] = static_cast<float>(
        amp * std::sin(2.0 * std::numbers::pi * freq * i / 16000.0));
  return clip;
}

double clip_rms(const AudioClip& c) { return rms(c); }

// --------------------------------------------------------------------------
// 1. Filtering the mixed fixture
// --------------------------------------------------------------------------

void check_filter_fixture() {
  const char* name = "mixed 20-example fixture filters to 14 kept / 6 dropped";
  try {
    auto examples = read_unified_jsonl(data_dir() / "mixed_20.jsonl");
    const auto t0 = std::chrono::steady_clock::now();
    FilterOutcome outcome = filter_corpus(examples, FilterRuleSet{});
    const double elapsed = seconds_since(t0);

    std::map<DropReason, size_t> reasons;
    for (const DropRecord& d : outcome.dropped) ++reasons[d.reason];
    const bool ok = outcome.kept.size() == 14 && outcome.dropped.size() == 6 &&
                    reasons[DropReason::url] == 3 &&
                    reasons[DropReason::code] == 2 &&
                    reasons[DropReason::fill_in_blank] == 1 && elapsed < 1.0;
    report(name, ok,
           "kept=" + std::to_string(outcome.kept.size()) +
               " dropped=" + std::to_string(outcome.dropped.size()) +
               " elapsed=" + std::to_string(elapsed) + "s");
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 2. Loss-mask law over random pairs
// --------------------------------------------------------------------------

void check_loss_mask() {
  const char* name =
      "loss mask covers exactly the target plus end token on 1000 random pairs";
  try {
    ByteTokenizer tok;
    std::mt19937 rng(4242);
    size_t failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::string instruction = random_print(rng, 1, 60);
      const std::string target = random_print(rng, 1, 40);
      DecoderSequence seq = build_decoder_sequence(instruction, target, tok);
      size_t mask_sum = 0;
      std::vector<int> masked;
      for (size_t i = 0; i < seq.tokens.size(); ++i) {
        if (seq.loss_mask[i]) {
          ++mask_sum;
          masked.push_back(seq.tokens[i]);
        }
      }
      if (mask_sum != tok.encode(target).size() + 1) ++failures;
      else if (tok.decode(masked) != target) ++failures;
    }
    report(name, failures == 0, std::to_string(failures) + " failures");
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 3. Speed perturbation law
// --------------------------------------------------------------------------

void check_speed_perturbation() {
  const char* name =
      "speed perturbation length is round(n/factor), energy stable, 1.0 exact";
  try {
    std::mt19937 rng(7);
    std::uniform_int_distribution<size_t> len(1600, 48000);
    size_t failures = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const size_t n = len(rng);
      AudioClip clip = sine_clip(n);
      const double base_rms = clip_rms(clip);
      for (double factor : {0.95, 1.0, 1.05}) {
        AudioClip out = speed_perturb(clip, factor);
        const auto expect = static_cast<size_t>(
            std::llround(static_cast<double>(n) / factor));
        if (out.samples.size() != expect) {
          ++failures;
          continue;
        }
        if (factor == 1.0) {
          if (out.samples != clip.samples) ++failures;
        } else if (std::abs(clip_rms(out) - base_rms) / base_rms > 0.05) {
          ++failures;
        }
      }
    }
    report(name, failures == 0, std::to_string(failures) + " failures");
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 4. Concat-truncate cap
// --------------------------------------------------------------------------

void check_concat_truncate() {
  const char* name =
      "two 20 s clips concatenate to exactly 480000 samples in under 100 ms";
  try {
    AudioClip a = sine_clip(320000, 200.0);
    AudioClip b = sine_clip(320000, 300.0);
    const auto t0 = std::chrono::steady_clock::now();
    AudioClip joined = concat_truncate({a, b}, 30.0);
    const double elapsed = seconds_since(t0);
    const bool ok = joined.samples.size() == 480000 && elapsed < 0.1;
    report(name, ok,
           "samples=" + std::to_string(joined.samples.size()) +
               " elapsed=" + std::to_string(elapsed) + "s");
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 5. BLEU against a brute-force counter
// --------------------------------------------------------------------------

namespace oracle {

using Gram = std::vector<std::string>;

std::map<Gram, long long> ngrams(const std::vector<std::string>& toks,
                                 size_t n) {
  std::map<Gram, long long> m;
  for (size_t i = 0; i + n <= toks.size(); ++i)
    ++m[Gram(toks.begin() + i, toks.begin() + i + n)];
  return m;
}

double bleu(const std::vector<std::string>& hyps,
            const std::vector<std::vector<std::string>>& refs) {
  std::array<long long, 4> num{};
  std::array<long long, 4> den{};
  long long c = 0, r = 0;
  for (size_t s = 0; s < hyps.size(); ++s) {
    const auto h = bleu_tokenize(hyps[s]);
    c += static_cast<long long>(h.size());
    long long best = -1;
    for (const std::string& ref : refs[s]) {
      const auto rl = static_cast<long long>(bleu_tokenize(ref).size());
      const auto hl = static_cast<long long>(h.size());
      if (best < 0 || std::llabs(rl - hl) < std::llabs(best - hl) ||
          (std::llabs(rl - hl) == std::llabs(best - hl) && rl < best))
        best = rl;
    }
    r += best;
    for (size_t n = 1; n <= 4; ++n) {
      std::map<Gram, long long> clip;
      for (const std::string& ref : refs[s])
        for (const auto& [g, cnt] : ngrams(bleu_tokenize(ref), n))
          clip[g] = std::max(clip[g], cnt);
      for (const auto& [g, cnt] : ngrams(h, n)) {
        den[n - 1] += cnt;
        auto it = clip.find(g);
        if (it != clip.end()) num[n - 1] += std::min(cnt, it->second);
      }
    }
  }
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double p;
    if (den[n] == 0)
      p = 1.0;
    else if (num[n] == 0)
      p = 1.0 / (2.0 * static_cast<double>(den[n]));
    else
      p = static_cast<double>(num[n]) / static_cast<double>(den[n]);
    log_sum += 0.25 * std::log(p);
  }
  const double bp =
      c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
  return bp * std::exp(log_sum) * 100.0;
}

PRF ner(const std::vector<NerPrediction>& preds,
        const std::vector<NerPrediction>& golds) {
  double tp = 0, pred_total = 0, gold_total = 0;
  for (size_t u = 0; u < preds.size(); ++u) {
    std::list<Entity> pool(golds[u].entities.begin(), golds[u].entities.end());
    pred_total += static_cast<double>(preds[u].entities.size());
    gold_total += static_cast<double>(golds[u].entities.size());
    for (const Entity& e : preds[u].entities) {
      for (auto it = pool.begin(); it != pool.end(); ++it) {
        if (*it == e) {
          pool.erase(it);
          tp += 1.0;
          break;
        }
      }
    }
  }
  return make_prf(tp, pred_total, gold_total);
}

}  // namespace oracle

void check_bleu_oracle() {
  const char* name =
      "bleu matches a brute-force counter on 50 random corpora, 100.0 on self";
  try {
    std::mt19937 rng(99);
    const std::vector<std::string> vocab = {"the", "cat", "sat",  "on",  "mat",
                                            "dog", "ran", "fast", "a",   "and",
                                            "big", "red", "sun",  "sky", "blue"};
    auto sentence = [&](size_t max_len) {
      std::uniform_int_distribution<size_t> len(1, max_len);
      std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);
      std::string s;
      const size_t n = len(rng);
      for (size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += vocab[pick(rng)];
      }
      return s;
    };

    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_int_distribution<size_t> segs(1, 5);
      std::uniform_int_distribution<size_t> nref(1, 3);
      std::vector<std::string> hyps;
      std::vector<std::vector<std::string>> refs;
      const size_t s = segs(rng);
      for (size_t i = 0; i < s; ++i) {
        hyps.push_back(sentence(14));
        std::vector<std::string> r;
        const size_t k = nref(rng);
        for (size_t j = 0; j < k; ++j) r.push_back(sentence(14));
        refs.push_back(std::move(r));
      }
      worst = std::max(worst, std::abs(bleu4(hyps, refs) -
                                       oracle::bleu(hyps, refs)));
    }

    std::vector<std::string> self = {"the quick brown fox",
                                     "jumps over the lazy dog"};
    const double self_score = bleu4(self, {{self[0]}, {self[1]}});
    const bool ok = worst < 1e-9 && self_score == 100.0;
    report(name, ok,
           "worst=" + std::to_string(worst) +
               " self=" + std::to_string(self_score));
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 6. NER micro-F1 against a brute-force matcher
// --------------------------------------------------------------------------

void check_ner_oracle() {
  const char* name =
      "ner micro F1 matches brute force on 100 random instances, 0.5 fixture";
  try {
    std::mt19937 rng(20240816);
    const std::vector<std::string> tags = {"per", "loc", "org"};
    const std::vector<std::string> names = {"ada", "bob", "rome", "oslo",
                                            "un",  "ibm", "lena"};
    std::vector<NerPrediction> preds(100), golds(100);
    std::uniform_int_distribution<size_t> count(0, 4);
    std::uniform_int_distribution<size_t> tpick(0, tags.size() - 1);
    std::uniform_int_distribution<size_t> npick(0, names.size() - 1);
    auto fill = [&](std::vector<NerPrediction>& v) {
      for (auto& inst : v) {
        const size_t k = count(rng);
        for (size_t i = 0; i < k; ++i)
          inst.entities.push_back({tags[tpick(rng)], names[npick(rng)]});
      }
    };
    fill(preds);
    fill(golds);

    PRF mine = ner_micro_f1(preds, golds);
    PRF brute = oracle::ner(preds, golds);
    const double diff = std::max({std::abs(mine.precision - brute.precision),
                                  std::abs(mine.recall - brute.recall),
                                  std::abs(mine.f1 - brute.f1)});

    std::vector<NerPrediction> hp = {{{{"per", "alice"}, {"loc", "berlin"}}}};
    std::vector<NerPrediction> hg = {{{{"per", "alice"}, {"loc", "paris"}}}};
    PRF half = ner_micro_f1(hp, hg);
    const bool ok = diff < 1e-9 && half.precision == 0.5 &&
                    half.recall == 0.5 && half.f1 == 0.5;
    report(name, ok, "diff=" + std::to_string(diff));
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 7. SLU-F1 golden fixture
// --------------------------------------------------------------------------

void check_slu_golden() {
  const char* name = "slu F1 reproduces the three-case hand-computed fixture";
  try {
    IntentSlots exact_p{"calendar", "set", {{"date", "monday"}}};
    IntentSlots exact_g{"calendar", "set", {{"date", "monday"}}};
    IntentSlots part_p{"calendar", "set", {{"date", "monday"}}};
    IntentSlots part_g{"calendar", "set", {{"date", "next monday"}}};
    IntentSlots wrong_p{"calendar", "set", {{"location", "paris"}}};
    IntentSlots wrong_g{"calendar", "set", {{"date", "paris"}}};

    SluReport a = slu_f1({exact_p}, {exact_g});
    SluReport b = slu_f1({part_p}, {part_g});
    SluReport c = slu_f1({wrong_p}, {wrong_g});
    SluReport all = slu_f1({exact_p, part_p, wrong_p},
                           {exact_g, part_g, wrong_g});

    auto near = [](double x, double y) { return std::abs(x - y) < 1e-9; };
    const bool ok = near(a.slu_f1, 1.0) && near(a.span.f1, 1.0) &&
                    near(b.word.f1, 2.0 / 3.0) &&
                    near(b.chars.f1, 3.0 / 4.0) &&
                    near(b.slu_f1, 17.0 / 24.0) && near(b.span.f1, 0.0) &&
                    near(c.slu_f1, 0.0) && near(all.span.f1, 1.0 / 3.0) &&
                    near(all.word.f1, 5.0 / 9.0) &&
                    near(all.chars.f1, 7.0 / 12.0) &&
                    near(all.slu_f1, 41.0 / 72.0);
    report(name, ok);
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 8. Round-trip suites
// --------------------------------------------------------------------------

std::string trim_stable(std::mt19937& rng, std::string_view pool,
                        size_t min_len, size_t max_len) {
  std::uniform_int_distribution<size_t> len(min_len, max_len);
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  std::string s;
  const size_t n = len(rng);
  for (size_t i = 0; i < n; ++i) s.push_back(pool[pick(rng)]);
  while (!s.empty() && (s.front() == ' ')) s.erase(s.begin());
  while (!s.empty() && (s.back() == ' ')) s.pop_back();
  if (s.empty()) s = "x";
  return s;
}

void check_round_trips() {
  const char* name =
      "manifest, unified, ner, and intent-slot forms round-trip 10000 times";
  try {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(31337);
    size_t failures = 0;

    const VoiceCatalog& cat = default_catalog();
    std::uniform_int_distribution<size_t> vpick(0, cat.voices.size() - 1);
    const std::string_view id_pool =
        "abcdefghijklmnopqrstuvwxyz0123456789/_-#.";
    const std::string_view text_pool =
        "abcdefghij KLMNO,.!?'\"()- 0123456789";
    const std::string_view value_pool =
        "abcdefgh ij;:|=\\ 0123456789";

    for (int i = 0; i < 10000; ++i) {
      ManifestEntry e;
      e.id = trim_stable(rng, id_pool, 1, 40);
      e.audio_path = trim_stable(rng, id_pool, 1, 40) + ".wav";
      e.instruction = trim_stable(rng, text_pool, 1, 80);
      e.target = trim_stable(rng, text_pool, 1, 60);
      e.duration_s = 0.06 * (1 + i % 500);
      e.voice = cat.voices[vpick(rng)];
      e.source = (i % 2) ? Source::superni : Source::alpaca;
      e.split = (i % 3 == 0) ? Split::train
                             : (i % 3 == 1 ? Split::dev : Split::test);
      json j = e;
      ManifestEntry back = j.get<ManifestEntry>();
      json j2 = back;
      if (j != j2) ++failures;
    }

    for (int i = 0; i < 10000; ++i) {
      UnifiedExample e;
      e.id = trim_stable(rng, id_pool, 1, 40);
      e.instruction = trim_stable(rng, text_pool, 1, 80);
      e.input = (i % 7 == 0) ? "" : trim_stable(rng, text_pool, 1, 80);
      e.output = trim_stable(rng, text_pool, 1, 60);
      e.source = (i % 2) ? Source::superni : Source::alpaca;
      json j = e;
      UnifiedExample back = j.get<UnifiedExample>();
      if (!(back == e)) ++failures;
    }

    std::uniform_int_distribution<size_t> ecount(0, 5);
    const std::vector<std::string> tags = {"per", "loc", "org", "misc"};
    std::uniform_int_distribution<size_t> tpick(0, tags.size() - 1);
    for (int i = 0; i < 10000; ++i) {
      NerPrediction p;
      const size_t k = ecount(rng);
      for (size_t t = 0; t < k; ++t)
        p.entities.push_back(
            {tags[tpick(rng)], trim_stable(rng, value_pool, 1, 20)});
      NerPrediction back = parse_ner(render_ner(p));
      if (!(back == p)) ++failures;
    }

    std::uniform_int_distribution<size_t> scount(0, 4);
    for (int i = 0; i < 10000; ++i) {
      IntentSlots p;
      p.scenario = trim_stable(rng, "abcdefghij_", 1, 12);
      p.action = trim_stable(rng, "abcdefghij_", 1, 12);
      const size_t k = scount(rng);
      for (size_t t = 0; t < k; ++t)
        p.slots.push_back({trim_stable(rng, "abcdefgh_", 1, 10),
                           trim_stable(rng, value_pool, 1, 20)});
      IntentSlots back = parse_intent_slots(render_intent_slots(p));
      if (!(back == p)) ++failures;
    }

    const double elapsed = seconds_since(t0);
    report(name, failures == 0 && elapsed < 30.0,
           std::to_string(failures) + " failures, " +
               std::to_string(elapsed) + "s");
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 9. Pipeline determinism through the CLI
// --------------------------------------------------------------------------

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::string ba = read_text_file(a);
  std::string bb = read_text_file(b);
  return ba == bb;
}

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + SLUKIT_CLI_PATH +
                          "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void check_pipeline_determinism() {
  const char* name =
      "mock pipeline runs with one seed are byte-identical, 60 ms per char";
  try {
    const fs::path dir_a = fresh_dir("accept-a");
    const fs::path dir_b = fresh_dir("accept-b");
    const std::string fixture =
        (data_dir() / "clean_10.jsonl").string();

    const std::string base = "synth --in " + fixture +
                             " --out-dir wav --out manifest.jsonl"
                             " --backend mock --seed 42";
    const int rc_a = run_cli(base + " --parallelism 4", dir_a);
    const int rc_b = run_cli(base + " --parallelism 1", dir_b);
    if (rc_a != 0 || rc_b != 0) {
      report(name, false,
             "cli exits " + std::to_string(rc_a) + "/" + std::to_string(rc_b));
      return;
    }

    bool identical = same_bytes(dir_a / "manifest.jsonl",
                                dir_b / "manifest.jsonl");
    auto entries = read_manifest(dir_a / "manifest.jsonl");
    auto examples = read_unified_jsonl(data_dir() / "clean_10.jsonl");
    std::map<std::string, size_t> spoken_chars;
    for (const UnifiedExample& e : examples) spoken_chars[e.id] = e.input.size();
    bool durations_ok = entries.size() == examples.size();
    size_t wavs_checked = 0;
    for (size_t i = 0; identical && durations_ok && i < entries.size(); ++i) {
      const auto wav_a = resolve_audio_path(dir_a / "manifest.jsonl",
                                            entries[i]);
      const auto wav_b = resolve_audio_path(dir_b / "manifest.jsonl",
                                            entries[i]);
      if (!same_bytes(wav_a, wav_b)) identical = false;
      ++wavs_checked;
      auto it = spoken_chars.find(entries[i].id);
      if (it == spoken_chars.end() ||
          entries[i].duration_s !=
              static_cast<double>(960 * it->second) / 16000.0)
        durations_ok = false;
    }

    report(name, identical && durations_ok && wavs_checked == 10,
           std::string(identical ? "" : "byte mismatch ") +
               (durations_ok ? "" : "duration law violated"));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 10. Voice sampling balance
// --------------------------------------------------------------------------

void check_voice_sampling() {
  const char* name =
      "79000 seeded draws keep every speaker in [850, 1150]; catalog 79/14/2";
  try {
    const VoiceCatalog& cat = default_catalog();
    std::map<std::string, size_t> counts;
    VoiceSampler sampler(42);
    for (int i = 0; i < 79000; ++i) ++counts[sampler.sample(cat).speaker_id];

    bool balanced = counts.size() == cat.voices.size();
    size_t lo = 79000, hi = 0;
    for (const auto& [id, n] : counts) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
      if (n < 850 || n > 1150) balanced = false;
    }

    std::set<std::string> locales;
    std::set<Gender> genders;
    for (const VoiceSpec& v : cat.voices) {
      locales.insert(v.locale);
      genders.insert(v.gender);
    }
    const bool shape = cat.voices.size() == 79 && locales.size() == 14 &&
                       genders.size() == 2;
    report(name, balanced && shape,
           "min=" + std::to_string(lo) + " max=" + std::to_string(hi));
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 11. Subsampling
// --------------------------------------------------------------------------

void check_subsample() {
  const char* name =
      "one percent of a 5800-entry manifest is exactly 58, twice the same";
  try {
    std::vector<ManifestEntry> entries;
    entries.reserve(5800);
    for (int i = 0; i < 5800; ++i) {
      ManifestEntry e;
      e.id = "e" + std::to_string(i);
      e.audio_path = e.id + ".wav";
      e.instruction = "inst";
      e.target = "t";
      e.duration_s = 1.0;
      e.voice = default_catalog().voices[i % 79];
      e.source = Source::superni;
      e.split = Split::train;
      entries.push_back(std::move(e));
    }
    auto once = subsample(entries, 0.01, 58);
    auto twice = subsample(entries, 0.01, 58);
    bool same = once.size() == twice.size();
    for (size_t i = 0; same && i < once.size(); ++i)
      same = once[i].id == twice[i].id;
    report(name, once.size() == 58 && same,
           "size=" + std::to_string(once.size()));
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

// --------------------------------------------------------------------------
// 12. Remote client behavior against a fake server
// --------------------------------------------------------------------------

void check_remote_client() {
  const char* name =
      "fake server 429 triggers one retry; limiter holds an 8 rps budget";
  try {
    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/synth",
                [&](const httplib::Request&, httplib::Response& res) {
                  if (++hits == 1) {
                    res.status = 429;
                    res.set_content("busy", "text/plain");
                  } else {
                    AudioClip clip;
                    clip.sample_rate = 16000;
                    clip.samples.assign(1600, 0.1f);
                    res.set_content(encode_wav(clip), "audio/wav");
                  }
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::vector<double> sleeps;
    RemoteTtsConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/synth";
    cfg.api_key = "k";
    cfg.requests_per_second = 0;
    cfg.backoff_base_s = 0.25;
    cfg.now_fn = [] { return 0.0; };
    cfg.sleep_fn = [&](double s) { sleeps.push_back(s); };
    RemoteTtsBackend backend(cfg);
    SynthesisResult r = backend.synthesize(
        {"hello", {Gender::female, "en-US", "en-US-JennyNeural"}});
    server.stop();
    th.join();

    const bool retry_ok = hits == 2 && sleeps.size() == 1 &&
                          r.clip.sample_rate == 16000;

    double clock = 0.0;
    RateLimiter limiter(
        8.0, [&] { return clock; }, [&](double s) { clock += s; });
    size_t in_window = 0;
    bool spaced = true;
    double prev = -1.0;
    for (int i = 0; i < 120; ++i) {
      limiter.acquire();
      if (clock < 10.0) ++in_window;
      if (prev >= 0.0 && clock - prev < 0.125 - 1e-12) spaced = false;
      prev = clock;
    }
    const bool limiter_ok = in_window <= 80 && spaced;

    report(name, retry_ok && limiter_ok,
           "hits=" + std::to_string(hits.load()) +
               " sleeps=" + std::to_string(sleeps.size()) +
               " in_window=" + std::to_string(in_window));
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

}  // namespace

int main() {
  check_filter_fixture();
  check_loss_mask();
  check_speed_perturbation();
  check_concat_truncate();
  check_bleu_oracle();
  check_ner_oracle();
  check_slu_golden();
  check_round_trips();
  check_pipeline_determinism();
  check_voice_sampling();
  check_subsample();
  check_remote_client();

  if (g_failures == 0) {
    std::printf("all 12 checks passed\n");
    return 0;
  }
  std::printf("%d of 12 checks failed\n", g_failures);
  return 1;
}
