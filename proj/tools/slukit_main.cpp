// slukit command line: corpus construction and scoring stages, each reading
// and writing JSONL so partial reruns are cheap.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "slukit/audio.hpp"
#include "slukit/common.hpp"
#include "slukit/conditioning.hpp"
#include "slukit/corpus.hpp"
#include "slukit/filter.hpp"
#include "slukit/ingest.hpp"
#include "slukit/metrics.hpp"
#include "slukit/tts.hpp"

namespace fs = std::filesystem;
using namespace slukit;

namespace {

struct PipelineConfig {
  std::vector<std::string> sources;
  std::string out_dir = "out";
  std::string catalog_path;
  std::string paraphrase_path;
  FilterRuleSet rules;
  std::string backend = "mock";
  uint64_t seed = 0;
  int parallelism = 1;
  double rate_limit = 8.0;
  int batch_size = kDefaultBatchSize;

  void validate() const {
    if (backend != "mock" && backend != "remote")
      throw ConfigError("backend must be \"mock\" or \"remote\", got \"" +
                        backend + "\"");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (rate_limit < 0.0) throw ConfigError("rate_limit must be >= 0");
    rules.validate();
  }
};

PipelineConfig load_pipeline_config(const std::string& path) {
  const json j = parse_json(read_text_file(path));
  if (!j.is_object()) throw ConfigError(path + ": config must be an object");
  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "paths") {
      if (!value.is_object())
        throw ConfigError(path + ": \"paths\" must be an object");
      for (const auto& [pk, pv] : value.items()) {
        if (pk == "sources") cfg.sources = pv.get<std::vector<std::string>>();
        else if (pk == "out_dir") cfg.out_dir = pv.get<std::string>();
        else if (pk == "catalog") cfg.catalog_path = pv.get<std::string>();
        else if (pk == "paraphrases") cfg.paraphrase_path = pv.get<std::string>();
        else throw ConfigError(path + ": unknown key \"paths." + pk + "\"");
      }
    } else if (key == "filter") {
      from_json(value, cfg.rules);
    } else if (key == "backend") {
      cfg.backend = value.get<std::string>();
    } else if (key == "seed") {
      cfg.seed = value.get<uint64_t>();
    } else if (key == "parallelism") {
      cfg.parallelism = value.get<int>();
    } else if (key == "rate_limit") {
      cfg.rate_limit = value.get<double>();
    } else if (key == "batch_size") {
      cfg.batch_size = value.get<int>();
    } else {
      throw ConfigError(path + ": unknown key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

VoiceCatalog resolve_catalog(const std::string& path) {
  if (path.empty()) return default_catalog();
  return load_catalog(path);
}

// --------------------------------------------------------------------------
// ingest
// --------------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& superni_paths,
               const std::vector<std::string>& alpaca_paths,
               const std::string& out_path, const std::string& drops_path,
               OutputPolicy policy) {
  std::vector<UnifiedExample> all;
  std::vector<DropRecord> drops;
  for (const std::string& path : superni_paths) {
    const std::string fallback = fs::path(path).stem().string();
    for (const RawSuperNITask& task :
         parse_superni(read_text_file(path), fallback)) {
      std::vector<UnifiedExample> unified = unify_superni(task, policy, &drops);
      all.insert(all.end(), std::make_move_iterator(unified.begin()),
                 std::make_move_iterator(unified.end()));
    }
  }
  for (const std::string& path : alpaca_paths) {
    std::vector<UnifiedExample> unified =
        parse_alpaca(read_text_file(path), &drops);
    all.insert(all.end(), std::make_move_iterator(unified.begin()),
               std::make_move_iterator(unified.end()));
  }
  validate_unique_ids(all);
  write_unified_jsonl(out_path, all);
  if (!drops_path.empty()) write_drops_jsonl(drops_path, drops);
  std::printf("ingest: wrote %zu examples to %s (%zu dropped)\n", all.size(),
              out_path.c_str(), drops.size());
  return 0;
}

// --------------------------------------------------------------------------
// filter
// --------------------------------------------------------------------------

int cmd_filter(const std::string& in_path, const std::string& out_path,
               const std::string& drops_path, const FilterRuleSet& rules) {
  const std::vector<UnifiedExample> examples = read_unified_jsonl(in_path);
  const FilterOutcome outcome = filter_corpus(examples, rules);
  write_unified_jsonl(out_path, outcome.kept);
  if (!drops_path.empty()) write_drops_jsonl(drops_path, outcome.dropped);
  std::printf("filter: kept %zu of %zu examples (%zu dropped)\n",
              outcome.kept.size(), examples.size(), outcome.dropped.size());
  return 0;
}

// --------------------------------------------------------------------------
// synth
// --------------------------------------------------------------------------

bool reusable_wav(const std::string& path, long long expected_samples) {
  if (!fs::exists(path)) return false;
  try {
    const AudioClip clip = read_wav(path);
    if (clip.sample_rate != kOutputSampleRate || clip.samples.empty())
      return false;
    if (expected_samples >= 0 &&
        static_cast<long long>(clip.samples.size()) != expected_samples)
      return false;
    return true;
  } catch (const Error&) {
    return false;
  }
}

int cmd_synth(const std::string& in_path, const std::string& out_dir,
              const std::string& manifest_path, const std::string& drops_path,
              const PipelineConfig& cfg, Split split, bool speak_instruction) {
  const std::vector<UnifiedExample> examples = read_unified_jsonl(in_path);
  const VoiceCatalog catalog = resolve_catalog(cfg.catalog_path);
  validate(catalog);
  fs::create_directories(out_dir);

  std::unique_ptr<SynthesisBackend> backend;
  if (cfg.backend == "mock") {
    backend = std::make_unique<MockTtsBackend>();
  } else {
    RemoteTtsConfig remote = RemoteTtsConfig::from_env();
    remote.requests_per_second = cfg.rate_limit;
    backend = std::make_unique<RemoteTtsBackend>(remote);
  }

  struct Job {
    const UnifiedExample* example;
    std::string speak;
    VoiceSpec voice;
    std::string wav_path;
  };
  std::vector<Job> jobs;
  std::vector<DropRecord> drops;
  VoiceSampler sampler(cfg.seed);
  for (const UnifiedExample& e : examples) {
    const std::string speak = speak_instruction ? e.instruction : e.input;
    if (trim(speak).empty()) {
      drops.push_back(
          {e.id, DropReason::empty_input, "nothing to synthesize"});
      continue;
    }
    Job job;
    job.example = &e;
    job.speak = speak;
    job.voice = sampler.sample(catalog);
    job.wav_path = (fs::path(out_dir) / wav_filename(e.id)).string();
    jobs.push_back(std::move(job));
  }

  std::vector<ManifestEntry> entries(jobs.size());
  std::atomic<size_t> next{0};
  std::atomic<size_t> reused{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      const Job& job = jobs[i];
      try {
        long long expected = -1;
        if (backend->kind() == BackendKind::mock) {
          const AudioClip probe = mock_waveform(job.speak, job.voice);
          expected = static_cast<long long>(probe.samples.size());
        }
        AudioClip clip;
        if (reusable_wav(job.wav_path, expected)) {
          clip = read_wav(job.wav_path);
          reused.fetch_add(1);
        } else {
          clip = backend->synthesize({job.speak, job.voice}).clip;
          write_wav(clip, job.wav_path);
        }
        ManifestEntry entry;
        entry.id = job.example->id;
        const fs::path rel = fs::path(job.wav_path)
                                 .lexically_relative(
                                     fs::path(manifest_path).parent_path());
        entry.audio_path = rel.empty() ? job.wav_path : rel.string();
        entry.instruction = job.example->instruction;
        entry.target = job.example->output;
        entry.duration_s = clip.duration_s();
        entry.voice = job.voice;
        entry.source = job.example->source;
        entry.split = split;
        entries[i] = std::move(entry);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::max(1, cfg.parallelism);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  validate_manifest(entries);
  write_manifest(manifest_path, entries);
  if (!drops_path.empty()) write_drops_jsonl(drops_path, drops);
  std::printf("synth: %zu entries (%zu reused) -> %s (%zu dropped)\n",
              entries.size(), reused.load(), manifest_path.c_str(),
              drops.size());
  return 0;
}

// --------------------------------------------------------------------------
// augment
// --------------------------------------------------------------------------

std::string factor_suffix(double factor) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", factor);
  return std::string("#sp") + buf;
}

int cmd_augment(const std::string& in_path, const std::string& out_path,
                const std::string& out_dir, const std::vector<double>& factors) {
  const std::vector<ManifestEntry> entries = read_manifest(in_path);
  for (double f : factors) {
    if (!(f > 0.0)) throw ArgumentError("augment factor must be positive");
  }
  const std::string wav_dir =
      out_dir.empty() ? fs::path(in_path).parent_path().string() : out_dir;
  if (!wav_dir.empty()) fs::create_directories(wav_dir);

  std::vector<ManifestEntry> out;
  out.reserve(entries.size() * (1 + factors.size()));
  for (const ManifestEntry& entry : entries) {
    const fs::path resolved = resolve_audio_path(in_path, entry);
    ManifestEntry original = entry;
    const fs::path orig_rel =
        resolved.lexically_relative(fs::path(out_path).parent_path());
    original.audio_path = orig_rel.empty() ? resolved.string() : orig_rel.string();
    out.push_back(std::move(original));
    const AudioClip clip = read_wav(resolved);
    for (double f : factors) {
      ManifestEntry copy = entry;
      copy.id = entry.id + factor_suffix(f);
      const AudioClip perturbed = speed_perturb(clip, f);
      const fs::path wav_path =
          fs::path(wav_dir.empty() ? "." : wav_dir) / wav_filename(copy.id);
      write_wav(perturbed, wav_path);
      const fs::path rel =
          wav_path.lexically_relative(fs::path(out_path).parent_path());
      copy.audio_path = rel.empty() ? wav_path.string() : rel.string();
      copy.duration_s = perturbed.duration_s();
      out.push_back(std::move(copy));
    }
  }
  validate_manifest(out);
  write_manifest(out_path, out);
  std::printf("augment: %zu -> %zu entries -> %s\n", entries.size(),
              out.size(), out_path.c_str());
  return 0;
}

// --------------------------------------------------------------------------
// remaining single-step stages
// --------------------------------------------------------------------------

int cmd_subsample(const std::string& in_path, const std::string& out_path,
                  double fraction, uint64_t seed) {
  const std::vector<ManifestEntry> entries = read_manifest(in_path);
  const std::vector<ManifestEntry> sampled = subsample(entries, fraction, seed);
  write_manifest(out_path, sampled);
  std::printf("subsample: %zu -> %zu entries -> %s\n", entries.size(),
              sampled.size(), out_path.c_str());
  return 0;
}

int cmd_expand(const std::string& in_path, const std::string& out_path,
               const std::string& paraphrase_path) {
  const std::vector<ManifestEntry> entries = read_manifest(in_path);
  const ParaphraseMap map = load_paraphrase_map(paraphrase_path);
  const std::vector<ManifestEntry> expanded = expand_instructions(entries, map);
  validate_manifest(expanded);
  write_manifest(out_path, expanded);
  std::printf("expand: %zu -> %zu entries -> %s\n", entries.size(),
              expanded.size(), out_path.c_str());
  return 0;
}

int cmd_batches(const std::string& in_path, const std::string& out_path,
                int batch_size) {
  const std::vector<ManifestEntry> entries = read_manifest(in_path);
  ByteTokenizer tok;
  const size_t n = export_batches(entries, tok, batch_size, out_path);
  std::printf("batches: %zu batches of size %d -> %s\n", n, batch_size,
              out_path.c_str());
  return 0;
}

int cmd_stats(const std::string& in_path, const std::string& drops_path) {
  const std::vector<ManifestEntry> entries = read_manifest(in_path);
  std::vector<DropRecord> drops;
  if (!drops_path.empty()) drops = read_drops_jsonl(drops_path);
  const CorpusStats stats = corpus_stats(entries, drops);
  std::printf("%s\n", json(stats).dump(2).c_str());
  return 0;
}

int cmd_score(const std::string& task_name, const std::string& preds_path,
              const std::string& refs_path, bool as_json) {
  const Task task = task_from_string(task_name);
  const MetricReport report = evaluate_run(task, preds_path, refs_path);
  if (as_json)
    std::printf("%s\n", report.to_json().dump(2).c_str());
  else
    std::printf("%s", report.to_table().c_str());
  return 0;
}

// --------------------------------------------------------------------------

int report_error(const std::string& stage, const std::string& type,
                 const std::string& message) {
  const json err{{"error",
                  {{"stage", stage}, {"type", type}, {"message", message}}}};
  std::fprintf(stderr, "%s\n", err.dump().c_str());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instruction-speech corpus tools"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config JSON");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse sources to unified JSONL");
  std::vector<std::string> superni_paths, alpaca_paths;
  std::string ingest_out, ingest_drops, policy_name = "first";
  ingest->add_option("--superni", superni_paths, "task JSON file(s)");
  ingest->add_option("--alpaca", alpaca_paths, "instruction JSON file(s)");
  ingest->add_option("--out", ingest_out, "unified JSONL output")->required();
  ingest->add_option("--drops", ingest_drops, "drop records JSONL");
  ingest->add_option("--output-policy", policy_name, "first|all");

  // filter
  auto* filter = app.add_subcommand("filter", "apply relevance and speakability rules");
  std::string filter_in, filter_out, filter_drops, rules_path;
  filter->add_option("--in", filter_in, "unified JSONL")->required();
  filter->add_option("--out", filter_out, "kept JSONL")->required();
  filter->add_option("--drops", filter_drops, "drop records JSONL");
  filter->add_option("--rules", rules_path, "filter rules JSON");

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize speech and build a manifest");
  std::string synth_in, synth_dir, synth_out, synth_drops, catalog_path;
  std::string backend_name, split_name = "train";
  uint64_t seed = 0;
  int parallelism = 0;
  double rate_limit = -1.0;
  bool speak_instruction = false;
  synth->add_option("--in", synth_in, "kept JSONL")->required();
  synth->add_option("--out-dir", synth_dir, "WAV output directory")->required();
  synth->add_option("--out", synth_out, "manifest JSONL output")->required();
  synth->add_option("--drops", synth_drops, "drop records JSONL");
  synth->add_option("--catalog", catalog_path, "voice catalog JSON");
  synth->add_option("--backend", backend_name, "mock|remote");
  synth->add_option("--seed", seed, "voice sampling seed");
  synth->add_option("--parallelism", parallelism, "synthesis worker threads");
  synth->add_option("--rate-limit", rate_limit, "max requests per second");
  synth->add_option("--split", split_name, "train|dev|test");
  synth->add_flag("--speak-instruction", speak_instruction,
                  "synthesize the instruction instead of the input");

  // augment
  auto* augment = app.add_subcommand("augment", "add speed-perturbed copies");
  std::string aug_in, aug_out, aug_dir;
  std::vector<double> factors;
  augment->add_option("--in", aug_in, "manifest JSONL")->required();
  augment->add_option("--out", aug_out, "augmented manifest JSONL")->required();
  augment->add_option("--out-dir", aug_dir, "directory for perturbed WAVs");
  augment->add_option("--factor", factors, "speed factor (repeatable)");

  // subsample
  auto* sub = app.add_subcommand("subsample", "seeded manifest subsampling");
  std::string sub_in, sub_out;
  double fraction = 0.0;
  uint64_t sub_seed = 0;
  sub->add_option("--in", sub_in, "manifest JSONL")->required();
  sub->add_option("--out", sub_out, "subsampled manifest JSONL")->required();
  sub->add_option("--fraction", fraction, "fraction in (0, 1]")->required();
  sub->add_option("--seed", sub_seed, "sampling seed");

  // expand
  auto* expand = app.add_subcommand("expand", "add paraphrased instruction copies");
  std::string exp_in, exp_out, exp_para;
  expand->add_option("--in", exp_in, "manifest JSONL")->required();
  expand->add_option("--out", exp_out, "expanded manifest JSONL")->required();
  expand->add_option("--paraphrases", exp_para, "paraphrase JSON map");

  // batches
  auto* batches = app.add_subcommand("batches", "export collated token batches");
  std::string bat_in, bat_out;
  int batch_size = 0;
  batches->add_option("--in", bat_in, "manifest JSONL")->required();
  batches->add_option("--out", bat_out, "batch JSONL output")->required();
  batches->add_option("--batch-size", batch_size, "examples per batch");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus statistics as JSON");
  std::string stats_in, stats_drops;
  stats->add_option("--in", stats_in, "manifest JSONL")->required();
  stats->add_option("--drops", stats_drops, "drop records JSONL");

  // score
  auto* score = app.add_subcommand("score", "evaluate predictions against references");
  std::string task_name, preds_path, refs_path;
  bool score_json = false;
  score->add_option("--task", task_name, "ner|sa|qa|fsc|slurp")->required();
  score->add_option("--preds", preds_path, "prediction JSONL")->required();
  score->add_option("--refs", refs_path, "reference JSONL")->required();
  score->add_flag("--json", score_json, "print the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("cli", "ArgumentError", e.what());
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_pipeline_config(config_path);

    if (ingest->parsed()) {
      if (superni_paths.empty() && alpaca_paths.empty())
        throw ArgumentError("ingest needs at least one --superni or --alpaca");
      OutputPolicy policy;
      if (policy_name == "first") policy = OutputPolicy::first;
      else if (policy_name == "all") policy = OutputPolicy::all;
      else throw ArgumentError("unknown --output-policy: " + policy_name);
      return cmd_ingest(superni_paths, alpaca_paths, ingest_out, ingest_drops,
                        policy);
    }
    if (filter->parsed()) {
      FilterRuleSet rules = cfg.rules;
      if (!rules_path.empty()) rules = load_filter_rules(rules_path);
      rules.validate();
      return cmd_filter(filter_in, filter_out, filter_drops, rules);
    }
    if (synth->parsed()) {
      if (!backend_name.empty()) cfg.backend = backend_name;
      if (synth->count("--seed") > 0) cfg.seed = seed;
      if (parallelism > 0) cfg.parallelism = parallelism;
      if (rate_limit >= 0.0) cfg.rate_limit = rate_limit;
      if (!catalog_path.empty()) cfg.catalog_path = catalog_path;
      cfg.validate();
      return cmd_synth(synth_in, synth_dir, synth_out, synth_drops, cfg,
                       split_from_string(split_name), speak_instruction);
    }
    if (augment->parsed()) {
      if (factors.empty()) factors = {0.95, 1.05};
      return cmd_augment(aug_in, aug_out, aug_dir, factors);
    }
    if (sub->parsed()) return cmd_subsample(sub_in, sub_out, fraction, sub_seed);
    if (expand->parsed()) {
      const std::string para =
          exp_para.empty() ? cfg.paraphrase_path : exp_para;
      if (para.empty())
        throw ArgumentError("expand needs --paraphrases or a config path");
      return cmd_expand(exp_in, exp_out, para);
    }
    if (batches->parsed()) {
      const int size = batch_size > 0 ? batch_size : cfg.batch_size;
      return cmd_batches(bat_in, bat_out, size);
    }
    if (stats->parsed()) return cmd_stats(stats_in, stats_drops);
    if (score->parsed())
      return cmd_score(task_name, preds_path, refs_path, score_json);
    return report_error(stage, "ArgumentError", "no subcommand handled");
  } catch (const ConfigError& e) {
    return report_error(stage, "ConfigError", e.what());
  } catch (const SchemaError& e) {
    return report_error(stage, "SchemaError", e.what());
  } catch (const ParseError& e) {
    return report_error(stage, "ParseError", e.what());
  } catch (const ArgumentError& e) {
    return report_error(stage, "ArgumentError", e.what());
  } catch (const AlignmentError& e) {
    return report_error(stage, "AlignmentError", e.what());
  } catch (const SynthesisError& e) {
    return report_error(stage, "SynthesisError", e.what());
  } catch (const IoError& e) {
    return report_error(stage, "IoError", e.what());
  } catch (const Error& e) {
    return report_error(stage, "Error", e.what());
  } catch (const json::exception& e) {
    return report_error(stage, "SchemaError", e.what());
  } catch (const std::exception& e) {
    return report_error(stage, "InternalError", e.what());
  }
}
