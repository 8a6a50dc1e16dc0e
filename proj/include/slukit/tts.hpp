#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>

#include "slukit/audio.hpp"
#include "slukit/common.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Voices
// ---------------------------------------------------------------------------

enum class Gender { female, male };

inline std::string to_string(Gender g) {
  return g == Gender::female ? "female" : "male";
}

inline Gender gender_from_string(std::string_view s) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  throw SchemaError("unknown gender: \"" + std::string(s) + "\"");
}

struct VoiceSpec {
  Gender gender = Gender::female;
  std::string locale;      // BCP-47 shape ll-CC, e.g. "en-US"
  std::string speaker_id;  // backend voice name

  friend bool operator==(const VoiceSpec&, const VoiceSpec&) = default;
};

inline bool is_bcp47_shape(std::string_view locale) {
  if (locale.size() != 5 || locale[2] != '-') return false;
  return locale[0] >= 'a' && locale[0] <= 'z' && locale[1] >= 'a' &&
         locale[1] <= 'z' && locale[3] >= 'A' && locale[3] <= 'Z' &&
         locale[4] >= 'A' && locale[4] <= 'Z';
}

inline void validate(const VoiceSpec& v) {
  if (!is_bcp47_shape(v.locale))
    throw SchemaError("voice locale must look like ll-CC, got \"" + v.locale +
                      "\"");
  if (v.speaker_id.empty()) throw SchemaError("voice speaker_id is empty");
}

inline void to_json(json& j, const VoiceSpec& v) {
  j = json{{"gender", to_string(v.gender)},
           {"locale", v.locale},
           {"speaker_id", v.speaker_id}};
}

inline void from_json(const json& j, VoiceSpec& v) {
  v.gender = gender_from_string(j.at("gender").get<std::string>());
  v.locale = j.at("locale").get<std::string>();
  v.speaker_id = j.at("speaker_id").get<std::string>();
  validate(v);
}

struct VoiceCatalog {
  std::vector<VoiceSpec> voices;
};

inline void to_json(json& j, const VoiceCatalog& c) {
  j = json{{"voices", c.voices}};
}

inline void from_json(const json& j, VoiceCatalog& c) {
  c.voices = j.at("voices").get<std::vector<VoiceSpec>>();
}

inline void validate(const VoiceCatalog& c) {
  if (c.voices.empty()) throw SchemaError("voice catalog is empty");
  std::set<std::string> ids;
  for (const VoiceSpec& v : c.voices) {
    validate(v);
    if (!ids.insert(v.speaker_id).second)
      throw SchemaError("duplicate speaker_id in catalog: " + v.speaker_id);
  }
}

/// The built-in catalog: 79 speakers across 14 English locales, both genders.
/// Shipped as data/voices.json as well so deployments can swap voices without
/// rebuilding.
inline const VoiceCatalog& default_catalog() {
  static const VoiceCatalog catalog = [] {
    const Gender F = Gender::female;
    const Gender M = Gender::male;
    struct Row {
      Gender gender;
      const char* locale;
      const char* name;
    };
    static const Row rows[] = {
        {F, "en-US", "JennyNeural"},    {M, "en-US", "GuyNeural"},
        {F, "en-US", "AriaNeural"},     {M, "en-US", "DavisNeural"},
        {F, "en-US", "AmberNeural"},    {M, "en-US", "BrandonNeural"},
        {F, "en-US", "EmmaNeural"},     {M, "en-US", "JacobNeural"},
        {F, "en-US", "MichelleNeural"}, {F, "en-GB", "LibbyNeural"},
        {M, "en-GB", "RyanNeural"},     {F, "en-GB", "SoniaNeural"},
        {M, "en-GB", "AlfieNeural"},    {F, "en-GB", "BellaNeural"},
        {M, "en-GB", "ElliotNeural"},   {F, "en-GB", "HollieNeural"},
        {M, "en-GB", "OliverNeural"},   {F, "en-AU", "NatashaNeural"},
        {M, "en-AU", "WilliamNeural"},  {F, "en-AU", "AnnetteNeural"},
        {M, "en-AU", "DarrenNeural"},   {F, "en-AU", "FreyaNeural"},
        {M, "en-AU", "KenNeural"},      {F, "en-CA", "ClaraNeural"},
        {M, "en-CA", "LiamNeural"},     {F, "en-CA", "RoseNeural"},
        {M, "en-CA", "OwenNeural"},     {F, "en-CA", "IvyNeural"},
        {M, "en-CA", "HarryNeural"},    {F, "en-IN", "NeerjaNeural"},
        {M, "en-IN", "PrabhatNeural"},  {F, "en-IN", "AashiNeural"},
        {M, "en-IN", "KunalNeural"},    {F, "en-IN", "AnanyaNeural"},
        {M, "en-IN", "RehaanNeural"},   {F, "en-IE", "EmilyNeural"},
        {M, "en-IE", "ConnorNeural"},   {F, "en-IE", "OrlaNeural"},
        {M, "en-IE", "SeanNeural"},     {F, "en-IE", "AoifeNeural"},
        {F, "en-NZ", "MollyNeural"},    {M, "en-NZ", "MitchellNeural"},
        {F, "en-NZ", "AmeliaNeural"},   {M, "en-NZ", "JordanNeural"},
        {F, "en-NZ", "TuiNeural"},      {F, "en-ZA", "LeahNeural"},
        {M, "en-ZA", "LukeNeural"},     {F, "en-ZA", "ImaniNeural"},
        {M, "en-ZA", "ThaboNeural"},    {M, "en-ZA", "ZaneNeural"},
        {F, "en-SG", "LunaNeural"},     {M, "en-SG", "WayneNeural"},
        {F, "en-SG", "MeiNeural"},      {M, "en-SG", "DanielNeural"},
        {F, "en-SG", "JiaNeural"},      {F, "en-PH", "RosaNeural"},
        {M, "en-PH", "JamesNeural"},    {M, "en-PH", "AngeloNeural"},
        {F, "en-PH", "BlessicaNeural"}, {M, "en-PH", "MarcoNeural"},
        {F, "en-NG", "EzinneNeural"},   {M, "en-NG", "AbeoNeural"},
        {F, "en-NG", "AmaraNeural"},    {M, "en-NG", "ObinnaNeural"},
        {F, "en-NG", "NgoziNeural"},    {F, "en-KE", "AsiliaNeural"},
        {M, "en-KE", "ChilembaNeural"}, {F, "en-KE", "ZuriNeural"},
        {M, "en-KE", "BarakaNeural"},   {F, "en-KE", "NiaNeural"},
        {F, "en-TZ", "RehemaNeural"},   {M, "en-TZ", "DaudiNeural"},
        {F, "en-TZ", "SubiraNeural"},   {M, "en-TZ", "JumaNeural"},
        {F, "en-TZ", "AdiaNeural"},     {F, "en-HK", "YanNeural"},
        {M, "en-HK", "SamNeural"},      {F, "en-HK", "WingNeural"},
        {M, "en-HK", "TszNeural"},
    };
    VoiceCatalog c;
    for (const Row& r : rows) {
      VoiceSpec v;
      v.gender = r.gender;
      v.locale = r.locale;
      v.speaker_id = std::string(r.locale) + "-" + r.name;
      c.voices.push_back(std::move(v));
    }
    return c;
  }();
  return catalog;
}

inline VoiceCatalog load_catalog(const std::filesystem::path& path) {
  VoiceCatalog c = parse_json(read_text_file(path)).get<VoiceCatalog>();
  if (c.voices.empty()) throw ConfigError("voice catalog is empty");
  return c;
}

/// Uniform seeded draw. Rejection sampling keeps the distribution exact and
/// the draw sequence identical on every platform.
class VoiceSampler {
 public:
  explicit VoiceSampler(std::uint64_t seed) : rng_(static_cast<std::uint32_t>(seed)) {}

  const VoiceSpec& sample(const VoiceCatalog& catalog) {
    if (catalog.voices.empty())
      throw ConfigError("cannot sample from an empty voice catalog");
    return catalog.voices[next_index(catalog.voices.size())];
  }

  size_t next_index(size_t n) {
    auto bound = static_cast<std::uint32_t>(n);
    if (bound == 0) throw ArgumentError("next_index: n must be > 0");
    const std::uint32_t limit =
        std::numeric_limits<std::uint32_t>::max() -
        (std::numeric_limits<std::uint32_t>::max() % bound + 1) % bound;
    std::uint32_t r = rng_();
    while (r > limit) r = rng_();
    return r % bound;
  }

 private:
  std::mt19937 rng_;
};

// ---------------------------------------------------------------------------
// SSML
// ---------------------------------------------------------------------------

inline std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string build_ssml(std::string_view text, const VoiceSpec& voice) {
  std::string out = "<speak version=\"1.0\" "
                    "xmlns=\"http://www.w3.org/2001/10/synthesis\" xml:lang=\"";
  out += xml_escape(voice.locale);
  out += "\"><voice name=\"";
  out += xml_escape(voice.speaker_id);
  out += "\">";
  out += xml_escape(text);
  out += "</voice></speak>";
  return out;
}

// ---------------------------------------------------------------------------
// Backend contract
// ---------------------------------------------------------------------------

inline constexpr int kOutputSampleRate = 16000;

struct SynthesisRequest {
  std::string text;
  VoiceSpec voice;
  // Output format is fixed: 16 kHz 16-bit mono PCM WAV.
};

enum class BackendKind { remote, mock };

inline std::string to_string(BackendKind k) {
  return k == BackendKind::remote ? "remote" : "mock";
}

struct SynthesisResult {
  AudioClip clip;
  VoiceSpec voice;
  BackendKind backend = BackendKind::mock;
};

/// Synthesis failed in a way no retry will fix (4xx other than 429, or the
/// configured retry budget ran out).
struct SynthesisError : Error {
  enum class Kind { permanent, transient_exhausted };
  Kind kind;
  int status;  // last HTTP status, 0 when the transport failed
  std::string body;

  SynthesisError(Kind kind_, int status_, std::string body_, const std::string& msg)
      : Error(msg), kind(kind_), status(status_), body(std::move(body_)) {}
};

class SynthesisBackend {
 public:
  virtual ~SynthesisBackend() = default;
  virtual SynthesisResult synthesize(const SynthesisRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

/// Deterministic offline waveform: 60 ms of sine per character, frequency
/// keyed by (character, speaker), 16 kHz, amplitude 0.3. Empty text yields
/// one 60 ms block of the speaker's base tone.
inline AudioClip mock_waveform(std::string_view text, const VoiceSpec& voice) {
  constexpr size_t kSamplesPerChar = 960;  // 60 ms at 16 kHz
  constexpr double kAmplitude = 0.3;

  const std::uint64_t speaker_hash = fnv1a(voice.speaker_id);
  const size_t blocks = text.empty() ? 1 : text.size();

  AudioClip clip;
  clip.sample_rate = kOutputSampleRate;
  clip.samples.resize(blocks * kSamplesPerChar);

  for (size_t k = 0; k < blocks; ++k) {
    std::uint64_t h = speaker_hash;
    if (!text.empty())
      h = fnv1a_byte(h, static_cast<unsigned char>(text[k]));
    const double freq = 200.0 + 10.0 * static_cast<double>(h % 200);
    for (size_t i = 0; i < kSamplesPerChar; ++i) {
      double t = static_cast<double>(i) / kOutputSampleRate;
      clip.samples[k * kSamplesPerChar + i] = static_cast<float>(
          kAmplitude * std::sin(2.0 * std::numbers::pi * freq * t));
    }
  }
  return clip;
}

class MockTtsBackend final : public SynthesisBackend {
 public:
  SynthesisResult synthesize(const SynthesisRequest& request) override {
    return {mock_waveform(request.text, request.voice), request.voice,
            BackendKind::mock};
  }
  BackendKind kind() const override { return BackendKind::mock; }
};

// ---------------------------------------------------------------------------
// Rate limiting
// ---------------------------------------------------------------------------

using ClockFn = std::function<double()>;
using SleepFn = std::function<void(double)>;

inline double steady_now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline void thread_sleep_s(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

/// Paces callers to at most `requests_per_second` by reserving evenly spaced
/// slots. Shared across worker threads; a zero budget disables pacing.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, ClockFn now = steady_now_s,
              SleepFn sleep = thread_sleep_s)
      : min_interval_(requests_per_second > 0 ? 1.0 / requests_per_second : 0),
        now_(std::move(now)),
        sleep_(std::move(sleep)) {}

  void acquire() {
    if (min_interval_ <= 0) return;
    double wait = 0;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      double now = now_();
      double start = std::max(now, next_slot_);
      wait = start - now;
      next_slot_ = start + min_interval_;
    }
    if (wait > 0) sleep_(wait);
  }

 private:
  double min_interval_;
  double next_slot_ = -1e300;
  std::mutex mutex_;
  ClockFn now_;
  SleepFn sleep_;
};

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

struct RemoteTtsConfig {
  std::string endpoint;  // full URL, e.g. https://host/cognitiveservices/v1
  std::string api_key;
  int max_attempts = 5;
  double backoff_base_s = 1.0;
  double backoff_factor = 2.0;
  double requests_per_second = 8.0;
  double timeout_s = 30.0;
  ClockFn now_fn = steady_now_s;
  SleepFn sleep_fn = thread_sleep_s;

  /// Reads TTS_ENDPOINT and TTS_API_KEY; both are required for remote use.
  static RemoteTtsConfig from_env() {
    RemoteTtsConfig cfg;
    const char* endpoint = std::getenv("TTS_ENDPOINT");
    const char* key = std::getenv("TTS_API_KEY");
    if (!endpoint || !*endpoint)
      throw ConfigError("TTS_ENDPOINT is not set (required for remote backend)");
    if (!key || !*key)
      throw ConfigError("TTS_API_KEY is not set (required for remote backend)");
    cfg.endpoint = endpoint;
    cfg.api_key = key;
    return cfg;
  }
};

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path or "/"
};

inline SplitUrl split_url(const std::string& url) {
  size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint must include a scheme: \"" + url + "\"");
  size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

/// HTTPS SSML client. Transient failures (transport errors, 429, 5xx) retry
/// with exponential backoff; other non-200 statuses fail permanently.
class RemoteTtsBackend final : public SynthesisBackend {
 public:
  explicit RemoteTtsBackend(RemoteTtsConfig config)
      : config_(std::move(config)),
        limiter_(config_.requests_per_second, config_.now_fn, config_.sleep_fn) {
    if (config_.endpoint.empty()) throw ConfigError("remote TTS endpoint is empty");
    if (config_.api_key.empty()) throw ConfigError("remote TTS api key is empty");
    if (config_.max_attempts < 1)
      throw ConfigError("max_attempts must be >= 1");
    url_ = detail::split_url(config_.endpoint);
  }

  SynthesisResult synthesize(const SynthesisRequest& request) override {
    const std::string ssml = build_ssml(request.text, request.voice);

    int last_status = 0;
    std::string last_body;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      limiter_.acquire();

      httplib::Client client(url_.base);
      client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
      client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));

      httplib::Headers headers = {
          {"Ocp-Apim-Subscription-Key", config_.api_key},
          {"X-Microsoft-OutputFormat", "riff-16khz-16bit-mono-pcm"},
          {"User-Agent", "slukit"},
      };
      httplib::Result res =
          client.Post(url_.path, headers, ssml, "application/ssml+xml");

      if (res && res->status == 200) {
        AudioClip clip = decode_wav(res->body);
        if (clip.sample_rate != kOutputSampleRate)
          throw SynthesisError(SynthesisError::Kind::permanent, 200, "",
                               "backend returned " +
                                   std::to_string(clip.sample_rate) +
                                   " Hz audio, expected 16000");
        return {std::move(clip), request.voice, BackendKind::remote};
      }

      if (res) {
        last_status = res->status;
        last_body = res->body;
        const bool transient = res->status == 429 || res->status >= 500;
        if (!transient)
          throw SynthesisError(SynthesisError::Kind::permanent, res->status,
                               res->body,
                               "TTS request failed with status " +
                                   std::to_string(res->status));
      } else {
        last_status = 0;
        last_body = httplib::to_string(res.error());
      }

      if (attempt < config_.max_attempts) {
        double delay = config_.backoff_base_s *
                       std::pow(config_.backoff_factor, attempt - 1);
        config_.sleep_fn(delay);
      }
    }
    throw SynthesisError(SynthesisError::Kind::transient_exhausted, last_status,
                         last_body,
                         "TTS retries exhausted after " +
                             std::to_string(config_.max_attempts) +
                             " attempts (last status " +
                             std::to_string(last_status) + ")");
  }

  BackendKind kind() const override { return BackendKind::remote; }

 private:
  RemoteTtsConfig config_;
  detail::SplitUrl url_;
  RateLimiter limiter_;
};

inline std::unique_ptr<SynthesisBackend> make_backend(std::string_view name) {
  if (name == "mock") return std::make_unique<MockTtsBackend>();
  if (name == "remote")
    return std::make_unique<RemoteTtsBackend>(RemoteTtsConfig::from_env());
  throw ConfigError("unknown backend \"" + std::string(name) +
                    "\" (expected mock or remote)");
}

}  // namespace slukit
