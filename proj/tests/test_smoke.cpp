#include <catch2/catch_amalgamated.hpp>

#include "slukit/audio.hpp"
#include "slukit/common.hpp"
#include "slukit/conditioning.hpp"
#include "slukit/corpus.hpp"
#include "slukit/filter.hpp"
#include "slukit/ingest.hpp"
#include "slukit/metrics.hpp"
#include "slukit/taskio.hpp"
#include "slukit/tts.hpp"

TEST_CASE("headers compile and basic calls work") {
  using namespace slukit;
  CHECK(fnv1a("") == 14695981039346656037ULL);
  CHECK(default_catalog().voices.size() == 79);
  CHECK(normalize_answer("The  Answer!") == "answer");
  AudioClip clip;
  clip.samples = {0.0f, 0.5f};
  CHECK(clip.duration_s() == Catch::Approx(2.0 / 16000.0));
}
