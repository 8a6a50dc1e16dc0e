#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "slukit/common.hpp"
#include "slukit/taskio.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Precision / recall / F1
// ---------------------------------------------------------------------------

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0, never NaN.
inline PRF make_prf(double tp, double pred_total, double gold_total) {
  PRF out;
  out.precision = pred_total > 0.0 ? tp / pred_total : 0.0;
  out.recall = gold_total > 0.0 ? tp / gold_total : 0.0;
  const double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

namespace detail {

/// Multiset intersection size of two (unsorted) vectors.
template <typename T>
size_t multiset_intersection(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0, hits = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else { ++hits; ++i; ++j; }
  }
  return hits;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Entity F1 (micro-averaged over utterances)
// ---------------------------------------------------------------------------

/// True positives are the per-utterance multiset intersection of (tag, phrase)
/// pairs; duplicates must be predicted as many times as they occur.
inline PRF ner_micro_f1(const std::vector<NerPrediction>& preds,
                        const std::vector<NerPrediction>& golds) {
  if (preds.size() != golds.size())
    throw ArgumentError("ner_micro_f1: size mismatch: " +
                        std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(golds.size()) + " references");
  if (preds.empty()) throw ArgumentError("ner_micro_f1: empty input");
  double tp = 0, pred_total = 0, gold_total = 0;
  for (size_t u = 0; u < preds.size(); ++u) {
    tp += static_cast<double>(
        detail::multiset_intersection(preds[u].entities, golds[u].entities));
    pred_total += static_cast<double>(preds[u].entities.size());
    gold_total += static_cast<double>(golds[u].entities.size());
  }
  return make_prf(tp, pred_total, gold_total);
}

// ---------------------------------------------------------------------------
// Macro F1 over a closed label set
// ---------------------------------------------------------------------------

/// Averages per-label F1 over the labels of `label_set` that occur in the
/// gold or predicted sequence. Predictions outside the set (e.g. "" for an
/// unparseable output) count against recall only.
inline double macro_f1(const std::vector<std::string>& preds,
                       const std::vector<std::string>& golds,
                       const std::vector<std::string>& label_set) {
  if (preds.size() != golds.size())
    throw ArgumentError("macro_f1: size mismatch");
  if (preds.empty()) throw ArgumentError("macro_f1: empty input");
  double sum = 0.0;
  int used = 0;
  for (const std::string& label : label_set) {
    bool present = false;
    double tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      const bool g = golds[i] == label;
      const bool p = preds[i] == label;
      present = present || g || p;
      if (g && p) ++tp;
      else if (p) ++fp;
      else if (g) ++fn;
    }
    if (!present) continue;
    sum += make_prf(tp, tp + fp, tp + fn).f1;
    ++used;
  }
  if (used == 0) throw ArgumentError("macro_f1: no label from the set occurs");
  return sum / used;
}

// ---------------------------------------------------------------------------
// Accuracy
// ---------------------------------------------------------------------------

template <typename T, typename Eq>
double accuracy(const std::vector<T>& preds, const std::vector<T>& golds,
                Eq equal) {
  if (preds.size() != golds.size())
    throw ArgumentError("accuracy: size mismatch");
  if (preds.empty()) throw ArgumentError("accuracy: empty input");
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (equal(preds[i], golds[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

template <typename T>
double accuracy(const std::vector<T>& preds, const std::vector<T>& golds) {
  return accuracy(preds, golds, [](const T& a, const T& b) { return a == b; });
}

// ---------------------------------------------------------------------------
// BLEU-4
// ---------------------------------------------------------------------------

/// Lowercases, pads ASCII punctuation with spaces, splits on whitespace.
inline std::vector<std::string> bleu_tokenize(std::string_view text) {
  std::string spaced;
  spaced.reserve(text.size() * 2);
  for (char c : text) {
    const char l = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    const bool punct = (l >= '!' && l <= '/') || (l >= ':' && l <= '@') ||
                       (l >= '[' && l <= '`') || (l >= '{' && l <= '~');
    if (punct) {
      spaced.push_back(' ');
      spaced.push_back(l);
      spaced.push_back(' ');
    } else {
      spaced.push_back(l);
    }
  }
  std::vector<std::string> tokens;
  std::string tok;
  for (char c : spaced) {
    if (is_ascii_space(c)) {
      if (!tok.empty()) tokens.push_back(std::move(tok));
      tok.clear();
    } else {
      tok.push_back(c);
    }
  }
  if (!tok.empty()) tokens.push_back(std::move(tok));
  return tokens;
}

struct BleuReport {
  double score = 0.0;  // 0..100
  std::array<double, 4> precisions{0.0, 0.0, 0.0, 0.0};
  double brevity_penalty = 0.0;
  long long hyp_len = 0;
  long long ref_len = 0;
};

namespace detail {

inline void count_ngrams(const std::vector<std::string>& tokens, size_t n,
                         std::unordered_map<std::string, long long>& counts) {
  if (tokens.size() < n) return;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (size_t k = 0; k < n; ++k) {
      if (k > 0) key.push_back('\x1e');
      key += tokens[i + k];
    }
    ++counts[key];
  }
}

}  // namespace detail

/// Corpus BLEU with uniform 1/4 weights. Zero numerators are smoothed to
/// 1/(2*denominator); an order with no candidate n-grams at all contributes
/// a vacuous precision of 1. The reference length is the closest to the
/// hypothesis length per segment (ties favor the shorter).
inline BleuReport bleu4_report(
    const std::vector<std::string>& hypotheses,
    const std::vector<std::vector<std::string>>& references) {
  if (hypotheses.size() != references.size())
    throw ArgumentError("bleu4: size mismatch");
  if (hypotheses.empty()) throw ArgumentError("bleu4: empty input");

  std::array<long long, 4> clipped{0, 0, 0, 0};
  std::array<long long, 4> total{0, 0, 0, 0};
  long long hyp_len = 0;
  long long ref_len = 0;

  for (size_t seg = 0; seg < hypotheses.size(); ++seg) {
    if (references[seg].empty())
      throw ArgumentError("bleu4: segment " + std::to_string(seg) +
                          " has no references");
    const std::vector<std::string> hyp = bleu_tokenize(hypotheses[seg]);
    std::vector<std::vector<std::string>> refs;
    refs.reserve(references[seg].size());
    for (const std::string& r : references[seg]) refs.push_back(bleu_tokenize(r));

    hyp_len += static_cast<long long>(hyp.size());
    long long best_ref = static_cast<long long>(refs[0].size());
    for (const auto& r : refs) {
      const long long len = static_cast<long long>(r.size());
      const long long cur = std::llabs(best_ref - static_cast<long long>(hyp.size()));
      const long long cand = std::llabs(len - static_cast<long long>(hyp.size()));
      if (cand < cur || (cand == cur && len < best_ref)) best_ref = len;
    }
    ref_len += best_ref;

    for (size_t n = 1; n <= 4; ++n) {
      std::unordered_map<std::string, long long> hyp_counts;
      detail::count_ngrams(hyp, n, hyp_counts);
      std::unordered_map<std::string, long long> max_ref;
      for (const auto& r : refs) {
        std::unordered_map<std::string, long long> rc;
        detail::count_ngrams(r, n, rc);
        for (const auto& [key, cnt] : rc) {
          auto [it, fresh] = max_ref.emplace(key, cnt);
          if (!fresh && cnt > it->second) it->second = cnt;
        }
      }
      for (const auto& [key, cnt] : hyp_counts) {
        total[n - 1] += cnt;
        const auto it = max_ref.find(key);
        if (it != max_ref.end()) clipped[n - 1] += std::min(cnt, it->second);
      }
    }
  }

  BleuReport report;
  report.hyp_len = hyp_len;
  report.ref_len = ref_len;
  if (hyp_len == 0) return report;

  double log_sum = 0.0;
  for (size_t n = 0; n < 4; ++n) {
    double p;
    if (total[n] == 0)
      p = 1.0;
    else if (clipped[n] == 0)
      p = 1.0 / (2.0 * static_cast<double>(total[n]));
    else
      p = static_cast<double>(clipped[n]) / static_cast<double>(total[n]);
    report.precisions[n] = p;
    log_sum += 0.25 * std::log(p);
  }
  report.brevity_penalty =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  report.score = report.brevity_penalty * std::exp(log_sum) * 100.0;
  return report;
}

inline double bleu4(const std::vector<std::string>& hypotheses,
                    const std::vector<std::vector<std::string>>& references) {
  return bleu4_report(hypotheses, references).score;
}

// ---------------------------------------------------------------------------
// SLU slot F1
// ---------------------------------------------------------------------------

struct SluReport {
  PRF span;    // exact (slot, value) multiset match
  PRF word;    // bag-of-words partial credit
  PRF chars;   // bag-of-characters partial credit
  double slu_f1 = 0.0;  // mean of word and char F1
};

namespace detail {

template <typename T>
double bag_f1(std::vector<T> a, std::vector<T> b) {
  if (a.empty() && b.empty()) return 1.0;
  const size_t denom = a.size() + b.size();
  const size_t hits = multiset_intersection(std::move(a), std::move(b));
  if (hits == 0) return 0.0;
  return 2.0 * static_cast<double>(hits) / static_cast<double>(denom);
}

inline std::vector<std::string> word_bag(std::string_view value) {
  std::vector<std::string> words;
  std::string w;
  for (char c : value) {
    if (is_ascii_space(c)) {
      if (!w.empty()) words.push_back(std::move(w));
      w.clear();
    } else {
      w.push_back(c);
    }
  }
  if (!w.empty()) words.push_back(std::move(w));
  return words;
}

inline std::vector<uint32_t> char_bag(std::string_view value) {
  std::vector<uint32_t> cps;
  size_t i = 0;
  while (i < value.size()) {
    const uint32_t cp = utf8_next(value, i);
    if (!is_space_cp(cp)) cps.push_back(cp);
  }
  return cps;
}

}  // namespace detail

/// Slot scoring with partial credit. Exact spans use multiset matching; the
/// word and char variants greedily pair each predicted pair with the best
/// unmatched gold pair of the same slot label (by word-bag F1, then char-bag
/// F1, then gold order) and award that F1 as a fractional true positive.
inline SluReport slu_f1(const std::vector<IntentSlots>& preds,
                        const std::vector<IntentSlots>& golds) {
  if (preds.size() != golds.size())
    throw ArgumentError("slu_f1: size mismatch");
  if (preds.empty()) throw ArgumentError("slu_f1: empty input");

  double span_tp = 0, word_tp = 0, char_tp = 0;
  double pred_total = 0, gold_total = 0;

  for (size_t u = 0; u < preds.size(); ++u) {
    const auto& p = preds[u].slots;
    const auto& g = golds[u].slots;
    pred_total += static_cast<double>(p.size());
    gold_total += static_cast<double>(g.size());
    span_tp += static_cast<double>(detail::multiset_intersection(p, g));

    std::vector<bool> taken(g.size(), false);
    for (const SlotValue& pv : p) {
      const auto pw = detail::word_bag(pv.value);
      const auto pc = detail::char_bag(pv.value);
      int best = -1;
      double best_w = -1.0, best_c = -1.0;
      for (size_t j = 0; j < g.size(); ++j) {
        if (taken[j] || g[j].slot != pv.slot) continue;
        const double w = detail::bag_f1(pw, detail::word_bag(g[j].value));
        const double c = detail::bag_f1(pc, detail::char_bag(g[j].value));
        if (w > best_w || (w == best_w && c > best_c)) {
          best = static_cast<int>(j);
          best_w = w;
          best_c = c;
        }
      }
      if (best < 0) continue;
      taken[static_cast<size_t>(best)] = true;
      word_tp += best_w;
      char_tp += best_c;
    }
  }

  SluReport report;
  report.span = make_prf(span_tp, pred_total, gold_total);
  report.word = make_prf(word_tp, pred_total, gold_total);
  report.chars = make_prf(char_tp, pred_total, gold_total);
  report.slu_f1 = (report.word.f1 + report.chars.f1) / 2.0;
  return report;
}

// ---------------------------------------------------------------------------
// End-to-end scoring of a prediction file against references
// ---------------------------------------------------------------------------

enum class Task { ner, sa, qa, fsc, slurp };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::ner: return "ner";
    case Task::sa: return "sa";
    case Task::qa: return "qa";
    case Task::fsc: return "fsc";
    case Task::slurp: return "slurp";
  }
  throw ArgumentError("invalid Task value");
}

inline Task task_from_string(std::string_view s) {
  if (s == "ner") return Task::ner;
  if (s == "sa") return Task::sa;
  if (s == "qa") return Task::qa;
  if (s == "fsc") return Task::fsc;
  if (s == "slurp") return Task::slurp;
  throw ArgumentError("unknown task: " + std::string(s) +
                      " (expected ner|sa|qa|fsc|slurp)");
}

struct MetricReport {
  Task task = Task::ner;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, long long>> counts;

  json to_json() const {
    json m = json::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    json c = json::object();
    for (const auto& [k, v] : counts) c[k] = v;
    return json{{"task", to_string(task)}, {"metrics", m}, {"counts", c}};
  }

  std::string to_table() const {
    std::string out = "task: " + to_string(task) + "\n";
    char buf[64];
    for (const auto& [k, v] : metrics) {
      std::snprintf(buf, sizeof(buf), "%-20s %.4f\n", k.c_str(), v);
      out += buf;
    }
    for (const auto& [k, v] : counts) {
      std::snprintf(buf, sizeof(buf), "%-20s %lld\n", k.c_str(), v);
      out += buf;
    }
    return out;
  }
};

namespace detail {

struct PredRow {
  std::string id;
  std::string text;
};

inline std::vector<PredRow> load_predictions(const std::string& path) {
  std::vector<PredRow> rows;
  std::unordered_set<std::string> seen;
  for_each_jsonl_file(path, [&](size_t line, const json& j) {
    if (!j.is_object() || !j.contains("id") || !j.contains("text"))
      throw SchemaError(path + " line " + std::to_string(line) +
                        ": prediction rows need \"id\" and \"text\"");
    PredRow row{j.at("id").get<std::string>(), j.at("text").get<std::string>()};
    if (!seen.insert(row.id).second)
      throw SchemaError(path + ": duplicate prediction id " + row.id);
    rows.push_back(std::move(row));
  });
  return rows;
}

inline const json& ref_field(const json& j, const char* key,
                             const std::string& path, size_t line) {
  if (!j.contains(key))
    throw SchemaError(path + " line " + std::to_string(line) +
                      ": missing \"" + key + "\"");
  return j.at(key);
}

struct RefRow {
  std::string id;
  json body;
};

inline std::vector<RefRow> load_references(const std::string& path) {
  std::vector<RefRow> rows;
  std::unordered_set<std::string> seen;
  for_each_jsonl_file(path, [&](size_t line, const json& j) {
    if (!j.is_object())
      throw SchemaError(path + " line " + std::to_string(line) +
                        ": reference rows must be objects");
    const std::string id =
        ref_field(j, "id", path, line).get<std::string>();
    if (!seen.insert(id).second)
      throw SchemaError(path + ": duplicate reference id " + id);
    rows.push_back({id, j});
  });
  return rows;
}

/// Reorders predictions to reference order; both id sets must be identical.
inline std::vector<std::string> align_predictions(
    const std::vector<PredRow>& preds, const std::vector<RefRow>& refs,
    const std::string& preds_path, const std::string& refs_path) {
  std::unordered_map<std::string, const std::string*> by_id;
  for (const PredRow& p : preds) by_id.emplace(p.id, &p.text);
  std::vector<std::string> ordered;
  ordered.reserve(refs.size());
  for (const RefRow& r : refs) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end())
      throw AlignmentError(preds_path + ": no prediction for reference id " +
                           r.id);
    ordered.push_back(*it->second);
    by_id.erase(it);
  }
  if (!by_id.empty())
    throw AlignmentError(refs_path + ": no reference for prediction id " +
                         by_id.begin()->first);
  return ordered;
}

}  // namespace detail

/// Scores a prediction JSONL ({"id", "text"}) against a reference JSONL whose
/// per-row schema depends on the task. Ids must match one-to-one.
inline MetricReport evaluate_run(Task task, const std::string& preds_path,
                                 const std::string& refs_path) {
  const auto preds = detail::load_predictions(preds_path);
  const auto refs = detail::load_references(refs_path);
  if (refs.empty()) throw SchemaError(refs_path + ": no reference rows");
  const std::vector<std::string> texts =
      detail::align_predictions(preds, refs, preds_path, refs_path);
  const long long n = static_cast<long long>(refs.size());

  MetricReport report;
  report.task = task;

  switch (task) {
    case Task::ner: {
      std::vector<NerPrediction> hyp, gold;
      long long dropped_total = 0;
      for (size_t i = 0; i < refs.size(); ++i) {
        int dropped = 0;
        hyp.push_back(parse_ner(texts[i], &dropped));
        dropped_total += dropped;
        NerPrediction g;
        for (const json& e : refs[i].body.at("entities")) {
          g.entities.push_back(Entity{
              to_lower_ascii(trim(e.at("tag").get<std::string>())),
              trim(e.at("phrase").get<std::string>())});
        }
        gold.push_back(std::move(g));
      }
      const PRF prf = ner_micro_f1(hyp, gold);
      report.metrics = {{"precision", prf.precision},
                        {"recall", prf.recall},
                        {"f1", prf.f1}};
      report.counts = {{"examples", n}, {"dropped_fragments", dropped_total}};
      break;
    }
    case Task::sa: {
      const std::vector<std::string> label_set = {"negative", "neutral",
                                                  "positive"};
      std::vector<std::string> hyp, gold;
      long long unparseable = 0;
      for (size_t i = 0; i < refs.size(); ++i) {
        const std::string label = refs[i].body.at("label").get<std::string>();
        if (!sentiment_from_string(label))
          throw SchemaError(refs_path + ": unknown sentiment label \"" +
                            label + "\" for id " + refs[i].id);
        gold.push_back(label);
        if (auto parsed = parse_sentiment(texts[i])) {
          hyp.push_back(to_string(*parsed));
        } else {
          hyp.push_back("");
          ++unparseable;
        }
      }
      report.metrics = {{"macro_f1", macro_f1(hyp, gold, label_set)},
                        {"accuracy", accuracy(hyp, gold)}};
      report.counts = {{"examples", n}, {"unparseable", unparseable}};
      break;
    }
    case Task::qa: {
      std::vector<std::vector<std::string>> answer_sets;
      for (const auto& r : refs) {
        std::vector<std::string> answers;
        for (const json& a : r.body.at("answers"))
          answers.push_back(a.get<std::string>());
        if (answers.empty())
          throw SchemaError(refs_path + ": id " + r.id + " has no answers");
        answer_sets.push_back(std::move(answers));
      }
      const BleuReport bleu = bleu4_report(texts, answer_sets);
      size_t exact = 0;
      for (size_t i = 0; i < texts.size(); ++i) {
        const std::string norm = normalize_answer(texts[i]);
        for (const std::string& a : answer_sets[i]) {
          if (normalize_answer(a) == norm) {
            ++exact;
            break;
          }
        }
      }
      report.metrics = {
          {"bleu4", bleu.score},
          {"exact_match",
           static_cast<double>(exact) / static_cast<double>(texts.size())},
          {"brevity_penalty", bleu.brevity_penalty}};
      report.counts = {{"examples", n},
                       {"hyp_len", bleu.hyp_len},
                       {"ref_len", bleu.ref_len}};
      break;
    }
    case Task::fsc: {
      std::vector<DacPrediction> hyp, gold;
      for (size_t i = 0; i < refs.size(); ++i) {
        hyp.push_back(parse_dac(texts[i]));
        gold.push_back(DacPrediction{
            refs[i].body.at("action").get<std::string>(),
            refs[i].body.at("object").get<std::string>(),
            refs[i].body.at("location").get<std::string>()});
      }
      report.metrics = {
          {"accuracy", accuracy(hyp, gold)},
          {"action_accuracy",
           accuracy(hyp, gold,
                    [](const DacPrediction& a, const DacPrediction& b) {
                      return a.action == b.action;
                    })},
          {"object_accuracy",
           accuracy(hyp, gold,
                    [](const DacPrediction& a, const DacPrediction& b) {
                      return a.object == b.object;
                    })},
          {"location_accuracy",
           accuracy(hyp, gold,
                    [](const DacPrediction& a, const DacPrediction& b) {
                      return a.location == b.location;
                    })}};
      report.counts = {{"examples", n}};
      break;
    }
    case Task::slurp: {
      std::vector<IntentSlots> hyp, gold;
      long long dropped_total = 0;
      for (size_t i = 0; i < refs.size(); ++i) {
        int dropped = 0;
        hyp.push_back(parse_intent_slots(texts[i], &dropped));
        dropped_total += dropped;
        IntentSlots g;
        g.scenario = refs[i].body.at("scenario").get<std::string>();
        g.action = refs[i].body.at("action").get<std::string>();
        for (const json& s : refs[i].body.at("slots")) {
          g.slots.push_back(SlotValue{s.at("slot").get<std::string>(),
                                      s.at("value").get<std::string>()});
        }
        gold.push_back(std::move(g));
      }
      const SluReport slu = slu_f1(hyp, gold);
      report.metrics = {
          {"intent_accuracy",
           accuracy(hyp, gold, [](const IntentSlots& a, const IntentSlots& b) {
             return a.scenario == b.scenario && a.action == b.action;
           })},
          {"scenario_accuracy",
           accuracy(hyp, gold, [](const IntentSlots& a, const IntentSlots& b) {
             return a.scenario == b.scenario;
           })},
          {"action_accuracy",
           accuracy(hyp, gold, [](const IntentSlots& a, const IntentSlots& b) {
             return a.action == b.action;
           })},
          {"slu_f1", slu.slu_f1},
          {"span_f1", slu.span.f1},
          {"word_f1", slu.word.f1},
          {"char_f1", slu.chars.f1}};
      report.counts = {{"examples", n}, {"dropped_fragments", dropped_total}};
      break;
    }
  }
  return report;
}

}  // namespace slukit
