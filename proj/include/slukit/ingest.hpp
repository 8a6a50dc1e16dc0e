#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "slukit/common.hpp"

namespace slukit {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct SuperNIInstance {
  std::string id;
  std::string input;
  std::vector<std::string> output;

  friend bool operator==(const SuperNIInstance&, const SuperNIInstance&) =
      default;
};

/// A Super-NaturalInstructions task file before unification: the task
/// definition paragraphs become the instruction, instances become examples.
struct RawSuperNITask {
  std::string task_name;
  std::vector<std::string> definition;
  std::vector<SuperNIInstance> instances;

  friend bool operator==(const RawSuperNITask&, const RawSuperNITask&) =
      default;
};

/// The normalized instruction/input/output triple both source datasets map
/// onto. Text is canonicalized at construction; instruction and output are
/// non-empty after trimming.
struct UnifiedExample {
  std::string id;
  std::string instruction;
  std::string input;
  std::string output;
  Source source = Source::superni;

  friend bool operator==(const UnifiedExample&, const UnifiedExample&) =
      default;
};

inline void to_json(json& j, const UnifiedExample& e) {
  j = json{{"id", e.id},
           {"instruction", e.instruction},
           {"input", e.input},
           {"output", e.output},
           {"source", to_string(e.source)}};
}

inline void from_json(const json& j, UnifiedExample& e) {
  e.id = j.at("id").get<std::string>();
  e.instruction = j.at("instruction").get<std::string>();
  e.input = j.at("input").get<std::string>();
  e.output = j.at("output").get<std::string>();
  e.source = source_from_string(j.at("source").get<std::string>());
}

enum class OutputPolicy { first, all };

// ---------------------------------------------------------------------------
// Super-NaturalInstructions parsing
// ---------------------------------------------------------------------------

namespace detail {

/// Task files in the wild capitalize their keys ("Definition", "Instances");
/// accept both spellings.
inline const json* find_key(const json& obj, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto it = obj.find(name);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

inline RawSuperNITask parse_superni_task(const json& obj,
                                         std::string_view fallback_task_name) {
  if (!obj.is_object())
    throw SchemaError("superni task must be a JSON object");

  RawSuperNITask task;
  if (const json* name = find_key(obj, {"task_name", "name", "Name"})) {
    task.task_name = name->get<std::string>();
  } else {
    task.task_name = std::string(fallback_task_name);
  }
  if (task.task_name.empty())
    throw SchemaError("superni task: missing key \"task_name\"");

  const json* definition = find_key(obj, {"Definition", "definition"});
  if (!definition)
    throw SchemaError("superni task \"" + task.task_name +
                      "\": missing key \"Definition\"");
  if (definition->is_string()) {
    task.definition.push_back(definition->get<std::string>());
  } else if (definition->is_array()) {
    for (const json& p : *definition)
      task.definition.push_back(p.get<std::string>());
  } else {
    throw SchemaError("superni task \"" + task.task_name +
                      "\": \"Definition\" must be a string or array");
  }

  const json* instances = find_key(obj, {"Instances", "instances"});
  if (!instances)
    throw SchemaError("superni task \"" + task.task_name +
                      "\": missing key \"Instances\"");
  if (!instances->is_array() || instances->empty())
    throw SchemaError("superni task \"" + task.task_name +
                      "\": \"Instances\" must be a non-empty array");

  size_t index = 0;
  for (const json& inst : *instances) {
    SuperNIInstance out;
    if (const json* id = find_key(inst, {"id", "Id"}))
      out.id = id->get<std::string>();
    else
      out.id = task.task_name + "-" + std::to_string(index);
    const json* input = find_key(inst, {"input", "Input"});
    if (!input)
      throw SchemaError("superni task \"" + task.task_name + "\" instance " +
                        std::to_string(index) + ": missing key \"input\"");
    out.input = input->get<std::string>();
    const json* output = find_key(inst, {"output", "Output"});
    if (!output)
      throw SchemaError("superni task \"" + task.task_name + "\" instance " +
                        std::to_string(index) + ": missing key \"output\"");
    if (output->is_string()) {
      out.output.push_back(output->get<std::string>());
    } else if (output->is_array()) {
      for (const json& o : *output) out.output.push_back(o.get<std::string>());
    } else {
      throw SchemaError("superni task \"" + task.task_name + "\" instance " +
                        std::to_string(index) +
                        ": \"output\" must be a string or array");
    }
    task.instances.push_back(std::move(out));
    ++index;
  }
  return task;
}

}  // namespace detail

/// Parses one Super-NaturalInstructions task file (a single task object or
/// an array of them). Instances are retained verbatim; no filtering happens
/// here. `fallback_task_name` covers files that keep the task name in the
/// filename only.
inline std::vector<RawSuperNITask> parse_superni(
    std::string_view document, std::string_view fallback_task_name = "") {
  json doc = parse_json(document);
  std::vector<RawSuperNITask> tasks;
  if (doc.is_array()) {
    size_t i = 0;
    for (const json& obj : doc) {
      std::string fb = fallback_task_name.empty()
                           ? ""
                           : std::string(fallback_task_name) + "-" +
                                 std::to_string(i);
      tasks.push_back(detail::parse_superni_task(obj, fb));
      ++i;
    }
  } else {
    tasks.push_back(detail::parse_superni_task(doc, fallback_task_name));
  }
  return tasks;
}

/// Flattens a task into UnifiedExamples: instruction = definition paragraphs
/// joined by a blank line, one example per instance (policy=first) or per
/// output string (policy=all). Instances whose outputs are all empty are
/// dropped with reason empty_output, never errored.
inline std::vector<UnifiedExample> unify_superni(
    const RawSuperNITask& task, OutputPolicy policy = OutputPolicy::first,
    std::vector<DropRecord>* drops = nullptr) {
  std::string instruction;
  for (size_t i = 0; i < task.definition.size(); ++i) {
    if (i > 0) instruction += "\n\n";
    instruction += task.definition[i];
  }
  instruction = trim(canonicalize_text(instruction));
  if (instruction.empty())
    throw SchemaError("superni task \"" + task.task_name +
                      "\": empty definition");

  std::vector<UnifiedExample> out;
  for (const SuperNIInstance& inst : task.instances) {
    const std::string base_id = "superni/" + task.task_name + "/" + inst.id;

    std::vector<std::string> outputs;
    for (const std::string& o : inst.output) {
      std::string t = trim(canonicalize_text(o));
      if (!t.empty()) outputs.push_back(std::move(t));
    }
    if (outputs.empty()) {
      if (drops)
        drops->push_back({base_id, DropReason::empty_output,
                          "instance has no non-empty output string"});
      continue;
    }
    if (policy == OutputPolicy::first) outputs.resize(1);

    for (size_t k = 0; k < outputs.size(); ++k) {
      UnifiedExample e;
      e.id = outputs.size() > 1 ? base_id + "#o" + std::to_string(k) : base_id;
      e.instruction = instruction;
      e.input = trim(canonicalize_text(inst.input));
      e.output = outputs[k];
      e.source = Source::superni;
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alpaca parsing
// ---------------------------------------------------------------------------

/// Parses a Stanford-Alpaca style file: a JSON array of
/// {instruction, input, output} records. `input` is optional and maps to "".
inline std::vector<UnifiedExample> parse_alpaca(
    std::string_view document, std::vector<DropRecord>* drops = nullptr) {
  json doc = parse_json(document);
  if (!doc.is_array())
    throw SchemaError("alpaca document: top level must be a JSON array");

  std::vector<UnifiedExample> out;
  size_t index = 0;
  for (const json& rec : doc) {
    const std::string id = "alpaca/" + std::to_string(index);
    if (!rec.is_object())
      throw SchemaError("alpaca element " + std::to_string(index) +
                        ": must be an object");
    if (!rec.contains("instruction"))
      throw SchemaError("alpaca element " + std::to_string(index) +
                        ": missing key \"instruction\"");
    if (!rec.contains("output"))
      throw SchemaError("alpaca element " + std::to_string(index) +
                        ": missing key \"output\"");

    UnifiedExample e;
    e.id = id;
    e.instruction = trim(canonicalize_text(rec.at("instruction").get<std::string>()));
    e.input = trim(canonicalize_text(rec.value("input", std::string())));
    e.output = trim(canonicalize_text(rec.at("output").get<std::string>()));
    e.source = Source::alpaca;
    ++index;

    if (e.instruction.empty())
      throw SchemaError("alpaca element " + std::to_string(index - 1) +
                        ": empty instruction");
    if (e.output.empty()) {
      if (drops)
        drops->push_back({id, DropReason::empty_output, "output is empty"});
      continue;
    }
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical JSONL form
// ---------------------------------------------------------------------------

inline void validate_unique_ids(const std::vector<UnifiedExample>& examples) {
  std::unordered_set<std::string_view> seen;
  for (const UnifiedExample& e : examples)
    if (!seen.insert(e.id).second)
      throw SchemaError("duplicate example id: \"" + e.id + "\"");
}

inline void write_unified_jsonl(const std::filesystem::path& path,
                                const std::vector<UnifiedExample>& examples) {
  write_jsonl_file(path, examples);
}

inline std::vector<UnifiedExample> read_unified_jsonl(
    const std::filesystem::path& path) {
  std::vector<UnifiedExample> out;
  for_each_jsonl_file(path, [&](size_t line_no, const json& j) {
    try {
      out.push_back(j.get<UnifiedExample>());
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ": line " + std::to_string(line_no) +
                        ": " + e.what());
    }
  });
  validate_unique_ids(out);
  return out;
}

}  // namespace slukit
