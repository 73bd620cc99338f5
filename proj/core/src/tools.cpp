#include "toolfault/tools.hpp"

#include <algorithm>
#include <array>

#include "toolfault/error.hpp"

namespace toolfault {

namespace {

constexpr std::array<std::string_view, 5> kTypeNames = {"string", "number", "boolean", "object",
                                                        "array"};

}  // namespace

std::string_view to_string(ParamType t) noexcept { return kTypeNames[static_cast<std::size_t>(t)]; }

ParamType parse_param_type(std::string_view label) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == label) return static_cast<ParamType>(i);
  }
  throw ParseError("unknown parameter type '" + std::string(label) + "'");
}

void to_json(nlohmann::json& j, const ToolSpec& t) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : t.parameters) {
    params.push_back({{"name", p.name}, {"type", to_string(p.type)}, {"required", p.required}});
  }
  j = {{"name", t.name},
       {"description", t.description},
       {"capability", t.capability},
       {"parameters", params},
       {"scripted_responses", t.scripted_responses}};
}

void from_json(const nlohmann::json& j, ToolSpec& t) {
  t.name = j.at("name").get<std::string>();
  t.description = j.value("description", "");
  t.capability = j.value("capability", "");
  t.parameters.clear();
  for (const auto& p : j.value("parameters", nlohmann::json::array())) {
    t.parameters.push_back({p.at("name").get<std::string>(),
                            parse_param_type(p.value("type", "string")), p.value("required", true)});
  }
  t.scripted_responses =
      j.value("scripted_responses", std::map<std::string, std::string>{});
}

std::string canonical_call_key(std::string_view tool, const nlohmann::json& arguments) {
  // nlohmann::json objects are std::map backed, so dump() is key-sorted.
  return std::string(tool) + "|" + arguments.dump();
}

std::vector<std::string> missing_required(const ToolSpec& tool, const nlohmann::json& arguments) {
  std::vector<std::string> missing;
  for (const auto& p : tool.parameters) {
    if (!p.required) continue;
    if (!arguments.is_object() || !arguments.contains(p.name) || arguments.at(p.name).is_null()) {
      missing.push_back(p.name);
    }
  }
  return missing;
}

ToolRegistry::ToolRegistry(std::vector<ToolSpec> tools) {
  for (auto& t : tools) add(std::move(t));
}

void ToolRegistry::add(ToolSpec tool) {
  if (find(tool.name) != nullptr) {
    throw Error("DuplicateTool", "tool '" + tool.name + "' registered twice");
  }
  tools_.push_back(std::move(tool));
}

const ToolSpec* ToolRegistry::find(std::string_view name) const noexcept {
  for (const auto& t : tools_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<const ToolSpec*> ToolRegistry::alternatives(std::string_view name) const {
  std::vector<const ToolSpec*> out;
  const ToolSpec* self = find(name);
  if (self == nullptr || self->capability.empty()) return out;
  for (const auto& t : tools_) {
    if (t.name != name && t.capability == self->capability) out.push_back(&t);
  }
  std::sort(out.begin(), out.end(),
            [](const ToolSpec* a, const ToolSpec* b) { return a->name < b->name; });
  return out;
}

nlohmann::json ToolRegistry::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : tools_) arr.push_back(t);
  return arr;
}

ToolRegistry ToolRegistry::from_json(const nlohmann::json& j) {
  return ToolRegistry(j.get<std::vector<ToolSpec>>());
}

void to_json(nlohmann::json& j, const TaskStep& s) {
  j = {{"tool", s.tool}, {"arguments", s.arguments}, {"expected_fields", s.expected_fields}};
}

void from_json(const nlohmann::json& j, TaskStep& s) {
  s.tool = j.at("tool").get<std::string>();
  s.arguments = j.value("arguments", nlohmann::json::object());
  s.expected_fields = j.value("expected_fields", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const TaskPlan& p) { j = {{"steps", p.steps}}; }

void from_json(const nlohmann::json& j, TaskPlan& p) {
  p.steps = j.at("steps").get<std::vector<TaskStep>>();
}

}  // namespace toolfault
