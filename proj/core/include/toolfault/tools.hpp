#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace toolfault {

enum class ParamType { String, Number, Boolean, Object, Array };

std::string_view to_string(ParamType t) noexcept;
ParamType parse_param_type(std::string_view label);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::String;
  bool required = true;

  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  // Tools sharing a non-empty capability are interchangeable for SwitchTool.
  std::string capability;
  std::vector<ParamSpec> parameters;
  // canonical_call_key(name, args) -> response text.
  std::map<std::string, std::string> scripted_responses;

  friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

void to_json(nlohmann::json& j, const ToolSpec& t);
void from_json(const nlohmann::json& j, ToolSpec& t);

// Tool name plus the argument object with sorted keys and no whitespace.
std::string canonical_call_key(std::string_view tool, const nlohmann::json& arguments);

// Required parameters absent from `arguments` (or all of them when
// `arguments` is not an object).
std::vector<std::string> missing_required(const ToolSpec& tool, const nlohmann::json& arguments);

class ToolRegistry {
 public:
  ToolRegistry() = default;
  explicit ToolRegistry(std::vector<ToolSpec> tools);

  // Throws Error("DuplicateTool").
  void add(ToolSpec tool);

  const ToolSpec* find(std::string_view name) const noexcept;
  const std::vector<ToolSpec>& tools() const noexcept { return tools_; }
  bool empty() const noexcept { return tools_.empty(); }
  std::size_t size() const noexcept { return tools_.size(); }

  // Other tools with the same capability, sorted by name.
  std::vector<const ToolSpec*> alternatives(std::string_view name) const;

  nlohmann::json to_json() const;
  static ToolRegistry from_json(const nlohmann::json& j);

  friend bool operator==(const ToolRegistry&, const ToolRegistry&) = default;

 private:
  std::vector<ToolSpec> tools_;
};

// What a task asks for: the calls that complete it, in order. Agents use it
// as the plan; the grader uses it to map calls to logical steps.
struct TaskStep {
  std::string tool;
  nlohmann::json arguments = nlohmann::json::object();
  // Response fields the step is expected to produce.
  std::vector<std::string> expected_fields;

  friend bool operator==(const TaskStep&, const TaskStep&) = default;
};

struct TaskPlan {
  std::vector<TaskStep> steps;

  friend bool operator==(const TaskPlan&, const TaskPlan&) = default;
};

void to_json(nlohmann::json& j, const TaskStep& s);
void from_json(const nlohmann::json& j, TaskStep& s);
void to_json(nlohmann::json& j, const TaskPlan& p);
void from_json(const nlohmann::json& j, TaskPlan& p);

}  // namespace toolfault
