#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/tools.hpp"

namespace toolfault {

// A self-contained task: prompt, scripted tools and the plan that solves it.
struct Task {
  std::string id;
  std::string prompt;
  ToolRegistry tools;
  TaskPlan plan;

  friend bool operator==(const Task&, const Task&) = default;
};

// Stable hash over prompt and tool definitions.
std::uint64_t task_hash(const Task& task);

void to_json(nlohmann::json& j, const Task& t);
void from_json(const nlohmann::json& j, Task& t);

// The bundled pool of 40 synthetic tasks with 2-3 steps each. Some steps use
// tools that have a same-capability alternative.
const std::vector<Task>& builtin_task_pool();

}  // namespace toolfault
