#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace visprompt {

/// The fifteen image-processing tasks: eleven restorations, two
/// enhancements and two edge operators.
enum class TaskId {
  GaussNoise,
  PoissonNoise,
  SpNoise,
  GaussBlur,
  Jpeg,
  Ringing,
  Rl,
  Inpaint,
  RainSimple,
  RainComplex,
  Haze,
  Lowlight,
  Llf,
  Canny,
  Laplacian,
};

inline constexpr std::array<TaskId, 15> kAllTasks = {
    TaskId::GaussNoise, TaskId::PoissonNoise, TaskId::SpNoise,    TaskId::GaussBlur,
    TaskId::Jpeg,       TaskId::Ringing,      TaskId::Rl,         TaskId::Inpaint,
    TaskId::RainSimple, TaskId::RainComplex,  TaskId::Haze,       TaskId::Lowlight,
    TaskId::Llf,        TaskId::Canny,        TaskId::Laplacian,
};

std::string_view task_name(TaskId task);
std::optional<TaskId> parse_task(std::string_view name);
/// Like parse_task but throws ParameterError on unknown names.
TaskId task_from_name(std::string_view name);

/// True for the tasks whose answer is a clean image (restoration direction).
bool is_restoration(TaskId task);

}  // namespace visprompt
