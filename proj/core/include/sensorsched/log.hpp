#pragma once

#include <functional>
#include <string_view>

namespace sensorsched {

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink (stderr by default) and returns the
/// previous one. Passing an empty handler silences warnings.
WarningHandler SetWarningHandler(WarningHandler handler);

void Warn(std::string_view message);

}  // namespace sensorsched
