#pragma once

#include <functional>
#include <string>

namespace mtt {

using LogSink = std::function<void(const std::string&)>;

/// Replaces the warning sink; the default writes to standard error.
void set_warning_sink(LogSink sink);
void log_warning(const std::string& message);

}  // namespace mtt
