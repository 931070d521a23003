#pragma once

#include <functional>
#include <string_view>

namespace oeg::log {

using Sink = std::function<void(std::string_view)>;

// Warnings go to stderr unless a sink is installed. Passing an empty sink
// silences them.
void warn(std::string_view message);
void set_warning_sink(Sink sink);
void reset_warning_sink();

}  // namespace oeg::log
