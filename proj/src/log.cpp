#include "oeg/log.hpp"

#include <iostream>
#include <mutex>

namespace oeg::log {
namespace {

std::mutex sink_mutex;
bool use_default = true;
Sink custom_sink;

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  if (use_default) {
    std::cerr << "warning: " << message << '\n';
  } else if (custom_sink) {
    custom_sink(message);
  }
}

void set_warning_sink(Sink sink) {
  std::lock_guard lock(sink_mutex);
  use_default = false;
  custom_sink = std::move(sink);
}

void reset_warning_sink() {
  std::lock_guard lock(sink_mutex);
  use_default = true;
  custom_sink = nullptr;
}

}  // namespace oeg::log
