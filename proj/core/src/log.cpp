#include "sensorsched/log.hpp"

#include <iostream>
#include <mutex>

namespace sensorsched {

namespace {

std::mutex& HandlerMutex() {
  static std::mutex mu;
  return mu;
}

WarningHandler& Handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

}  // namespace

WarningHandler SetWarningHandler(WarningHandler handler) {
  std::lock_guard lock(HandlerMutex());
  std::swap(Handler(), handler);
  return handler;
}

void Warn(std::string_view message) {
  std::lock_guard lock(HandlerMutex());
  if (Handler()) Handler()(message);
}

}  // namespace sensorsched
