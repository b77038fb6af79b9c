#pragma once

#include <mutex>
#include <ostream>
#include <string_view>

#include <json.hpp>

namespace mqttz {

// One JSON object per line: {"ts_us": <wall clock>, "event": "...", ...fields}.
class EventLog {
 public:
  explicit EventLog(std::ostream* sink = nullptr) : sink_(sink) {}

  void emit(std::string_view event, nlohmann::json fields = nlohmann::json::object());
  void set_sink(std::ostream* sink);

 private:
  std::mutex mu_;
  std::ostream* sink_;
};

}  // namespace mqttz
