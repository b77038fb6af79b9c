#include "mqttz/event_log.hpp"

#include <chrono>

namespace mqttz {

void EventLog::emit(std::string_view event, nlohmann::json fields) {
  std::lock_guard lock(mu_);
  if (!sink_) return;
  auto now = std::chrono::duration_cast<std::chrono::microseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count();
  nlohmann::json record = {{"ts_us", now}, {"event", event}};
  if (fields.is_object()) record.update(fields);
  *sink_ << record.dump() << '\n';
  sink_->flush();
}

void EventLog::set_sink(std::ostream* sink) {
  std::lock_guard lock(mu_);
  sink_ = sink;
}

}  // namespace mqttz
