#include "docloop/events.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "docloop/error.hpp"

namespace docloop {

namespace {

std::string format_event_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ev-%012zu", n);
  return buf;
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::SendQuery: return "SendQuery";
    case EventKind::ClickResult: return "ClickResult";
    case EventKind::SelectBlock: return "SelectBlock";
    case EventKind::DeselectBlock: return "DeselectBlock";
    case EventKind::NavigatePage: return "NavigatePage";
    case EventKind::AddDocument: return "AddDocument";
    case EventKind::Like: return "Like";
    case EventKind::Dislike: return "Dislike";
    case EventKind::Regenerate: return "Regenerate";
  }
  return "";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::SendQuery, EventKind::ClickResult, EventKind::SelectBlock, EventKind::DeselectBlock,
                 EventKind::NavigatePage, EventKind::AddDocument, EventKind::Like, EventKind::Dislike,
                 EventKind::Regenerate}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

void to_json(Json& j, const InteractionEvent& e) {
  j = Json{{"event_id", e.event_id}, {"session_id", e.session_id}, {"user_id", e.user_id},
           {"kind", to_string(e.kind)}, {"payload", e.payload},       {"timestamp", e.timestamp}};
}

void from_json(const Json& j, InteractionEvent& e) {
  e.event_id = j.at("event_id").get<std::string>();
  e.session_id = j.at("session_id").get<std::string>();
  e.user_id = j.value("user_id", std::string());
  auto kind = parse_event_kind(j.at("kind").get<std::string>());
  if (!kind) throw schema_error("unknown event kind " + j.at("kind").dump());
  e.kind = *kind;
  e.payload = j.value("payload", Json::object());
  e.timestamp = j.at("timestamp").get<std::int64_t>();
}

bool event_before(const InteractionEvent& a, const InteractionEvent& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.event_id < b.event_id;
}

EventLog::EventLog(std::filesystem::path path, std::shared_ptr<Clock> clock)
    : path_(std::move(path)), clock_(std::move(clock)) {}

void EventLog::load() {
  std::lock_guard lock(mutex_);
  events_.clear();
  by_session_.clear();
  last_timestamp_ = 0;
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    InteractionEvent e = Json::parse(line).get<InteractionEvent>();
    last_timestamp_ = std::max(last_timestamp_, e.timestamp);
    by_session_[e.session_id].push_back(events_.size());
    events_.push_back(std::move(e));
  }
}

InteractionEvent EventLog::append(InteractionEvent event) {
  std::lock_guard lock(mutex_);
  event.event_id = format_event_id(events_.size() + 1);
  event.timestamp = std::max(last_timestamp_, clock_->now_ms());
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::Internal, "cannot append to " + path_.string());
    out << Json(event).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Internal, "short write to " + path_.string());
  }
  last_timestamp_ = event.timestamp;
  by_session_[event.session_id].push_back(events_.size());
  events_.push_back(event);
  return event;
}

std::vector<InteractionEvent> EventLog::for_session(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  std::vector<InteractionEvent> out;
  auto it = by_session_.find(session_id);
  if (it == by_session_.end()) return out;
  for (std::size_t i : it->second) out.push_back(events_[i]);
  return out;
}

std::vector<InteractionEvent> EventLog::all() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

std::string EventLog::export_jsonl() const {
  std::lock_guard lock(mutex_);
  std::ostringstream os;
  for (const auto& e : events_) os << Json(e).dump() << '\n';
  return os.str();
}

}  // namespace docloop
