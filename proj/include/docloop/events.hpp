#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "docloop/clock.hpp"
#include "docloop/model.hpp"

namespace docloop {

enum class EventKind {
  SendQuery,
  ClickResult,
  SelectBlock,
  DeselectBlock,
  NavigatePage,
  AddDocument,
  Like,
  Dislike,
  Regenerate
};

const char* to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

// Payloads by kind:
//   SendQuery {query, message_id}        ClickResult {message_id, block_id, rank}
//   SelectBlock / DeselectBlock {block_id}
//   NavigatePage {document_id, page_index}
//   AddDocument {document_id}            Like / Dislike {message_id}
//   Regenerate {message_id, new_message_id}
struct InteractionEvent {
  std::string event_id;
  std::string session_id;
  std::string user_id;
  EventKind kind = EventKind::SendQuery;
  Json payload = Json::object();
  std::int64_t timestamp = 0;

  bool operator==(const InteractionEvent&) const = default;
};

void to_json(Json& j, const InteractionEvent& e);
void from_json(const Json& j, InteractionEvent& e);

// (timestamp, event_id) order.
bool event_before(const InteractionEvent& a, const InteractionEvent& b);

// Append-only interaction log shared by all sessions, mirrored line by line
// to a JSON Lines file. Event ids are zero-padded sequence numbers and
// timestamps never decrease, so file order is the total order.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path = {}, std::shared_ptr<Clock> clock = system_clock());

  void load();
  // Assigns event_id and timestamp.
  InteractionEvent append(InteractionEvent event);
  std::vector<InteractionEvent> for_session(const std::string& session_id) const;
  std::vector<InteractionEvent> all() const;
  std::size_t size() const;
  // Exact JSON Lines bytes of the log.
  std::string export_jsonl() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mutex_;
  std::vector<InteractionEvent> events_;
  std::map<std::string, std::vector<std::size_t>> by_session_;
  std::int64_t last_timestamp_ = 0;
};

}  // namespace docloop
