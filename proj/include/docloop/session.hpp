#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "docloop/block_store.hpp"
#include "docloop/events.hpp"
#include "docloop/retrievers.hpp"

namespace docloop {

enum class MessageRole { User, Retrieval, Assistant };

const char* to_string(MessageRole role);

struct Citation {
  std::string block_id;
  std::int64_t revision = 0;

  bool operator==(const Citation&) const = default;
};

struct ChatMessage {
  std::string message_id;
  MessageRole role = MessageRole::User;
  std::string content;
  std::optional<RetrievalResult> retrieval;  // retrieval messages only
  std::vector<Citation> citations;           // assistant messages: blocks rendered into the prompt
  std::string query;                         // the user query this message answers or retrieves for
  std::string retrieval_message_id;          // assistant messages: the turn's retrieval
  std::string regenerated_from;
  bool error = false;
  std::int64_t created_at = 0;

  bool operator==(const ChatMessage&) const = default;
};

void to_json(Json& j, const ChatMessage& m);
void from_json(const Json& j, ChatMessage& m);

struct ChatSession {
  std::string session_id;
  std::string user_id;
  std::string strategy_name;
  std::set<std::string> initial_corpus;
  std::set<std::string> corpus;
  std::vector<ChatMessage> messages;
  std::vector<std::string> staging;     // first-selection order
  std::map<std::string, bool> ratings;  // message_id -> liked, last wins
  std::optional<int> satisfaction;      // 1..5
  std::int64_t created_at = 0;

  const ChatMessage* find_message(const std::string& message_id) const;
  bool operator==(const ChatSession&) const = default;
};

void to_json(Json& j, const ChatSession& s);
void from_json(const Json& j, ChatSession& s);

// State derived purely from a session's events.
struct SessionFold {
  std::vector<std::string> staging;
  std::set<std::string> corpus;
  std::map<std::string, bool> ratings;
};

SessionFold fold_events(const std::set<std::string>& initial_corpus, std::span<const InteractionEvent> events);

// "[source: <source_name> p.<page+1> <block_type>]\n<text_repr>"
std::string render_block_segment(const BlockRef& ref);

std::string build_answer_prompt(const std::vector<BlockRef>& blocks, const std::string& query);

struct SessionOptions {
  std::size_t k = kDefaultTopK;
  std::size_t answer_max_chars = 4000;
  std::filesystem::path snapshot_dir;  // empty = memory only
};

// Operations on one session are serialized by a per-session mutex; distinct
// sessions proceed in parallel. Every state change is recorded in the event
// log first and the cached state is then refolded from it.
class SessionManager {
 public:
  SessionManager(BlockStore& store, const VectorIndex& index, EventLog& log, std::shared_ptr<LlmAdapter> llm,
                 std::shared_ptr<Clock> clock, SessionOptions options = {});

  // Restores sessions from snapshots and refolds them against the event log.
  void load();

  // `corpus` defaults to every Indexed document.
  ChatSession create_session(const std::string& user_id, const std::string& strategy_name,
                             std::optional<std::set<std::string>> corpus = std::nullopt);
  ChatSession get(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;

  // Returns (retrieval message, assistant message).
  std::pair<ChatMessage, ChatMessage> post_query(const std::string& session_id, const std::string& query);
  std::vector<std::string> toggle_block(const std::string& session_id, const std::string& block_id, bool select);
  ChatMessage regenerate(const std::string& session_id, const std::string& message_id);
  void rate(const std::string& session_id, const std::string& message_id, bool liked);
  std::set<std::string> add_document(const std::string& session_id, const std::string& document_id);
  void click_result(const std::string& session_id, const std::string& message_id, const std::string& block_id);
  void navigate_page(const std::string& session_id, const std::string& document_id, int page_index);
  void set_satisfaction(const std::string& session_id, int rating);
  // Summary of the session's current log, computed on demand.
  IntentionSummary current_intention(const std::string& session_id);

  const StrategyRegistry& strategies() const { return strategies_; }
  StrategyRegistry& strategies() { return strategies_; }
  std::size_t k() const { return options_.k; }

 private:
  struct Entry {
    std::mutex mutex;
    ChatSession session;
  };

  std::shared_ptr<Entry> entry(const std::string& session_id) const;
  InteractionEvent log_event(ChatSession& s, EventKind kind, Json payload);
  void refold(ChatSession& s) const;
  void persist(const ChatSession& s) const;
  ChatMessage answer(ChatSession& s, const std::string& query, const std::vector<std::string>& block_ids,
                     const std::string& retrieval_message_id);
  std::string next_message_id(const ChatSession& s) const;
  BlockDescriber describer() const;

  BlockStore& store_;
  const VectorIndex& index_;
  EventLog& log_;
  std::shared_ptr<LlmAdapter> llm_;
  std::shared_ptr<Clock> clock_;
  SessionOptions options_;
  StrategyRegistry strategies_;

  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::size_t next_session_ = 1;
};

}  // namespace docloop
