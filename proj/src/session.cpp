#include "docloop/session.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "docloop/error.hpp"

namespace docloop {

namespace {

constexpr std::string_view kAnswerPreamble =
    "You are a research assistant. Answer the question using only the evidence blocks below. "
    "Refer to evidence by its source tag.";

std::optional<MessageRole> parse_role(std::string_view s) {
  for (auto r : {MessageRole::User, MessageRole::Retrieval, MessageRole::Assistant}) {
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

Json optional_int(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

const char* to_string(MessageRole role) {
  switch (role) {
    case MessageRole::User: return "user";
    case MessageRole::Retrieval: return "retrieval";
    case MessageRole::Assistant: return "assistant";
  }
  return "";
}

void to_json(Json& j, const ChatMessage& m) {
  j = Json{{"message_id", m.message_id}, {"role", to_string(m.role)}, {"content", m.content},
           {"query", m.query},           {"error", m.error},           {"created_at", m.created_at}};
  if (m.retrieval) j["retrieval"] = *m.retrieval;
  if (m.role == MessageRole::Assistant) {
    Json cites = Json::array();
    for (const auto& c : m.citations) cites.push_back({{"block_id", c.block_id}, {"revision", c.revision}});
    j["citations"] = std::move(cites);
    j["retrieval_message_id"] = m.retrieval_message_id;
    if (!m.regenerated_from.empty()) j["regenerated_from"] = m.regenerated_from;
  }
}

void from_json(const Json& j, ChatMessage& m) {
  m.message_id = j.at("message_id").get<std::string>();
  auto role = parse_role(j.at("role").get<std::string>());
  if (!role) throw schema_error("unknown message role");
  m.role = *role;
  m.content = j.at("content").get<std::string>();
  m.query = j.value("query", std::string());
  m.error = j.value("error", false);
  m.created_at = j.value("created_at", std::int64_t{0});
  m.retrieval.reset();
  if (j.contains("retrieval")) m.retrieval = j.at("retrieval").get<RetrievalResult>();
  m.citations.clear();
  if (j.contains("citations")) {
    for (const auto& c : j.at("citations")) {
      m.citations.push_back({c.at("block_id").get<std::string>(), c.at("revision").get<std::int64_t>()});
    }
  }
  m.retrieval_message_id = j.value("retrieval_message_id", std::string());
  m.regenerated_from = j.value("regenerated_from", std::string());
}

const ChatMessage* ChatSession::find_message(const std::string& message_id) const {
  for (const auto& m : messages) {
    if (m.message_id == message_id) return &m;
  }
  return nullptr;
}

void to_json(Json& j, const ChatSession& s) {
  Json ratings = Json::object();
  for (const auto& [id, liked] : s.ratings) ratings[id] = liked ? "like" : "dislike";
  j = Json{{"session_id", s.session_id},
           {"user_id", s.user_id},
           {"strategy_name", s.strategy_name},
           {"initial_corpus", s.initial_corpus},
           {"corpus", s.corpus},
           {"messages", s.messages},
           {"staging", s.staging},
           {"ratings", std::move(ratings)},
           {"satisfaction", optional_int(s.satisfaction)},
           {"created_at", s.created_at}};
}

void from_json(const Json& j, ChatSession& s) {
  s.session_id = j.at("session_id").get<std::string>();
  s.user_id = j.value("user_id", std::string());
  s.strategy_name = j.at("strategy_name").get<std::string>();
  s.initial_corpus = j.value("initial_corpus", std::set<std::string>{});
  s.corpus = j.value("corpus", s.initial_corpus);
  s.messages = j.value("messages", std::vector<ChatMessage>{});
  s.staging = j.value("staging", std::vector<std::string>{});
  s.ratings.clear();
  const Json ratings = j.value("ratings", Json::object());
  for (const auto& [id, v] : ratings.items()) s.ratings[id] = v == "like";
  s.satisfaction.reset();
  if (j.contains("satisfaction") && !j.at("satisfaction").is_null()) s.satisfaction = j.at("satisfaction").get<int>();
  s.created_at = j.value("created_at", std::int64_t{0});
}

SessionFold fold_events(const std::set<std::string>& initial_corpus, std::span<const InteractionEvent> events) {
  SessionFold f;
  f.corpus = initial_corpus;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::SelectBlock: {
        auto id = e.payload.at("block_id").get<std::string>();
        if (std::find(f.staging.begin(), f.staging.end(), id) == f.staging.end()) f.staging.push_back(id);
        break;
      }
      case EventKind::DeselectBlock: {
        auto id = e.payload.at("block_id").get<std::string>();
        f.staging.erase(std::remove(f.staging.begin(), f.staging.end(), id), f.staging.end());
        break;
      }
      case EventKind::AddDocument:
        f.corpus.insert(e.payload.at("document_id").get<std::string>());
        break;
      case EventKind::Like:
        f.ratings[e.payload.at("message_id").get<std::string>()] = true;
        break;
      case EventKind::Dislike:
        f.ratings[e.payload.at("message_id").get<std::string>()] = false;
        break;
      default:
        break;
    }
  }
  return f;
}

std::string render_block_segment(const BlockRef& ref) {
  std::ostringstream os;
  os << "[source: " << ref.source_name << " p." << ref.block.page_index() + 1 << ' '
     << to_string(ref.block.block_type) << "]\n"
     << ref.block.text_repr;
  return os.str();
}

std::string build_answer_prompt(const std::vector<BlockRef>& blocks, const std::string& query) {
  std::string out(kAnswerPreamble);
  out += "\n\n";
  for (const auto& b : blocks) {
    out += render_block_segment(b);
    out += "\n\n";
  }
  out += "Question: ";
  out += query;
  return out;
}

SessionManager::SessionManager(BlockStore& store, const VectorIndex& index, EventLog& log,
                               std::shared_ptr<LlmAdapter> llm, std::shared_ptr<Clock> clock, SessionOptions options)
    : store_(store),
      index_(index),
      log_(log),
      llm_(llm),
      clock_(clock),
      options_(std::move(options)),
      strategies_(index, llm, clock) {
  if (options_.k < 1) throw Error(ErrorCode::Invalid, "k must be at least 1");
}

void SessionManager::load() {
  if (options_.snapshot_dir.empty() || !std::filesystem::exists(options_.snapshot_dir)) return;
  std::unique_lock lock(map_mutex_);
  for (const auto& file : std::filesystem::directory_iterator(options_.snapshot_dir)) {
    if (file.path().extension() != ".json") continue;
    auto e = std::make_shared<Entry>();
    e->session = Json::parse(read_file(file.path())).get<ChatSession>();
    refold(e->session);
    unsigned long n = 0;
    if (std::sscanf(e->session.session_id.c_str(), "ses-%lu", &n) == 1) {
      next_session_ = std::max<std::size_t>(next_session_, n + 1);
    }
    sessions_[e->session.session_id] = std::move(e);
  }
}

ChatSession SessionManager::create_session(const std::string& user_id, const std::string& strategy_name,
                                           std::optional<std::set<std::string>> corpus) {
  strategies_.get(strategy_name);
  auto e = std::make_shared<Entry>();
  ChatSession& s = e->session;
  s.user_id = user_id;
  s.strategy_name = strategy_name;
  if (corpus) {
    for (const auto& id : *corpus) {
      if (!store_.contains(id)) throw not_found("document " + id);
    }
    s.initial_corpus = std::move(*corpus);
  } else {
    for (const auto& doc : store_.documents()) {
      if (doc.processing_state == ProcessingState::Indexed) s.initial_corpus.insert(doc.document_id);
    }
  }
  s.corpus = s.initial_corpus;
  s.created_at = clock_->now_ms();
  {
    std::unique_lock lock(map_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "ses-%06zu", next_session_++);
    s.session_id = buf;
    sessions_[s.session_id] = e;
  }
  persist(s);
  return s;
}

std::shared_ptr<SessionManager::Entry> SessionManager::entry(const std::string& session_id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw not_found("session " + session_id);
  return it->second;
}

ChatSession SessionManager::get(const std::string& session_id) const {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  return e->session;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

InteractionEvent SessionManager::log_event(ChatSession& s, EventKind kind, Json payload) {
  InteractionEvent e;
  e.session_id = s.session_id;
  e.user_id = s.user_id;
  e.kind = kind;
  e.payload = std::move(payload);
  return log_.append(std::move(e));
}

void SessionManager::refold(ChatSession& s) const {
  auto events = log_.for_session(s.session_id);
  SessionFold f = fold_events(s.initial_corpus, events);
  s.staging = std::move(f.staging);
  s.corpus = std::move(f.corpus);
  s.ratings = std::move(f.ratings);
}

void SessionManager::persist(const ChatSession& s) const {
  if (options_.snapshot_dir.empty()) return;
  std::filesystem::create_directories(options_.snapshot_dir);
  write_file_atomic(options_.snapshot_dir / (s.session_id + ".json"), Json(s).dump(2) + "\n");
}

std::string SessionManager::next_message_id(const ChatSession& s) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "msg-%04zu", s.messages.size() + 1);
  return buf;
}

BlockDescriber SessionManager::describer() const {
  return [this](const std::string& block_id) -> std::optional<std::string> {
    auto ref = store_.find_block(block_id);
    if (!ref) return std::nullopt;
    std::string text = ref->block.text_repr.substr(0, 80);
    return std::string(to_string(ref->block.block_type)) + ": " + text;
  };
}

ChatMessage SessionManager::answer(ChatSession& s, const std::string& query, const std::vector<std::string>& block_ids,
                                   const std::string& retrieval_message_id) {
  std::vector<BlockRef> refs;
  ChatMessage m;
  m.role = MessageRole::Assistant;
  m.query = query;
  m.retrieval_message_id = retrieval_message_id;
  for (const auto& id : block_ids) {
    auto ref = store_.find_block(id);
    if (!ref || ref->block.tombstoned) continue;
    m.citations.push_back({id, ref->block.revision});
    refs.push_back(std::move(*ref));
  }
  LlmRequest req;
  req.purpose = LlmPurpose::Answer;
  req.prompt = build_answer_prompt(refs, query);
  req.max_chars = options_.answer_max_chars;
  try {
    m.content = llm_->complete(req).text;
  } catch (const std::exception& ex) {
    m.error = true;
    m.content = std::string("The assistant could not produce a response: ") + ex.what();
    m.citations.clear();
  }
  m.message_id = next_message_id(s);
  m.created_at = clock_->now_ms();
  s.messages.push_back(m);
  return m;
}

std::pair<ChatMessage, ChatMessage> SessionManager::post_query(const std::string& session_id,
                                                               const std::string& query) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  ChatSession& s = e->session;

  const RetrieverStrategy& strategy = strategies_.get(s.strategy_name);
  auto prior = log_.for_session(session_id);

  ChatMessage user;
  user.message_id = next_message_id(s);
  user.role = MessageRole::User;
  user.content = query;
  user.query = query;
  user.created_at = clock_->now_ms();
  s.messages.push_back(user);
  log_event(s, EventKind::SendQuery, {{"query", query}, {"message_id", user.message_id}});

  RetrievalContext ctx{session_id, s.corpus, prior, describer()};
  RetrievalResult result = strategy.retrieve(query, ctx, options_.k);

  ChatMessage retrieval;
  retrieval.message_id = next_message_id(s);
  retrieval.role = MessageRole::Retrieval;
  retrieval.query = query;
  retrieval.content = std::to_string(result.items.size()) + " blocks retrieved";
  retrieval.retrieval = result;
  retrieval.created_at = clock_->now_ms();
  s.messages.push_back(retrieval);

  std::vector<std::string> ids;
  for (const auto& item : result.items) ids.push_back(item.block_id);
  ChatMessage reply = answer(s, query, ids, retrieval.message_id);
  persist(s);
  return {retrieval, reply};
}

std::vector<std::string> SessionManager::toggle_block(const std::string& session_id, const std::string& block_id,
                                                      bool select) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  auto ref = store_.find_block(block_id);
  if (!ref) throw not_found("block " + block_id);
  if (ref->block.tombstoned) {
    throw Error(ErrorCode::Invalid, "block " + block_id + " has been removed", {{"kind", "tombstoned"}});
  }
  log_event(e->session, select ? EventKind::SelectBlock : EventKind::DeselectBlock, {{"block_id", block_id}});
  refold(e->session);
  persist(e->session);
  return e->session.staging;
}

ChatMessage SessionManager::regenerate(const std::string& session_id, const std::string& message_id) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  ChatSession& s = e->session;
  const ChatMessage* original = s.find_message(message_id);
  if (!original) throw not_found("message " + message_id);
  if (original->role != MessageRole::Assistant) {
    throw Error(ErrorCode::Invalid, "message " + message_id + " is not an assistant message",
                {{"kind", "invalid_target"}});
  }
  std::string query = original->query;
  std::string retrieval_id = original->retrieval_message_id;

  std::vector<std::string> ids;
  if (const ChatMessage* r = s.find_message(retrieval_id); r && r->retrieval) {
    for (const auto& item : r->retrieval->items) ids.push_back(item.block_id);
  }
  for (const auto& id : s.staging) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  std::string new_id = next_message_id(s);
  log_event(s, EventKind::Regenerate, {{"message_id", message_id}, {"new_message_id", new_id}});
  ChatMessage reply = answer(s, query, ids, retrieval_id);
  s.messages.back().regenerated_from = message_id;
  reply.regenerated_from = message_id;
  persist(s);
  return reply;
}

void SessionManager::rate(const std::string& session_id, const std::string& message_id, bool liked) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  const ChatMessage* m = e->session.find_message(message_id);
  if (!m) throw not_found("message " + message_id);
  if (m->role != MessageRole::Assistant) {
    throw Error(ErrorCode::Invalid, "only assistant messages can be rated", {{"kind", "invalid_target"}});
  }
  log_event(e->session, liked ? EventKind::Like : EventKind::Dislike, {{"message_id", message_id}});
  refold(e->session);
  persist(e->session);
}

std::set<std::string> SessionManager::add_document(const std::string& session_id, const std::string& document_id) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  auto doc = store_.get(document_id);
  if (!doc) throw not_found("document " + document_id);
  if (doc->processing_state != ProcessingState::Indexed) {
    throw Error(ErrorCode::Invalid, "document " + document_id + " is not indexed",
                {{"kind", "precondition"}, {"processing_state", to_string(doc->processing_state)}});
  }
  log_event(e->session, EventKind::AddDocument, {{"document_id", document_id}});
  refold(e->session);
  persist(e->session);
  return e->session.corpus;
}

void SessionManager::click_result(const std::string& session_id, const std::string& message_id,
                                  const std::string& block_id) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  const ChatMessage* m = e->session.find_message(message_id);
  if (!m || !m->retrieval) throw not_found("retrieval message " + message_id);
  const auto& items = m->retrieval->items;
  auto it = std::find_if(items.begin(), items.end(), [&](const ScoredBlock& b) { return b.block_id == block_id; });
  if (it == items.end()) throw not_found("block " + block_id + " in " + message_id);
  log_event(e->session, EventKind::ClickResult,
            {{"message_id", message_id}, {"block_id", block_id}, {"rank", it - items.begin() + 1}});
}

void SessionManager::navigate_page(const std::string& session_id, const std::string& document_id, int page_index) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  auto doc = store_.get(document_id);
  if (!doc) throw not_found("document " + document_id);
  if (page_index < 0 || page_index >= doc->page_count) throw not_found("page " + std::to_string(page_index));
  log_event(e->session, EventKind::NavigatePage, {{"document_id", document_id}, {"page_index", page_index}});
}

void SessionManager::set_satisfaction(const std::string& session_id, int rating) {
  if (rating < 1 || rating > 5) throw schema_error("satisfaction rating must be between 1 and 5");
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  e->session.satisfaction = rating;
  persist(e->session);
}

IntentionSummary SessionManager::current_intention(const std::string& session_id) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  auto events = log_.for_session(session_id);
  return summarize_intention(session_id, events, *llm_, *clock_, describer());
}

}  // namespace docloop
