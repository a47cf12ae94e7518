#include "docloop/api.hpp"

#include <iostream>
#include <sstream>

#include "httplib.h"

namespace docloop {

namespace {

using httplib::Request;
using httplib::Response;
using Handler = std::function<void(const Request&, Response&)>;

Json parse_body(const Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw schema_error(std::string("request body is not JSON: ") + e.what());
  }
}

void send_json(Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string user_id(const Request& req) {
  auto id = req.get_header_value("X-User-Id");
  return id.empty() ? "anonymous" : id;
}

std::optional<std::string> query_param(const Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

int int_param(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::logic_error&) {
    throw schema_error(std::string(what) + " must be an integer");
  }
}

template <class T>
T field(const Json& body, const char* key) {
  if (!body.contains(key)) throw schema_error(std::string("missing field '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const Json::exception&) {
    throw schema_error(std::string("field '") + key + "' has the wrong type");
  }
}

Json block_view(const BlockRef& ref) {
  Json j = ref.block;
  j["source_name"] = ref.source_name;
  j["page_index"] = ref.block.page_index();
  return j;
}

Json document_summary(const Document& d) {
  return Json{{"document_id", d.document_id},
              {"source_name", d.source_name},
              {"page_count", d.page_count},
              {"processing_state", d.processing_state},
              {"block_count", d.block_count()}};
}

std::optional<std::size_t> optional_position(const Json& body) {
  if (!body.contains("position") || body.at("position").is_null()) return std::nullopt;
  return field<std::size_t>(body, "position");
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::Invalid: return 400;
    case ErrorCode::AdapterUnavailable: return 503;
    case ErrorCode::Internal: return 500;
  }
  return 500;
}

Json error_body(const Error& error) {
  return Json{{"error", {{"code", to_string(error.code())}, {"message", error.what()}, {"detail", error.detail()}}}};
}

struct ApiServer::Impl {
  Engine& engine;
  httplib::Server server;
  bool verbose = false;

  explicit Impl(Engine& e) : engine(e) { install(); }

  Handler wrap(Handler fn) {
    return [fn](const Request& req, Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_json(res, error_body(e), http_status(e.code()));
      } catch (const Json::exception& e) {
        send_json(res, error_body(schema_error(e.what())), 400);
      } catch (const std::exception& e) {
        send_json(res, error_body(Error(ErrorCode::Internal, e.what())), 500);
      }
    };
  }

  void get(const char* pattern, Handler fn) { server.Get(pattern, wrap(std::move(fn))); }
  void post(const char* pattern, Handler fn) { server.Post(pattern, wrap(std::move(fn))); }
  void put(const char* pattern, Handler fn) { server.Put(pattern, wrap(std::move(fn))); }
  void del(const char* pattern, Handler fn) { server.Delete(pattern, wrap(std::move(fn))); }

  void install() {
    server.set_logger([this](const Request& req, const Response& res) {
      if (verbose) std::cerr << req.method << ' ' << req.path << ' ' << res.status << '\n';
    });
    server.set_error_handler([](const Request&, Response& res) {
      if (res.body.empty()) {
        send_json(res, error_body(Error(ErrorCode::NotFound, "no such endpoint")), res.status);
      }
    });
    server.set_payload_max_length(256u << 20);

    get("/health", [](const Request&, Response& res) { send_json(res, {{"status", "ok"}}); });

    install_documents();
    install_validation();
    install_sessions();
    install_reports();

    post("/eval/run", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      std::vector<SessionScript> scripts;
      const Json& list = body.contains("scripts") ? body.at("scripts") : Json::array();
      if (!list.is_array() || list.empty()) throw schema_error("scripts must be a non-empty array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        std::string name = list[i].value("name", "script-" + std::to_string(i + 1));
        scripts.push_back(parse_script(list[i].dump(2), name));
      }
      auto strategies = body.value("strategies", engine.sessions().strategies().names());
      ExperimentResult result = engine.run_eval(scripts, strategies);
      Json out = result.to_json();
      out["table"] = result.render_table();
      send_json(res, out);
    });

    get("/events/export", [this](const Request&, Response& res) {
      res.set_content(engine.events().export_jsonl(), "application/x-ndjson");
    });
  }

  void install_documents() {
    post("/documents", [this](const Request& req, Response& res) {
      std::string bytes, name;
      std::optional<std::string> fixture;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("file")) throw schema_error("multipart upload needs a 'file' part");
        auto file = req.get_file_value("file");
        bytes = file.content;
        name = file.filename;
        if (req.has_file("fixture")) fixture = req.get_file_value("fixture").content;
      } else {
        bytes = req.body;
        name = query_param(req, "source_name").value_or("");
      }
      if (name.empty()) throw schema_error("upload needs a source name");
      std::string job_id = engine.submit_upload(std::move(bytes), name, fixture);
      if (query_param(req, "wait").value_or("false") == "true") {
        send_json(res, engine.wait_job(job_id).to_json(), 201);
      } else {
        send_json(res, engine.job(job_id).to_json(), 202);
      }
    });

    get("/documents", [this](const Request&, Response& res) {
      Json out = Json::array();
      for (const auto& d : engine.documents()) out.push_back(document_summary(d));
      send_json(res, {{"documents", out}});
    });

    get(R"(/documents/([^/]+))", [this](const Request& req, Response& res) {
      send_json(res, engine.document(req.matches[1]));
    });

    get(R"(/documents/([^/]+)/pages/(-?\d+)/blocks)", [this](const Request& req, Response& res) {
      int page = int_param(req.matches[2], "page");
      send_json(res, {{"document_id", req.matches[1]},
                      {"page_index", page},
                      {"blocks", engine.page_blocks(req.matches[1], page)}});
    });

    get(R"(/documents/([^/]+)/pages/(-?\d+)/image)", [this](const Request& req, Response& res) {
      auto path = engine.page_image(req.matches[1], int_param(req.matches[2], "page"));
      if (!path) throw not_found("page image");
      res.set_content(read_file(*path), "image/png");
    });

    get(R"(/jobs/([^/]+))", [this](const Request& req, Response& res) {
      send_json(res, engine.job(req.matches[1]).to_json());
    });
  }

  void install_validation() {
    get(R"(/blocks/([^/]+))", [this](const Request& req, Response& res) {
      send_json(res, block_view(engine.block(req.matches[1])));
    });

    get(R"(/blocks/([^/]+)/edits)", [this](const Request& req, Response& res) {
      engine.block(req.matches[1]);
      send_json(res, {{"edits", engine.block_history(req.matches[1])}});
    });

    post(R"(/blocks/([^/]+)/edits)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      BlockRef ref = engine.block(req.matches[1]);
      body["block_id"] = ref.block.block_id;
      body["document_id"] = ref.block.document_id;
      if (!body.contains("editor_id")) body["editor_id"] = user_id(req);
      LayoutBlock updated = engine.apply_edit(body.get<ValidationEdit>());
      send_json(res, updated);
    });

    post(R"(/documents/([^/]+)/edits)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      body["document_id"] = std::string(req.matches[1]);
      if (!body.contains("editor_id")) body["editor_id"] = user_id(req);
      LayoutBlock created = engine.apply_edit(body.get<ValidationEdit>());
      send_json(res, created, 201);
    });

    get("/validation/pending", [this](const Request& req, Response& res) {
      auto doc = query_param(req, "document_id");
      if (!doc) throw schema_error("document_id is required");
      auto filter = PendingFilter::parse(query_param(req, "filter").value_or("needs_validation"));
      std::size_t page_size = 50;
      if (auto ps = query_param(req, "page_size")) {
        int v = int_param(*ps, "page_size");
        if (v < 1) throw schema_error("page_size must be positive");
        page_size = static_cast<std::size_t>(v);
      }
      PendingPage page = engine.pending(*doc, filter, query_param(req, "cursor"), page_size);
      send_json(res, {{"blocks", page.blocks},
                      {"next_cursor", page.next_cursor ? Json(*page.next_cursor) : Json(nullptr)}});
    });
  }

  void install_sessions() {
    post("/sessions", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      std::optional<std::set<std::string>> corpus;
      if (body.contains("corpus") && !body.at("corpus").is_null()) corpus = field<std::set<std::string>>(body, "corpus");
      auto strategy = body.value("strategy", std::string("symbiotic"));
      send_json(res, engine.sessions().create_session(user_id(req), strategy, corpus), 201);
    });

    get(R"(/sessions/([^/]+))", [this](const Request& req, Response& res) {
      send_json(res, engine.sessions().get(req.matches[1]));
    });

    get(R"(/sessions/([^/]+)/staging)", [this](const Request& req, Response& res) {
      ChatSession s = engine.sessions().get(req.matches[1]);
      Json blocks = Json::array();
      for (const auto& id : s.staging) {
        if (auto ref = engine.store().find_block(id)) blocks.push_back(block_view(*ref));
      }
      send_json(res, {{"session_id", s.session_id}, {"staging", s.staging}, {"blocks", blocks}});
    });

    get(R"(/sessions/([^/]+)/intention)", [this](const Request& req, Response& res) {
      send_json(res, engine.sessions().current_intention(req.matches[1]));
    });

    post(R"(/sessions/([^/]+)/query)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      auto [retrieval, reply] = engine.sessions().post_query(req.matches[1], field<std::string>(body, "query"));
      send_json(res, {{"retrieval", retrieval}, {"assistant", reply}});
    });

    post(R"(/sessions/([^/]+)/blocks/([^/]+)/toggle)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      auto staging = engine.sessions().toggle_block(req.matches[1], req.matches[2], field<bool>(body, "select"));
      send_json(res, {{"staging", staging}});
    });

    post(R"(/sessions/([^/]+)/messages/([^/]+)/regenerate)", [this](const Request& req, Response& res) {
      send_json(res, engine.sessions().regenerate(req.matches[1], req.matches[2]));
    });

    post(R"(/sessions/([^/]+)/messages/([^/]+)/rate)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      engine.sessions().rate(req.matches[1], req.matches[2], field<bool>(body, "liked"));
      send_json(res, {{"ratings", Json(engine.sessions().get(req.matches[1]))["ratings"]}});
    });

    post(R"(/sessions/([^/]+)/messages/([^/]+)/click)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      engine.sessions().click_result(req.matches[1], req.matches[2], field<std::string>(body, "block_id"));
      send_json(res, {{"ok", true}});
    });

    post(R"(/sessions/([^/]+)/navigate)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      engine.sessions().navigate_page(req.matches[1], field<std::string>(body, "document_id"),
                                      field<int>(body, "page_index"));
      send_json(res, {{"ok", true}});
    });

    post(R"(/sessions/([^/]+)/documents)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      auto corpus = engine.sessions().add_document(req.matches[1], field<std::string>(body, "document_id"));
      send_json(res, {{"corpus", corpus}});
    });

    post(R"(/sessions/([^/]+)/satisfaction)", [this](const Request& req, Response& res) {
      Json body = parse_body(req);
      engine.sessions().set_satisfaction(req.matches[1], field<int>(body, "rating"));
      send_json(res, {{"ok", true}});
    });
  }

  void install_reports() {
    auto& reports = engine.reports();

    post("/reports", [&reports](const Request& req, Response& res) {
      Json body = parse_body(req);
      send_json(res, reports.create(body.value("session_id", std::string()), field<std::string>(body, "title")), 201);
    });

    get(R"(/reports/([^/]+))", [&reports](const Request& req, Response& res) {
      send_json(res, reports.get(req.matches[1]));
    });

    post(R"(/reports/([^/]+)/sections)", [&reports](const Request& req, Response& res) {
      Json body = parse_body(req);
      send_json(res,
                reports.add_section(req.matches[1], field<std::string>(body, "heading"),
                                    body.value("instruction", std::string()), optional_position(body)),
                201);
    });

    post(R"(/reports/([^/]+)/sections/([^/]+))", [&reports](const Request& req, Response& res) {
      Json body = parse_body(req);
      std::string rid = req.matches[1], sid = req.matches[2];
      Report r = reports.get(rid);
      if (body.contains("heading")) r = reports.set_heading(rid, sid, field<std::string>(body, "heading"));
      if (body.contains("instruction")) r = reports.set_instruction(rid, sid, field<std::string>(body, "instruction"));
      if (auto pos = optional_position(body)) r = reports.move_section(rid, sid, *pos);
      if (!r.find_section(sid)) throw not_found("section " + sid);
      send_json(res, r);
    });

    del(R"(/reports/([^/]+)/sections/([^/]+))", [&reports](const Request& req, Response& res) {
      send_json(res, reports.remove_section(req.matches[1], req.matches[2]));
    });

    post(R"(/reports/([^/]+)/sections/([^/]+)/blocks)", [&reports](const Request& req, Response& res) {
      Json body = parse_body(req);
      send_json(res, reports.assign_block(req.matches[1], req.matches[2], field<std::string>(body, "block_id"),
                                          optional_position(body)));
    });

    del(R"(/reports/([^/]+)/sections/([^/]+)/blocks/([^/]+))", [&reports](const Request& req, Response& res) {
      send_json(res, reports.unassign_block(req.matches[1], req.matches[2], req.matches[3]));
    });

    post(R"(/reports/([^/]+)/sections/([^/]+)/generate)", [&reports](const Request& req, Response& res) {
      std::string draft = reports.generate_section(req.matches[1], req.matches[2]);
      Report r = reports.get(req.matches[1]);
      send_json(res, {{"draft", draft}, {"section", *r.find_section(req.matches[2])}});
    });

    put(R"(/reports/([^/]+)/sections/([^/]+)/draft)", [&reports](const Request& req, Response& res) {
      Json body = parse_body(req);
      send_json(res, reports.edit_draft(req.matches[1], req.matches[2], field<std::string>(body, "draft")));
    });

    get(R"(/reports/([^/]+)/export)", [&reports](const Request& req, Response& res) {
      auto fmt_name = query_param(req, "format").value_or("md");
      auto fmt = parse_export_format(fmt_name);
      if (!fmt) throw schema_error("format must be md or html");
      res.set_content(reports.export_report(req.matches[1], *fmt),
                      *fmt == ExportFormat::Html ? "text/html; charset=utf-8" : "text/markdown; charset=utf-8");
    });
  }
};

ApiServer::ApiServer(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorCode::Internal, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::Internal, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

bool ApiServer::listen() { return impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void ApiServer::set_verbose(bool verbose) { impl_->verbose = verbose; }

}  // namespace docloop
