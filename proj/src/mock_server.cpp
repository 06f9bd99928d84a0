#include "gog/mock_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <nlohmann/json.hpp>

#include "gog/hashing.hpp"

namespace gog::mock {

using nlohmann::json;
using toolkit::FailureCause;
using toolkit::ToolFailure;

namespace {

int status_for(const ToolFailure& f) {
  switch (f.cause) {
    case FailureCause::Timeout: return 504;
    case FailureCause::NetworkError: return 502;
    case FailureCause::MalformedContent: return 422;
    case FailureCause::UpstreamError: return f.upstream_code >= 400 ? f.upstream_code : 503;
  }
  return 500;
}

void fail(httplib::Response& res, const ToolFailure& f) {
  res.status = status_for(f);
  res.set_content(json{{"error", f.message()}}.dump(), "application/json");
}

void reply(httplib::Response& res, const json& body) { res.set_content(body.dump(), "application/json"); }

// Flattens OpenAI-style content (string or array of parts) to its text.
toolkit::ChatMessage to_message(const json& m) {
  toolkit::ChatMessage out;
  out.role = m.at("role").get<std::string>();
  const auto& content = m.at("content");
  if (content.is_string()) {
    out.text = content.get<std::string>();
  } else {
    for (const auto& part : content) {
      const auto type = part.value("type", std::string());
      if (type == "text") out.text += part.at("text").get<std::string>();
      if (type == "image_url") out.image_urls.push_back(part.at("image_url").at("url").get<std::string>());
    }
  }
  return out;
}

}  // namespace

MockServer::MockServer(Corpus corpus, ServerOptions options)
    : options_(std::move(options)),
      tools_(std::move(corpus), options_.fault_rate, options_.seed),
      server_(std::make_unique<httplib::Server>()) {
  // Every ref the corpus knows about is addressable by content hash.
  auto index = [&](const std::string& ref) {
    if (!tools_.store.contains(ref)) return;
    auto image = tools_.store.resolve(ref);
    auto url = toolkit::content_url(image);
    url_to_ref_.emplace(url, ref);
    hash_to_ref_.emplace(sha256_hex(encode_ppm(image)), ref);
  };
  for (const auto& id : tools_.store.base_ids()) index(id);
  for (const auto& [ref, _] : tools_.corpus.image_search) index(ref);
  for (const auto& [ref, _] : tools_.corpus.grounding) index(ref);
  install_routes();
}

MockServer::~MockServer() { stop(); }

std::string MockServer::base_url() const { return "http://" + options_.host + ":" + std::to_string(port_); }

std::string MockServer::ref_for_upload(const std::string& bytes, const Image& image) {
  const auto hash = sha256_hex(bytes);
  std::lock_guard lock(uploads_mutex_);
  auto it = hash_to_ref_.find(hash);
  std::string ref;
  if (it != hash_to_ref_.end()) {
    ref = it->second;
  } else {
    ref = "upload-" + hash.substr(0, 16);
    tools_.store.add(ref, image);
    hash_to_ref_.emplace(hash, ref);
  }
  url_to_ref_.emplace(toolkit::content_url(image), ref);
  return ref;
}

void MockServer::install_routes() {
  auto& srv = *server_;
  srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response&) {
    ++requests_;
    spdlog::debug("mock-serve {} {}", req.method, req.path);
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"status", "ok"}, {"corpus", tools_.corpus.version}});
  });

  srv.Post("/upload", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto f = tools_.faults.draw("host", sha256_hex(req.body))) return fail(res, *f);
    auto image = decode_ppm(req.body);
    if (!image) return fail(res, ToolFailure::make("host", FailureCause::MalformedContent, "body is not a binary PPM"));
    ref_for_upload(req.body, *image);
    reply(res, {{"url", toolkit::content_url(*image)}});
  });

  auto resolve_url = [this](const std::string& url) -> std::optional<std::string> {
    std::lock_guard lock(uploads_mutex_);
    auto it = url_to_ref_.find(url);
    if (it == url_to_ref_.end()) return std::nullopt;
    return it->second;
  };

  srv.Post("/image_search", [this, resolve_url](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return fail(res, ToolFailure::make("image_search", FailureCause::MalformedContent, "bad json"));
    }
    auto ref = resolve_url(body.value("image_url", std::string()));
    if (!ref) return fail(res, ToolFailure::make("image_search", FailureCause::MalformedContent, "unknown image url"));
    auto hits = tools_.image_search->search(*ref);
    if (!hits) return fail(res, hits.error());
    json matches = json::array();
    for (const auto& h : *hits) matches.push_back({{"position", h.rank}, {"title", h.title}, {"thumbnail", h.thumbnail_ref}});
    reply(res, {{"visual_matches", matches}});
  });

  srv.Post("/search", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return fail(res, ToolFailure::make("web_search", FailureCause::MalformedContent, "bad json"));
    }
    auto results = tools_.web_search->search(body.value("q", std::string()));
    if (!results) return fail(res, results.error());
    json organic = json::array();
    int position = 0;
    for (const auto& r : *results)
      organic.push_back({{"position", ++position}, {"title", r.title}, {"link", r.url}, {"snippet", r.snippet}});
    reply(res, {{"organic_results", organic}});
  });

  srv.Get("/read", [this](const httplib::Request& req, httplib::Response& res) {
    auto text = tools_.reader->read(req.get_param_value("url"));
    if (!text) return fail(res, text.error());
    res.set_content(*text, "text/plain; charset=utf-8");
  });

  srv.Post("/ground", [this, resolve_url](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return fail(res, ToolFailure::make("grounding", FailureCause::MalformedContent, "bad json"));
    }
    auto ref = resolve_url(body.value("image_url", std::string()));
    if (!ref) return fail(res, ToolFailure::make("grounding", FailureCause::MalformedContent, "unknown image url"));
    auto boxes = tools_.grounding->ground(*ref, body.value("text", std::string()));
    if (!boxes) return fail(res, boxes.error());
    const auto top_n = body.value("top_n", toolkit::kDefaultGroundingTopN);
    json out = json::array();
    for (const auto& b : *boxes) {
      if (out.size() == top_n) break;
      out.push_back({{"bbox", {b.bbox.x0, b.bbox.y0, b.bbox.x1, b.bbox.y1}}, {"score", b.score}});
    }
    reply(res, {{"boxes", out}});
  });

  srv.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    toolkit::ChatRequest chat;
    std::string model;
    try {
      auto body = json::parse(req.body);
      model = body.at("model").get<std::string>();
      for (const auto& m : body.at("messages")) chat.messages.push_back(to_message(m));
      chat.temperature = body.value("temperature", 0.0);
      if (body.contains("seed")) chat.seed = body.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      return fail(res, ToolFailure::make("chat", FailureCause::MalformedContent, e.what()));
    }
    toolkit::ChatClient* client = nullptr;
    if (model == "policy") client = tools_.policy.get();
    if (model == "judge") client = tools_.judge.get();
    if (model == "summarizer") client = tools_.summarizer.get();
    if (!client) {
      res.status = 404;
      return reply(res, {{"error", "unknown model: " + model}});
    }
    auto text = client->complete(chat);
    if (!text) return fail(res, text.error());
    reply(res, {{"object", "chat.completion"},
                {"model", model},
                {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", *text}}}, {"finish_reason", "stop"}}}}});
  });
}

int MockServer::start() {
  if (thread_.joinable()) return port_;
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) throw std::runtime_error("mock server cannot bind " + options_.host + ":" + std::to_string(options_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockServer::serve() {
  port_ = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                             : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
  if (port_ <= 0) throw std::runtime_error("mock server cannot bind " + options_.host + ":" + std::to_string(options_.port));
  spdlog::info("mock-serve listening on {}", base_url());
  server_->listen_after_bind();
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace gog::mock
