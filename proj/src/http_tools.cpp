#include "gog/http_tools.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace gog::http {

using nlohmann::json;
using toolkit::FailureCause;
using toolkit::ToolFailure;
using toolkit::ToolResult;

ToolFailure failure_for_status(std::string tool, int status, std::string detail) {
  if (status == 408 || status == 504) return ToolFailure::make(std::move(tool), FailureCause::Timeout, std::move(detail));
  if (status == 502) return ToolFailure::make(std::move(tool), FailureCause::NetworkError, std::move(detail));
  if (status == 422) return ToolFailure::make(std::move(tool), FailureCause::MalformedContent, std::move(detail));
  return ToolFailure::make(std::move(tool), FailureCause::UpstreamError, std::move(detail), status);
}

namespace {

httplib::Client make_client(const Endpoint& ep) {
  httplib::Client cli(ep.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep.timeout).count();
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(ep.timeout).count() % 1000000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  if (!ep.api_key.empty()) cli.set_bearer_token_auth(ep.api_key);
  return cli;
}

ToolFailure transport_failure(const std::string& tool, httplib::Error err) {
  const auto detail = httplib::to_string(err);
  if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
    return ToolFailure::make(tool, FailureCause::Timeout, detail);
  return ToolFailure::make(tool, FailureCause::NetworkError, detail);
}

// Runs the request and returns the body of a 2xx response.
template <class Send>
ToolResult<std::string> exchange(const std::string& tool, Send&& send) {
  auto res = send();
  if (!res) return unexpected(transport_failure(tool, res.error()));
  if (res->status < 200 || res->status >= 300) return unexpected(failure_for_status(tool, res->status, res->body));
  return std::move(res->body);
}

ToolResult<json> exchange_json(const std::string& tool, const Endpoint& ep, const std::string& path, const json& body) {
  auto cli = make_client(ep);
  auto text = exchange(tool, [&] { return cli.Post(path, body.dump(), "application/json"); });
  if (!text) return unexpected(text.error());
  try {
    return json::parse(*text);
  } catch (const json::exception& e) {
    return unexpected(ToolFailure::make(tool, FailureCause::MalformedContent, e.what()));
  }
}

}  // namespace

ToolResult<std::string> HttpImageHost::upload(std::string_view image_ref) {
  if (!store_.contains(image_ref))
    return unexpected(ToolFailure::make("host", FailureCause::MalformedContent, "unresolvable image"));
  const auto bytes = encode_ppm(store_.resolve(image_ref));
  auto cli = make_client(endpoint_);
  auto body = exchange("host", [&] { return cli.Post("/upload", bytes, "image/x-portable-pixmap"); });
  if (!body) return unexpected(body.error());
  try {
    return json::parse(*body).at("url").get<std::string>();
  } catch (const json::exception& e) {
    return unexpected(ToolFailure::make("host", FailureCause::MalformedContent, e.what()));
  }
}

ToolResult<std::vector<toolkit::ImageSearchResult>> HttpImageSearch::search(std::string_view image_ref) {
  auto url = host_.upload(image_ref);
  if (!url) return unexpected(url.error());
  auto doc = exchange_json("image_search", endpoint_, "/image_search", {{"image_url", *url}});
  if (!doc) return unexpected(doc.error());
  std::vector<toolkit::ImageSearchResult> raw;
  try {
    for (const auto& m : doc->value("visual_matches", json::array()))
      raw.push_back({m.value("thumbnail", std::string()), m.value("title", std::string()), 0});
  } catch (const json::exception& e) {
    return unexpected(ToolFailure::make("image_search", FailureCause::MalformedContent, e.what()));
  }
  return toolkit::normalize_image_results(std::move(raw));
}

ToolResult<std::vector<toolkit::WebResult>> HttpWebSearch::search(std::string_view query) {
  auto doc = exchange_json("web_search", endpoint_, "/search", {{"q", std::string(query)}});
  if (!doc) return unexpected(doc.error());
  std::vector<toolkit::WebResult> out;
  try {
    for (const auto& r : doc->value("organic_results", json::array()))
      out.push_back({r.at("link").get<std::string>(), r.value("title", std::string()), r.value("snippet", std::string())});
  } catch (const json::exception& e) {
    return unexpected(ToolFailure::make("web_search", FailureCause::MalformedContent, e.what()));
  }
  return out;
}

ToolResult<std::string> HttpPageReader::read(std::string_view url) {
  auto cli = make_client(endpoint_);
  httplib::Params params{{"url", std::string(url)}};
  auto body = exchange("reader", [&] { return cli.Get("/read", params, httplib::Headers{}); });
  if (!body) return unexpected(body.error());
  if (body->empty()) return unexpected(ToolFailure::make("reader", FailureCause::MalformedContent, "empty page"));
  return body;
}

ToolResult<std::vector<toolkit::GroundingBox>> HttpGrounding::ground(std::string_view image_ref,
                                                                      std::string_view description) {
  if (description.find_first_not_of(" \t\r\n") == std::string_view::npos)
    return unexpected(ToolFailure::make("grounding", FailureCause::MalformedContent, "empty description"));
  auto url = host_.upload(image_ref);
  if (!url) return unexpected(url.error());
  auto doc = exchange_json("grounding", endpoint_, "/ground",
                           {{"image_url", *url}, {"text", std::string(description)}, {"top_n", top_n_}});
  if (!doc) return unexpected(doc.error());
  std::vector<toolkit::GroundingBox> raw;
  try {
    for (const auto& b : doc->value("boxes", json::array())) {
      const auto& c = b.at("bbox");
      raw.push_back({{c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>()},
                     b.at("score").get<double>(),
                     std::string(description)});
    }
  } catch (const json::exception& e) {
    return unexpected(ToolFailure::make("grounding", FailureCause::MalformedContent, e.what()));
  }
  auto [w, h] = store_.dimensions(image_ref);
  return toolkit::normalize_boxes(std::move(raw), w, h, top_n_);
}

ToolResult<std::string> HttpChatClient::complete(const toolkit::ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    if (m.image_urls.empty()) {
      messages.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    json parts = json::array();
    for (const auto& url : m.image_urls) parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    parts.push_back({{"type", "text"}, {"text", m.text}});
    messages.push_back({{"role", m.role}, {"content", parts}});
  }
  json body = {{"model", model_}, {"messages", messages}, {"temperature", request.temperature}};
  if (request.seed) body["seed"] = *request.seed;
  auto doc = exchange_json("chat:" + model_, endpoint_, "/v1/chat/completions", body);
  if (!doc) return unexpected(doc.error());
  try {
    return doc->at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    return unexpected(ToolFailure::make("chat:" + model_, FailureCause::MalformedContent, e.what()));
  }
}

bool health_check(const Endpoint& endpoint) {
  auto cli = make_client(endpoint);
  auto res = cli.Get("/health");
  return res && res->status == 200;
}

}  // namespace gog::http
